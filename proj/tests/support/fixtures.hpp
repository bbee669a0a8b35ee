#pragma once

#include <dxsim/corpus.hpp>
#include <dxsim/embedding.hpp>

#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace dxsim::testing {

inline std::string data_path(const std::string& name) { return std::string(DXSIM_TEST_DATA_DIR) + "/" + name; }

inline Corpus load_fixture(const std::string& name) {
  std::ifstream in(data_path(name));
  return ingest_corpus(in);
}

inline Corpus corpus_from(const std::string& jsonl) {
  std::istringstream in(jsonl);
  return ingest_corpus(in);
}

inline std::string record(const std::string& id, const std::string& company, const std::string& industry,
                          const std::string& sub_industry, int year, const std::string& text) {
  nlohmann::json j = {{"id", id},     {"company", company}, {"industry", industry}, {"sub_industry", sub_industry},
                      {"year", year}, {"text", text}};
  return j.dump() + "\n";
}

/// Documents with random metadata drawn from small pools, so that filters
/// actually bite.
inline Corpus random_corpus(std::mt19937_64& rng, std::size_t n) {
  static const std::vector<std::string> industries = {"Manufacturing", "Wholesale", "Finance", "Retail"};
  static const std::vector<std::string> subs = {"pharmaceutical", "beverage", "chemical", "trading", "bank", "food"};
  std::vector<CaseDocument> docs;
  std::uniform_int_distribution<std::size_t> pick_ind(0, industries.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_sub(0, subs.size() - 1);
  std::uniform_int_distribution<int> pick_company(0, static_cast<int>(n / 2));
  std::uniform_int_distribution<int> pick_year(2015, 2024);
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "d%04zu", i);
    docs.push_back({id, "Co" + std::to_string(pick_company(rng)), industries[pick_ind(rng)], subs[pick_sub(rng)],
                    pick_year(rng), "text " + std::string(id)});
  }
  return Corpus(std::move(docs));
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(dim);
  do {
    for (auto& x : v) x = g(rng);
  } while (l2_norm(v) == 0.0);
  return v;
}

/// Raw (unnormalized) embeddings for every document.
inline EmbeddingSet random_raw_set(std::mt19937_64& rng, const Corpus& corpus, std::size_t dim) {
  EmbeddingSet set;
  set.dim = dim;
  set.backend_fingerprint = "random";
  for (const auto& d : corpus.documents()) set.by_id.emplace(d.id, EmbeddingVector::raw(random_vector(rng, dim)));
  return set;
}

inline EmbeddingSet normalized_set(const EmbeddingSet& raw) {
  EmbeddingSet out = raw;
  for (auto& [id, v] : out.by_id) v = l2_normalize(v.span());
  return out;
}

}  // namespace dxsim::testing
