#pragma once

#include <dxsim/corpus.hpp>
#include <dxsim/error.hpp>
#include <dxsim/preprocess.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace dxsim {

struct TermWeight {
  std::string term;
  double weight = 0.0;

  friend bool operator==(const TermWeight&, const TermWeight&) = default;
};

struct FeatureOverlap {
  std::string doc_a;
  std::string doc_b;
  std::vector<TermWeight> shared_terms;  // descending combined weight, then term
  double jaccard = 0.0;                  // over the full term sets

  friend bool operator==(const FeatureOverlap&, const FeatureOverlap&) = default;
};

struct TermOptions {
  /// Adds "x y" terms for adjacent tokens that both survive stopword removal.
  bool bigrams = false;
};

/// Analysis terms of one text: surviving tokens, plus adjacent bigrams when
/// enabled. Bigram adjacency is judged before stopword removal.
inline std::vector<std::string> extract_terms(const std::string& normalized_text, const StopwordList& stopwords,
                                              const TermOptions& options = {}) {
  auto all = tokenize(normalized_text);
  std::vector<std::string> terms;
  for (const auto& t : all) {
    if (!stopwords.contains(t)) terms.push_back(t);
  }
  if (options.bigrams) {
    for (std::size_t i = 0; i + 1 < all.size(); ++i) {
      if (!stopwords.contains(all[i]) && !stopwords.contains(all[i + 1])) {
        terms.push_back(all[i] + " " + all[i + 1]);
      }
    }
  }
  return terms;
}

/// Per-document term lists plus the shared document-frequency table.
class TermStore {
 public:
  TermStore() = default;

  void add(const std::string& doc_id, std::vector<std::string> terms) {
    std::set<std::string> distinct(terms.begin(), terms.end());
    auto [it, inserted] = terms_.emplace(doc_id, std::move(terms));
    if (!inserted) throw Error(ErrorCode::kDuplicateId, "terms already stored for '" + doc_id + "'", doc_id);
    for (const auto& t : distinct) ++df_[t];
  }

  bool contains(const std::string& doc_id) const { return terms_.count(doc_id) > 0; }

  /// Throws kUnknownId.
  const std::vector<std::string>& terms(const std::string& doc_id) const {
    auto it = terms_.find(doc_id);
    if (it == terms_.end()) throw Error(ErrorCode::kUnknownId, "unknown id '" + doc_id + "'", doc_id);
    return it->second;
  }

  std::size_t document_count() const noexcept { return terms_.size(); }

  std::size_t document_frequency(const std::string& term) const {
    auto it = df_.find(term);
    return it == df_.end() ? 0 : it->second;
  }

  /// Smoothed: ln((1 + D) / (1 + df)) + 1, always positive.
  double idf(const std::string& term) const {
    double d = static_cast<double>(terms_.size());
    double df = static_cast<double>(document_frequency(term));
    return std::log((1.0 + d) / (1.0 + df)) + 1.0;
  }

 private:
  std::unordered_map<std::string, std::vector<std::string>> terms_;
  std::unordered_map<std::string, std::size_t> df_;
};

inline TermStore build_term_store(const Corpus& corpus, const NormalizationConfig& normalization,
                                  const StopwordList& stopwords, const TermOptions& options = {}) {
  TermStore store;
  for (const auto& doc : corpus.documents()) {
    store.add(doc.id, extract_terms(normalize_text(doc.text, normalization), stopwords, options));
  }
  return store;
}

/// TF-IDF weight of every distinct term in `terms`, scored against the
/// store's document frequencies. TF = count / total terms.
inline std::map<std::string, double> tfidf(const std::vector<std::string>& terms, const TermStore& store) {
  std::map<std::string, std::size_t> counts;
  for (const auto& t : terms) ++counts[t];
  std::map<std::string, double> out;
  const double total = static_cast<double>(terms.size());
  for (const auto& [term, c] : counts) out.emplace(term, (static_cast<double>(c) / total) * store.idf(term));
  return out;
}

namespace detail {

inline void sort_terms(std::vector<TermWeight>& terms) {
  std::sort(terms.begin(), terms.end(), [](const TermWeight& a, const TermWeight& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.term < b.term;
  });
}

}  // namespace detail

/// Top-n terms of one document by TF-IDF, ties by ascending term.
/// Throws kUnknownId, kCorpusTooSmall.
inline std::vector<TermWeight> salient_terms(const std::string& doc_id, const Corpus& corpus,
                                             const TermStore& store, std::size_t n) {
  if (!corpus.contains(doc_id)) throw Error(ErrorCode::kUnknownId, "unknown id '" + doc_id + "'", doc_id);
  if (corpus.size() < 2 || store.document_count() < 2) {
    throw Error(ErrorCode::kCorpusTooSmall, "salient terms need at least two documents");
  }
  std::vector<TermWeight> out;
  for (const auto& [term, w] : tfidf(store.terms(doc_id), store)) out.push_back({term, w});
  detail::sort_terms(out);
  if (out.size() > n) out.resize(n);
  return out;
}

/// Shared terms of two term lists ranked by summed TF-IDF; jaccard over the
/// full distinct-term sets.
inline FeatureOverlap overlap_terms(const std::string& id_a, const std::vector<std::string>& terms_a,
                                    const std::string& id_b, const std::vector<std::string>& terms_b,
                                    const TermStore& store, std::size_t n) {
  auto wa = tfidf(terms_a, store);
  auto wb = tfidf(terms_b, store);
  FeatureOverlap out{id_a, id_b, {}, 0.0};
  std::size_t intersection = 0;
  for (const auto& [term, weight] : wa) {
    auto it = wb.find(term);
    if (it == wb.end()) continue;
    ++intersection;
    out.shared_terms.push_back({term, weight + it->second});
  }
  std::size_t union_size = wa.size() + wb.size() - intersection;
  out.jaccard = union_size == 0 ? 0.0 : static_cast<double>(intersection) / static_cast<double>(union_size);
  detail::sort_terms(out.shared_terms);
  if (out.shared_terms.size() > n) out.shared_terms.resize(n);
  return out;
}

/// Throws kUnknownId. An empty intersection is a valid result.
inline FeatureOverlap common_features(const std::string& doc_a, const std::string& doc_b, const Corpus& corpus,
                                      const TermStore& store, std::size_t n) {
  for (const auto* id : {&doc_a, &doc_b}) {
    if (!corpus.contains(*id)) throw Error(ErrorCode::kUnknownId, "unknown id '" + *id + "'", *id);
  }
  return overlap_terms(doc_a, store.terms(doc_a), doc_b, store.terms(doc_b), store, n);
}

/// Terms present in every listed term list, ranked by summed TF-IDF.
inline std::vector<TermWeight> common_to_all(const std::vector<const std::vector<std::string>*>& term_lists,
                                             const TermStore& store, std::size_t n) {
  if (term_lists.empty()) return {};
  std::map<std::string, double> acc = tfidf(*term_lists.front(), store);
  for (std::size_t i = 1; i < term_lists.size(); ++i) {
    auto w = tfidf(*term_lists[i], store);
    for (auto it = acc.begin(); it != acc.end();) {
      auto found = w.find(it->first);
      if (found == w.end()) {
        it = acc.erase(it);
      } else {
        it->second += found->second;
        ++it;
      }
    }
  }
  std::vector<TermWeight> out;
  for (const auto& [term, weight] : acc) out.push_back({term, weight});
  detail::sort_terms(out);
  if (out.size() > n) out.resize(n);
  return out;
}

}  // namespace dxsim
