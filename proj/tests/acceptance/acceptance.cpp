// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <dxsim/engine.hpp>
#include <dxsim/report.hpp>
#include <dxsim/service.hpp>
#include <dxsim/similarity.hpp>

#include <fmt/core.h>
#include <httplib.h>

#include <chrono>
#include <functional>
#include <random>
#include <regex>
#include <sstream>

#include "../support/fixtures.hpp"
#include "../support/oracle.hpp"
#include "../support/process.hpp"
#include "../support/stub_embedding_server.hpp"

using dxsim::EmbeddingSet;
using dxsim::EmbeddingVector;
using dxsim::ErrorCode;
using dxsim::SimilarityFilters;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Failure {
  std::string what;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failure{what};
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<double> scaled(std::vector<double> v, double a) {
  for (auto& x : v) x *= a;
  return v;
}

// ---------------------------------------------------------------------------

std::string cosine_correctness() {
  auto start = Clock::now();
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<std::size_t> pick_dim(2, 512);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    auto dim = pick_dim(rng);
    auto a = dxsim::testing::random_vector(rng, dim);
    auto b = dxsim::testing::random_vector(rng, dim);
    double got = dxsim::cosine_similarity(EmbeddingVector::raw(a), EmbeddingVector::raw(b));
    double err = std::abs(got - dxsim::testing::naive_cosine(a, b));
    worst = std::max(worst, err);
    require(err <= 1e-9, fmt::format("pair {} dim {} off by {:.3e}", i, dim, err));

    double self = dxsim::cosine_similarity(EmbeddingVector::raw(a), EmbeddingVector::raw(a));
    require(std::abs(self - 1.0) <= 1e-12, fmt::format("identical pair {} scored {:.17g}", i, self));

    // Gram-Schmidt b against a for an orthogonal partner.
    double ab = 0, aa = 0;
    for (std::size_t j = 0; j < dim; ++j) ab += a[j] * b[j], aa += a[j] * a[j];
    std::vector<double> o(dim);
    for (std::size_t j = 0; j < dim; ++j) o[j] = b[j] - ab / aa * a[j];
    double orth = dxsim::cosine_similarity(EmbeddingVector::raw(a), EmbeddingVector::raw(o));
    require(std::abs(orth) <= 1e-12, fmt::format("orthogonal pair {} scored {:.3e}", i, orth));
  }
  double t = seconds_since(start);
  require(t < 5.0, fmt::format("took {:.2f} s", t));
  return fmt::format("1000 pairs, max err {:.2e}, {:.3f} s", worst, t);
}

std::string formula_parity() {
  std::mt19937_64 rng(1002);
  std::uniform_int_distribution<std::size_t> pick_dim(2, 512);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    auto dim = pick_dim(rng);
    auto a = dxsim::testing::random_vector(rng, dim);
    auto b = dxsim::testing::random_vector(rng, dim);
    double fast = dxsim::cosine_similarity(dxsim::l2_normalize(a), dxsim::l2_normalize(b));
    double full = dxsim::cosine_full(a, b);
    worst = std::max(worst, std::abs(fast - full));
    require(std::abs(fast - full) <= 1e-6, fmt::format("pair {}: {:.17g} vs {:.17g}", i, fast, full));
  }
  return fmt::format("10000 pairs, max diff {:.2e}", worst);
}

SimilarityFilters random_filters(std::mt19937_64& rng, const dxsim::Corpus& corpus) {
  std::bernoulli_distribution coin(0.5), rare(0.2);
  SimilarityFilters f;
  f.exclude_company_of_target = coin(rng);
  f.exclude_same_sub_industry = coin(rng);
  f.exclude_same_industry = rare(rng);
  if (rare(rng)) f.min_score = std::uniform_real_distribution<double>(-0.5, 0.3)(rng);
  if (rare(rng)) {
    std::set<int> years;
    for (int y = 2015; y <= 2024; ++y) {
      if (coin(rng)) years.insert(y);
    }
    if (!years.empty()) f.allowed_years = years;
  }
  std::uniform_int_distribution<std::size_t> pick(0, corpus.size() - 1);
  if (rare(rng)) f.excluded_companies.insert(corpus[pick(rng)].company);
  if (rare(rng)) f.excluded_sub_industries.insert(corpus[pick(rng)].sub_industry);
  if (rare(rng)) f.excluded_industries.insert(corpus[pick(rng)].industry);
  return f;
}

std::string top_k_oracle() {
  auto start = Clock::now();
  std::mt19937_64 rng(1003);
  std::size_t queries = 0, empty_pools = 0;
  for (int c = 0; c < 100; ++c) {
    auto n = std::uniform_int_distribution<std::size_t>(2, 200)(rng);
    auto dim = std::uniform_int_distribution<std::size_t>(2, 64)(rng);
    auto corpus = dxsim::testing::random_corpus(rng, n);
    auto set = dxsim::testing::random_raw_set(rng, corpus, dim);
    dxsim::FlatIndex index(set, corpus);
    for (int q = 0; q < 5; ++q) {
      const auto& target = corpus[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)];
      auto k = std::uniform_int_distribution<std::size_t>(1, 12)(rng);
      auto f = random_filters(rng, corpus);
      auto expected =
          dxsim::testing::oracle_top_k(set.at(target.id).values(), &target, set, corpus, f, k);
      ++queries;
      std::vector<dxsim::RankedMatch> got;
      try {
        got = dxsim::top_k_similar(target.id, index, f, k);
      } catch (const dxsim::Error& e) {
        require(e.code() == ErrorCode::kEmptyCandidatePool && expected.empty(),
                fmt::format("corpus {} target {}: unexpected error {}", c, target.id, e.what()));
        ++empty_pools;
        continue;
      }
      require(got.size() == expected.size(), fmt::format("corpus {} target {}: size {} vs {}", c, target.id,
                                                         got.size(), expected.size()));
      for (std::size_t i = 0; i < got.size(); ++i) {
        require(got[i].doc_id == expected[i].id && got[i].rank == i + 1 &&
                    std::abs(got[i].score - expected[i].score) <= 1e-9,
                fmt::format("corpus {} target {} rank {}: {} {:.12f} vs {} {:.12f}", c, target.id, i + 1,
                            got[i].doc_id, got[i].score, expected[i].id, expected[i].score));
      }
    }
  }
  double t = seconds_since(start);
  require(t < 30.0, fmt::format("took {:.2f} s", t));
  return fmt::format("100 corpora, {} queries ({} empty pools), {:.3f} s", queries, empty_pools, t);
}

std::string scale_invariance() {
  std::mt19937_64 rng(1004);
  std::size_t sequences = 0;
  for (int c = 0; c < 10; ++c) {
    auto corpus = dxsim::testing::random_corpus(rng, 60);
    auto raw = dxsim::testing::random_raw_set(rng, corpus, 32);
    dxsim::FlatIndex base_index(raw, corpus);
    for (double alpha : {0.5, 2.0, 10.0}) {
      EmbeddingSet s = raw;
      for (auto& [id, v] : s.by_id) v = EmbeddingVector::raw(scaled(v.values(), alpha));
      dxsim::FlatIndex index(s, corpus);
      for (const auto& d : corpus.documents()) {
        SimilarityFilters f;
        std::vector<dxsim::RankedMatch> a, b;
        try {
          a = dxsim::top_k_similar(d.id, base_index, f, 10);
        } catch (const dxsim::Error&) {
        }
        try {
          b = dxsim::top_k_similar(d.id, index, f, 10);
        } catch (const dxsim::Error&) {
        }
        require(a.size() == b.size(), fmt::format("alpha {} target {}: sizes differ", alpha, d.id));
        for (std::size_t i = 0; i < a.size(); ++i) {
          require(a[i].doc_id == b[i].doc_id && a[i].rank == b[i].rank &&
                      std::abs(a[i].score - b[i].score) <= 1e-9,
                  fmt::format("alpha {} target {} rank {} differs", alpha, d.id, i + 1));
        }
        ++sequences;
      }
    }
  }
  return fmt::format("{} ranked sequences unchanged for alpha in {{0.5, 2, 10}}", sequences);
}

std::string filter_soundness() {
  using dxsim::testing::record;
  auto corpus = dxsim::testing::corpus_from(record("t", "T Corp", "Manufacturing", "pharmaceutical", 2023, "x") +
                                            record("p", "P Corp", "Manufacturing", "pharmaceutical", 2023, "x") +
                                            record("q", "T Corp", "Manufacturing", "medical devices", 2023, "x") +
                                            record("x", "X Corp", "Manufacturing", "beverage", 2023, "x") +
                                            record("y", "Y Corp", "Manufacturing", "chemical", 2022, "x") +
                                            record("z", "Z Corp", "Wholesale", "trading", 2022, "x"));
  EmbeddingSet set;
  set.dim = 3;
  set.by_id.emplace("t", EmbeddingVector::raw({1, 0, 0}));
  set.by_id.emplace("p", EmbeddingVector::raw({0.99, 0.1, 0}));
  set.by_id.emplace("q", EmbeddingVector::raw({1, 0.05, 0}));
  set.by_id.emplace("x", EmbeddingVector::raw({0.9, 0.3, 0}));
  set.by_id.emplace("y", EmbeddingVector::raw({0.8, 0.5, 0.1}));
  set.by_id.emplace("z", EmbeddingVector::raw({0, 1, 0}));

  // Without filters the raw best match is the same-sub-industry "p".
  SimilarityFilters open;
  open.exclude_company_of_target = false;
  open.exclude_same_sub_industry = false;
  auto unfiltered = dxsim::top_k_similar("t", set, corpus, open, 1);
  require(unfiltered[0].doc_id == "q" || unfiltered[0].doc_id == "p", "fixture is not adversarial");

  auto got = dxsim::top_k_similar("t", set, corpus, SimilarityFilters{}, 2);
  require(got.size() == 2, "expected two matches");
  for (const auto& m : got) {
    require(get_case(corpus, m.doc_id).sub_industry != "pharmaceutical", "same-sub-industry doc returned");
  }
  require(got[0].doc_id == "x" && got[1].doc_id == "y",
          fmt::format("got {}, {} expected x, y", got[0].doc_id, got[1].doc_id));
  // Hand values: x = 0.9 / sqrt(0.9), y = 0.8 / sqrt(0.9).
  require(std::abs(got[0].score - 0.9 / std::sqrt(0.9)) <= 1e-12, "x score");
  require(std::abs(got[1].score - 0.8 / std::sqrt(0.9)) <= 1e-12, "y score");
  return fmt::format("top-2 = x ({}), y ({})", dxsim::format_score(got[0].score), dxsim::format_score(got[1].score));
}

std::string strip_generated_at(const std::string& s) {
  static const std::regex re(R"re("generated_at": "[^"]*")re");
  return std::regex_replace(s, re, "\"generated_at\": \"\"");
}

std::string determinism() {
  const auto fixture = dxsim::testing::data_path("fixture5.jsonl");
  std::vector<std::string> args = {"similar", "--corpus", fixture, "--target", "a1", "--backend", "hashed",
                                   "--seed", "42", "--format", "json"};
  auto a = dxsim::testing::run_cli(args);
  auto b = dxsim::testing::run_cli(args);
  require(a.exit_code == 0 && b.exit_code == 0, "cli failed: " + a.err + b.err);
  require(strip_generated_at(a.out) == strip_generated_at(b.out), "runs differ beyond generated_at");
  auto j = json::parse(a.out);
  require(j["matches"].size() == 2, "default k did not select two matches");
  auto with_k = dxsim::testing::run_cli({"similar", "--corpus", fixture, "--target", "a1", "--k", "2", "--format",
                                         "json"});
  require(strip_generated_at(with_k.out) == strip_generated_at(a.out), "default differs from --k 2");
  return fmt::format("byte-identical modulo generated_at; default k selects {} and {}",
                     j["matches"][0]["company"].get<std::string>(), j["matches"][1]["company"].get<std::string>());
}

std::string report_format() {
  require(dxsim::format_score(0.954170) == "0.954170", "0.954170");
  require(dxsim::format_score(0.951046) == "0.951046", "0.951046");
  auto engine = dxsim::Engine::build(dxsim::testing::load_fixture("fixture5.jsonl"),
                                     std::make_shared<dxsim::HashedBackend>(256, 42));
  auto report = engine.similar("a1", dxsim::kDefaultK, {}, "2026-01-01T00:00:00Z");
  auto text = dxsim::render_report(report, dxsim::ReportFormat::kText);
  require(text == dxsim::testing::slurp(dxsim::testing::data_path("golden/similar_a1.txt")), "golden mismatch");
  static const std::regex score(R"(\s(-?\d+\.\d+)\s)");
  std::size_t seen = 0;
  for (std::sregex_iterator it(text.begin(), text.end(), score), end; it != end; ++it) {
    auto s = (*it)[1].str();
    require(s.size() - s.find('.') - 1 == 6, "score without six decimals: " + s);
    ++seen;
  }
  require(seen == report.matches.size(), fmt::format("found {} scores", seen));
  return "golden text report matches; scores rendered with 6 decimals";
}

std::string tfidf_check() {
  using dxsim::testing::record;
  auto corpus = dxsim::testing::corpus_from(record("d1", "A", "I", "S", 2020, "ai ai cloud") +
                                            record("d2", "B", "I", "T", 2020, "cloud"));
  dxsim::StopwordList none;
  auto store = dxsim::build_term_store(corpus, {}, none);
  auto terms = dxsim::salient_terms("d1", corpus, store, 5);
  require(!terms.empty() && terms[0].term == "ai", "ai is not the top term");
  const double independent = 0.9369767387387762;  // 2/3 * (ln 1.5 + 1), Python
  require(std::abs(terms[0].weight - independent) <= 1e-6, fmt::format("ai weight {:.9f}", terms[0].weight));

  auto jac = [&](const std::string& a, const std::string& b) {
    auto c = dxsim::testing::corpus_from(record("a", "A", "I", "S", 2020, a) + record("b", "B", "I", "T", 2020, b));
    auto s = dxsim::build_term_store(c, {}, none);
    return dxsim::common_features("a", "b", c, s, 10);
  };
  auto third = jac("ai platform", "ai robot");
  require(third.jaccard == 1.0 / 3.0 && third.shared_terms.size() == 1 && third.shared_terms[0].term == "ai",
          "ai platform / ai robot");
  require(jac("ai cloud", "cloud ai").jaccard == 1.0, "identical docs");
  auto disjoint = jac("ai cloud", "iron steel");
  require(disjoint.jaccard == 0.0 && disjoint.shared_terms.empty(), "disjoint docs");
  return fmt::format("ai weight {:.6f}; jaccard 1/3, 1.0, 0.0 exact", terms[0].weight);
}

std::string wire_protocol() {
  using Mode = dxsim::testing::StubEmbeddingServer::Mode;
  auto corpus = dxsim::testing::load_fixture("fixture5.jsonl");
  dxsim::testing::StubEmbeddingServer stub(4);
  struct Scenario {
    const char* name;
    Mode mode;
    ErrorCode expected;
  };
  std::vector<Scenario> scenarios = {{"arity mismatch", Mode::kArityMismatch, ErrorCode::kProtocolError},
                                     {"dimension mismatch", Mode::kDimMismatch, ErrorCode::kDimensionMismatch},
                                     {"HTTP 500", Mode::kServerError, ErrorCode::kBackendUnavailable},
                                     {"timeout", Mode::kSlow, ErrorCode::kBackendUnavailable}};
  stub.set_delay(std::chrono::milliseconds(1500));
  std::string summary;
  for (const auto& sc : scenarios) {
    stub.set_mode(sc.mode);
    dxsim::EmbeddingBackendConfig cfg;
    cfg.kind = dxsim::BackendKind::kRemote;
    cfg.dim = 4;
    cfg.endpoint = stub.endpoint();
    cfg.model_name = "stub";
    cfg.batch_size = 5;
    cfg.timeout = std::chrono::milliseconds(300);
    dxsim::RemoteBackend backend(cfg);
    auto cache_path = dxsim::testing::temp_path("wire_cache");
    auto cache = dxsim::EmbeddingCache::open(cache_path);
    std::optional<EmbeddingSet> set;
    try {
      set = dxsim::embed_corpus(backend, corpus, {}, &cache);
    } catch (const dxsim::Error& e) {
      require(e.code() == sc.expected, fmt::format("{}: got {}", sc.name, dxsim::error_code_name(e.code())));
    }
    require(!set, fmt::format("{}: produced an embedding set", sc.name));
    require(cache.size() == 0, fmt::format("{}: cache holds {} partial entries", sc.name, cache.size()));
    summary += fmt::format("{}{} -> {}", summary.empty() ? "" : "; ", sc.name, dxsim::error_code_name(sc.expected));
  }
  return summary;
}

std::string throughput() {
  std::mt19937_64 rng(1010);
  auto corpus = dxsim::testing::random_corpus(rng, 10000);
  auto set = dxsim::testing::random_raw_set(rng, corpus, 256);
  dxsim::FlatIndex index(set, corpus);
  SimilarityFilters f;
  dxsim::top_k_similar(corpus[0].id, index, f, 10);  // warm-up
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    const auto& target = corpus[static_cast<std::size_t>(i) * 997 % corpus.size()];
    auto start = Clock::now();
    auto got = dxsim::top_k_similar(target.id, index, f, 10);
    worst = std::max(worst, seconds_since(start));
    require(!got.empty(), "no matches");
  }
  require(worst < 0.1, fmt::format("slowest query {:.1f} ms", worst * 1e3));
  return fmt::format("10000 x 256, slowest of 10 queries {:.2f} ms", worst * 1e3);
}

std::string cli_service_consistency() {
  const auto fixture = dxsim::testing::data_path("fixture5.jsonl");
  auto engine = std::make_shared<const dxsim::Engine>(dxsim::Engine::build(
      dxsim::testing::load_fixture("fixture5.jsonl"), std::make_shared<dxsim::HashedBackend>(256, 42)));
  dxsim::service::Server server(engine, {"127.0.0.1", 0, "*", ""});
  httplib::Client client("127.0.0.1", server.start());
  std::size_t checked = 0;
  for (const char* target : {"a1", "b2", "c3", "d4", "e5"}) {
    for (int k : {1, 2, 3}) {
      auto cli = dxsim::testing::run_cli({"similar", "--corpus", fixture, "--target", target, "--k",
                                          std::to_string(k), "--format", "json"});
      auto res = client.Post("/api/similar", json{{"target", target}, {"k", k}}.dump(), "application/json");
      require(res && res->status == 200, fmt::format("{} k={}: http failed", target, k));
      require(cli.exit_code == 0, fmt::format("{} k={}: cli failed {}", target, k, cli.err));
      require(strip_generated_at(cli.out) == strip_generated_at(res->body),
              fmt::format("{} k={}: bodies differ", target, k));
      ++checked;
    }
  }
  server.stop();
  return fmt::format("{} target/k combinations identical modulo generated_at", checked);
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<std::string()> run;
  };
  std::vector<Criterion> criteria = {
      {"cosine correctness", cosine_correctness},
      {"formula parity", formula_parity},
      {"top-k oracle equivalence", top_k_oracle},
      {"ranking scale invariance", scale_invariance},
      {"filter soundness", filter_soundness},
      {"determinism", determinism},
      {"report format parity", report_format},
      {"tf-idf hand check", tfidf_check},
      {"wire-protocol robustness", wire_protocol},
      {"throughput sanity", throughput},
      {"cli/service consistency", cli_service_consistency},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    try {
      auto detail = c.run();
      fmt::print("PASS  {:<26} {}\n", c.name, detail);
    } catch (const Failure& f) {
      ++failures;
      fmt::print("FAIL  {:<26} {}\n", c.name, f.what);
    } catch (const std::exception& e) {
      ++failures;
      fmt::print("FAIL  {:<26} exception: {}\n", c.name, e.what());
    }
    std::fflush(stdout);
  }
  fmt::print("{}/{} criteria passed\n", criteria.size() - static_cast<std::size_t>(failures), criteria.size());
  return failures == 0 ? 0 : 1;
}
