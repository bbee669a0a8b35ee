#pragma once

#include <dxsim/analysis.hpp>
#include <dxsim/corpus.hpp>
#include <dxsim/embedding.hpp>
#include <dxsim/engine.hpp>
#include <dxsim/error.hpp>
#include <dxsim/report.hpp>
#include <dxsim/service.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace dxsim::cli {

/// Stable exit-code contract.
enum ExitCode : int {
  kOk = 0,
  kDomainError = 1,
  kUsageOrIo = 2,
  kEmptyResult = 3,
};

struct Options {
  // corpus / preprocessing
  std::string corpus;
  std::string stopwords;
  bool no_nfkc = false;
  bool no_lowercase = false;
  bool keep_punctuation = false;
  bool no_collapse_whitespace = false;
  bool embed_preprocessed = false;
  bool bigrams = false;
  std::size_t features = 5;

  // embedding backend
  std::string backend = "hashed";
  std::size_t dim = 256;
  std::uint64_t seed = 42;
  std::string endpoint;
  std::string model;
  std::string cache;
  long timeout_ms = 30000;
  std::size_t batch_size = 16;
  std::size_t parallelism = 1;

  // similar
  std::string target;
  std::size_t k = kDefaultK;
  std::optional<double> min_score;
  std::vector<int> years;
  bool include_same_company = false;
  bool include_same_sub_industry = false;
  bool exclude_same_industry = false;
  std::vector<std::string> exclude_companies;
  std::vector<std::string> exclude_sub_industries;
  std::vector<std::string> exclude_industries;
  std::string format = "text";
  std::string matrix_format = "csv";
  std::string generated_at;

  // common-features
  std::string doc_a;
  std::string doc_b;
  std::size_t n = 5;

  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
  std::string cors_origin = "*";
};

namespace detail {

inline std::atomic<bool>& interrupted() {
  static std::atomic<bool> flag{false};
  return flag;
}

inline void on_interrupt(int) { interrupted().store(true); }

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kIo: return kUsageOrIo;
    case ErrorCode::kEmptyCandidatePool: return kEmptyResult;
    default: return kDomainError;
  }
}

inline Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open corpus '" + path + "'", path);
  return ingest_corpus(in);
}

inline NormalizationConfig normalization(const Options& o) {
  return {!o.no_nfkc, !o.no_lowercase, !o.no_collapse_whitespace, !o.keep_punctuation};
}

inline EngineConfig engine_config(const Options& o) {
  EngineConfig c;
  c.normalization = normalization(o);
  c.stopwords = o.stopwords.empty() ? StopwordList::builtin(c.normalization)
                                    : StopwordList::load(o.stopwords, c.normalization);
  c.embed_uses_preprocessed = o.embed_preprocessed;
  c.terms.bigrams = o.bigrams;
  c.feature_terms = o.features;
  c.parallelism = o.parallelism;
  return c;
}

inline EmbeddingBackendConfig backend_config(const Options& o) {
  EmbeddingBackendConfig c;
  c.kind = o.backend == "remote" ? BackendKind::kRemote : BackendKind::kHashed;
  c.dim = o.dim;
  c.seed = o.seed;
  c.endpoint = o.endpoint;
  c.model_name = o.model;
  c.timeout = std::chrono::milliseconds(o.timeout_ms);
  c.batch_size = o.batch_size;
  return c;
}

inline SimilarityFilters filters(const Options& o) {
  SimilarityFilters f;
  f.exclude_company_of_target = !o.include_same_company;
  f.exclude_same_sub_industry = !o.include_same_sub_industry;
  f.exclude_same_industry = o.exclude_same_industry;
  f.min_score = o.min_score;
  if (!o.years.empty()) f.allowed_years = std::set<int>(o.years.begin(), o.years.end());
  f.excluded_companies = {o.exclude_companies.begin(), o.exclude_companies.end()};
  f.excluded_sub_industries = {o.exclude_sub_industries.begin(), o.exclude_sub_industries.end()};
  f.excluded_industries = {o.exclude_industries.begin(), o.exclude_industries.end()};
  f.validate();
  return f;
}

/// Builds the engine, reading and updating the cache when one is configured.
inline Engine build_engine(const Options& o, std::ostream& err) {
  auto corpus = load_corpus(o.corpus);
  std::shared_ptr<EmbeddingBackend> backend = make_backend(backend_config(o));
  std::optional<EmbeddingCache> cache;
  if (!o.cache.empty()) cache = EmbeddingCache::open(o.cache);
  auto before = cache ? cache->size() : 0;
  auto engine = Engine::build(std::move(corpus), backend, engine_config(o), cache ? &*cache : nullptr);
  if (cache && cache->size() != before) cache->save();
  err << "embedded " << engine.corpus().size() << " documents (" << backend->calls() << " backend calls)\n";
  return engine;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  return out + "\"";
}

inline int cmd_validate(const Options& o, std::ostream& out, std::ostream& err) {
  std::ifstream in(o.corpus);
  if (!in) {
    err << "error: io_error: cannot open corpus '" << o.corpus << "'\n";
    return kUsageOrIo;
  }
  auto problems = validate_corpus(in);
  if (!problems.empty()) {
    for (const auto& p : problems) {
      err << "line " << p.line << ": " << error_code_name(p.code) << ": " << p.reason << "\n";
    }
    err << problems.size() << " problem(s) found\n";
    return kDomainError;
  }
  in.clear();
  in.seekg(0);
  auto corpus = ingest_corpus(in);
  out << corpus.size() << " documents OK\n";
  return kOk;
}

inline int cmd_embed(const Options& o, std::ostream& out, std::ostream& err) {
  auto corpus = load_corpus(o.corpus);
  auto backend = make_backend(backend_config(o));
  auto cache = EmbeddingCache::open(o.cache);
  auto config = engine_config(o);
  EmbedOptions opts{config.normalization, config.stopwords, config.embed_uses_preprocessed, config.parallelism};
  auto set = embed_corpus(*backend, corpus, opts, &cache);
  cache.save();
  out << "embedded " << set.size() << " documents with " << set.backend_fingerprint << " ("
      << backend->calls() << " backend calls, cache " << o.cache << ")\n";
  (void)err;
  return kOk;
}

inline int cmd_similar(const Options& o, std::ostream& out, std::ostream& err) {
  auto f = filters(o);
  auto engine = build_engine(o, err);
  auto report = engine.similar(o.target, o.k, f, o.generated_at);
  auto format = o.format == "json" ? ReportFormat::kJson
                : o.format == "markdown" ? ReportFormat::kMarkdown
                                         : ReportFormat::kText;
  out << render_report(report, format);
  return kOk;
}

inline int cmd_matrix(const Options& o, std::ostream& out, std::ostream& err) {
  auto engine = build_engine(o, err);
  auto m = engine.matrix();
  if (o.matrix_format == "json") {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < m.size(); ++i) {
      std::vector<double> row(m.values.begin() + static_cast<std::ptrdiff_t>(i * m.size()),
                              m.values.begin() + static_cast<std::ptrdiff_t>((i + 1) * m.size()));
      rows.push_back(row);
    }
    out << nlohmann::json{{"ids", m.ids}, {"matrix", rows}, {"backend_fingerprint", engine.embeddings().backend_fingerprint}}
               .dump(2)
        << "\n";
    return kOk;
  }
  out << "id";
  for (const auto& id : m.ids) out << "," << csv_field(id);
  out << "\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    out << csv_field(m.ids[i]);
    for (std::size_t j = 0; j < m.size(); ++j) out << "," << format_score(m.at(i, j));
    out << "\n";
  }
  return kOk;
}

inline int cmd_common_features(const Options& o, std::ostream& out, std::ostream&) {
  auto corpus = load_corpus(o.corpus);
  auto config = engine_config(o);
  auto store = build_term_store(corpus, config.normalization, config.stopwords, config.terms);
  auto overlap = common_features(o.doc_a, o.doc_b, corpus, store, o.n);
  out << overlap_to_json(overlap).dump(2) << "\n";
  return kOk;
}

inline int cmd_serve(const Options& o, std::ostream& out, std::ostream& err) {
  auto engine = std::make_shared<const Engine>(build_engine(o, err));
  service::Server server(engine, {o.host, o.port, o.cors_origin, o.static_dir});
  int port = 0;
  try {
    port = server.bind();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kDomainError;
  }
  interrupted().store(false);
  auto previous_int = std::signal(SIGINT, on_interrupt);
  auto previous_term = std::signal(SIGTERM, on_interrupt);
  std::thread worker([&] { server.listen(); });
  out << "listening on http://" << o.host << ":" << port << "\n" << std::flush;
  while (!interrupted().load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  server.stop();
  worker.join();
  std::signal(SIGINT, previous_int);
  std::signal(SIGTERM, previous_term);
  err << "shut down\n";
  return kOk;
}

inline void check_conflicts(const CLI::App& sub, Options& o) {
  auto given = [&](const char* name) { return sub.get_option(name)->count() > 0; };
  if (o.backend == "hashed") {
    if (given("--endpoint") || given("--model")) {
      throw UsageError("--endpoint/--model only apply to --backend remote");
    }
  } else {
    if (given("--seed")) throw UsageError("--seed only applies to --backend hashed");
    if (o.endpoint.empty()) {
      if (const char* env = std::getenv("DXSIM_ENDPOINT"); env && *env) o.endpoint = env;
    }
    if (o.endpoint.empty()) throw UsageError("--backend remote needs --endpoint or DXSIM_ENDPOINT");
    if (o.model.empty()) throw UsageError("--backend remote needs --model");
  }
  if (o.backend == "hashed" && o.dim < 2) throw UsageError("--dim must be at least 2 for the hashed backend");
  if (o.dim < 1) throw UsageError("--dim must be positive");
}

inline void add_corpus_options(CLI::App& sub, Options& o) {
  sub.add_option("--corpus", o.corpus, "JSON-lines corpus file")->required();
  sub.add_option("--stopwords", o.stopwords, "stopword file (one token per line, '#' comments)");
  sub.add_flag("--no-nfkc", o.no_nfkc, "skip Unicode compatibility normalization");
  sub.add_flag("--no-lowercase", o.no_lowercase, "keep letter case");
  sub.add_flag("--keep-punctuation", o.keep_punctuation, "do not strip punctuation");
  sub.add_flag("--no-collapse-whitespace", o.no_collapse_whitespace, "keep whitespace runs");
  sub.add_flag("--bigrams", o.bigrams, "include adjacent-token bigrams in term analysis");
}

inline void add_backend_options(CLI::App& sub, Options& o) {
  sub.add_option("--backend", o.backend, "embedding backend")->check(CLI::IsMember({"hashed", "remote"}));
  sub.add_option("--dim", o.dim, "embedding dimension");
  sub.add_option("--seed", o.seed, "hashed backend seed");
  sub.add_option("--endpoint", o.endpoint, "remote embedding service base URL (fallback: DXSIM_ENDPOINT)");
  sub.add_option("--model", o.model, "remote model name");
  sub.add_option("--cache", o.cache, "embedding cache file");
  sub.add_option("--timeout-ms", o.timeout_ms, "remote request timeout in milliseconds")->check(CLI::PositiveNumber);
  sub.add_option("--batch-size", o.batch_size, "texts per remote request")->check(CLI::PositiveNumber);
  sub.add_option("--parallelism", o.parallelism, "concurrent backend requests")->check(CLI::PositiveNumber);
  sub.add_flag("--embed-preprocessed", o.embed_preprocessed, "embed stopword-filtered tokens instead of normalized text");
}

}  // namespace detail

/// Entry point shared by the dxsim binary and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Options o;
  CLI::App app{"dxsim: cross-domain DX case similarity"};
  app.name("dxsim");
  app.set_config("--config", "", "TOML/INI file mirroring command-line flags (flags win)");
  app.require_subcommand(1);

  auto* validate = app.add_subcommand("validate", "check a corpus file");
  validate->add_option("--corpus", o.corpus, "JSON-lines corpus file")->required();

  auto* embed = app.add_subcommand("embed", "embed the corpus into the cache");
  detail::add_corpus_options(*embed, o);
  detail::add_backend_options(*embed, o);
  embed->get_option("--cache")->required();

  auto* similar = app.add_subcommand("similar", "rank cross-domain matches for a target case");
  detail::add_corpus_options(*similar, o);
  detail::add_backend_options(*similar, o);
  similar->add_option("--target", o.target, "target case id")->required();
  similar->add_option("--k", o.k, "number of matches")->check(CLI::PositiveNumber);
  similar->add_option("--min-score", o.min_score, "drop candidates below this score")->check(CLI::Range(-1.0, 1.0));
  similar->add_option("--years", o.years, "only consider these report years");
  similar->add_flag("--include-same-company", o.include_same_company, "allow the target's own company");
  similar->add_flag("--include-same-sub-industry", o.include_same_sub_industry, "allow the target's sub-industry");
  similar->add_flag("--exclude-same-industry", o.exclude_same_industry, "also drop the target's industry");
  similar->add_option("--exclude-company", o.exclude_companies, "drop this company (repeatable)");
  similar->add_option("--exclude-sub-industry", o.exclude_sub_industries, "drop this sub-industry (repeatable)");
  similar->add_option("--exclude-industry", o.exclude_industries, "drop this industry (repeatable)");
  similar->add_option("--features", o.features, "shared terms per match")->check(CLI::PositiveNumber);
  similar->add_option("--format", o.format, "output format")->check(CLI::IsMember({"text", "json", "markdown"}));
  similar->add_option("--generated-at", o.generated_at, "fixed report timestamp (RFC 3339)");

  auto* matrix = app.add_subcommand("matrix", "full pairwise similarity matrix");
  detail::add_corpus_options(*matrix, o);
  detail::add_backend_options(*matrix, o);
  matrix->add_option("--format", o.matrix_format, "output format")->check(CLI::IsMember({"csv", "json"}));

  auto* features = app.add_subcommand("common-features", "shared salient terms of two cases");
  detail::add_corpus_options(*features, o);
  features->add_option("--a", o.doc_a, "first case id")->required();
  features->add_option("--b", o.doc_b, "second case id")->required();
  features->add_option("--n", o.n, "maximum shared terms")->check(CLI::PositiveNumber);

  auto* serve = app.add_subcommand("serve", "run the HTTP API");
  detail::add_corpus_options(*serve, o);
  detail::add_backend_options(*serve, o);
  serve->add_option("--host", o.host, "listen address");
  serve->add_option("--port", o.port, "listen port (0 picks a free port)")->check(CLI::Range(0, 65535));
  serve->add_option("--static-dir", o.static_dir, "directory of built UI assets");
  serve->add_option("--cors-origin", o.cors_origin, "Access-Control-Allow-Origin value (empty disables)");
  serve->add_option("--features", o.features, "shared terms per match")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsageOrIo;
  }

  try {
    if (*validate) return detail::cmd_validate(o, out, err);
    if (*features) return detail::cmd_common_features(o, out, err);
    CLI::App* active = app.get_subcommands().front();
    detail::check_conflicts(*active, o);
    if (*embed) return detail::cmd_embed(o, out, err);
    if (*similar) return detail::cmd_similar(o, out, err);
    if (*matrix) return detail::cmd_matrix(o, out, err);
    if (*serve) return detail::cmd_serve(o, out, err);
  } catch (const detail::UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsageOrIo;
  } catch (const Error& e) {
    err << "error: " << error_code_name(e.code()) << ": " << e.what() << "\n";
    return detail::exit_code_for(e);
  }
  return kUsageOrIo;
}

}  // namespace dxsim::cli
