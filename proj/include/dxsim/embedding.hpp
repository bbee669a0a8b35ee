#pragma once

#include <dxsim/corpus.hpp>
#include <dxsim/error.hpp>
#include <dxsim/preprocess.hpp>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dxsim {

/// Fixed-dimension, finite, non-zero vector. Vectors produced by this module
/// are always unit length (normalized() == true).
class EmbeddingVector {
 public:
  EmbeddingVector() = default;

  /// Validates finiteness and non-zeroness; does not rescale.
  static EmbeddingVector raw(std::vector<double> values) {
    validate(values);
    EmbeddingVector v;
    v.values_ = std::move(values);
    return v;
  }

  std::size_t dim() const noexcept { return values_.size(); }
  const std::vector<double>& values() const noexcept { return values_; }
  std::span<const double> span() const noexcept { return values_; }
  bool normalized() const noexcept { return normalized_; }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  friend EmbeddingVector l2_normalize(std::span<const double> v);
  friend EmbeddingVector restore_normalized(std::vector<double> values);

  static void validate(const std::vector<double>& values) {
    if (values.empty()) throw Error(ErrorCode::kInvalidArgument, "vector has zero dimension");
    bool any_nonzero = false;
    for (double x : values) {
      if (!std::isfinite(x)) throw Error(ErrorCode::kInvalidArgument, "vector has a non-finite entry");
      any_nonzero = any_nonzero || x != 0.0;
    }
    if (!any_nonzero) throw Error(ErrorCode::kZeroVector, "vector is all zero");
  }

  std::vector<double> values_;
  bool normalized_ = false;
};

inline double l2_norm(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

/// Throws kZeroVector for an all-zero input.
inline EmbeddingVector l2_normalize(std::span<const double> v) {
  std::vector<double> values(v.begin(), v.end());
  EmbeddingVector::validate(values);
  double norm = l2_norm(values);
  for (double& x : values) x /= norm;
  EmbeddingVector out;
  out.values_ = std::move(values);
  out.normalized_ = true;
  return out;
}

/// Rebuilds a unit vector that was persisted earlier, checking its length.
inline EmbeddingVector restore_normalized(std::vector<double> values) {
  EmbeddingVector::validate(values);
  if (std::abs(l2_norm(values) - 1.0) > 1e-6) {
    throw Error(ErrorCode::kProtocolError, "stored vector is not unit length");
  }
  EmbeddingVector out;
  out.values_ = std::move(values);
  out.normalized_ = true;
  return out;
}

// ---------------------------------------------------------------------------
// Hashed projection embedder

namespace detail {

inline std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// SplitMix64 stream.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t state) : state_(state) {}
  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return detail::splitmix64_mix(state_);
  }

 private:
  std::uint64_t state_;
};

/// FNV-1a over the token bytes, mixed with the seed.
inline std::uint64_t hash64(std::string_view token, std::uint64_t seed) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : token) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return detail::splitmix64_mix(h ^ detail::splitmix64_mix(seed));
}

/// Sums one pseudorandom ±1 vector per token occurrence, then L2-normalizes.
/// Sign j of a token is bit (j % 64) of draw j / 64 from SplitMix64 seeded
/// with hash64(token, seed); a set bit is +1.
inline EmbeddingVector hashed_projection_embed(const TokenSequence& tokens, std::size_t dim,
                                               std::uint64_t seed) {
  if (tokens.empty()) throw Error(ErrorCode::kEmptyText, "no tokens to embed");
  if (dim < 2) throw Error(ErrorCode::kInvalidArgument, "hashed embedding needs dim >= 2");
  std::map<std::string_view, std::int64_t> counts;
  for (const auto& t : tokens) ++counts[t];

  std::vector<std::int64_t> acc(dim, 0);
  for (const auto& [token, count] : counts) {
    SplitMix64 rng(hash64(token, seed));
    std::uint64_t bits = 0;
    for (std::size_t j = 0; j < dim; ++j) {
      if (j % 64 == 0) bits = rng.next();
      acc[j] += ((bits >> (j % 64)) & 1U) ? count : -count;
    }
  }
  std::vector<double> values(acc.begin(), acc.end());
  bool all_zero = true;
  for (double x : values) all_zero = all_zero && x == 0.0;
  if (all_zero) throw Error(ErrorCode::kDegenerateVector, "token projections cancel exactly");
  return l2_normalize(values);
}

// ---------------------------------------------------------------------------
// Backends

enum class BackendKind { kRemote, kHashed };

struct EmbeddingBackendConfig {
  BackendKind kind = BackendKind::kHashed;
  std::size_t dim = 256;
  std::string endpoint;    // remote
  std::string model_name;  // remote
  std::uint64_t seed = 42;  // hashed
  std::chrono::milliseconds timeout{30000};  // remote
  std::size_t batch_size = 16;  // remote
};

inline std::string backend_fingerprint(const EmbeddingBackendConfig& config) {
  if (config.kind == BackendKind::kHashed) {
    return "hashed:seed=" + std::to_string(config.seed) + ":dim=" + std::to_string(config.dim);
  }
  return "remote:model=" + config.model_name + ":dim=" + std::to_string(config.dim);
}

namespace detail {

struct ParsedEndpoint {
  std::string scheme_host_port;
  std::string path_prefix;
};

inline ParsedEndpoint parse_endpoint(const std::string& endpoint) {
  auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument, "endpoint must be an http(s) URL: '" + endpoint + "'");
  }
  auto path_start = endpoint.find('/', scheme_end + 3);
  ParsedEndpoint out;
  out.scheme_host_port = endpoint.substr(0, path_start);
  if (path_start != std::string::npos) out.path_prefix = endpoint.substr(path_start);
  while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  return out;
}

}  // namespace detail

/// Client side of the embedding wire protocol:
///   POST {endpoint}/embed  {"model": ..., "texts": [...]}
///   200 {"dim": N, "vectors": [[...], ...]}
/// Returns raw (unnormalized) vectors in request order.
inline std::vector<std::vector<double>> request_embeddings(
    const std::string& endpoint, const std::string& model_name, const std::vector<std::string>& texts,
    std::chrono::milliseconds timeout = std::chrono::milliseconds(30000)) {
  if (texts.empty()) throw Error(ErrorCode::kInvalidArgument, "empty embedding batch");
  for (const auto& t : texts) {
    if (detail::is_blank(t)) throw Error(ErrorCode::kEmptyText, "cannot embed empty text");
  }
  auto ep = detail::parse_endpoint(endpoint);
  httplib::Client client(ep.scheme_host_port);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  nlohmann::json body = {{"model", model_name}, {"texts", texts}};
  auto res = client.Post(ep.path_prefix + "/embed", body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::kBackendUnavailable,
                "embedding backend unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::kBackendUnavailable,
                "embedding backend returned HTTP " + std::to_string(res->status));
  }

  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kProtocolError, std::string("malformed embedding response: ") + e.what());
  }
  if (!reply.is_object() || !reply.contains("vectors") || !reply["vectors"].is_array()) {
    throw Error(ErrorCode::kProtocolError, "embedding response lacks a 'vectors' array");
  }
  const auto& vectors = reply["vectors"];
  if (vectors.size() != texts.size()) {
    throw Error(ErrorCode::kProtocolError, "embedding response has " + std::to_string(vectors.size()) +
                                               " vectors for " + std::to_string(texts.size()) + " texts");
  }
  std::vector<std::vector<double>> out;
  out.reserve(vectors.size());
  for (const auto& v : vectors) {
    if (!v.is_array()) throw Error(ErrorCode::kProtocolError, "embedding vector is not an array");
    std::vector<double> row;
    row.reserve(v.size());
    for (const auto& x : v) {
      if (!x.is_number()) throw Error(ErrorCode::kProtocolError, "embedding vector has a non-numeric entry");
      row.push_back(x.get<double>());
    }
    if (!out.empty() && row.size() != out.front().size()) {
      throw Error(ErrorCode::kDimensionMismatch, "embedding vectors have differing lengths");
    }
    out.push_back(std::move(row));
  }
  if (reply.contains("dim")) {
    const auto& dim = reply["dim"];
    if (!dim.is_number_integer()) throw Error(ErrorCode::kProtocolError, "'dim' is not an integer");
    if (dim.get<std::int64_t>() != static_cast<std::int64_t>(out.front().size())) {
      throw Error(ErrorCode::kDimensionMismatch, "declared dim disagrees with vector length");
    }
  }
  return out;
}

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;

  /// One unit vector per text, in order.
  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return do_embed_batch(texts);
  }

  virtual std::size_t dim() const = 0;
  virtual std::string fingerprint() const = 0;
  /// Largest batch worth sending in one call.
  virtual std::size_t preferred_batch_size() const { return 1; }

  /// Number of embed_batch invocations so far.
  std::size_t calls() const noexcept { return calls_.load(std::memory_order_relaxed); }

 protected:
  virtual std::vector<EmbeddingVector> do_embed_batch(const std::vector<std::string>& texts) = 0;

 private:
  std::atomic<std::size_t> calls_{0};
};

/// Deterministic local backend: tokenizes each text and hashes the tokens.
class HashedBackend final : public EmbeddingBackend {
 public:
  HashedBackend(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim_ < 2) throw Error(ErrorCode::kInvalidArgument, "hashed backend needs dim >= 2");
  }

  std::size_t dim() const override { return dim_; }
  std::string fingerprint() const override {
    EmbeddingBackendConfig c;
    c.kind = BackendKind::kHashed;
    c.dim = dim_;
    c.seed = seed_;
    return backend_fingerprint(c);
  }

 protected:
  std::vector<EmbeddingVector> do_embed_batch(const std::vector<std::string>& texts) override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
      auto tokens = tokenize(t);
      if (tokens.empty()) throw Error(ErrorCode::kEmptyText, "cannot embed empty text");
      out.push_back(hashed_projection_embed(tokens, dim_, seed_));
    }
    return out;
  }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

class RemoteBackend final : public EmbeddingBackend {
 public:
  explicit RemoteBackend(EmbeddingBackendConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw Error(ErrorCode::kInvalidArgument, "remote backend needs an endpoint");
    if (config_.dim < 1) throw Error(ErrorCode::kInvalidArgument, "remote backend needs dim >= 1");
    detail::parse_endpoint(config_.endpoint);
  }

  std::size_t dim() const override { return config_.dim; }
  std::string fingerprint() const override { return backend_fingerprint(config_); }
  std::size_t preferred_batch_size() const override { return std::max<std::size_t>(1, config_.batch_size); }

 protected:
  std::vector<EmbeddingVector> do_embed_batch(const std::vector<std::string>& texts) override {
    auto raw = request_embeddings(config_.endpoint, config_.model_name, texts, config_.timeout);
    std::vector<EmbeddingVector> out;
    out.reserve(raw.size());
    for (auto& v : raw) {
      if (v.size() != config_.dim) {
        throw Error(ErrorCode::kDimensionMismatch, "backend returned dim " + std::to_string(v.size()) +
                                                       ", expected " + std::to_string(config_.dim));
      }
      out.push_back(l2_normalize(v));
    }
    return out;
  }

 private:
  EmbeddingBackendConfig config_;
};

inline std::unique_ptr<EmbeddingBackend> make_backend(const EmbeddingBackendConfig& config) {
  if (config.kind == BackendKind::kHashed) return std::make_unique<HashedBackend>(config.dim, config.seed);
  return std::make_unique<RemoteBackend>(config);
}

/// Throws kEmptyText for blank input.
inline EmbeddingVector embed_text(EmbeddingBackend& backend, const std::string& text) {
  if (detail::is_blank(text)) throw Error(ErrorCode::kEmptyText, "cannot embed empty text");
  auto out = backend.embed_batch({text});
  return std::move(out.front());
}

inline EmbeddingVector embed_text(const EmbeddingBackendConfig& config, const std::string& text) {
  auto backend = make_backend(config);
  return embed_text(*backend, text);
}

// ---------------------------------------------------------------------------
// Embedding sets and the persistent cache

struct EmbeddingSet {
  std::map<std::string, EmbeddingVector> by_id;
  std::size_t dim = 0;
  std::string backend_fingerprint;

  std::size_t size() const noexcept { return by_id.size(); }

  /// Throws kUnknownId.
  const EmbeddingVector& at(const std::string& id) const {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(ErrorCode::kUnknownId, "no embedding for '" + id + "'", id);
    return it->second;
  }

  friend bool operator==(const EmbeddingSet&, const EmbeddingSet&) = default;
};

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIo, "SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

/// JSON-lines cache keyed by (backend fingerprint, SHA-256 of the text sent).
/// Readers share a lock; inserts take it exclusively.
class EmbeddingCache {
 public:
  EmbeddingCache() = default;

  /// A missing file yields an empty cache bound to `path`.
  static EmbeddingCache open(const std::filesystem::path& path) {
    EmbeddingCache cache;
    cache.path_ = path;
    std::ifstream in(path);
    if (!in) return cache;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (detail::is_skippable_line(line)) continue;
      try {
        auto rec = nlohmann::json::parse(line);
        auto values = rec.at("values").get<std::vector<double>>();
        if (rec.at("dim").get<std::size_t>() != values.size()) {
          throw Error(ErrorCode::kDimensionMismatch, "dim disagrees with values");
        }
        cache.entries_.emplace(Key{rec.at("fingerprint").get<std::string>(), rec.at("text_sha256").get<std::string>()},
                               restore_normalized(std::move(values)));
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kIo, "cache " + path.string() + " line " + std::to_string(line_no) + ": " + e.what(),
                    path.string(), line_no);
      } catch (const Error& e) {
        throw Error(ErrorCode::kIo, "cache " + path.string() + " line " + std::to_string(line_no) + ": " + e.what(),
                    path.string(), line_no);
      }
    }
    return cache;
  }

  EmbeddingCache(EmbeddingCache&& other) noexcept
      : path_(std::move(other.path_)), entries_(std::move(other.entries_)) {}
  EmbeddingCache& operator=(EmbeddingCache&& other) noexcept {
    path_ = std::move(other.path_);
    entries_ = std::move(other.entries_);
    return *this;
  }

  std::optional<EmbeddingVector> lookup(const std::string& fingerprint, const std::string& text_sha256) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(Key{fingerprint, text_sha256});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void insert(const std::string& fingerprint, const std::string& text_sha256, const EmbeddingVector& v) {
    std::unique_lock lock(mutex_);
    entries_.insert_or_assign(Key{fingerprint, text_sha256}, v);
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
  }

  /// Writes all records sorted by key, so equal contents give equal bytes.
  void save(const std::filesystem::path& path) const {
    std::shared_lock lock(mutex_);
    auto tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(ErrorCode::kIo, "cannot write cache '" + tmp.string() + "'", tmp.string());
      for (const auto& [key, v] : entries_) {
        nlohmann::json rec = {{"fingerprint", key.first},
                              {"text_sha256", key.second},
                              {"dim", v.dim()},
                              {"values", v.values()}};
        out << rec.dump() << '\n';
      }
      if (!out) throw Error(ErrorCode::kIo, "failed writing cache '" + tmp.string() + "'", tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot replace cache '" + path.string() + "': " + ec.message(), path.string());
  }

  void save() const {
    if (path_.empty()) throw Error(ErrorCode::kIo, "cache has no path");
    save(path_);
  }

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  using Key = std::pair<std::string, std::string>;

  std::filesystem::path path_;
  std::map<Key, EmbeddingVector> entries_;
  mutable std::shared_mutex mutex_;
};

struct EmbedOptions {
  NormalizationConfig normalization;
  StopwordList stopwords = StopwordList::builtin();
  /// When false, the backend sees the normalized text and stopword removal
  /// only feeds term analysis. When true, it sees the surviving tokens.
  bool embed_uses_preprocessed = false;
  /// Maximum concurrent backend requests.
  std::size_t parallelism = 1;
};

/// The exact string sent to the backend for a preprocessed document.
inline std::string embedding_input(const ProcessedText& processed, bool use_tokens) {
  if (!use_tokens) return processed.normalized_text;
  std::string out;
  for (const auto& t : processed.tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

/// Embeds every document. Cache hits skip the backend; new vectors are added
/// to the cache (the caller decides when to save it). Errors carry the
/// failing document id; no partial set is returned.
inline EmbeddingSet embed_corpus(EmbeddingBackend& backend, const Corpus& corpus, const EmbedOptions& options = {},
                                 EmbeddingCache* cache = nullptr) {
  const std::string fingerprint = backend.fingerprint();
  const auto& docs = corpus.documents();

  std::vector<std::string> inputs(docs.size());
  std::vector<std::string> digests(docs.size());
  std::vector<std::optional<EmbeddingVector>> vectors(docs.size());
  std::vector<std::size_t> misses;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    auto processed = preprocess(docs[i], options.normalization, options.stopwords);
    inputs[i] = embedding_input(processed, options.embed_uses_preprocessed);
    digests[i] = sha256_hex(inputs[i]);
    if (cache) vectors[i] = cache->lookup(fingerprint, digests[i]);
    if (!vectors[i]) misses.push_back(i);
  }

  const std::size_t batch = std::max<std::size_t>(1, backend.preferred_batch_size());
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < misses.size(); start += batch) {
    auto end = std::min(misses.size(), start + batch);
    batches.emplace_back(misses.begin() + static_cast<std::ptrdiff_t>(start),
                         misses.begin() + static_cast<std::ptrdiff_t>(end));
  }

  auto run_batch = [&](const std::vector<std::size_t>& members) {
    std::vector<std::string> texts;
    texts.reserve(members.size());
    for (auto i : members) texts.push_back(inputs[i]);
    try {
      auto out = backend.embed_batch(texts);
      for (std::size_t j = 0; j < members.size(); ++j) {
        if (out[j].dim() != backend.dim()) {
          throw Error(ErrorCode::kDimensionMismatch, "backend returned dim " + std::to_string(out[j].dim()));
        }
        vectors[members[j]] = std::move(out[j]);
      }
    } catch (const Error& e) {
      const auto& id = docs[members.front()].id;
      std::string where = members.size() == 1 ? "document '" + id + "'"
                                              : "batch starting at document '" + id + "'";
      throw Error(e.code(), where + ": " + e.what(), id);
    }
  };

  const std::size_t parallelism = std::max<std::size_t>(1, options.parallelism);
  for (std::size_t start = 0; start < batches.size(); start += parallelism) {
    auto end = std::min(batches.size(), start + parallelism);
    if (end - start == 1) {
      run_batch(batches[start]);
      continue;
    }
    std::vector<std::future<void>> pending;
    for (auto b = start; b < end; ++b) {
      pending.push_back(std::async(std::launch::async, run_batch, std::cref(batches[b])));
    }
    // Surface the earliest failing batch, matching sequential behaviour.
    std::exception_ptr first;
    for (auto& f : pending) {
      try {
        f.get();
      } catch (...) {
        if (!first) first = std::current_exception();
      }
    }
    if (first) std::rethrow_exception(first);
  }

  if (cache) {
    for (auto i : misses) cache->insert(fingerprint, digests[i], *vectors[i]);
  }

  EmbeddingSet set;
  set.dim = backend.dim();
  set.backend_fingerprint = fingerprint;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    set.by_id.emplace(docs[i].id, std::move(*vectors[i]));
  }
  return set;
}

}  // namespace dxsim
