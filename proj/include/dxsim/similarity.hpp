#pragma once

#include <dxsim/corpus.hpp>
#include <dxsim/embedding.hpp>
#include <dxsim/error.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace dxsim {

/// Dot product with a fixed four-lane summation order, so repeated calls on
/// the same pair are bitwise identical.
inline double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline double clamp_score(double s) { return std::clamp(s, -1.0, 1.0); }

/// A·B / (‖A‖‖B‖) on raw values, clamped to [-1, 1].
inline double cosine_full(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double na = std::sqrt(dot(a, a));
  double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::kZeroVector, "cosine of a zero vector");
  return clamp_score(dot(a, b) / (na * nb));
}

/// Uses the plain dot product when both inputs are unit vectors.
inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "dimension mismatch: " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
  if (a.normalized() && b.normalized()) return clamp_score(dot(a.span(), b.span()));
  return cosine_full(a.span(), b.span());
}

struct SimilarityFilters {
  bool exclude_company_of_target = true;
  bool exclude_same_sub_industry = true;
  bool exclude_same_industry = false;
  std::optional<double> min_score;
  std::optional<std::set<int>> allowed_years;
  // Explicit exclusions; the only company/domain exclusions for text queries.
  std::set<std::string> excluded_companies;
  std::set<std::string> excluded_sub_industries;
  std::set<std::string> excluded_industries;

  void validate() const {
    if (min_score && (!std::isfinite(*min_score) || *min_score < -1.0 || *min_score > 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "min_score must lie in [-1, 1]");
    }
  }

  friend bool operator==(const SimilarityFilters&, const SimilarityFilters&) = default;
};

struct RankedMatch {
  std::string doc_id;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based

  friend bool operator==(const RankedMatch&, const RankedMatch&) = default;
};

/// Contiguous row-major copy of an embedding set in corpus order. Rows are
/// the corpus documents that have an embedding.
class FlatIndex {
 public:
  FlatIndex(const EmbeddingSet& set, const Corpus& corpus) : corpus_(&corpus), dim_(set.dim) {
    rows_.reserve(corpus.size());
    data_.reserve(corpus.size() * dim_);
    bool all_normalized = true;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      auto it = set.by_id.find(corpus[i].id);
      if (it == set.by_id.end()) continue;
      if (it->second.dim() != dim_) {
        throw Error(ErrorCode::kDimensionMismatch, "embedding for '" + corpus[i].id + "' has wrong dim",
                    corpus[i].id);
      }
      all_normalized = all_normalized && it->second.normalized();
      rows_.push_back(i);
      data_.insert(data_.end(), it->second.values().begin(), it->second.values().end());
    }
    if (!all_normalized) {
      // Normalize in place so scoring is a dot product.
      for (std::size_t r = 0; r < rows_.size(); ++r) {
        auto row = mutable_row(r);
        double norm = std::sqrt(dot(row, row));
        for (double& x : row) x /= norm;
      }
    }
  }

  std::size_t size() const noexcept { return rows_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const Corpus& corpus() const noexcept { return *corpus_; }
  const CaseDocument& document(std::size_t r) const { return (*corpus_)[rows_[r]]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * dim_, dim_}; }

  std::optional<std::size_t> find_row(std::string_view id) const {
    auto pos = corpus_->find(id);
    if (!pos) return std::nullopt;
    auto it = std::lower_bound(rows_.begin(), rows_.end(), *pos);
    if (it == rows_.end() || *it != *pos) return std::nullopt;
    return static_cast<std::size_t>(it - rows_.begin());
  }

 private:
  std::span<double> mutable_row(std::size_t r) { return {data_.data() + r * dim_, dim_}; }

  const Corpus* corpus_;
  std::size_t dim_;
  std::vector<std::size_t> rows_;
  std::vector<double> data_;
};

namespace detail {

inline bool excluded_by_lists(const CaseDocument& d, const SimilarityFilters& f) {
  return f.excluded_companies.count(d.company) > 0 || f.excluded_sub_industries.count(d.sub_industry) > 0 ||
         f.excluded_industries.count(d.industry) > 0 ||
         (f.allowed_years && f.allowed_years->count(d.year) == 0);
}

inline bool excluded_relative_to(const CaseDocument& d, const CaseDocument& target, const SimilarityFilters& f) {
  return d.id == target.id || (f.exclude_company_of_target && d.company == target.company) ||
         (f.exclude_same_sub_industry && d.sub_industry == target.sub_industry) ||
         (f.exclude_same_industry && d.industry == target.industry);
}

inline bool ranks_before(const std::pair<double, const std::string*>& a,
                         const std::pair<double, const std::string*>& b) {
  if (a.first != b.first) return a.first > b.first;
  return *a.second < *b.second;
}

template <class Excluded>
std::vector<RankedMatch> rank_candidates(const FlatIndex& index, std::span<const double> query,
                                         const SimilarityFilters& filters, std::size_t k, Excluded excluded) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be at least 1");
  filters.validate();
  std::vector<std::pair<double, const std::string*>> pool;
  pool.reserve(index.size());
  for (std::size_t r = 0; r < index.size(); ++r) {
    const auto& doc = index.document(r);
    if (excluded(doc) || excluded_by_lists(doc, filters)) continue;
    double score = clamp_score(dot(query, index.row(r)));
    if (filters.min_score && score < *filters.min_score) continue;
    pool.emplace_back(score, &doc.id);
  }
  if (pool.empty()) {
    throw Error(ErrorCode::kEmptyCandidatePool, "filters leave no eligible candidates");
  }
  auto take = std::min(k, pool.size());
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take), pool.end(), ranks_before);
  std::vector<RankedMatch> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back({*pool[i].second, pool[i].first, i + 1});
  return out;
}

}  // namespace detail

/// Exact filtered top-k for a corpus document. Ordered by descending score,
/// then ascending id. Throws kUnknownId, kEmptyCandidatePool.
inline std::vector<RankedMatch> top_k_similar(const std::string& target_id, const FlatIndex& index,
                                              const SimilarityFilters& filters, std::size_t k) {
  auto row = index.find_row(target_id);
  if (!row) throw Error(ErrorCode::kUnknownId, "unknown id '" + target_id + "'", target_id);
  const auto& target = index.document(*row);
  return detail::rank_candidates(index, index.row(*row), filters, k, [&](const CaseDocument& d) {
    return detail::excluded_relative_to(d, target, filters);
  });
}

inline std::vector<RankedMatch> top_k_similar(const std::string& target_id, const EmbeddingSet& set,
                                              const Corpus& corpus, const SimilarityFilters& filters,
                                              std::size_t k) {
  if (!corpus.contains(target_id) || !set.by_id.count(target_id)) {
    throw Error(ErrorCode::kUnknownId, "unknown id '" + target_id + "'", target_id);
  }
  return top_k_similar(target_id, FlatIndex(set, corpus), filters, k);
}

/// Top-k for an external query vector. No self-exclusion; only the explicit
/// exclusion lists, min_score and allowed_years apply.
inline std::vector<RankedMatch> top_k_for_text(const EmbeddingVector& query, const FlatIndex& index,
                                               const SimilarityFilters& filters, std::size_t k) {
  if (query.dim() != index.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "query dim " + std::to_string(query.dim()) + " vs index dim " + std::to_string(index.dim()));
  }
  EmbeddingVector unit = query.normalized() ? query : l2_normalize(query.span());
  return detail::rank_candidates(index, unit.span(), filters, k, [](const CaseDocument&) { return false; });
}

inline std::vector<RankedMatch> top_k_for_text(const EmbeddingVector& query, const EmbeddingSet& set,
                                               const Corpus& corpus, const SimilarityFilters& filters,
                                               std::size_t k) {
  return top_k_for_text(query, FlatIndex(set, corpus), filters, k);
}

/// Dense symmetric matrix of pairwise cosine scores.
struct SimilarityMatrix {
  std::vector<std::string> ids;
  std::vector<double> values;  // row-major, ids.size()^2

  std::size_t size() const noexcept { return ids.size(); }
  double at(std::size_t i, std::size_t j) const { return values[i * ids.size() + j]; }
};

/// Rows follow `order`; each id must be present in the set.
inline SimilarityMatrix similarity_matrix(const EmbeddingSet& set, const std::vector<std::string>& order) {
  if (order.empty()) throw Error(ErrorCode::kInvalidArgument, "similarity matrix of an empty set");
  std::vector<const EmbeddingVector*> vecs;
  vecs.reserve(order.size());
  for (const auto& id : order) vecs.push_back(&set.at(id));
  const std::size_t n = order.size();
  SimilarityMatrix m{order, std::vector<double>(n * n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = cosine_similarity(*vecs[i], *vecs[j]);
      m.values[i * n + j] = s;
      m.values[j * n + i] = s;
    }
  }
  return m;
}

/// Rows in ascending id order.
inline SimilarityMatrix similarity_matrix(const EmbeddingSet& set) {
  std::vector<std::string> ids;
  for (const auto& [id, v] : set.by_id) ids.push_back(id);
  return similarity_matrix(set, ids);
}

/// Rows in corpus order, skipping documents without an embedding.
inline SimilarityMatrix similarity_matrix(const EmbeddingSet& set, const Corpus& corpus) {
  std::vector<std::string> ids;
  for (const auto& d : corpus.documents()) {
    if (set.by_id.count(d.id)) ids.push_back(d.id);
  }
  return similarity_matrix(set, ids);
}

}  // namespace dxsim
