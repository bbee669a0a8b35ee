#pragma once

#include <dxsim/analysis.hpp>
#include <dxsim/corpus.hpp>
#include <dxsim/embedding.hpp>
#include <dxsim/preprocess.hpp>
#include <dxsim/report.hpp>
#include <dxsim/similarity.hpp>

#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace dxsim {

struct EngineConfig {
  NormalizationConfig normalization;
  StopwordList stopwords = StopwordList::builtin();
  bool embed_uses_preprocessed = false;
  TermOptions terms;
  /// Shared terms shown per match.
  std::size_t feature_terms = 5;
  std::size_t parallelism = 1;
};

inline constexpr std::size_t kDefaultK = 2;
inline constexpr const char* kWhatIfId = "whatif";

/// Immutable query state: corpus, embeddings, flat index and term statistics.
/// All query methods are const and safe to call concurrently.
class Engine {
 public:
  /// Embeds the corpus (through the cache when given). The backend is kept
  /// for what-if queries.
  static Engine build(Corpus corpus, std::shared_ptr<EmbeddingBackend> backend, EngineConfig config = {},
                      EmbeddingCache* cache = nullptr) {
    EmbedOptions opts{config.normalization, config.stopwords, config.embed_uses_preprocessed, config.parallelism};
    auto set = embed_corpus(*backend, corpus, opts, cache);
    return Engine(std::move(corpus), std::move(set), std::move(backend), std::move(config));
  }

  Engine(Corpus corpus, EmbeddingSet embeddings, std::shared_ptr<EmbeddingBackend> backend, EngineConfig config)
      : corpus_(std::make_unique<Corpus>(std::move(corpus))),
        embeddings_(std::move(embeddings)),
        backend_(std::move(backend)),
        config_(std::move(config)),
        index_(std::make_unique<FlatIndex>(embeddings_, *corpus_)),
        terms_(build_term_store(*corpus_, config_.normalization, config_.stopwords, config_.terms)) {
    for (const auto& d : corpus_->documents()) {
      if (!embeddings_.by_id.count(d.id)) {
        throw Error(ErrorCode::kUnknownId, "no embedding for document '" + d.id + "'", d.id);
      }
    }
    if (embeddings_.size() != corpus_->size()) {
      throw Error(ErrorCode::kInvalidArgument, "embedding set covers ids outside the corpus");
    }
  }

  const Corpus& corpus() const noexcept { return *corpus_; }
  const EmbeddingSet& embeddings() const noexcept { return embeddings_; }
  const FlatIndex& index() const noexcept { return *index_; }
  const TermStore& terms() const noexcept { return terms_; }
  const EngineConfig& config() const noexcept { return config_; }
  std::size_t dim() const noexcept { return embeddings_.dim; }

  /// Top-k cross-domain matches for a corpus document plus shared terms.
  AnalysisReport similar(const std::string& target_id, std::size_t k, const SimilarityFilters& filters,
                         const std::string& generated_at = {}) const {
    auto matches = top_k_similar(target_id, *index_, filters, k);
    const auto& target_terms = terms_.terms(target_id);
    return assemble(ReportTarget{}, target_id, target_terms, matches, filters, generated_at);
  }

  /// Same as similar() for ad-hoc text; nothing is added to the corpus.
  /// Throws kEmptyText, kBackendUnavailable.
  AnalysisReport whatif(const std::string& text, std::size_t k, const SimilarityFilters& filters,
                        const std::string& generated_at = {}) const {
    auto processed = preprocess_text(text, config_.normalization, config_.stopwords);
    if (processed.tokens.empty()) throw Error(ErrorCode::kEmptyText, "query text has no usable tokens");
    if (!backend_) throw Error(ErrorCode::kBackendUnavailable, "no embedding backend configured");
    auto query = embed_text(*backend_, embedding_input(processed, config_.embed_uses_preprocessed));
    auto matches = top_k_for_text(query, *index_, filters, k);
    auto query_terms = extract_terms(processed.normalized_text, config_.stopwords, config_.terms);
    return assemble(ReportTarget{kWhatIfId, "What-if query", ""}, kWhatIfId, query_terms, matches, filters,
                    generated_at);
  }

  FeatureOverlap common_features(const std::string& a, const std::string& b, std::size_t n) const {
    return dxsim::common_features(a, b, *corpus_, terms_, n);
  }

  SimilarityMatrix matrix() const { return similarity_matrix(embeddings_, *corpus_); }

 private:
  AnalysisReport assemble(ReportTarget target, const std::string& target_id,
                          const std::vector<std::string>& target_terms, const std::vector<RankedMatch>& matches,
                          const SimilarityFilters& filters, const std::string& generated_at) const {
    std::vector<FeatureOverlap> overlaps;
    std::vector<const std::vector<std::string>*> groups{&target_terms};
    for (const auto& m : matches) {
      const auto& match_terms = terms_.terms(m.doc_id);
      overlaps.push_back(overlap_terms(target_id, target_terms, m.doc_id, match_terms, terms_, config_.feature_terms));
      groups.push_back(&match_terms);
    }
    std::vector<std::string> shared;
    if (matches.size() >= 2) {
      for (const auto& t : common_to_all(groups, terms_, config_.feature_terms)) shared.push_back(t.term);
    }
    ReportContext ctx{embeddings_.backend_fingerprint, filters, generated_at};
    if (target.id.empty()) return build_report(target_id, matches, overlaps, *corpus_, ctx, std::move(shared));
    return build_report(target, matches, overlaps, *corpus_, ctx, std::move(shared));
  }

  std::unique_ptr<Corpus> corpus_;
  EmbeddingSet embeddings_;
  std::shared_ptr<EmbeddingBackend> backend_;
  EngineConfig config_;
  std::unique_ptr<FlatIndex> index_;
  TermStore terms_;
};

}  // namespace dxsim
