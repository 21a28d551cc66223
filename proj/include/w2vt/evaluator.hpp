#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "w2vt/corpus.hpp"
#include "w2vt/trainer.hpp"

namespace w2vt {

enum class IndexMode { kExact, kApproximate };

IndexMode parse_index_mode(std::string_view name);
std::string_view index_mode_name(IndexMode m);

/// Navigable small-world graph parameters for the approximate index.
struct ApproxConfig {
  int max_degree = 24;       // neighbours kept per node
  int ef_construction = 96;  // beam width while inserting
  int ef_search = 96;        // beam width at query time (raised to >= 4k)
  std::uint64_t seed = 7;
};

/// Unit-normalised copy of the input embeddings with cosine top-k retrieval.
/// The query itself is never returned. Ties are broken by ascending id.
class CosineIndex {
 public:
  explicit CosineIndex(const EmbeddingModel& model, IndexMode mode = IndexMode::kExact,
                       const ApproxConfig& cfg = {});

  IndexMode mode() const { return mode_; }
  std::size_t size() const { return n_; }
  int dim() const { return dim_; }

  /// Up to min(k, |V| - 1) ids ordered by descending cosine to `query`.
  std::vector<TokenId> top_k(TokenId query, std::size_t k) const;

  /// Exact answer regardless of mode; used to validate the approximate graph.
  std::vector<TokenId> exact_top_k(TokenId query, std::size_t k) const;
  /// Same answers as exact_top_k for many queries: float matrix products pick
  /// candidates, which are then rescored in double.
  std::vector<std::vector<TokenId>> exact_top_k_batch(std::span<const TokenId> queries, std::size_t k,
                                                      int workers = 1) const;

  double cosine(TokenId a, TokenId b) const;

 private:
  std::vector<TokenId> graph_top_k(TokenId query, std::size_t k) const;
  void build_graph(const ApproxConfig& cfg);
  const float* row(std::size_t i) const { return unit_.data() + i * static_cast<std::size_t>(dim_); }
  double score(std::size_t a, std::size_t b) const;

  IndexMode mode_;
  std::size_t n_ = 0;
  int dim_ = 0;
  int ef_search_ = 96;
  std::vector<float> unit_;
  std::vector<std::vector<std::uint32_t>> graph_;
  std::vector<std::uint32_t> entry_points_;
};

/// Mean recall@k of the approximate answers against exact ones over `probes` queries.
double approximate_recall(const CosineIndex& index, std::size_t probes, std::size_t k,
                          std::uint64_t seed);

struct PairOutcome {
  TokenId query;
  TokenId target;
  int rank;  // 1-based rank within top-k, or -1
};

struct EvalResult {
  double hr_at_k = 0;    // percent
  double ndcg_at_k = 0;  // [0, 1]
  int k = 10;
  std::size_t n_pairs = 0;      // evaluated pairs
  std::size_t n_discarded = 0;  // query == target pairs dropped
  std::vector<PairOutcome> per_pair;
};

struct EvalOptions {
  int k = 10;
  IndexMode mode = IndexMode::kExact;
  bool keep_self_pairs = false;  // ablation: count query == target pairs (always misses)
  bool record_pairs = false;
  int workers = 1;
  ApproxConfig approx;
};

/// Next-event prediction: for each (query, target) the top-k neighbours of the
/// query are retrieved; HR@k is the hit percentage, NDCG@k uses 1/log2(rank+1).
EvalResult evaluate(const EmbeddingModel& model, std::span<const TestPair> pairs,
                    const EvalOptions& opts = {});

inline double ndcg_gain(int rank) { return rank >= 1 ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0; }

struct MeanCi {
  double mean = 0;
  double half_width = 0;  // 95% confidence half-width
};

/// Student-t 95% interval of the mean; half-width 0 for fewer than two values.
MeanCi mean_ci95(std::span<const double> values);

struct RunSummary {
  MeanCi hr;
  MeanCi ndcg;
  std::size_t runs = 0;
};

RunSummary aggregate_runs(std::span<const EvalResult> results);

}  // namespace w2vt
