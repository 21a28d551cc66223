#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "w2vt/budget.hpp"
#include "w2vt/corpus.hpp"
#include "w2vt/evaluator.hpp"
#include "w2vt/gp.hpp"
#include "w2vt/hyperparams.hpp"

namespace w2vt {

enum class Transform { kLinear, kLog };

struct Dimension {
  std::string name;  // one of d, L, alpha, lambda, N (or free-form for synthetic spaces)
  bool integer = false;
  double lo = 0;
  double hi = 1;
  Transform transform = Transform::kLinear;
};

/// Box over the tunable hyperparameters. The model type is not a dimension:
/// each model type gets its own GP run.
struct SearchSpace {
  std::vector<Dimension> dims;

  static SearchSpace unconstrained_preset();
  static SearchSpace constrained_preset();
  static SearchSpace preset(std::string_view name);

  std::size_t size() const { return dims.size(); }
  const Dimension* find(std::string_view name) const;

  /// Natural units -> [0,1]^k (log dims mapped in log space).
  std::vector<double> to_unit(std::span<const double> x) const;
  /// [0,1]^k -> natural units, clamped to bounds, integer dims rounded.
  std::vector<double> from_unit(std::span<const double> u) const;

  HyperParams apply(std::span<const double> x, HyperParams base) const;
  std::vector<double> extract(const HyperParams& hp) const;
};

/// A finished (or failed) evaluation in a search.
struct TrialRecord {
  int trial = 0;  // 0-based index within its model's run
  HyperParams hp;
  std::string source;  // "sobol", "ei", "fallback"
  double objective = 0;  // HR@10, percent
  double ndcg = 0;
  double runtime_s = 0;    // training wall time
  double predicted_s = 0;  // constrained mode: cost-model prediction for hp.epochs
  bool over_budget = false;
  int corrected_epochs = 0;  // epochs to use on a re-run when over budget
  bool failed = false;
  std::string error;
  std::uint64_t seed = 0;
  std::string timestamp;
};

struct Observation {
  std::vector<double> x;  // natural units
  double y = 0;
};

struct SuggestConfig {
  int initial_sobol = 9;
  int candidates = 4096;
  int refine_top = 8;
  int refine_steps = 48;
  bool scramble = true;
  std::uint64_t seed = 1;
  GpConfig gp;
};

struct Suggestion {
  std::vector<double> x;  // natural units
  std::string source;
  double ei = 0;
};

/// Next point to evaluate given `issued` trials so far, of which `history`
/// completed. Sobol points until `initial_sobol` trials were issued (or fewer
/// than two completed), then the EI maximiser of the fitted GP. A point that
/// rounds onto an evaluated one is moved to the nearest unevaluated neighbour.
/// EI candidates rejected by `feasible` (natural units) are skipped.
using FeasibleFn = std::function<bool(std::span<const double>)>;
Suggestion suggest(std::span<const Observation> history, std::size_t issued,
                   const SearchSpace& space, const SuggestConfig& cfg, const FeasibleFn& feasible = {});

/// Convenience form on trial records (failed trials count as issued only).
HyperParams suggest(std::span<const TrialRecord> history, const SearchSpace& space,
                    const SuggestConfig& cfg, const HyperParams& base);

enum class SearchMode { kUnconstrained, kConstrained };
SearchMode parse_search_mode(std::string_view name);
std::string_view search_mode_name(SearchMode m);

struct StopConfig {
  int max_trials = 60;
  int patience = 20;             // trials without improvement
  double min_improvement = 0.05; // HR points
};

/// Training-to-convergence rule for unconstrained trials.
struct ConvergenceConfig {
  int max_epochs = 200;
  int patience_epochs = 10;
  double min_delta = 0.01;  // HR points
};

/// Everything a constrained search needs to pick n for a configuration.
struct BudgetContext {
  RuntimeBudget budget;
  CostModel cost;
  double safety = 0.95;
};

struct SearchConfig {
  SearchSpace space = SearchSpace::constrained_preset();
  SearchMode mode = SearchMode::kConstrained;
  std::vector<ModelType> models{ModelType::kSkipgram, ModelType::kCbow};
  StopConfig stop;
  ConvergenceConfig convergence;
  SuggestConfig suggest;
  HyperParams base;  // fixed fields (t_ratio, min_count) and defaults for non-searched dims
  int workers = 1;
  std::uint64_t seed = 1;  // training seed shared by every trial
  EvalOptions eval;
};

struct SearchResult {
  std::vector<TrialRecord> history;  // all models, in execution order
  std::optional<TrialRecord> best_sg;
  std::optional<TrialRecord> best_cbow;
  const std::optional<TrialRecord>& best(ModelType m) const {
    return m == ModelType::kSkipgram ? best_sg : best_cbow;
  }
};

/// Best feasible record: not failed, not over budget, highest objective.
std::optional<TrialRecord> incumbent(std::span<const TrialRecord> records, ModelType m);

/// Sobol initialisation then GP-EI, one independent run per model type.
/// `prior` holds records from an interrupted run; they are replayed, not re-run.
/// `on_trial` sees each new record as soon as it finishes (for append-only logs).
SearchResult run_search(const EvalSplit& split, const SearchConfig& cfg,
                        const BudgetContext* budget = nullptr,
                        std::span<const TrialRecord> prior = {},
                        const std::function<void(const TrialRecord&)>& on_trial = {});

/// Trains `hp` on `split.train` once and evaluates it (constrained-style trial).
struct SeedRun {
  EvalResult eval;
  TrainStats stats;
};
SeedRun train_and_evaluate(const EvalSplit& split, const HyperParams& hp, std::uint64_t seed,
                           int workers, const EvalOptions& eval);

struct MultiSeedResult {
  RunSummary summary;
  std::vector<SeedRun> runs;
  double mean_runtime_s = 0;
  double max_runtime_s = 0;
};

MultiSeedResult evaluate_seeds(const EvalSplit& split, const HyperParams& hp,
                               std::span<const std::uint64_t> seeds, int workers,
                               const EvalOptions& eval);

// ---------------------------------------------------------------------------

struct TransferConfig {
  double fraction = 0.1;
  std::uint64_t sample_seed = 1;
  SearchConfig search;
  std::vector<std::uint64_t> eval_seeds{1, 2, 3, 4, 5};
  int default_epochs = 5;
  int budget_repeats = 1;
  std::vector<HyperParams> probes = default_probe_configs();
  bool tune_full = false;  // also run the constrained search on the full corpus
};

struct TransferRow {
  std::string label;  // "default", "sample", "full"
  HyperParams hp;
  MultiSeedResult result;
};

struct TransferReport {
  CorpusStats full_stats;
  CorpusStats sample_stats;
  RuntimeBudget sample_budget;
  RuntimeBudget full_budget;
  SearchResult sample_search;
  std::optional<SearchResult> full_search;
  std::vector<TransferRow> rows;
};

/// Tune on a sequence sample under the sample's default-run budget, then
/// retrain the best skipgram and best CBOW on the full corpus under the full
/// corpus budget and compare with the defaults.
TransferReport sample_transfer(const Corpus& full, const TransferConfig& cfg);

struct SweepRow {
  double value = 0;
  bool is_center = false;
  RunSummary summary;
};

/// Varies one dimension over `grid` with every other hyperparameter fixed at `center`.
/// The centre value is always included and marked.
std::vector<SweepRow> linear_sweep(const HyperParams& center, std::string_view dimension,
                                   std::span<const double> grid, const EvalSplit& split,
                                   std::span<const std::uint64_t> seeds, int workers,
                                   const EvalOptions& eval);

/// "lo:hi:step" -> inclusive arithmetic grid.
std::vector<double> parse_grid(std::string_view spec);

double get_param(const HyperParams& hp, std::string_view name);
void set_param(HyperParams& hp, std::string_view name, double value);

}  // namespace w2vt
