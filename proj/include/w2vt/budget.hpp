#pragma once

#include <string>
#include <vector>

#include "w2vt/corpus.hpp"
#include "w2vt/hyperparams.hpp"
#include "w2vt/trainer.hpp"

namespace w2vt {

/// Wall-clock seconds of one default-hyperparameter training run on this machine.
struct RuntimeBudget {
  double budget_s = 0;
  int workers = 1;
  std::string hardware_tag;
  HyperParams default_hp;
  std::string measured_at;  // ISO-8601 UTC
};

std::string default_hardware_tag();

/// Trains the default configuration (skipgram, d=100, L=5, alpha=0.75, N=5,
/// lambda=0.025) for `epochs` epochs and records its wall time. With repeats > 1
/// the median run is used. `t_ratio` is the downsampling ratio shared with the search.
RuntimeBudget measure_default(const Corpus& corpus, int workers, int epochs = 5,
                              std::uint64_t seed = 1, int repeats = 1,
                              double t_ratio = HyperParams{}.t_ratio);

/// Per-corpus quantities the cost model needs: raw tokens, expected tokens
/// surviving downsampling, and expected training pairs for a given window.
class CorpusProfile {
 public:
  CorpusProfile(const Corpus& corpus, double t_ratio, bool window_sampling = true);

  double raw_tokens() const { return raw_tokens_; }
  double kept_tokens() const { return kept_tokens_; }
  /// Expected number of (context, centre) pairs per epoch at maximum window L.
  double context_pairs(int window) const;
  /// Expected number of centre positions that have at least one context.
  double centres() const { return centres_; }
  double t_ratio() const { return t_ratio_; }

 private:
  double raw_tokens_ = 0;
  double kept_tokens_ = 0;
  double centres_ = 0;
  double t_ratio_ = 0;
  bool window_sampling_ = true;
  std::vector<double> length_hist_;  // expected kept length -> number of sequences
};

/// Work decomposition of one epoch: per-token overhead, per-logistic-step
/// scalar work (exp/log), and d-length vector work.
struct EpochWork {
  double tokens = 0;
  double steps = 0;
  double vector_ops = 0;
};

EpochWork epoch_work(const CorpusProfile& profile, const HyperParams& hp);

/// Linear model of epoch seconds on EpochWork, fitted separately for skipgram and CBOW.
class CostModel {
 public:
  struct Fit {
    double c_token = 0;
    double c_step = 0;
    double c_vector = 0;
    std::vector<double> residuals;  // relative error at each calibration probe
    double max_rel_error() const;
  };

  struct Probe {
    HyperParams hp;
    double epoch_s = 0;
  };

  CostModel() = default;
  CostModel(Fit sg, Fit cbow) : sg_(std::move(sg)), cbow_(std::move(cbow)) {}

  /// Least squares in relative error; coefficients are kept non-negative.
  static Fit fit(const CorpusProfile& profile, const std::vector<Probe>& probes);

  double predict_epoch_s(const CorpusProfile& profile, const HyperParams& hp) const;
  const Fit& fit_for(ModelType m) const { return m == ModelType::kSkipgram ? sg_ : cbow_; }

 private:
  Fit sg_;
  Fit cbow_;
};

/// Default calibration grid: several (d, L, N) per model type spanning the search space.
std::vector<HyperParams> default_probe_configs(double t_ratio = HyperParams{}.t_ratio);

struct CalibrationOptions {
  int workers = 1;
  int probe_epochs = 1;
  std::uint64_t seed = 1;
};

/// Times each probe configuration and fits the cost model.
CostModel fit_cost_model(const Corpus& corpus, const std::vector<HyperParams>& probes,
                         const CalibrationOptions& opts, std::vector<CostModel::Probe>* measured = nullptr);

struct EpochPlan {
  int epochs = 1;
  double predicted_epoch_s = 0;
  bool infeasible = false;  // even one epoch is predicted to exceed the budget
};

/// Largest n with n * predicted_epoch <= safety * budget (at least 1).
EpochPlan epochs_for_budget(const HyperParams& hp, const RuntimeBudget& budget,
                            const CostModel& model, const CorpusProfile& profile,
                            double safety = 0.95);

}  // namespace w2vt
