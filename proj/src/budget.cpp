#include "w2vt/budget.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include <Eigen/Dense>
#include <fmt/chrono.h>
#include <fmt/format.h>

namespace w2vt {

std::string default_hardware_tag() {
  char host[256] = {0};
  if (gethostname(host, sizeof(host) - 1) != 0) host[0] = '\0';
  return fmt::format("{}/{}cpu", host[0] ? host : "unknown", std::thread::hardware_concurrency());
}

RuntimeBudget measure_default(const Corpus& corpus, int workers, int epochs, std::uint64_t seed,
                              int repeats, double t_ratio) {
  if (corpus.num_tokens() == 0) throw ValidationError("cannot measure a budget on an empty corpus");
  RuntimeBudget b;
  b.workers = workers;
  b.hardware_tag = default_hardware_tag();
  b.default_hp = default_hyperparams(ModelType::kSkipgram);
  b.default_hp.epochs = epochs;
  b.default_hp.t_ratio = t_ratio;

  std::vector<double> times;
  for (int r = 0; r < std::max(1, repeats); ++r) {
    TrainOptions opts;
    opts.workers = workers;
    opts.seed = seed;
    times.push_back(train(corpus, b.default_hp, opts).stats.total_wall_s);
  }
  std::sort(times.begin(), times.end());
  b.budget_s = times[times.size() / 2];
  b.measured_at = fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::time(nullptr)));
  return b;
}

// ---------------------------------------------------------------------------

namespace {

// E[min(l, a)] for l uniform on {1..L} (or l = L without window sampling).
double expected_min(int a, int L, bool sampling) {
  if (!sampling) return std::min(a, L);
  if (a >= L) return 0.5 * (L + 1);
  const double ad = a;
  return (ad * (ad + 1) / 2 + (L - ad) * ad) / L;
}

}  // namespace

CorpusProfile::CorpusProfile(const Corpus& corpus, double t_ratio, bool window_sampling)
    : t_ratio_(t_ratio), window_sampling_(window_sampling) {
  const Downsampler ds(corpus.vocab(), t_ratio);
  raw_tokens_ = static_cast<double>(corpus.num_tokens());
  for (const auto& seq : corpus.sequences()) {
    double len = 0;
    for (TokenId id : seq) len += ds.keep_rate(id);
    kept_tokens_ += len;
    const auto m = static_cast<std::size_t>(std::lround(len));
    if (length_hist_.size() <= m) length_hist_.resize(m + 1, 0.0);
    length_hist_[m] += 1.0;
    if (m >= 2) centres_ += static_cast<double>(m);
  }
}

double CorpusProfile::context_pairs(int window) const {
  double total = 0;
  double prefix = 0;  // sum_{a < len} E[min(l, a)]
  for (std::size_t len = 1; len < length_hist_.size(); ++len) {
    prefix += expected_min(static_cast<int>(len - 1), window, window_sampling_);
    total += length_hist_[len] * 2.0 * prefix;
  }
  return total;
}

EpochWork epoch_work(const CorpusProfile& profile, const HyperParams& hp) {
  const double pairs = profile.context_pairs(hp.window);
  const double steps_per = hp.negatives + 1.0;
  const double d = hp.dim;
  EpochWork w;
  w.tokens = profile.raw_tokens() + profile.kept_tokens();
  if (hp.model == ModelType::kSkipgram) {
    w.steps = pairs * steps_per;
    w.vector_ops = d * pairs * (3.0 * steps_per + 2.0);
  } else {
    const double c = profile.centres();
    w.steps = c * steps_per;
    w.vector_ops = d * (2.0 * pairs + c * (3.0 * steps_per + 2.0));
  }
  return w;
}

double CostModel::Fit::max_rel_error() const {
  double m = 0;
  for (double r : residuals) m = std::max(m, std::abs(r));
  return m;
}

CostModel::Fit CostModel::fit(const CorpusProfile& profile, const std::vector<Probe>& probes) {
  if (probes.size() < 4) {
    throw RuntimeFailure(fmt::format("cost model fit is singular: {} probes given, need at least 4",
                                     probes.size()));
  }
  const auto rows = static_cast<Eigen::Index>(probes.size());
  Eigen::MatrixXd x(rows, 3);
  Eigen::VectorXd y(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& p = probes[static_cast<std::size_t>(i)];
    if (!(p.epoch_s > 0)) throw RuntimeFailure("probe with non-positive epoch time");
    const auto w = epoch_work(profile, p.hp);
    // Divide by the measurement: minimise relative, not absolute, error.
    x(i, 0) = w.tokens / p.epoch_s;
    x(i, 1) = w.steps / p.epoch_s;
    x(i, 2) = w.vector_ops / p.epoch_s;
    y(i) = 1.0;
  }
  // Work terms that are zero for every probe (e.g. no context pairs survive
  // downsampling on a tiny corpus) carry no information and are left at 0.
  Eigen::Vector3d scale;
  std::vector<int> active;
  for (int c = 0; c < 3; ++c) {
    scale(c) = x.col(c).cwiseAbs().maxCoeff();
    if (scale(c) > 0) {
      active.push_back(c);
    } else {
      scale(c) = 1.0;
    }
  }
  if (active.empty()) throw RuntimeFailure("cost model fit has no work to explain the probe times");

  // Non-negative least squares by dropping columns that come out negative.
  Eigen::Vector3d coef = Eigen::Vector3d::Zero();
  for (;;) {
    Eigen::MatrixXd a(rows, static_cast<Eigen::Index>(active.size()));
    for (std::size_t j = 0; j < active.size(); ++j) {
      a.col(static_cast<Eigen::Index>(j)) = x.col(active[j]) / scale(active[j]);
    }
    const auto qr = a.colPivHouseholderQr();
    if (qr.rank() < static_cast<Eigen::Index>(active.size())) {
      throw RuntimeFailure("cost model fit is singular; add probes that vary d, L and N");
    }
    const Eigen::VectorXd sol = qr.solve(y);
    coef.setZero();
    int worst = -1;
    for (std::size_t j = 0; j < active.size(); ++j) {
      coef(active[j]) = sol(static_cast<Eigen::Index>(j)) / scale(active[j]);
      if (sol(static_cast<Eigen::Index>(j)) < 0 &&
          (worst < 0 || sol(static_cast<Eigen::Index>(j)) < sol(worst))) {
        worst = static_cast<int>(j);
      }
    }
    if (worst < 0) break;
    active.erase(active.begin() + worst);
    if (active.empty()) throw RuntimeFailure("cost model fit has no positive component");
  }

  Fit f;
  f.c_token = coef(0);
  f.c_step = coef(1);
  f.c_vector = coef(2);
  for (const auto& p : probes) {
    const auto w = epoch_work(profile, p.hp);
    const double pred = f.c_token * w.tokens + f.c_step * w.steps + f.c_vector * w.vector_ops;
    f.residuals.push_back((pred - p.epoch_s) / p.epoch_s);
  }
  return f;
}

double CostModel::predict_epoch_s(const CorpusProfile& profile, const HyperParams& hp) const {
  const auto& f = fit_for(hp.model);
  const auto w = epoch_work(profile, hp);
  return f.c_token * w.tokens + f.c_step * w.steps + f.c_vector * w.vector_ops;
}

std::vector<HyperParams> default_probe_configs(double t_ratio) {
  struct Shape {
    int d, L, N;
  };
  static constexpr Shape kShapes[] = {{20, 2, 2},  {100, 5, 5},  {50, 10, 2},
                                      {150, 3, 10}, {30, 20, 8}, {120, 8, 16}};
  std::vector<HyperParams> out;
  for (auto m : {ModelType::kSkipgram, ModelType::kCbow}) {
    for (const auto& s : kShapes) {
      HyperParams hp = default_hyperparams(m);
      hp.dim = s.d;
      hp.window = s.L;
      hp.negatives = s.N;
      hp.epochs = 1;
      hp.t_ratio = t_ratio;
      out.push_back(hp);
    }
  }
  return out;
}

CostModel fit_cost_model(const Corpus& corpus, const std::vector<HyperParams>& probes,
                         const CalibrationOptions& opts, std::vector<CostModel::Probe>* measured) {
  if (probes.empty()) throw ValidationError("no probe configurations");
  const double t_ratio = probes.front().t_ratio;
  const CorpusProfile profile(corpus, t_ratio);
  std::vector<CostModel::Probe> sg, cbow;
  for (auto hp : probes) {
    hp.epochs = std::max(1, opts.probe_epochs);
    hp.t_ratio = t_ratio;
    TrainOptions to;
    to.workers = opts.workers;
    to.seed = opts.seed;
    const auto stats = train(corpus, hp, to).stats;
    CostModel::Probe p{hp, stats.total_wall_s / hp.epochs};
    (hp.model == ModelType::kSkipgram ? sg : cbow).push_back(p);
    if (measured) measured->push_back(p);
  }
  return CostModel(CostModel::fit(profile, sg), CostModel::fit(profile, cbow));
}

EpochPlan epochs_for_budget(const HyperParams& hp, const RuntimeBudget& budget,
                            const CostModel& model, const CorpusProfile& profile, double safety) {
  hp.validate();
  if (!(budget.budget_s > 0)) throw ValidationError("budget must be positive");
  EpochPlan plan;
  plan.predicted_epoch_s = model.predict_epoch_s(profile, hp);
  if (!(plan.predicted_epoch_s > 0)) throw RuntimeFailure("cost model predicts a non-positive epoch time");
  const double n = std::floor(safety * budget.budget_s / plan.predicted_epoch_s);
  plan.infeasible = plan.predicted_epoch_s > budget.budget_s;
  plan.epochs = static_cast<int>(std::clamp(n, 1.0, 1e6));
  return plan;
}

}  // namespace w2vt
