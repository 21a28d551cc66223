#include "w2vt/optimizer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "w2vt/sobol.hpp"

namespace w2vt {

// ---------------------------------------------------------------------------
// Search space

SearchSpace SearchSpace::unconstrained_preset() {
  return {{{"d", true, 10, 500, Transform::kLinear},
           {"L", true, 1, 200, Transform::kLinear},
           {"alpha", false, -1, 1, Transform::kLinear},
           {"lambda", false, 0.001, 0.1, Transform::kLog},
           {"N", true, 1, 200, Transform::kLinear}}};
}

SearchSpace SearchSpace::constrained_preset() {
  return {{{"d", true, 10, 200, Transform::kLinear},
           {"L", true, 1, 40, Transform::kLinear},
           {"alpha", false, -1, 1, Transform::kLinear},
           {"lambda", false, 0.001, 0.1, Transform::kLog},
           {"N", true, 1, 40, Transform::kLinear}}};
}

SearchSpace SearchSpace::preset(std::string_view name) {
  if (name == "unconstrained") return unconstrained_preset();
  if (name == "constrained") return constrained_preset();
  throw ValidationError("unknown search space preset '" + std::string(name) + "'");
}

const Dimension* SearchSpace::find(std::string_view name) const {
  for (const auto& d : dims) {
    if (d.name == name) return &d;
  }
  return nullptr;
}

std::vector<double> SearchSpace::to_unit(std::span<const double> x) const {
  std::vector<double> u(dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const auto& d = dims[i];
    double v = d.transform == Transform::kLog
                   ? (std::log(x[i]) - std::log(d.lo)) / (std::log(d.hi) - std::log(d.lo))
                   : (x[i] - d.lo) / (d.hi - d.lo);
    u[i] = std::clamp(v, 0.0, 1.0);
  }
  return u;
}

std::vector<double> SearchSpace::from_unit(std::span<const double> u) const {
  std::vector<double> x(dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const auto& d = dims[i];
    const double t = std::clamp(u[i], 0.0, 1.0);
    double v = d.transform == Transform::kLog
                   ? std::exp(std::log(d.lo) + t * (std::log(d.hi) - std::log(d.lo)))
                   : d.lo + t * (d.hi - d.lo);
    if (d.integer) v = std::round(v);
    x[i] = std::clamp(v, d.lo, d.hi);
  }
  return x;
}

HyperParams SearchSpace::apply(std::span<const double> x, HyperParams base) const {
  for (std::size_t i = 0; i < dims.size(); ++i) set_param(base, dims[i].name, x[i]);
  return base;
}

std::vector<double> SearchSpace::extract(const HyperParams& hp) const {
  std::vector<double> x;
  x.reserve(dims.size());
  for (const auto& d : dims) x.push_back(get_param(hp, d.name));
  return x;
}

double get_param(const HyperParams& hp, std::string_view name) {
  if (name == "d" || name == "dim") return hp.dim;
  if (name == "L" || name == "window") return hp.window;
  if (name == "alpha" || name == "ns_exponent") return hp.ns_exponent;
  if (name == "lambda" || name == "learning_rate") return hp.learning_rate;
  if (name == "N" || name == "negatives") return hp.negatives;
  if (name == "n" || name == "epochs") return hp.epochs;
  throw ValidationError("unknown hyperparameter '" + std::string(name) + "'");
}

void set_param(HyperParams& hp, std::string_view name, double value) {
  auto as_int = [&] { return static_cast<int>(std::lround(value)); };
  if (name == "d" || name == "dim") hp.dim = as_int();
  else if (name == "L" || name == "window") hp.window = as_int();
  else if (name == "alpha" || name == "ns_exponent") hp.ns_exponent = value;
  else if (name == "lambda" || name == "learning_rate") hp.learning_rate = value;
  else if (name == "N" || name == "negatives") hp.negatives = as_int();
  else if (name == "n" || name == "epochs") hp.epochs = as_int();
  else throw ValidationError("unknown hyperparameter '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Suggestion

namespace {

std::vector<double> sobol_at(const SearchSpace& space, std::size_t index, const SuggestConfig& cfg) {
  SobolSequence seq(static_cast<int>(space.size()),
                    cfg.scramble ? std::optional<std::uint64_t>(cfg.seed) : std::nullopt);
  seq.skip(index);
  return space.from_unit(seq.next());
}

bool same_point(const SearchSpace& space, std::span<const double> a, std::span<const double> b) {
  for (std::size_t i = 0; i < space.size(); ++i) {
    const double tol = 1e-9 * std::max(1.0, space.dims[i].hi - space.dims[i].lo);
    if (std::abs(a[i] - b[i]) > tol) return false;
  }
  return true;
}

bool evaluated(const SearchSpace& space, std::span<const Observation> history,
               std::span<const double> x) {
  return std::any_of(history.begin(), history.end(),
                     [&](const Observation& o) { return same_point(space, o.x, x); });
}

// Nearest point on the rounding grid (integer steps, 1% steps for continuous
// dimensions) that has not been evaluated yet.
std::vector<double> dedup(const SearchSpace& space, std::span<const Observation> history,
                          std::vector<double> x) {
  if (!evaluated(space, history, x)) return x;
  for (int radius = 1; radius <= 64; radius *= 2) {
    struct Move {
      double dist;
      std::size_t dim;
      double delta;
    };
    std::vector<Move> moves;
    for (std::size_t i = 0; i < space.size(); ++i) {
      const auto& d = space.dims[i];
      if (d.integer) {
        const double unit = radius / std::max(1.0, d.hi - d.lo);
        moves.push_back({unit, i, static_cast<double>(radius)});
        moves.push_back({unit, i, -static_cast<double>(radius)});
      } else {
        moves.push_back({0.01 * radius, i, +1});
        moves.push_back({0.01 * radius, i, -1});
      }
    }
    std::stable_sort(moves.begin(), moves.end(), [](const Move& a, const Move& b) { return a.dist < b.dist; });
    for (const auto& mv : moves) {
      auto y = x;
      const auto& d = space.dims[mv.dim];
      if (d.integer) {
        y[mv.dim] += mv.delta;
        if (y[mv.dim] < d.lo || y[mv.dim] > d.hi) continue;
      } else {
        auto u = space.to_unit(y);
        u[mv.dim] += mv.delta * mv.dist;
        if (u[mv.dim] < 0.0 || u[mv.dim] > 1.0) continue;
        y[mv.dim] = space.from_unit(u)[mv.dim];
      }
      if (!evaluated(space, history, y)) return y;
    }
  }
  return x;
}

}  // namespace

Suggestion suggest(std::span<const Observation> history, std::size_t issued,
                   const SearchSpace& space, const SuggestConfig& cfg, const FeasibleFn& feasible) {
  if (space.size() == 0) throw ValidationError("empty search space");
  const bool warmup = issued < static_cast<std::size_t>(std::max(0, cfg.initial_sobol));
  if (warmup || history.size() < 2) {
    return {dedup(space, history, sobol_at(space, issued, cfg)), "sobol", 0.0};
  }

  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  for (const auto& o : history) {
    xs.push_back(space.to_unit(o.x));
    ys.push_back(o.y);
  }
  GaussianProcess gp;
  GpConfig gcfg = cfg.gp;
  gcfg.seed = cfg.seed ^ (0x9e3779b97f4a7c15ULL * (issued + 1));
  try {
    gp.fit(xs, ys, gcfg);
  } catch (const std::exception& e) {
    spdlog::warn("GP fit failed ({}); falling back to a Sobol point", e.what());
    return {dedup(space, history, sobol_at(space, issued, cfg)), "fallback", 0.0};
  }
  const double best = *std::max_element(ys.begin(), ys.end());
  auto ei_at = [&](std::span<const double> u) {
    if (feasible && !feasible(space.from_unit(u))) return -1.0;
    const auto p = gp.predict(u);
    return expected_improvement(p.mean, p.std, best);
  };

  struct Cand {
    double ei;
    std::vector<double> u;
  };
  std::vector<Cand> cands;
  SobolSequence seq(static_cast<int>(space.size()), cfg.seed + 7919 * (issued + 1));
  for (int i = 0; i < cfg.candidates; ++i) {
    auto u = seq.next();
    cands.push_back({ei_at(u), std::move(u)});
  }
  const auto top = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, cfg.refine_top)), cands.size());
  std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(top), cands.end(),
                    [](const Cand& a, const Cand& b) { return a.ei > b.ei; });

  // Local refinement: shrinking Gaussian steps around each of the top candidates.
  Rng rng = make_rng(cfg.seed, 0x4ef, issued);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Cand winner = cands.front();
  for (std::size_t c = 0; c < top; ++c) {
    Cand cur = cands[c];
    double sigma = 0.05;
    for (int s = 0; s < cfg.refine_steps; ++s) {
      auto u = cur.u;
      for (auto& v : u) v = std::clamp(v + sigma * gauss(rng), 0.0, 1.0);
      const double e = ei_at(u);
      if (e > cur.ei) {
        cur = {e, std::move(u)};
      } else {
        sigma = std::max(1e-3, sigma * 0.9);
      }
    }
    if (cur.ei > winner.ei) winner = std::move(cur);
  }
  return {dedup(space, history, space.from_unit(winner.u)), "ei", winner.ei};
}

HyperParams suggest(std::span<const TrialRecord> history, const SearchSpace& space,
                    const SuggestConfig& cfg, const HyperParams& base) {
  std::vector<Observation> obs;
  for (const auto& r : history) {
    if (!r.failed) obs.push_back({space.extract(r.hp), r.objective});
  }
  return space.apply(suggest(obs, history.size(), space, cfg).x, base);
}

// ---------------------------------------------------------------------------
// Search loop

SearchMode parse_search_mode(std::string_view name) {
  if (name == "constrained") return SearchMode::kConstrained;
  if (name == "unconstrained") return SearchMode::kUnconstrained;
  throw ValidationError("unknown search mode '" + std::string(name) + "'");
}

std::string_view search_mode_name(SearchMode m) {
  return m == SearchMode::kConstrained ? "constrained" : "unconstrained";
}

std::optional<TrialRecord> incumbent(std::span<const TrialRecord> records, ModelType m) {
  std::optional<TrialRecord> best;
  for (const auto& r : records) {
    if (r.hp.model != m || r.failed || r.over_budget) continue;
    if (!best || r.objective > best->objective) best = r;
  }
  return best;
}

SeedRun train_and_evaluate(const EvalSplit& split, const HyperParams& hp, std::uint64_t seed,
                           int workers, const EvalOptions& eval) {
  TrainOptions opts;
  opts.workers = workers;
  opts.seed = seed;
  auto trained = train(split.train, hp, opts);
  EvalOptions e = eval;
  e.workers = workers;
  return {evaluate(trained.model, split.test_pairs, e), std::move(trained.stats)};
}

MultiSeedResult evaluate_seeds(const EvalSplit& split, const HyperParams& hp,
                               std::span<const std::uint64_t> seeds, int workers,
                               const EvalOptions& eval) {
  MultiSeedResult out;
  std::vector<EvalResult> evals;
  for (auto s : seeds) {
    auto run = train_and_evaluate(split, hp, s, workers, eval);
    out.mean_runtime_s += run.stats.total_wall_s;
    out.max_runtime_s = std::max(out.max_runtime_s, run.stats.total_wall_s);
    evals.push_back(run.eval);
    out.runs.push_back(std::move(run));
  }
  if (!seeds.empty()) out.mean_runtime_s /= static_cast<double>(seeds.size());
  out.summary = aggregate_runs(evals);
  return out;
}

namespace {

std::string now_iso() {
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::time(nullptr)));
}

void run_unconstrained_trial(const EvalSplit& split, const SearchConfig& cfg, TrialRecord& rec) {
  const auto& conv = cfg.convergence;
  HyperParams hp = rec.hp;
  hp.epochs = conv.max_epochs;
  double best_hr = -1, best_ndcg = 0;
  int best_epoch = 0, stale = 0;
  EvalOptions eval = cfg.eval;
  eval.workers = cfg.workers;

  TrainOptions opts;
  opts.workers = cfg.workers;
  opts.seed = cfg.seed;
  opts.lr_schedule_epochs = conv.max_epochs;
  opts.on_epoch = [&](int epoch, const EmbeddingModel& model) {
    const auto r = evaluate(model, split.test_pairs, eval);
    stale = r.hr_at_k >= best_hr + conv.min_delta ? 0 : stale + 1;
    if (r.hr_at_k > best_hr) {
      best_hr = r.hr_at_k;
      best_ndcg = r.ndcg_at_k;
      best_epoch = epoch;
    }
    return stale < conv.patience_epochs;
  };
  const auto stats = train(split.train, hp, opts).stats;
  rec.hp.epochs = best_epoch;
  rec.objective = best_hr;
  rec.ndcg = best_ndcg;
  rec.runtime_s = stats.total_wall_s;
}

void run_constrained_trial(const EvalSplit& split, const SearchConfig& cfg,
                           const BudgetContext& budget, const CorpusProfile& profile,
                           TrialRecord& rec) {
  const auto plan = epochs_for_budget(rec.hp, budget.budget, budget.cost, profile, budget.safety);
  rec.hp.epochs = plan.epochs;
  rec.predicted_s = plan.predicted_epoch_s * plan.epochs;
  if (plan.infeasible) {
    spdlog::warn("{}: one epoch is predicted to exceed the budget ({:.3f}s > {:.3f}s)",
                 to_string(rec.hp), plan.predicted_epoch_s, budget.budget.budget_s);
  }
  const auto run = train_and_evaluate(split, rec.hp, cfg.seed, cfg.workers, cfg.eval);
  rec.objective = run.eval.hr_at_k;
  rec.ndcg = run.eval.ndcg_at_k;
  rec.runtime_s = run.stats.total_wall_s;
  rec.over_budget = rec.runtime_s > budget.budget.budget_s;
  rec.corrected_epochs = rec.hp.epochs;
  if (rec.over_budget) {
    rec.corrected_epochs = std::max(
        1, static_cast<int>(std::floor(budget.safety * rec.hp.epochs * budget.budget.budget_s / rec.runtime_s)));
  }
}

}  // namespace

SearchResult run_search(const EvalSplit& split, const SearchConfig& cfg,
                        const BudgetContext* budget, std::span<const TrialRecord> prior,
                        const std::function<void(const TrialRecord&)>& on_trial) {
  if (cfg.mode == SearchMode::kConstrained && budget == nullptr) {
    throw ValidationError("constrained search needs a runtime budget");
  }
  std::optional<CorpusProfile> profile;
  if (budget) profile.emplace(split.train, cfg.base.t_ratio);

  SearchResult result;
  for (ModelType m : cfg.models) {
    std::vector<TrialRecord> records;
    double best = -std::numeric_limits<double>::infinity();
    int stale = 0;
    auto account = [&](const TrialRecord& r) {
      if (!r.failed && r.objective > best + cfg.stop.min_improvement) {
        stale = 0;
      } else {
        ++stale;
      }
      if (!r.failed) best = std::max(best, r.objective);
    };
    for (const auto& r : prior) {
      if (r.hp.model != m) continue;
      records.push_back(r);
      result.history.push_back(r);
      account(r);
    }

    while (static_cast<int>(records.size()) < cfg.stop.max_trials && stale < cfg.stop.patience) {
      HyperParams base = cfg.base;
      base.model = m;
      // Over-budget trials are scored as the worst feasible one.
      double floor_y = std::numeric_limits<double>::infinity();
      for (const auto& r : records) {
        if (!r.failed && !r.over_budget) floor_y = std::min(floor_y, r.objective);
      }
      if (!std::isfinite(floor_y)) floor_y = 0.0;
      std::vector<Observation> obs;
      for (const auto& r : records) {
        if (!r.failed) obs.push_back({cfg.space.extract(r.hp), r.over_budget ? std::min(r.objective, floor_y) : r.objective});
      }
      FeasibleFn feasible;
      if (cfg.mode == SearchMode::kConstrained) {
        feasible = [&](std::span<const double> x) {
          const auto hp = cfg.space.apply(x, base);
          return budget->cost.predict_epoch_s(*profile, hp) <= budget->safety * budget->budget.budget_s;
        };
      }
      const auto sug = suggest(obs, records.size(), cfg.space, cfg.suggest, feasible);

      TrialRecord rec;
      rec.trial = static_cast<int>(records.size());
      rec.hp = cfg.space.apply(sug.x, base);
      rec.source = sug.source;
      rec.seed = cfg.seed;
      rec.timestamp = now_iso();
      try {
        rec.hp.validate();
        if (cfg.mode == SearchMode::kConstrained) {
          run_constrained_trial(split, cfg, *budget, *profile, rec);
        } else {
          run_unconstrained_trial(split, cfg, rec);
        }
      } catch (const std::exception& e) {
        rec.failed = true;
        rec.error = e.what();
        spdlog::warn("trial {} ({}) failed: {}", rec.trial, to_string(rec.hp), e.what());
      }
      spdlog::info("[{} {:>2}] {:<8} {}  HR@10={:.2f} NDCG@10={:.4f} t={:.2f}s{}", model_name(m),
                   rec.trial, rec.source, to_string(rec.hp), rec.objective, rec.ndcg, rec.runtime_s,
                   rec.over_budget ? " OVER BUDGET" : "");
      records.push_back(rec);
      result.history.push_back(rec);
      account(rec);
      if (on_trial) on_trial(rec);
    }
    (m == ModelType::kSkipgram ? result.best_sg : result.best_cbow) = incumbent(records, m);
  }
  return result;
}

// ---------------------------------------------------------------------------

TransferReport sample_transfer(const Corpus& full, const TransferConfig& cfg) {
  TransferReport rep;
  const Corpus sample = sample_sequences(full, cfg.fraction, cfg.sample_seed);
  rep.full_stats = corpus_stats(full);
  rep.sample_stats = corpus_stats(sample);
  const int workers = cfg.search.workers;

  auto calibrate = [&](const EvalSplit& split, RuntimeBudget& out) {
    out = measure_default(split.train, workers, cfg.default_epochs, cfg.search.seed, cfg.budget_repeats,
                          cfg.search.base.t_ratio);
    CalibrationOptions co;
    co.workers = workers;
    co.seed = cfg.search.seed;
    auto probes = cfg.probes;
    for (auto& p : probes) p.t_ratio = cfg.search.base.t_ratio;
    return BudgetContext{out, fit_cost_model(split.train, probes, co), 0.95};
  };

  spdlog::info("sample: {} of {} sequences", rep.sample_stats.sequences, rep.full_stats.sequences);
  const EvalSplit sample_split = split_last_token(sample);
  const BudgetContext sample_ctx = calibrate(sample_split, rep.sample_budget);
  SearchConfig scfg = cfg.search;
  scfg.mode = SearchMode::kConstrained;
  rep.sample_search = run_search(sample_split, scfg, &sample_ctx);

  const EvalSplit full_split = split_last_token(full);
  const BudgetContext full_ctx = calibrate(full_split, rep.full_budget);
  const CorpusProfile full_profile(full_split.train, cfg.search.base.t_ratio);

  HyperParams defaults = cfg.search.base;
  defaults.model = ModelType::kSkipgram;
  defaults.epochs = cfg.default_epochs;
  rep.rows.push_back({"default", defaults,
                      evaluate_seeds(full_split, defaults, cfg.eval_seeds, workers, cfg.search.eval)});

  auto add_tuned = [&](const SearchResult& search, const std::string& label) {
    for (ModelType m : cfg.search.models) {
      const auto& best = search.best(m);
      if (!best) {
        spdlog::warn("no feasible {} incumbent for '{}'", model_name(m), label);
        continue;
      }
      HyperParams hp = best->hp;
      hp.epochs = epochs_for_budget(hp, full_ctx.budget, full_ctx.cost, full_profile).epochs;
      rep.rows.push_back({label, hp, evaluate_seeds(full_split, hp, cfg.eval_seeds, workers, cfg.search.eval)});
    }
  };
  add_tuned(rep.sample_search, "sample");
  if (cfg.tune_full) {
    rep.full_search = run_search(full_split, scfg, &full_ctx);
    add_tuned(*rep.full_search, "full");
  }
  return rep;
}

std::vector<double> parse_grid(std::string_view spec) {
  auto num = [&](std::string_view s) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      throw ValidationError("bad grid value '" + std::string(s) + "' in '" + std::string(spec) + "'");
    }
    return v;
  };
  std::vector<double> out;
  if (spec.find(',') != std::string_view::npos || spec.find(':') == std::string_view::npos) {
    std::size_t start = 0;
    while (start <= spec.size()) {
      auto comma = spec.find(',', start);
      auto item = spec.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
      if (!item.empty()) out.push_back(num(item));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (out.empty()) throw ValidationError("empty grid");
    return out;
  }
  const auto c1 = spec.find(':');
  const auto c2 = spec.find(':', c1 + 1);
  if (c2 == std::string_view::npos) throw ValidationError("grid must be lo:hi:step or a comma list");
  const double lo = num(spec.substr(0, c1));
  const double hi = num(spec.substr(c1 + 1, c2 - c1 - 1));
  const double step = num(spec.substr(c2 + 1));
  if (!(step > 0) || hi < lo) throw ValidationError("grid needs lo <= hi and step > 0");
  for (long i = 0;; ++i) {
    const double v = lo + static_cast<double>(i) * step;
    if (v > hi + 1e-9 * step) break;
    out.push_back(std::abs(v) < 1e-12 ? 0.0 : v);
  }
  return out;
}

std::vector<SweepRow> linear_sweep(const HyperParams& center, std::string_view dimension,
                                   std::span<const double> grid, const EvalSplit& split,
                                   std::span<const std::uint64_t> seeds, int workers,
                                   const EvalOptions& eval) {
  const double cval = get_param(center, dimension);
  std::vector<double> values(grid.begin(), grid.end());
  if (std::none_of(values.begin(), values.end(), [&](double v) { return std::abs(v - cval) < 1e-12; })) {
    values.push_back(cval);
  }
  std::sort(values.begin(), values.end());
  std::vector<SweepRow> rows;
  for (double v : values) {
    HyperParams hp = center;
    set_param(hp, dimension, v);
    hp.validate();
    SweepRow row;
    row.value = v;
    row.is_center = std::abs(v - cval) < 1e-12;
    row.summary = evaluate_seeds(split, hp, seeds, workers, eval).summary;
    spdlog::info("sweep {}={} HR@10={:.2f}±{:.2f}", dimension, v, row.summary.hr.mean,
                 row.summary.hr.half_width);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace w2vt
