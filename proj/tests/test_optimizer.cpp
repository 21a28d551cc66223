#include <doctest.h>

#include <cmath>
#include <set>

#include "support.hpp"
#include "w2vt/optimizer.hpp"
#include "w2vt/synth.hpp"

using namespace w2vt;
using namespace w2vt::testing;

namespace {

EvalSplit tiny_split() {
  PlantedConfig cfg;
  cfg.clusters = 30;
  cfg.cluster_size = 4;
  cfg.sequences = 500;
  cfg.seed = 5;
  return split_last_token(planted_corpus(cfg));
}

SearchSpace tiny_space() {
  return {{{"d", true, 4, 24, Transform::kLinear},
           {"L", true, 1, 6, Transform::kLinear},
           {"alpha", false, -1, 1, Transform::kLinear},
           {"lambda", false, 0.005, 0.1, Transform::kLog},
           {"N", true, 1, 6, Transform::kLinear}}};
}

// Every epoch of every configuration is predicted at 20 ms; the budget allows 5.
BudgetContext fixed_budget(const EvalSplit& split) {
  const CorpusProfile p(split.train, HyperParams{}.t_ratio);
  BudgetContext b;
  b.budget.budget_s = 0.1 / 0.95 + 1e-9;
  CostModel::Fit f;
  f.c_token = 0.02 / (p.raw_tokens() + p.kept_tokens());
  b.cost = CostModel(f, f);
  b.safety = 0.95;
  return b;
}

SearchConfig tiny_config() {
  SearchConfig cfg;
  cfg.space = tiny_space();
  cfg.models = {ModelType::kSkipgram};
  cfg.stop.max_trials = 6;
  cfg.suggest.initial_sobol = 3;
  cfg.suggest.candidates = 256;
  cfg.suggest.gp.restarts = 1;
  cfg.seed = 4;
  return cfg;
}

}  // namespace

TEST_SUITE("optimizer") {
  TEST_CASE("presets") {
    const auto u = SearchSpace::unconstrained_preset();
    const auto c = SearchSpace::constrained_preset();
    REQUIRE(u.size() == 5);
    REQUIRE(c.size() == 5);
    CHECK(u.find("d")->hi == 500);
    CHECK(u.find("L")->hi == 200);
    CHECK(u.find("N")->hi == 200);
    CHECK(c.find("d")->hi == 200);
    CHECK(c.find("L")->hi == 40);
    CHECK(c.find("N")->hi == 40);
    CHECK(c.find("alpha")->lo == -1);
    CHECK(c.find("alpha")->hi == 1);
    CHECK(c.find("lambda")->transform == Transform::kLog);
    CHECK(SearchSpace::preset("constrained").size() == 5);
    CHECK_THROWS_AS(SearchSpace::preset("huge"), ValidationError);
  }

  TEST_CASE("unit-cube mapping respects bounds and integrality") {
    const auto s = SearchSpace::unconstrained_preset();
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-0.2, 1.2);
    for (int i = 0; i < 2000; ++i) {
      std::vector<double> p(s.size());
      for (auto& x : p) x = u(rng);
      const auto x = s.from_unit(p);
      for (std::size_t j = 0; j < s.size(); ++j) {
        CHECK(x[j] >= s.dims[j].lo);
        CHECK(x[j] <= s.dims[j].hi);
        if (s.dims[j].integer) CHECK(x[j] == std::round(x[j]));
      }
      const auto back = s.from_unit(s.to_unit(x));
      for (std::size_t j = 0; j < s.size(); ++j) CHECK(back[j] == doctest::Approx(x[j]).epsilon(1e-9));
      const auto hp = s.apply(x, HyperParams{});
      CHECK_NOTHROW(hp.validate());
      const auto ex = s.extract(hp);
      for (std::size_t j = 0; j < s.size(); ++j) CHECK(ex[j] == doctest::Approx(x[j]));
    }
  }

  TEST_CASE("parameter names") {
    HyperParams hp;
    set_param(hp, "d", 64);
    set_param(hp, "window", 3);
    set_param(hp, "alpha", -0.5);
    set_param(hp, "learning_rate", 0.01);
    set_param(hp, "N", 7);
    set_param(hp, "n", 12);
    CHECK(hp.dim == 64);
    CHECK(get_param(hp, "L") == 3);
    CHECK(get_param(hp, "ns_exponent") == -0.5);
    CHECK(get_param(hp, "lambda") == 0.01);
    CHECK(hp.negatives == 7);
    CHECK(hp.epochs == 12);
    CHECK_THROWS_AS(set_param(hp, "beta", 1), ValidationError);
  }

  TEST_CASE("grid parsing") {
    const auto g = parse_grid("-1:1:0.25");
    REQUIRE(g.size() == 9);
    CHECK(g.front() == -1.0);
    CHECK(g[4] == doctest::Approx(0.0));
    CHECK(g.back() == doctest::Approx(1.0));
    CHECK(parse_grid("10,50,100") == std::vector<double>{10, 50, 100});
    CHECK(parse_grid("1:3:1") == std::vector<double>{1, 2, 3});
    CHECK_THROWS_AS(parse_grid("1:0:1"), ValidationError);
    CHECK_THROWS_AS(parse_grid("a,b"), ValidationError);
    CHECK_THROWS_AS(parse_grid("1:2"), ValidationError);
  }

  TEST_CASE("cold start uses Sobol points") {
    const SearchSpace s{{{"x", false, 0, 1, Transform::kLinear}, {"y", false, 0, 1, Transform::kLinear}}};
    SuggestConfig cfg;
    cfg.scramble = false;
    std::vector<Observation> hist;
    const auto a = suggest(hist, 0, s, cfg);
    CHECK(a.source == "sobol");
    CHECK(a.x == std::vector<double>{0.0, 0.0});
    hist.push_back({a.x, 1.0});
    const auto b = suggest(hist, 1, s, cfg);
    CHECK(b.source == "sobol");
    CHECK(b.x == std::vector<double>{0.5, 0.5});
  }

  TEST_CASE("finds the maximum of a 1-d quadratic") {
    const SearchSpace s{{{"x", false, 0, 1, Transform::kLinear}}};
    SuggestConfig cfg;
    cfg.initial_sobol = 4;
    cfg.seed = 3;
    std::vector<Observation> hist;
    double best_x = -1, best_y = -1e9;
    for (std::size_t t = 0; t < 25; ++t) {
      const auto sg = suggest(hist, t, s, cfg);
      const double y = -(sg.x[0] - 0.3) * (sg.x[0] - 0.3);
      hist.push_back({sg.x, y});
      if (y > best_y) {
        best_y = y;
        best_x = sg.x[0];
      }
    }
    CHECK(std::abs(best_x - 0.3) <= 0.05);
  }

  TEST_CASE("EI suggestions respect the feasibility filter") {
    const SearchSpace s{{{"x", false, 0, 1, Transform::kLinear}}};
    SuggestConfig cfg;
    cfg.initial_sobol = 3;
    cfg.seed = 6;
    const FeasibleFn feasible = [](std::span<const double> x) { return x[0] <= 0.4; };
    std::vector<Observation> hist;
    for (std::size_t t = 0; t < 12; ++t) {
      const auto sg = suggest(hist, t, s, cfg, feasible);
      if (sg.source == "ei") CHECK(sg.x[0] <= 0.4 + 1e-9);
      hist.push_back({sg.x, sg.x[0]});
    }
  }

  TEST_CASE("suggestions never repeat an evaluated point") {
    const SearchSpace s{{{"a", true, 1, 4, Transform::kLinear}, {"b", true, 1, 4, Transform::kLinear}}};
    SuggestConfig cfg;
    cfg.initial_sobol = 3;
    cfg.candidates = 128;
    std::vector<Observation> hist;
    std::set<std::vector<double>> seen;
    for (std::size_t t = 0; t < 14; ++t) {
      const auto sg = suggest(hist, t, s, cfg);
      CHECK(seen.insert(sg.x).second);
      hist.push_back({sg.x, -std::abs(sg.x[0] - 2) - std::abs(sg.x[1] - 3)});
    }
  }

  TEST_CASE("incumbent skips failed and over-budget trials") {
    std::vector<TrialRecord> recs(4);
    for (auto& r : recs) r.hp.model = ModelType::kSkipgram;
    recs[0].objective = 10;
    recs[1].objective = 50;
    recs[1].over_budget = true;
    recs[2].objective = 60;
    recs[2].failed = true;
    recs[3].objective = 20;
    recs[3].trial = 3;
    const auto best = incumbent(recs, ModelType::kSkipgram);
    REQUIRE(best);
    CHECK(best->trial == 3);
    CHECK_FALSE(incumbent(recs, ModelType::kCbow));
  }

  TEST_CASE("constrained search is deterministic and resumable") {
    const auto split = tiny_split();
    const auto cfg = tiny_config();
    const auto budget = fixed_budget(split);
    std::vector<TrialRecord> streamed;
    const auto a = run_search(split, cfg, &budget, {}, [&](const TrialRecord& r) { streamed.push_back(r); });
    REQUIRE(a.history.size() == 6);
    CHECK(streamed.size() == 6);
    CHECK(a.history[0].source == "sobol");
    CHECK(a.history[3].source == "ei");
    for (const auto& r : a.history) {
      CHECK_FALSE(r.failed);
      CHECK(r.hp.epochs == 5);
      CHECK(r.predicted_s == doctest::Approx(0.1));
    }
    REQUIRE(a.best_sg);
    CHECK_FALSE(a.best_sg->over_budget);
    CHECK(a.best_sg->runtime_s <= budget.budget.budget_s);

    const auto b = run_search(split, cfg, &budget);
    const std::vector<TrialRecord> prior(a.history.begin(), a.history.begin() + 3);
    const auto c = run_search(split, cfg, &budget, prior);
    REQUIRE(b.history.size() == 6);
    REQUIRE(c.history.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
      CAPTURE(i);
      CHECK(b.history[i].hp == a.history[i].hp);
      CHECK(b.history[i].objective == a.history[i].objective);
      CHECK(c.history[i].hp == a.history[i].hp);
      CHECK(c.history[i].objective == a.history[i].objective);
    }
  }

  TEST_CASE("constrained search needs a budget") {
    const auto split = tiny_split();
    CHECK_THROWS_AS(run_search(split, tiny_config(), nullptr), ValidationError);
  }

  TEST_CASE("unconstrained trials stop at their best epoch") {
    const auto split = tiny_split();
    auto cfg = tiny_config();
    cfg.mode = SearchMode::kUnconstrained;
    cfg.stop.max_trials = 2;
    cfg.convergence.max_epochs = 12;
    cfg.convergence.patience_epochs = 3;
    const auto r = run_search(split, cfg);
    REQUIRE(r.history.size() == 2);
    for (const auto& t : r.history) {
      CHECK(t.hp.epochs >= 1);
      CHECK(t.hp.epochs <= 12);
    }
  }

  TEST_CASE("stale trials stop the search") {
    const auto split = tiny_split();
    auto cfg = tiny_config();
    cfg.stop.max_trials = 10;
    cfg.stop.patience = 2;
    cfg.stop.min_improvement = 1000;
    const auto budget = fixed_budget(split);
    CHECK(run_search(split, cfg, &budget).history.size() == 3);
  }

  TEST_CASE("linear sweep marks the centre") {
    const auto split = tiny_split();
    HyperParams hp;
    hp.dim = 8;
    hp.epochs = 1;
    const std::vector<double> grid{-0.5, 0.0, 0.5, 1.0};
    const std::vector<std::uint64_t> seeds{1, 2};
    const auto rows = linear_sweep(hp, "alpha", grid, split, seeds, 1, {});
    REQUIRE(rows.size() == 5);
    int centres = 0;
    for (const auto& r : rows) {
      CHECK(r.summary.runs == 2);
      if (r.is_center) {
        ++centres;
        CHECK(r.value == 0.75);
      }
    }
    CHECK(centres == 1);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i - 1].value < rows[i].value);
  }

  TEST_CASE("sample transfer end to end") {
    PlantedConfig pc;
    pc.clusters = 30;
    pc.cluster_size = 4;
    pc.sequences = 500;
    const Corpus full = planted_corpus(pc);
    TransferConfig cfg;
    cfg.fraction = 1.0;
    cfg.search = tiny_config();
    cfg.search.models = {ModelType::kSkipgram, ModelType::kCbow};
    cfg.search.stop.max_trials = 3;
    cfg.eval_seeds = {1, 2};
    cfg.default_epochs = 1;
    const auto rep = sample_transfer(full, cfg);
    CHECK(rep.sample_stats.sequences == rep.full_stats.sequences);
    REQUIRE(rep.rows.size() == 3);
    CHECK(rep.rows[0].label == "default");
    CHECK(rep.rows[1].label == "sample");
    CHECK(rep.rows[1].hp.model == ModelType::kSkipgram);
    CHECK(rep.rows[2].hp.model == ModelType::kCbow);
    for (const auto& r : rep.rows) CHECK(r.result.runs.size() == 2);
  }
}
