#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "w2vt/budget.hpp"
#include "w2vt/synth.hpp"

using namespace w2vt;
using namespace w2vt::testing;

namespace {

Corpus small_planted() {
  PlantedConfig cfg;
  cfg.clusters = 30;
  cfg.cluster_size = 4;
  cfg.sequences = 300;
  return planted_corpus(cfg);
}

// Expected (context, centre) pairs by enumerating every position and window draw.
double brute_pairs(const Corpus& c, int window, bool sampled) {
  double total = 0;
  for (const auto& s : c.sequences()) {
    const auto m = static_cast<int>(s.size());
    for (int i = 0; i < m; ++i) {
      const int lo = sampled ? 1 : window;
      double sum = 0;
      for (int l = lo; l <= window; ++l) sum += std::min(l, i) + std::min(l, m - 1 - i);
      total += sum / (window - lo + 1);
    }
  }
  return total;
}

}  // namespace

TEST_SUITE("budget") {
  TEST_CASE("expected context pairs match enumeration") {
    const Corpus c = small_planted();
    for (bool sampled : {true, false}) {
      const CorpusProfile p(c, 0.0, sampled);
      CHECK(p.raw_tokens() == static_cast<double>(c.num_tokens()));
      CHECK(p.kept_tokens() == doctest::Approx(p.raw_tokens()));
      for (int w : {1, 2, 5, 12}) {
        CAPTURE(w);
        CHECK(p.context_pairs(w) == doctest::Approx(brute_pairs(c, w, sampled)).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("downsampling lowers the kept-token estimate") {
    const Corpus c = small_planted();
    const CorpusProfile none(c, 0.0), some(c, 1e-3);
    CHECK(some.kept_tokens() < none.kept_tokens());
    CHECK(some.kept_tokens() > 0);
  }

  TEST_CASE("fit recovers known coefficients") {
    const Corpus c = small_planted();
    const CorpusProfile p(c, 1e-4);
    const double ct = 3e-8, cs = 2e-9, cv = 5e-10;
    for (auto m : {ModelType::kSkipgram, ModelType::kCbow}) {
      std::vector<CostModel::Probe> probes;
      for (const auto& hp : default_probe_configs()) {
        if (hp.model != m) continue;
        const auto w = epoch_work(p, hp);
        probes.push_back({hp, ct * w.tokens + cs * w.steps + cv * w.vector_ops});
      }
      REQUIRE(probes.size() >= 4);
      const auto fit = CostModel::fit(p, probes);
      CHECK(fit.c_token == doctest::Approx(ct).epsilon(1e-6));
      CHECK(fit.c_step == doctest::Approx(cs).epsilon(1e-6));
      CHECK(fit.c_vector == doctest::Approx(cv).epsilon(1e-6));
      CHECK(fit.max_rel_error() < 1e-9);
    }
  }

  TEST_CASE("fit keeps coefficients non-negative") {
    const Corpus c = small_planted();
    const CorpusProfile p(c, 0.0);
    std::vector<CostModel::Probe> probes;
    std::mt19937_64 rng(2);
    for (const auto& hp : default_probe_configs()) {
      if (hp.model != ModelType::kSkipgram) continue;
      const auto w = epoch_work(p, hp);
      const double noise = 1.0 + 0.2 * (static_cast<double>(rng() % 1000) / 1000.0 - 0.5);
      probes.push_back({hp, (1e-8 * w.tokens + 1e-10 * w.vector_ops) * noise});
    }
    const auto fit = CostModel::fit(p, probes);
    CHECK(fit.c_token >= 0);
    CHECK(fit.c_step >= 0);
    CHECK(fit.c_vector >= 0);
  }

  TEST_CASE("too few probes is an error") {
    const Corpus c = small_planted();
    const CorpusProfile p(c, 0.0);
    std::vector<CostModel::Probe> probes(3, {HyperParams{}, 1.0});
    CHECK_THROWS_WITH_AS(CostModel::fit(p, probes), doctest::Contains("at least 4"), RuntimeFailure);
  }

  TEST_CASE("epochs for a budget") {
    const Corpus c = small_planted();
    const CorpusProfile p(c, 0.0);
    CostModel::Fit f;
    f.c_token = 0.125 / (2.0 * p.raw_tokens());
    const CostModel model(f, f);
    RuntimeBudget b;
    b.budget_s = 10;
    const HyperParams hp;
    auto plan = epochs_for_budget(hp, b, model, p, 0.75);
    CHECK(plan.predicted_epoch_s == doctest::Approx(0.125));
    CHECK(plan.epochs >= 59);
    CHECK(plan.epochs <= 60);
    CHECK(plan.epochs == static_cast<int>(std::floor(0.75 * 10 / plan.predicted_epoch_s)));
    CHECK_FALSE(plan.infeasible);
    plan = epochs_for_budget(hp, b, model, p, 0.5);
    CHECK(plan.epochs >= 39);
    CHECK(plan.epochs <= 40);

    b.budget_s = 0.1;
    plan = epochs_for_budget(hp, b, model, p);
    CHECK(plan.epochs == 1);
    CHECK(plan.infeasible);

    b.budget_s = 0;
    CHECK_THROWS_AS(epochs_for_budget(hp, b, model, p), ValidationError);
  }

  TEST_CASE("predicted epoch time grows with work") {
    const Corpus c = small_planted();
    const CorpusProfile p(c, 0.0);
    CostModel::Fit f{1e-8, 1e-9, 1e-10, {}};
    const CostModel model(f, f);
    HyperParams a, b;
    b.dim = 200;
    CHECK(model.predict_epoch_s(p, b) > model.predict_epoch_s(p, a));
    b = a;
    b.window = 10;
    CHECK(model.predict_epoch_s(p, b) > model.predict_epoch_s(p, a));
    b = a;
    b.negatives = 15;
    CHECK(model.predict_epoch_s(p, b) > model.predict_epoch_s(p, a));
  }

  TEST_CASE("default run is measured") {
    const Corpus c = small_planted();
    const auto b = measure_default(c, 1, 1, 3, 1);
    CHECK(b.budget_s > 0);
    CHECK(b.workers == 1);
    CHECK(b.default_hp.dim == 100);
    CHECK(b.default_hp.epochs == 1);
    CHECK_FALSE(b.measured_at.empty());
  }
}
