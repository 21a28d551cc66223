#include <doctest.h>

#include "support.hpp"
#include "w2vt/io.hpp"

using namespace w2vt;
using namespace w2vt::testing;

TEST_SUITE("io") {
  TEST_CASE("hyperparameters round trip") {
    HyperParams hp;
    hp.model = ModelType::kCbow;
    hp.dim = 37;
    hp.window = 9;
    hp.ns_exponent = -0.25;
    hp.learning_rate = 0.0123;
    hp.negatives = 11;
    hp.epochs = 17;
    hp.t_ratio = 1e-4;
    const json j = hp;
    CHECK(j.at("m") == "cbow");
    CHECK(j.at("d") == 37);
    CHECK(j.get<HyperParams>() == hp);
  }

  TEST_CASE("trial record round trip") {
    TrialRecord r;
    r.trial = 4;
    r.hp.dim = 64;
    r.source = "ei";
    r.objective = 31.25;
    r.ndcg = 0.2;
    r.runtime_s = 1.5;
    r.predicted_s = 1.4;
    r.over_budget = true;
    r.corrected_epochs = 3;
    r.seed = 9;
    r.timestamp = "2026-01-01T00:00:00Z";
    const auto back = json(r).get<TrialRecord>();
    CHECK(back.trial == 4);
    CHECK(back.hp == r.hp);
    CHECK(back.source == "ei");
    CHECK(back.objective == 31.25);
    CHECK(back.over_budget);
    CHECK(back.corrected_epochs == 3);
    CHECK(back.seed == 9);
  }

  TEST_CASE("budget and cost model round trip") {
    RuntimeBudget b;
    b.budget_s = 2.5;
    b.workers = 3;
    b.hardware_tag = "box";
    b.measured_at = utc_now();
    const auto bb = json(b).get<RuntimeBudget>();
    CHECK(bb.budget_s == 2.5);
    CHECK(bb.workers == 3);
    CHECK(bb.hardware_tag == "box");

    CostModel::Fit sg{1e-8, 2e-9, 3e-10, {0.01}}, cbow{4e-8, 0, 5e-10, {}};
    const auto m = cost_model_from_json(cost_model_json(CostModel(sg, cbow)));
    CHECK(m.fit_for(ModelType::kSkipgram).c_step == 2e-9);
    CHECK(m.fit_for(ModelType::kCbow).c_token == 4e-8);
  }

  TEST_CASE("search config parsing") {
    const auto c = search_config_from_json(json::parse(R"({
      "mode": "unconstrained", "models": ["cbow"], "seed": 12,
      "stop": {"max_trials": 7}, "base": {"t": 0.001}
    })"));
    CHECK(c.mode == SearchMode::kUnconstrained);
    CHECK(c.space.find("d")->hi == 500);
    CHECK(c.models == std::vector<ModelType>{ModelType::kCbow});
    CHECK(c.seed == 12);
    CHECK(c.stop.max_trials == 7);
    CHECK(c.stop.patience == 20);
    CHECK(c.base.t_ratio == 0.001);

    const auto d = search_config_from_json(json::parse(R"({
      "space": [{"name": "d", "integer": true, "lo": 8, "hi": 64},
                {"name": "lambda", "lo": 0.001, "hi": 0.1, "log": true}]})"));
    REQUIRE(d.space.size() == 2);
    CHECK(d.space.dims[1].transform == Transform::kLog);

    CHECK_THROWS_WITH_AS(search_config_from_json(json::parse(R"({"budget": 3})")),
                         doctest::Contains("budget"), ValidationError);
    CHECK_THROWS_AS(search_config_from_json(json::parse(R"({"space": [{"name": "q", "lo": 0, "hi": 1}]})")),
                    ValidationError);
    CHECK_THROWS_AS(search_config_from_json(json::parse(R"({"space": [{"name": "d", "lo": 5, "hi": 1}]})")),
                    ValidationError);
  }

  TEST_CASE("split files round trip") {
    TempDir dir("split");
    auto split = split_last_token(corpus_of({{"a", "b", "c"}, {"b", "a"}, {"c", "d", "a", "b"}}));
    const auto files = save_split(split, dir.path, 3);
    const auto back = load_split(files.manifest);
    CHECK(back.train.sequences().size() == split.train.sequences().size());
    REQUIRE(back.test_pairs.size() == split.test_pairs.size());
    for (std::size_t i = 0; i < back.test_pairs.size(); ++i) {
      const auto& p = split.test_pairs[i];
      const auto& q = back.test_pairs[i];
      CHECK(back.train.vocab().token(q.query) == split.train.vocab().token(p.query));
      CHECK((q.target == kUnknownToken) == (p.target == kUnknownToken));
      if (p.target != kUnknownToken) {
        CHECK(back.train.vocab().token(q.target) == split.train.vocab().token(p.target));
      }
    }
    CHECK_THROWS_WITH_AS(load_split(dir / "nope.json"), doctest::Contains("nope.json"), ValidationError);
  }

  TEST_CASE("trial log tolerates a torn final line") {
    TempDir dir("log");
    const auto path = dir / "trials.jsonl";
    CHECK(read_trials(path).empty());
    TrialRecord r;
    for (int i = 0; i < 3; ++i) {
      r.trial = i;
      append_trial(path, r);
    }
    CHECK(read_trials(path).size() == 3);
    std::ofstream(path, std::ios::app) << "{\"trial\": 3, \"hp\"";
    CHECK(read_trials(path).size() == 3);
    write_file(path, "{bad}\n{}\n");
    CHECK_THROWS_AS(read_trials(path), ValidationError);
  }

  TEST_CASE("hashes and manifests") {
    CHECK(sha256_string("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    TempDir dir("man");
    write_file(dir / "in.txt", "abc");
    CHECK(sha256_file(dir / "in.txt") == sha256_string("abc"));
    RunManifest m;
    m.command = "train";
    m.config = {{"d", 10}};
    m.seeds = {1};
    m.add_input(dir / "in.txt");
    m.write(dir.path);
    const auto j = read_json(dir / "manifest.json");
    CHECK(j.at("command") == "train");
    CHECK(j.at("config_hash") == m.config_hash());
    RunManifest other = m;
    other.config = {{"d", 11}};
    CHECK(other.config_hash() != m.config_hash());
  }

  TEST_CASE("config diff names changed keys") {
    const json a = {{"seed", 1}, {"stop", {{"max_trials", 60}}}};
    const json b = {{"seed", 1}, {"stop", {{"max_trials", 30}}}};
    const auto d = config_diff(a, b);
    CHECK(d.find("/stop/max_trials") != std::string::npos);
    CHECK(d.find("60 -> 30") != std::string::npos);
    CHECK(config_diff(a, a).empty());
  }

  TEST_CASE("reports") {
    TrialRecord r;
    r.hp.dim = 42;
    r.objective = 12.5;
    const std::vector<TrialRecord> recs{r};
    const auto md = trials_markdown(recs);
    CHECK(md.find("HR@10") != std::string::npos);
    CHECK(md.find("42") != std::string::npos);
    std::vector<SummaryRow> rows{{"default", HyperParams{}, {{10, 1}, {0.1, 0.01}, 5}}};
    const auto csv = summary_csv(rows);
    CHECK(csv.rfind("label,model,hr_mean,hr_ci95,ndcg_mean,ndcg_ci95,runs", 0) == 0);
    CHECK(csv.find("default,sg,") != std::string::npos);
    std::vector<SweepRow> sw{{0.5, true, {}}, {1.0, false, {}}};
    const auto s = sweep_csv("alpha", sw);
    CHECK(std::count(s.begin(), s.end(), '\n') == 3);
  }
}
