// w2vtune: train, evaluate and tune word2vec item embeddings.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "w2vt/budget.hpp"
#include "w2vt/corpus.hpp"
#include "w2vt/evaluator.hpp"
#include "w2vt/io.hpp"
#include "w2vt/optimizer.hpp"
#include "w2vt/synth.hpp"
#include "w2vt/trainer.hpp"

namespace fs = std::filesystem;
using namespace w2vt;

namespace {

struct HpFlags {
  std::string model = "sg";
  int dim = 100;
  int window = 5;
  double alpha = 0.75;
  double lambda = 0.025;
  int negatives = 5;
  int epochs = 5;
  double t_ratio = 1e-5;
  int min_count = 1;

  void add(CLI::App* app) {
    app->add_option("--model,-m", model, "sg or cbow")->capture_default_str();
    app->add_option("--d,--dim", dim, "embedding dimension")->capture_default_str();
    app->add_option("--L,--window", window, "maximum window")->capture_default_str();
    app->add_option("--alpha", alpha, "negative sampling exponent")->capture_default_str();
    app->add_option("--lambda,--lr", lambda, "initial learning rate")->capture_default_str();
    app->add_option("--N,--negatives", negatives, "negatives per positive")->capture_default_str();
    app->add_option("--epochs,-n", epochs, "training epochs")->capture_default_str();
    app->add_option("--t", t_ratio, "downsampling threshold ratio")->capture_default_str();
    app->add_option("--min-count", min_count, "minimum token count")->capture_default_str();
  }

  HyperParams get() const {
    HyperParams hp;
    hp.model = parse_model(model);
    hp.dim = dim;
    hp.window = window;
    hp.ns_exponent = alpha;
    hp.learning_rate = lambda;
    hp.negatives = negatives;
    hp.epochs = epochs;
    hp.t_ratio = t_ratio;
    hp.min_count = min_count;
    hp.validate();
    return hp;
  }
};

struct InputFlags {
  std::string path;
  std::string format = "plain";
  int min_count = 1;

  void add(CLI::App* app, bool required = true) {
    auto* o = app->add_option("--input,-i", path, "corpus file");
    if (required) o->required();
    app->add_option("--format", format, "plain or timestamped")->capture_default_str();
    app->add_option("--min-count", min_count, "minimum token count")->capture_default_str();
  }

  Corpus load() const {
    if (!fs::exists(path)) throw ValidationError("input not found: " + path);
    return ingest(path, parse_corpus_format(format), static_cast<std::uint64_t>(min_count));
  }
};

std::vector<std::uint64_t> parse_seeds(const std::string& spec) {
  std::vector<std::uint64_t> out;
  const auto dots = spec.find("..");
  try {
    if (dots != std::string::npos) {
      const auto lo = std::stoull(spec.substr(0, dots));
      const auto hi = std::stoull(spec.substr(dots + 2));
      if (hi < lo) throw ValidationError("bad seed range " + spec);
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    } else {
      std::size_t start = 0;
      while (start < spec.size()) {
        auto comma = spec.find(',', start);
        if (comma == std::string::npos) comma = spec.size();
        out.push_back(std::stoull(spec.substr(start, comma - start)));
        start = comma + 1;
      }
    }
  } catch (const std::logic_error&) {
    throw ValidationError("bad seed list '" + spec + "' (use 1..5 or 1,2,3)");
  }
  if (out.empty()) throw ValidationError("empty seed list");
  return out;
}

struct Context {
  int workers = 1;
  std::uint64_t seed = 1;
  std::vector<std::string> argv;
};

RunManifest start_manifest(const Context& ctx, std::string command, json config) {
  RunManifest m;
  m.command = std::move(command);
  m.config = std::move(config);
  m.config["workers"] = ctx.workers;
  m.config["argv"] = ctx.argv;
  m.seeds = {ctx.seed};
  m.started_at = utc_now();
  return m;
}

void finish(RunManifest& m, const fs::path& out) {
  m.finished_at = utc_now();
  m.write(out);
  spdlog::info("wrote {}", (out / "manifest.json").string());
}

EvalSplit load_split_arg(const std::string& path) {
  fs::path p(path);
  if (fs::is_directory(p)) p /= "split.json";
  return load_split(p);
}

fs::path split_manifest_path(const std::string& path) {
  fs::path p(path);
  return fs::is_directory(p) ? p / "split.json" : p;
}

EvalOptions eval_options(int k, const std::string& index, bool keep_self, int workers) {
  EvalOptions e;
  e.k = k;
  e.mode = parse_index_mode(index);
  e.keep_self_pairs = keep_self;
  e.workers = workers;
  return e;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Word2vec training and hyperparameter tuning for item sequences"};
  app.require_subcommand(1);
  app.fallthrough();
  Context ctx;
  ctx.argv.assign(argv, argv + argc);
  int workers = 0;
  std::string log_level = "info";
  app.add_option("--workers,-w", workers, "training threads (default: $W2VT_THREADS or 1)");
  app.add_option("--seed", ctx.seed, "RNG seed")->capture_default_str();
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error")->capture_default_str();

  // ingest -------------------------------------------------------------------
  auto* ingest_cmd = app.add_subcommand("ingest", "Read a corpus and report statistics");
  InputFlags ingest_in;
  std::string ingest_out;
  ingest_in.add(ingest_cmd);
  ingest_cmd->add_option("--out,-o", ingest_out, "output directory")->required();

  // split --------------------------------------------------------------------
  auto* split_cmd = app.add_subcommand("split", "Build a train/test split");
  InputFlags split_in;
  std::string split_out, protocol = "last-token";
  std::int64_t test_start = 0;
  double holdout = 0;
  split_in.add(split_cmd);
  split_cmd->add_option("--protocol", protocol, "last-token or temporal")->capture_default_str();
  split_cmd->add_option("--test-start", test_start, "temporal split boundary (seconds)");
  split_cmd->add_option("--holdout-frac", holdout, "fraction of test pairs kept out of tuning");
  split_cmd->add_option("--out,-o", split_out, "output directory")->required();

  // sample -------------------------------------------------------------------
  auto* sample_cmd = app.add_subcommand("sample", "Sample whole sequences");
  InputFlags sample_in;
  std::string sample_out;
  double fraction = 0.1;
  sample_in.add(sample_cmd);
  sample_cmd->add_option("--fraction", fraction, "sequence fraction")->capture_default_str();
  sample_cmd->add_option("--out,-o", sample_out, "output directory")->required();

  // synth --------------------------------------------------------------------
  auto* synth_cmd = app.add_subcommand("synth", "Generate a planted-cluster corpus");
  PlantedConfig planted;
  std::string synth_out;
  synth_cmd->add_option("--clusters", planted.clusters)->capture_default_str();
  synth_cmd->add_option("--cluster-size", planted.cluster_size)->capture_default_str();
  synth_cmd->add_option("--sequences", planted.sequences)->capture_default_str();
  synth_cmd->add_option("--min-length", planted.min_length)->capture_default_str();
  synth_cmd->add_option("--max-length", planted.max_length)->capture_default_str();
  synth_cmd->add_option("--stay", planted.stay)->capture_default_str();
  synth_cmd->add_option("--noise", planted.noise)->capture_default_str();
  synth_cmd->add_option("--zipf", planted.zipf)->capture_default_str();
  synth_cmd->add_option("--out,-o", synth_out, "output directory")->required();

  // budget measure -----------------------------------------------------------
  auto* budget_cmd = app.add_subcommand("budget", "Runtime budget tools");
  budget_cmd->require_subcommand(1);
  auto* measure_cmd = budget_cmd->add_subcommand("measure", "Time the default run and fit the cost model");
  std::string measure_split, measure_out;
  int measure_epochs = 5, measure_repeats = 1;
  bool no_calibrate = false;
  double measure_t = HyperParams{}.t_ratio;
  measure_cmd->add_option("--split,-s", measure_split, "split directory or split.json")->required();
  measure_cmd->add_option("--epochs", measure_epochs, "epochs of the default run")->capture_default_str();
  measure_cmd->add_option("--repeats", measure_repeats, "timed repeats (median used)")->capture_default_str();
  measure_cmd->add_option("--t", measure_t, "downsampling ratio used by the search")->capture_default_str();
  measure_cmd->add_flag("--no-calibrate", no_calibrate, "skip the cost-model probes");
  measure_cmd->add_option("--out,-o", measure_out, "output directory")->required();

  // train --------------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "Train embeddings");
  std::string train_input, train_split, train_format = "plain", train_out;
  HpFlags train_hp;
  bool no_window_sampling = false;
  train_cmd->add_option("--input,-i", train_input, "corpus file");
  train_cmd->add_option("--split,-s", train_split, "split directory (trains on its training part)");
  train_cmd->add_option("--format", train_format, "plain or timestamped")->capture_default_str();
  train_hp.add(train_cmd);
  train_cmd->add_flag("--no-window-sampling", no_window_sampling, "always use the full window");
  train_cmd->add_option("--out,-o", train_out, "output directory")->required();

  // eval ---------------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate embeddings by next-event prediction");
  std::string eval_split, eval_emb, eval_out, eval_index = "exact", eval_seeds = "1..5", eval_pairs = "test";
  int eval_k = 10, eval_runs = 0;
  bool keep_self = false, per_pair = false;
  HpFlags eval_hp;
  eval_cmd->add_option("--split,-s", eval_split, "split directory or split.json")->required();
  eval_cmd->add_option("--embeddings,-e", eval_emb, "word2vec text file");
  eval_cmd->add_option("--runs", eval_runs, "retrain this many times (one per seed) instead of loading embeddings");
  eval_cmd->add_option("--seeds", eval_seeds, "seeds for --runs, e.g. 1..5")->capture_default_str();
  eval_hp.add(eval_cmd);
  eval_cmd->add_option("--k", eval_k, "cutoff")->capture_default_str();
  eval_cmd->add_option("--index", eval_index, "exact or approx")->capture_default_str();
  eval_cmd->add_option("--pairs", eval_pairs, "test or holdout")->capture_default_str();
  eval_cmd->add_flag("--keep-self-pairs", keep_self, "count query == target pairs instead of discarding them");
  eval_cmd->add_flag("--per-pair", per_pair, "record per-pair ranks");
  eval_cmd->add_option("--out,-o", eval_out, "output directory");

  // tune ---------------------------------------------------------------------
  auto* tune_cmd = app.add_subcommand("tune", "Hyperparameter search");
  std::string tune_split, tune_config, tune_budget, tune_out, tune_mode, tune_models;
  int tune_max_trials = 0;
  tune_cmd->add_option("--split,-s", tune_split, "split directory or split.json")->required();
  tune_cmd->add_option("--mode", tune_mode, "constrained or unconstrained");
  tune_cmd->add_option("--config,-c", tune_config, "search config (JSON)");
  tune_cmd->add_option("--budget", tune_budget, "directory with budget.json and cost_model.json");
  tune_cmd->add_option("--max-trials", tune_max_trials, "trial cap per model type");
  tune_cmd->add_option("--models", tune_models, "comma list of sg,cbow");
  tune_cmd->add_option("--out,-o", tune_out, "output directory")->required();

  // sample-tune --------------------------------------------------------------
  auto* stune_cmd = app.add_subcommand("sample-tune", "Tune on a sequence sample, evaluate on the full corpus");
  InputFlags stune_in;
  std::string stune_config, stune_out, stune_seeds = "1..5";
  double stune_fraction = 0.1;
  int stune_max_trials = 0;
  bool tune_full = false;
  stune_in.add(stune_cmd);
  stune_cmd->add_option("--fraction", stune_fraction, "sequence fraction")->capture_default_str();
  stune_cmd->add_option("--config,-c", stune_config, "search config (JSON)");
  stune_cmd->add_option("--max-trials", stune_max_trials, "trial cap per model type");
  stune_cmd->add_option("--seeds", stune_seeds, "evaluation seeds")->capture_default_str();
  stune_cmd->add_flag("--tune-full", tune_full, "also run the constrained search on the full corpus");
  stune_cmd->add_option("--out,-o", stune_out, "output directory")->required();

  // sweep --------------------------------------------------------------------
  auto* sweep_cmd = app.add_subcommand("sweep", "Vary one hyperparameter around a centre");
  std::string sweep_split, sweep_param, sweep_grid, sweep_center, sweep_out, sweep_seeds = "1..5";
  HpFlags sweep_hp;
  sweep_cmd->add_option("--split,-s", sweep_split, "split directory or split.json")->required();
  sweep_cmd->add_option("--param,-p", sweep_param, "d, L, alpha, lambda, N or n")->required();
  sweep_cmd->add_option("--grid,-g", sweep_grid, "lo:hi:step or comma list")->required();
  sweep_cmd->add_option("--center", sweep_center, "JSON file with centre hyperparameters (e.g. best.json)");
  sweep_hp.add(sweep_cmd);
  sweep_cmd->add_option("--seeds", sweep_seeds, "seeds per grid point")->capture_default_str();
  sweep_cmd->add_option("--out,-o", sweep_out, "output directory")->required();

  // report -------------------------------------------------------------------
  auto* report_cmd = app.add_subcommand("report", "Render a trial log as a Markdown table");
  std::string report_trials, report_out;
  report_cmd->add_option("--trials,-t", report_trials, "trials.jsonl")->required();
  report_cmd->add_option("--out,-o", report_out, "output Markdown file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  spdlog::set_default_logger(spdlog::stderr_color_mt("w2vtune"));
  spdlog::set_level(spdlog::level::from_str(log_level));
  spdlog::set_pattern("[%H:%M:%S] %^%l%$ %v");
  if (workers <= 0) {
    const char* env = std::getenv("W2VT_THREADS");
    workers = env ? std::atoi(env) : 1;
    if (workers <= 0) workers = 1;
  }
  ctx.workers = workers;

  try {
    if (*ingest_cmd) {
      const Corpus c = ingest_in.load();
      const fs::path out(ingest_out);
      fs::create_directories(out);
      write_plain(c, out / "corpus.txt");
      const json stats = corpus_stats(c);
      write_json(out / "stats.json", stats);
      std::cout << stats.dump(2) << "\n";
      auto m = start_manifest(ctx, "ingest", {{"format", ingest_in.format}, {"min_count", ingest_in.min_count}});
      m.add_input(ingest_in.path);
      m.outputs = {"corpus.txt", "stats.json"};
      finish(m, out);
    } else if (*split_cmd) {
      const Corpus c = split_in.load();
      EvalSplit split;
      if (protocol == "last-token") {
        split = split_last_token(c);
      } else if (protocol == "temporal") {
        if (split_cmd->count("--test-start") == 0) throw ValidationError("temporal split needs --test-start");
        split = split_temporal(c, test_start);
      } else {
        throw ValidationError("unknown protocol '" + protocol + "'");
      }
      if (holdout > 0) hold_out_pairs(split, holdout, ctx.seed);
      const fs::path out(split_out);
      save_split(split, out, ctx.seed);
      spdlog::info("{} training sequences, {} test pairs, {} holdout pairs", split.train.num_sequences(),
                   split.test_pairs.size(), split.holdout_pairs.size());
      json cfg{{"protocol", protocol}, {"format", split_in.format}, {"min_count", split_in.min_count},
               {"holdout_frac", holdout}};
      if (protocol == "temporal") cfg["test_start"] = test_start;
      auto m = start_manifest(ctx, "split", cfg);
      m.add_input(split_in.path);
      m.outputs = {"train.txt", "test_pairs.tsv", "split.json"};
      if (holdout > 0) m.outputs.push_back("holdout_pairs.tsv");
      finish(m, out);
    } else if (*sample_cmd) {
      const Corpus c = sample_in.load();
      const Corpus s = sample_sequences(c, fraction, ctx.seed);
      const fs::path out(sample_out);
      fs::create_directories(out);
      write_plain(s, out / "sample.txt");
      write_json(out / "stats.json", {{"full", corpus_stats(c)}, {"sample", corpus_stats(s)}});
      auto m = start_manifest(ctx, "sample", {{"fraction", fraction}, {"format", sample_in.format}});
      m.add_input(sample_in.path);
      m.outputs = {"sample.txt", "stats.json"};
      finish(m, out);
    } else if (*synth_cmd) {
      planted.seed = ctx.seed;
      const Corpus c = planted_corpus(planted);
      const fs::path out(synth_out);
      fs::create_directories(out);
      write_plain(c, out / "corpus.txt");
      write_json(out / "stats.json", corpus_stats(c));
      auto m = start_manifest(ctx, "synth",
                              {{"clusters", planted.clusters}, {"cluster_size", planted.cluster_size},
                               {"sequences", planted.sequences}, {"min_length", planted.min_length},
                               {"max_length", planted.max_length}, {"stay", planted.stay},
                               {"noise", planted.noise}, {"zipf", planted.zipf}});
      m.outputs = {"corpus.txt", "stats.json"};
      finish(m, out);
    } else if (*measure_cmd) {
      const EvalSplit split = load_split_arg(measure_split);
      const fs::path out(measure_out);
      fs::create_directories(out);
      const auto budget = measure_default(split.train, workers, measure_epochs, ctx.seed, measure_repeats, measure_t);
      write_json(out / "budget.json", budget);
      spdlog::info("default run: {:.3f}s on {}", budget.budget_s, budget.hardware_tag);
      auto m = start_manifest(ctx, "budget measure",
                              {{"epochs", measure_epochs}, {"repeats", measure_repeats}, {"t", measure_t}, {"calibrate", !no_calibrate}});
      m.add_input(split_manifest_path(measure_split));
      m.outputs = {"budget.json"};
      if (!no_calibrate) {
        CalibrationOptions co;
        co.workers = workers;
        co.seed = ctx.seed;
        std::vector<CostModel::Probe> probes;
        const auto model = fit_cost_model(split.train, default_probe_configs(measure_t), co, &probes);
        json pj = json::array();
        for (const auto& p : probes) pj.push_back({{"hp", p.hp}, {"epoch_s", p.epoch_s}});
        json cm = cost_model_json(model);
        cm["probes"] = pj;
        write_json(out / "cost_model.json", cm);
        m.outputs.push_back("cost_model.json");
      }
      finish(m, out);
    } else if (*train_cmd) {
      if (train_input.empty() == train_split.empty()) throw ValidationError("give exactly one of --input or --split");
      const HyperParams hp = train_hp.get();
      const Corpus corpus = train_split.empty()
                                ? ingest(train_input, parse_corpus_format(train_format), static_cast<std::uint64_t>(hp.min_count))
                                : load_split_arg(train_split).train;
      TrainOptions opts;
      opts.workers = workers;
      opts.seed = ctx.seed;
      opts.window_sampling = !no_window_sampling;
      const auto result = train(corpus, hp, opts);
      const fs::path out(train_out);
      fs::create_directories(out);
      write_word2vec_text(result.model, out / "embeddings.txt");
      write_json(out / "stats.json", result.stats);
      spdlog::info("{} epochs in {:.3f}s, final loss {:.4f}", result.stats.epochs_run, result.stats.total_wall_s,
                   result.stats.final_loss);
      auto m = start_manifest(ctx, "train", {{"hp", hp}, {"window_sampling", !no_window_sampling}});
      m.add_input(train_split.empty() ? fs::path(train_input) : split_manifest_path(train_split));
      m.outputs = {"embeddings.txt", "stats.json"};
      finish(m, out);
    } else if (*eval_cmd) {
      EvalSplit split = load_split_arg(eval_split);
      if (eval_pairs == "holdout") {
        if (split.holdout_pairs.empty()) throw ValidationError("split has no holdout pairs");
        split.test_pairs = split.holdout_pairs;
      } else if (eval_pairs != "test") {
        throw ValidationError("--pairs must be test or holdout");
      }
      auto eopts = eval_options(eval_k, eval_index, keep_self, workers);
      eopts.record_pairs = per_pair;
      json result;
      json cfg{{"k", eval_k}, {"index", eval_index}, {"keep_self_pairs", keep_self}, {"pairs", eval_pairs}};
      if (eval_runs > 0) {
        auto seeds = parse_seeds(eval_seeds);
        if (seeds.size() < static_cast<std::size_t>(eval_runs)) {
          throw ValidationError(fmt::format("--runs {} needs at least that many seeds", eval_runs));
        }
        seeds.resize(static_cast<std::size_t>(eval_runs));
        const HyperParams hp = eval_hp.get();
        const auto r = evaluate_seeds(split, hp, seeds, workers, eopts);
        result = {{"hp", hp}, {"summary", r.summary}, {"seeds", seeds}, {"mean_runtime_s", r.mean_runtime_s}};
        for (const auto& run : r.runs) result["runs"].push_back(run.eval);
        std::cout << fmt::format("HR@{} = {:.2f} ± {:.2f}   NDCG@{} = {:.4f} ± {:.4f}   ({} runs)\n", eval_k,
                                 r.summary.hr.mean, r.summary.hr.half_width, eval_k, r.summary.ndcg.mean,
                                 r.summary.ndcg.half_width, r.summary.runs);
        cfg["hp"] = hp;
        cfg["seeds"] = seeds;
      } else {
        if (eval_emb.empty()) throw ValidationError("give --embeddings or --runs");
        if (!fs::exists(eval_emb)) throw ValidationError("embeddings not found: " + eval_emb);
        const auto model = bind_embeddings(read_word2vec_text(eval_emb), split.train.vocab());
        const auto r = evaluate(model, split.test_pairs, eopts);
        result = r;
        std::cout << fmt::format("HR@{} = {:.2f}   NDCG@{} = {:.4f}   ({} pairs, {} discarded)\n", eval_k,
                                 r.hr_at_k, eval_k, r.ndcg_at_k, r.n_pairs, r.n_discarded);
      }
      if (!eval_out.empty()) {
        const fs::path out(eval_out);
        fs::create_directories(out);
        write_json(out / "eval.json", result);
        auto m = start_manifest(ctx, "eval", cfg);
        m.add_input(split_manifest_path(eval_split));
        if (!eval_emb.empty() && eval_runs == 0) m.add_input(eval_emb);
        m.outputs = {"eval.json"};
        finish(m, out);
      }
    } else if (*tune_cmd) {
      const EvalSplit split = load_split_arg(tune_split);
      SearchConfig cfg;
      cfg.seed = ctx.seed;
      cfg.suggest.seed = ctx.seed;
      if (!tune_config.empty()) cfg = search_config_from_json(read_json(tune_config), cfg);
      if (!tune_mode.empty()) {
        cfg.mode = parse_search_mode(tune_mode);
        const bool explicit_space = !tune_config.empty() && read_json(tune_config).contains("space");
        if (!explicit_space) {
          cfg.space = cfg.mode == SearchMode::kConstrained ? SearchSpace::constrained_preset()
                                                           : SearchSpace::unconstrained_preset();
        }
      }
      if (tune_max_trials > 0) cfg.stop.max_trials = tune_max_trials;
      if (!tune_models.empty()) {
        cfg.models.clear();
        std::stringstream ss(tune_models);
        for (std::string m; std::getline(ss, m, ',');) cfg.models.push_back(parse_model(m));
      }
      cfg.workers = workers;

      const fs::path out(tune_out);
      fs::create_directories(out);
      std::optional<BudgetContext> ctx_budget;
      if (cfg.mode == SearchMode::kConstrained) {
        const fs::path bdir = tune_budget.empty() ? out : fs::path(tune_budget);
        RuntimeBudget budget;
        CostModel cost;
        if (fs::exists(bdir / "budget.json")) {
          budget = read_json(bdir / "budget.json").get<RuntimeBudget>();
        } else {
          spdlog::info("no budget found; measuring the default run");
          budget = measure_default(split.train, workers, 5, ctx.seed, 1, cfg.base.t_ratio);
          write_json(out / "budget.json", budget);
        }
        if (fs::exists(bdir / "cost_model.json")) {
          cost = cost_model_from_json(read_json(bdir / "cost_model.json"));
        } else {
          spdlog::info("no cost model found; calibrating");
          CalibrationOptions co;
          co.workers = workers;
          co.seed = ctx.seed;
          cost = fit_cost_model(split.train, default_probe_configs(cfg.base.t_ratio), co);
          write_json(out / "cost_model.json", cost_model_json(cost));
        }
        if (budget.default_hp.t_ratio != cfg.base.t_ratio) {
          spdlog::warn("budget was measured with t={}, searching with t={}", budget.default_hp.t_ratio,
                       cfg.base.t_ratio);
        }
        if (budget.workers != workers) {
          spdlog::warn("budget was measured with {} workers, tuning with {}", budget.workers, workers);
        }
        ctx_budget = BudgetContext{budget, cost, 0.95};
      }

      json config = cfg;
      config["split"] = sha256_file(split_manifest_path(tune_split));
      if (ctx_budget) config["budget_s"] = ctx_budget->budget.budget_s;
      const fs::path log = out / "trials.jsonl";
      const fs::path cfg_path = out / "search_config.json";
      std::vector<TrialRecord> prior;
      if (fs::exists(log)) {
        if (!fs::exists(cfg_path)) throw ValidationError(log.string() + " exists without search_config.json");
        const json old = read_json(cfg_path);
        if (old != config) {
          throw ValidationError("refusing to resume: search config changed\n" + config_diff(old, config));
        }
        prior = read_trials(log);
        spdlog::info("resuming from {} recorded trials", prior.size());
      }
      write_json(cfg_path, config);
      auto m = start_manifest(ctx, "tune", config);
      m.add_input(split_manifest_path(tune_split));

      const auto result = run_search(split, cfg, ctx_budget ? &*ctx_budget : nullptr, prior,
                                     [&](const TrialRecord& r) { append_trial(log, r); });

      std::string report = "# Search\n\n";
      std::vector<SummaryRow> best_rows;
      json best = json::object();
      for (ModelType mt : cfg.models) {
        std::vector<TrialRecord> rows;
        for (const auto& r : result.history) {
          if (r.hp.model == mt) rows.push_back(r);
        }
        report += fmt::format("## {}\n\n{}\n", model_name(mt), trials_markdown(rows));
        if (const auto& b = result.best(mt)) {
          best[std::string(model_name(mt))] = *b;
          report += fmt::format("Best {}: HR@10 = {:.2f}, NDCG@10 = {:.4f} ({})\n\n", model_name(mt), b->objective,
                                b->ndcg, to_string(b->hp));
        }
      }
      write_text(out / "report.md", report);
      write_json(out / "best.json", best);
      m.outputs = {"trials.jsonl", "search_config.json", "report.md", "best.json"};
      finish(m, out);
    } else if (*stune_cmd) {
      const Corpus full = stune_in.load();
      TransferConfig tc;
      tc.fraction = stune_fraction;
      tc.sample_seed = ctx.seed;
      tc.search.seed = ctx.seed;
      tc.search.suggest.seed = ctx.seed;
      if (!stune_config.empty()) tc.search = search_config_from_json(read_json(stune_config), tc.search);
      if (stune_max_trials > 0) tc.search.stop.max_trials = stune_max_trials;
      tc.search.workers = workers;
      tc.eval_seeds = parse_seeds(stune_seeds);
      tc.tune_full = tune_full;

      const auto rep = sample_transfer(full, tc);
      const fs::path out(stune_out);
      fs::create_directories(out);
      std::vector<SummaryRow> rows;
      for (const auto& r : rep.rows) rows.push_back({r.label, r.hp, r.result.summary});
      for (const auto& r : rep.sample_search.history) append_trial(out / "sample_trials.jsonl", r);
      if (rep.full_search) {
        for (const auto& r : rep.full_search->history) append_trial(out / "full_trials.jsonl", r);
      }
      std::string report = "# Sample transfer\n\n";
      report += fmt::format("Sample: {} of {} sequences ({} of {} tokens).\n\n", rep.sample_stats.sequences,
                            rep.full_stats.sequences, rep.sample_stats.tokens, rep.full_stats.tokens);
      report += fmt::format("Budgets: sample {:.3f}s, full {:.3f}s.\n\n", rep.sample_budget.budget_s,
                            rep.full_budget.budget_s);
      report += "## Full-corpus evaluation\n\n" + summary_markdown(rows) + "\n";
      report += "## Sample search\n\n" + trials_markdown(rep.sample_search.history) + "\n";
      write_text(out / "report.md", report);
      write_text(out / "transfer.csv", summary_csv(rows));
      write_json(out / "sample_manifest.json",
                 {{"fraction", stune_fraction}, {"seed", ctx.seed}, {"full", rep.full_stats},
                  {"sample", rep.sample_stats}, {"sample_budget", rep.sample_budget},
                  {"full_budget", rep.full_budget}});
      std::cout << summary_markdown(rows);
      json config = tc.search;
      config["fraction"] = stune_fraction;
      config["eval_seeds"] = tc.eval_seeds;
      config["tune_full"] = tune_full;
      auto m = start_manifest(ctx, "sample-tune", config);
      m.add_input(stune_in.path);
      m.outputs = {"report.md", "transfer.csv", "sample_trials.jsonl", "sample_manifest.json"};
      if (rep.full_search) m.outputs.push_back("full_trials.jsonl");
      finish(m, out);
    } else if (*sweep_cmd) {
      const EvalSplit split = load_split_arg(sweep_split);
      HyperParams center = sweep_hp.get();
      if (!sweep_center.empty()) {
        json cj = read_json(sweep_center);
        if (cj.contains(sweep_hp.model)) cj = cj.at(sweep_hp.model);
        if (cj.contains("hp")) cj = cj.at("hp");
        center = cj.get<HyperParams>();
        center.validate();
      }
      const auto grid = parse_grid(sweep_grid);
      const auto seeds = parse_seeds(sweep_seeds);
      EvalOptions eopts;
      eopts.workers = workers;
      const auto rows = linear_sweep(center, sweep_param, grid, split, seeds, workers, eopts);
      const fs::path out(sweep_out);
      fs::create_directories(out);
      write_text(out / "sweep.csv", sweep_csv(sweep_param, rows));
      auto m = start_manifest(ctx, "sweep", {{"param", sweep_param}, {"grid", sweep_grid}, {"center", center},
                                              {"seeds", seeds}});
      m.add_input(split_manifest_path(sweep_split));
      if (!sweep_center.empty()) m.add_input(sweep_center);
      m.outputs = {"sweep.csv"};
      finish(m, out);
    } else if (*report_cmd) {
      if (!fs::exists(report_trials)) throw ValidationError("trial log not found: " + report_trials);
      const auto records = read_trials(report_trials);
      const auto md = trials_markdown(records);
      if (report_out.empty()) {
        std::cout << md;
      } else {
        write_text(report_out, md);
      }
    }
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
