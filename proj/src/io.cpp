#include "w2vt/io.hpp"

#include <fstream>
#include <sstream>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <openssl/evp.h>

namespace w2vt {

namespace fs = std::filesystem;

void to_json(json& j, const HyperParams& hp) {
  j = json{{"m", std::string(model_name(hp.model))},
           {"d", hp.dim},
           {"L", hp.window},
           {"alpha", hp.ns_exponent},
           {"lambda", hp.learning_rate},
           {"N", hp.negatives},
           {"n", hp.epochs},
           {"t", hp.t_ratio},
           {"min_count", hp.min_count}};
}

void from_json(const json& j, HyperParams& hp) {
  hp = HyperParams{};
  if (j.contains("m")) hp.model = parse_model(j.at("m").get<std::string>());
  if (j.contains("d")) hp.dim = j.at("d").get<int>();
  if (j.contains("L")) hp.window = j.at("L").get<int>();
  if (j.contains("alpha")) hp.ns_exponent = j.at("alpha").get<double>();
  if (j.contains("lambda")) hp.learning_rate = j.at("lambda").get<double>();
  if (j.contains("N")) hp.negatives = j.at("N").get<int>();
  if (j.contains("n")) hp.epochs = j.at("n").get<int>();
  if (j.contains("t")) hp.t_ratio = j.at("t").get<double>();
  if (j.contains("min_count")) hp.min_count = j.at("min_count").get<int>();
}

void to_json(json& j, const TrainStats& s) {
  j = json{{"epoch_times_s", s.epoch_times_s}, {"epoch_loss", s.epoch_loss},
           {"tokens_per_s", s.tokens_per_s},   {"final_loss", s.final_loss},
           {"total_wall_s", s.total_wall_s},   {"raw_tokens_processed", s.raw_tokens_processed},
           {"epochs_run", s.epochs_run}};
}

void to_json(json& j, const EvalResult& r) {
  j = json{{"k", r.k},
           {"hr_at_k", r.hr_at_k},
           {"ndcg_at_k", r.ndcg_at_k},
           {"n_pairs", r.n_pairs},
           {"n_discarded", r.n_discarded}};
  if (!r.per_pair.empty()) {
    auto& pp = j["per_pair"] = json::array();
    for (const auto& p : r.per_pair) pp.push_back({p.query, p.target, p.rank});
  }
}

void to_json(json& j, const MeanCi& m) { j = json{{"mean", m.mean}, {"ci95", m.half_width}}; }

void to_json(json& j, const RunSummary& s) {
  j = json{{"hr_at_10", s.hr}, {"ndcg_at_10", s.ndcg}, {"runs", s.runs}};
}

void to_json(json& j, const CorpusStats& s) {
  j = json{{"entities", s.entities},     {"sequences", s.sequences}, {"min_len", s.min_len},
           {"median_len", s.median_len}, {"mean_len", s.mean_len},   {"max_len", s.max_len},
           {"tokens", s.tokens},         {"tokens_per_entity", s.tokens_per_entity}};
}

void to_json(json& j, const TrialRecord& r) {
  j = json{{"trial", r.trial},
           {"hp", r.hp},
           {"source", r.source},
           {"objective", r.objective},
           {"ndcg", r.ndcg},
           {"runtime_s", r.runtime_s},
           {"predicted_s", r.predicted_s},
           {"over_budget", r.over_budget},
           {"corrected_epochs", r.corrected_epochs},
           {"failed", r.failed},
           {"seed", r.seed},
           {"timestamp", r.timestamp}};
  if (!r.error.empty()) j["error"] = r.error;
}

void from_json(const json& j, TrialRecord& r) {
  r = TrialRecord{};
  r.trial = j.at("trial").get<int>();
  r.hp = j.at("hp").get<HyperParams>();
  r.source = j.value("source", "");
  r.objective = j.at("objective").get<double>();
  r.ndcg = j.value("ndcg", 0.0);
  r.runtime_s = j.value("runtime_s", 0.0);
  r.predicted_s = j.value("predicted_s", 0.0);
  r.over_budget = j.value("over_budget", false);
  r.corrected_epochs = j.value("corrected_epochs", 0);
  r.failed = j.value("failed", false);
  r.error = j.value("error", "");
  r.seed = j.value("seed", std::uint64_t{0});
  r.timestamp = j.value("timestamp", "");
}

void to_json(json& j, const RuntimeBudget& b) {
  j = json{{"budget_s", b.budget_s},
           {"workers", b.workers},
           {"hardware_tag", b.hardware_tag},
           {"default_hp", b.default_hp},
           {"measured_at", b.measured_at}};
}

void from_json(const json& j, RuntimeBudget& b) {
  b.budget_s = j.at("budget_s").get<double>();
  b.workers = j.value("workers", 1);
  b.hardware_tag = j.value("hardware_tag", "");
  if (j.contains("default_hp")) b.default_hp = j.at("default_hp").get<HyperParams>();
  b.measured_at = j.value("measured_at", "");
}

void to_json(json& j, const CostModel::Fit& f) {
  j = json{{"c_token", f.c_token}, {"c_step", f.c_step}, {"c_vector", f.c_vector},
           {"residuals", f.residuals}, {"max_rel_error", f.max_rel_error()}};
}

void from_json(const json& j, CostModel::Fit& f) {
  f.c_token = j.at("c_token").get<double>();
  f.c_step = j.at("c_step").get<double>();
  f.c_vector = j.at("c_vector").get<double>();
  f.residuals = j.value("residuals", std::vector<double>{});
}

json cost_model_json(const CostModel& m) {
  return {{"sg", m.fit_for(ModelType::kSkipgram)}, {"cbow", m.fit_for(ModelType::kCbow)}};
}

CostModel cost_model_from_json(const json& j) {
  return {j.at("sg").get<CostModel::Fit>(), j.at("cbow").get<CostModel::Fit>()};
}

void to_json(json& j, const SearchSpace& s) {
  j = json::array();
  for (const auto& d : s.dims) {
    j.push_back({{"name", d.name},
                 {"integer", d.integer},
                 {"lo", d.lo},
                 {"hi", d.hi},
                 {"log", d.transform == Transform::kLog}});
  }
}

void to_json(json& j, const SearchConfig& c) {
  json models = json::array();
  for (auto m : c.models) models.push_back(std::string(model_name(m)));
  j = json{{"space", c.space},
           {"mode", std::string(search_mode_name(c.mode))},
           {"models", models},
           {"seed", c.seed},
           {"stop", {{"max_trials", c.stop.max_trials},
                     {"patience", c.stop.patience},
                     {"min_improvement", c.stop.min_improvement}}},
           {"convergence", {{"max_epochs", c.convergence.max_epochs},
                            {"patience_epochs", c.convergence.patience_epochs},
                            {"min_delta", c.convergence.min_delta}}},
           {"suggest", {{"initial_sobol", c.suggest.initial_sobol},
                        {"candidates", c.suggest.candidates},
                        {"refine_top", c.suggest.refine_top},
                        {"refine_steps", c.suggest.refine_steps},
                        {"scramble", c.suggest.scramble},
                        {"seed", c.suggest.seed}}},
           {"gp", {{"kernel", "matern52-ard"},
                   {"mean", "constant"},
                   {"restarts", c.suggest.gp.restarts},
                   {"min_noise_var", c.suggest.gp.min_noise_var}}},
           {"base", c.base},
           {"eval", {{"k", c.eval.k},
                     {"index", std::string(index_mode_name(c.eval.mode))},
                     {"keep_self_pairs", c.eval.keep_self_pairs}}}};
}

namespace {

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const json& j, std::initializer_list<std::string_view> known, std::string_view where) {
  for (const auto& [k, v] : j.items()) {
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      throw ValidationError(fmt::format("unknown key '{}' in {}", k, where));
    }
  }
}

}  // namespace

SearchConfig search_config_from_json(const json& j, SearchConfig c) {
  if (!j.is_object()) throw ValidationError("search config must be a JSON object");
  reject_unknown(j, {"space", "mode", "models", "seed", "stop", "convergence", "suggest", "base"},
                 "search config");
  try {
    if (j.contains("mode")) c.mode = parse_search_mode(j.at("mode").get<std::string>());
    if (j.contains("space")) {
      const auto& s = j.at("space");
      if (s.is_string()) {
        c.space = SearchSpace::preset(s.get<std::string>());
      } else {
        c.space.dims.clear();
        for (const auto& d : s) {
          Dimension dim;
          dim.name = d.at("name").get<std::string>();
          get_param(HyperParams{}, dim.name);
          dim.integer = d.value("integer", false);
          dim.lo = d.at("lo").get<double>();
          dim.hi = d.at("hi").get<double>();
          dim.transform = d.value("log", false) ? Transform::kLog : Transform::kLinear;
          if (!(dim.lo < dim.hi)) throw ValidationError("dimension '" + dim.name + "' needs lo < hi");
          if (dim.transform == Transform::kLog && !(dim.lo > 0)) {
            throw ValidationError("log dimension '" + dim.name + "' needs lo > 0");
          }
          c.space.dims.push_back(dim);
        }
      }
    } else if (j.contains("mode")) {
      c.space = c.mode == SearchMode::kConstrained ? SearchSpace::constrained_preset()
                                                   : SearchSpace::unconstrained_preset();
    }
    if (j.contains("models")) {
      c.models.clear();
      for (const auto& m : j.at("models")) c.models.push_back(parse_model(m.get<std::string>()));
    }
    take(j, "seed", c.seed);
    if (j.contains("stop")) {
      const auto& s = j.at("stop");
      take(s, "max_trials", c.stop.max_trials);
      take(s, "patience", c.stop.patience);
      take(s, "min_improvement", c.stop.min_improvement);
    }
    if (j.contains("convergence")) {
      const auto& s = j.at("convergence");
      take(s, "max_epochs", c.convergence.max_epochs);
      take(s, "patience_epochs", c.convergence.patience_epochs);
      take(s, "min_delta", c.convergence.min_delta);
    }
    if (j.contains("suggest")) {
      const auto& s = j.at("suggest");
      take(s, "initial_sobol", c.suggest.initial_sobol);
      take(s, "candidates", c.suggest.candidates);
      take(s, "refine_top", c.suggest.refine_top);
      take(s, "refine_steps", c.suggest.refine_steps);
      take(s, "scramble", c.suggest.scramble);
      take(s, "seed", c.suggest.seed);
    }
    if (j.contains("base")) {
      json merged = c.base;
      merged.update(j.at("base"));
      c.base = merged.get<HyperParams>();
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("search config: ") + e.what());
  }
  if (c.models.empty()) throw ValidationError("search config lists no models");
  return c;
}

// ---------------------------------------------------------------------------

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << text;
  if (!out) throw RuntimeFailure("write failed: " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

namespace {

std::string pairs_tsv(const Vocabulary& v, std::span<const TestPair> pairs) {
  std::string out;
  for (const auto& p : pairs) {
    out += v.token(p.query);
    out += '\t';
    if (p.target != kUnknownToken) out += v.token(p.target);
    out += '\n';
  }
  return out;
}

std::vector<TestPair> read_pairs(const fs::path& path, const Vocabulary& v) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::vector<TestPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ValidationError(fmt::format("{}:{}: expected 'query<TAB>target'", path.string(), lineno));
    }
    const auto q = v.find(std::string_view(line).substr(0, tab));
    if (!q) {
      throw ValidationError(fmt::format("{}:{}: query '{}' is not in the training vocabulary",
                                        path.string(), lineno, line.substr(0, tab)));
    }
    const auto t = v.find(std::string_view(line).substr(tab + 1));
    pairs.push_back({*q, t.value_or(kUnknownToken)});
  }
  return pairs;
}

}  // namespace

SplitFiles save_split(const EvalSplit& split, const fs::path& dir, std::uint64_t seed) {
  fs::create_directories(dir);
  SplitFiles f{dir / "train.txt", dir / "test_pairs.tsv", dir / "split.json"};
  write_plain(split.train, f.train);
  write_text(f.pairs, pairs_tsv(split.train.vocab(), split.test_pairs));
  json m{{"train_path", "train.txt"},
         {"test_pairs_path", "test_pairs.tsv"},
         {"protocol", split.protocol},
         {"seed", seed},
         {"n_test_pairs", split.test_pairs.size()}};
  if (split.test_start) m["test_start"] = *split.test_start;
  if (!split.holdout_pairs.empty()) {
    write_text(dir / "holdout_pairs.tsv", pairs_tsv(split.train.vocab(), split.holdout_pairs));
    m["holdout_pairs_path"] = "holdout_pairs.tsv";
    m["n_holdout_pairs"] = split.holdout_pairs.size();
  }
  write_json(f.manifest, m);
  return f;
}

EvalSplit load_split(const fs::path& manifest) {
  if (!fs::exists(manifest)) throw ValidationError("split file not found: " + manifest.string());
  const json m = read_json(manifest);
  const fs::path base = manifest.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  EvalSplit split;
  split.protocol = m.value("protocol", "last-token");
  if (m.contains("test_start")) split.test_start = m.at("test_start").get<std::int64_t>();
  split.train = ingest(resolve(m.at("train_path").get<std::string>()), CorpusFormat::kPlain, 1);
  split.test_pairs = read_pairs(resolve(m.at("test_pairs_path").get<std::string>()), split.train.vocab());
  if (m.contains("holdout_pairs_path")) {
    split.holdout_pairs = read_pairs(resolve(m.at("holdout_pairs_path").get<std::string>()), split.train.vocab());
  }
  return split;
}

void append_trial(const fs::path& path, const TrialRecord& rec) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw RuntimeFailure("cannot append to " + path.string());
  out << json(rec).dump() << '\n';
  out.flush();
}

std::vector<TrialRecord> read_trials(const fs::path& path) {
  std::vector<TrialRecord> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line).get<TrialRecord>());
    } catch (const json::exception& e) {
      // A torn final line from an interrupted write is dropped; anything else is an error.
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw ValidationError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string hex_digest(EVP_MD_CTX* ctx) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  for (unsigned i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

}  // namespace

std::string sha256_string(std::string_view data) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx, data.data(), data.size());
  return hex_digest(ctx);
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in.read(buf.data(), static_cast<std::streamsize>(buf.size())) || in.gcount() > 0) {
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return hex_digest(ctx);
}

std::string utc_now() { return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::time(nullptr))); }

void RunManifest::add_input(const fs::path& p) { inputs[p.string()] = sha256_file(p); }

json RunManifest::to_json() const {
  return {{"command", command},
          {"tool_version", kToolVersion},
          {"config", config},
          {"config_hash", config_hash()},
          {"seeds", seeds},
          {"inputs", inputs},
          {"outputs", outputs},
          {"started_at", started_at},
          {"finished_at", finished_at}};
}

std::string RunManifest::config_hash() const { return sha256_string(config.dump()); }

void RunManifest::write(const fs::path& dir) const { write_json(dir / "manifest.json", to_json()); }

std::string config_diff(const json& before, const json& after) {
  std::string out;
  for (const auto& op : json::diff(before, after)) {
    const auto path = op.at("path").get<std::string>();
    const auto kind = op.at("op").get<std::string>();
    json old_value;
    try {
      old_value = before.at(json::json_pointer(path));
    } catch (const json::exception&) {
    }
    if (kind == "remove") {
      out += fmt::format("  {}: {} -> (absent)\n", path, old_value.dump());
    } else if (kind == "add") {
      out += fmt::format("  {}: (absent) -> {}\n", path, op.at("value").dump());
    } else {
      out += fmt::format("  {}: {} -> {}\n", path, old_value.dump(), op.at("value").dump());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string trials_markdown(std::span<const TrialRecord> records) {
  std::string out =
      "| # | m | d | L | α | n | λ | N | HR@10 | NDCG@10 | runtime (s) | note |\n"
      "|---|---|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : records) {
    std::string note = r.failed ? "failed: " + r.error : r.over_budget ? "over budget" : "";
    out += fmt::format("| {} | {} | {} | {} | {:.2f} | {} | {:.4f} | {} | {:.2f} | {:.4f} | {:.2f} | {} |\n",
                       r.trial, model_name(r.hp.model), r.hp.dim, r.hp.window, r.hp.ns_exponent,
                       r.hp.epochs, r.hp.learning_rate, r.hp.negatives, r.objective, r.ndcg,
                       r.runtime_s, note);
  }
  return out;
}

std::string summary_markdown(std::span<const SummaryRow> rows) {
  std::string out =
      "| run | m | d | L | α | n | λ | N | HR@10 | NDCG@10 |\n"
      "|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    out += fmt::format("| {} | {} | {} | {} | {:.2f} | {} | {:.4f} | {} | {:.2f} ± {:.2f} | {:.4f} ± {:.4f} |\n",
                       r.label, model_name(r.hp.model), r.hp.dim, r.hp.window, r.hp.ns_exponent,
                       r.hp.epochs, r.hp.learning_rate, r.hp.negatives, r.summary.hr.mean,
                       r.summary.hr.half_width, r.summary.ndcg.mean, r.summary.ndcg.half_width);
  }
  return out;
}

std::string summary_csv(std::span<const SummaryRow> rows) {
  std::string out = "label,model,hr_mean,hr_ci95,ndcg_mean,ndcg_ci95,runs\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{}\n", r.label, model_name(r.hp.model), r.summary.hr.mean,
                       r.summary.hr.half_width, r.summary.ndcg.mean, r.summary.ndcg.half_width,
                       r.summary.runs);
  }
  return out;
}

std::string sweep_csv(std::string_view param, std::span<const SweepRow> rows) {
  std::string out = fmt::format("{},hr_mean,hr_ci95,ndcg_mean,ndcg_ci95,is_center\n", param);
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{}\n", r.value, r.summary.hr.mean, r.summary.hr.half_width,
                       r.summary.ndcg.mean, r.summary.ndcg.half_width, r.is_center ? 1 : 0);
  }
  return out;
}

}  // namespace w2vt
