#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "w2vt/budget.hpp"
#include "w2vt/corpus.hpp"
#include "w2vt/evaluator.hpp"
#include "w2vt/optimizer.hpp"
#include "w2vt/trainer.hpp"

namespace w2vt {

using nlohmann::json;

inline constexpr const char* kToolVersion = "0.3.0";

void to_json(json& j, const HyperParams& hp);
void from_json(const json& j, HyperParams& hp);
void to_json(json& j, const TrainStats& s);
void to_json(json& j, const EvalResult& r);
void to_json(json& j, const MeanCi& m);
void to_json(json& j, const RunSummary& s);
void to_json(json& j, const CorpusStats& s);
void to_json(json& j, const TrialRecord& r);
void from_json(const json& j, TrialRecord& r);
void to_json(json& j, const RuntimeBudget& b);
void from_json(const json& j, RuntimeBudget& b);
void to_json(json& j, const CostModel::Fit& f);
void from_json(const json& j, CostModel::Fit& f);
void to_json(json& j, const SearchSpace& s);
void to_json(json& j, const SearchConfig& c);

json cost_model_json(const CostModel& m);
CostModel cost_model_from_json(const json& j);

json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& j);
void write_text(const std::filesystem::path& path, std::string_view text);

// ---------------------------------------------------------------------------
// Splits on disk: a plain training corpus, a TSV of (query, target) tokens
// and a small JSON manifest tying them together.

struct SplitFiles {
  std::filesystem::path train;
  std::filesystem::path pairs;
  std::filesystem::path manifest;
};

SplitFiles save_split(const EvalSplit& split, const std::filesystem::path& dir, std::uint64_t seed);
EvalSplit load_split(const std::filesystem::path& manifest);

// ---------------------------------------------------------------------------
// Trial log: one JSON object per line, append-only.

void append_trial(const std::filesystem::path& path, const TrialRecord& rec);
std::vector<TrialRecord> read_trials(const std::filesystem::path& path);

/// Search config from JSON: a preset name or explicit dimensions for `space`,
/// plus mode, models, seed, stop and suggestion settings. Unknown keys are rejected.
SearchConfig search_config_from_json(const json& j, SearchConfig base = {});

// ---------------------------------------------------------------------------

std::string sha256_file(const std::filesystem::path& path);
std::string sha256_string(std::string_view data);

/// One per output directory.
struct RunManifest {
  std::string command;
  json config;
  std::vector<std::uint64_t> seeds;
  std::map<std::string, std::string> inputs;  // path -> sha256
  std::vector<std::string> outputs;
  std::string started_at;
  std::string finished_at;

  void add_input(const std::filesystem::path& p);
  json to_json() const;
  std::string config_hash() const;
  void write(const std::filesystem::path& dir) const;
};

std::string utc_now();

/// Human-readable list of differing config keys ("/space/0/hi: 200 -> 300").
std::string config_diff(const json& before, const json& after);

// ---------------------------------------------------------------------------
// Reports

/// Rows of (m, d, L, alpha, n, lambda, N, HR@10, NDCG@10).
std::string trials_markdown(std::span<const TrialRecord> records);

struct SummaryRow {
  std::string label;
  HyperParams hp;
  RunSummary summary;
};
std::string summary_markdown(std::span<const SummaryRow> rows);
/// Bar-chart data: label, model, HR and NDCG means with 95% half-widths.
std::string summary_csv(std::span<const SummaryRow> rows);
std::string sweep_csv(std::string_view param, std::span<const SweepRow> rows);

}  // namespace w2vt
