#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "w2vt/common.hpp"

namespace w2vt {

/// Dense token dictionary. Ids are assigned in descending frequency order,
/// ties broken by the token string, so id 0 is the most frequent token.
class Vocabulary {
 public:
  Vocabulary() = default;

  /// Builds from (token, count) pairs, dropping entries with count < min_count.
  static Vocabulary from_counts(std::vector<std::pair<std::string, std::uint64_t>> counts,
                                std::uint64_t min_count);

  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }
  std::optional<TokenId> find(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_[static_cast<std::size_t>(id)]; }
  std::uint64_t count(TokenId id) const { return counts_[static_cast<std::size_t>(id)]; }
  std::span<const std::uint64_t> counts() const { return counts_; }
  std::span<const std::string> tokens() const { return tokens_; }
  std::uint64_t total_tokens() const { return total_tokens_; }
  std::uint64_t min_count() const { return min_count_; }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, TokenId> token_to_id_;
  std::uint64_t total_tokens_ = 0;
  std::uint64_t min_count_ = 1;
};

/// Integer-encoded per-user event sequences. Immutable once built.
class Corpus {
 public:
  using Sequence = std::vector<TokenId>;
  using Stamps = std::vector<std::int64_t>;

  Corpus() = default;

  /// Builds vocabulary and id sequences from raw token strings. Tokens below
  /// min_count are removed, then sequences left empty are dropped.
  /// `timestamps` is either empty or parallel to `sequences`.
  static Corpus from_tokens(const std::vector<std::vector<std::string>>& sequences,
                            const std::vector<Stamps>& timestamps, std::uint64_t min_count);

  /// Re-encodes sequences expressed in `source` ids under a freshly counted vocabulary.
  static Corpus from_ids(const Vocabulary& source, const std::vector<Sequence>& sequences,
                         const std::vector<Stamps>& timestamps, std::uint64_t min_count);

  const Vocabulary& vocab() const { return vocab_; }
  const std::vector<Sequence>& sequences() const { return sequences_; }
  const std::vector<Stamps>& timestamps() const { return timestamps_; }
  bool has_timestamps() const { return !timestamps_.empty(); }
  std::size_t num_sequences() const { return sequences_.size(); }
  std::uint64_t num_tokens() const { return vocab_.total_tokens(); }

 private:
  Vocabulary vocab_;
  std::vector<Sequence> sequences_;
  std::vector<Stamps> timestamps_;
};

enum class CorpusFormat { kPlain, kTimestamped };

CorpusFormat parse_corpus_format(std::string_view name);

/// Reads a plain (one sequence per line) or timestamped TSV (user, token, seconds) file.
Corpus ingest(const std::filesystem::path& path, CorpusFormat format, std::uint64_t min_count = 1);

/// Writes one sequence per line, tokens separated by single spaces.
void write_plain(const Corpus& corpus, const std::filesystem::path& path);

/// Length statistics in the layout of a dataset summary table.
struct CorpusStats {
  std::size_t entities = 0;
  std::size_t sequences = 0;
  std::size_t min_len = 0;
  double median_len = 0;
  double mean_len = 0;
  std::size_t max_len = 0;
  std::uint64_t tokens = 0;
  double tokens_per_entity = 0;
};

CorpusStats corpus_stats(const Corpus& corpus);

// ---------------------------------------------------------------------------
// Frequency downsampling

struct DownsampleConfig {
  double t_ratio = 1e-5;
  std::uint64_t seed = 1;
};

/// word2vec.c / gensim keep score (sqrt(f/t) + 1) * t / f. Values >= 1 mean
/// the token is always kept; t == 0 disables downsampling.
double keep_probability(double frequency, double threshold);

/// Streaming per-occurrence filter. Each call to `filter` draws fresh
/// decisions, so every epoch sees a different thinned corpus.
class Downsampler {
 public:
  Downsampler(const Vocabulary& vocab, double t_ratio);

  double threshold() const { return threshold_; }
  double keep_rate(TokenId id) const { return keep_[static_cast<std::size_t>(id)]; }

  /// min(1, p) for every occurrence, summed: expected surviving tokens per pass.
  double expected_kept_tokens(const Vocabulary& vocab) const;

  template <class Engine>
  bool keep(TokenId id, Engine& rng) const {
    const double p = keep_[static_cast<std::size_t>(id)];
    if (p >= 1.0) return true;
    return p >= std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  }

  template <class Engine>
  void filter(std::span<const TokenId> in, Engine& rng, std::vector<TokenId>& out) const {
    out.clear();
    for (TokenId id : in) {
      if (keep(id, rng)) out.push_back(id);
    }
  }

 private:
  double threshold_ = 0;
  std::vector<double> keep_;  // min(1, p) per id
};

/// One independent downsampling draw of the whole corpus (the per-epoch view).
std::vector<Corpus::Sequence> downsample(const Corpus& corpus, const DownsampleConfig& cfg,
                                         std::uint64_t epoch = 0);

// ---------------------------------------------------------------------------
// Splits

struct TestPair {
  TokenId query = 0;
  TokenId target = kUnknownToken;
  bool operator==(const TestPair&) const = default;
};

struct EvalSplit {
  Corpus train;
  std::vector<TestPair> test_pairs;  // ids in train.vocab(); target may be kUnknownToken
  std::string protocol;              // "last-token" or "temporal"
  std::optional<std::int64_t> test_start;
  std::vector<TestPair> holdout_pairs;  // optional final-test pairs kept out of tuning
};

/// Train on all but the last token of every sequence; test on (penultimate, last).
EvalSplit split_last_token(const Corpus& corpus);

/// Per-user temporal split at `test_start` (seconds).
EvalSplit split_temporal(const Corpus& corpus, std::int64_t test_start);

/// Uniform sample of floor(fraction * #sequences) whole sequences, vocabulary rebuilt.
/// Moves a random `fraction` of the test pairs into `holdout_pairs`.
void hold_out_pairs(EvalSplit& split, double fraction, std::uint64_t seed);

Corpus sample_sequences(const Corpus& corpus, double fraction, std::uint64_t seed);

}  // namespace w2vt
