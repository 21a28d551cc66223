#include "w2vt/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace w2vt {

Vocabulary Vocabulary::from_counts(std::vector<std::pair<std::string, std::uint64_t>> counts,
                                   std::uint64_t min_count) {
  if (min_count == 0) min_count = 1;
  std::erase_if(counts, [&](const auto& kv) { return kv.second < min_count; });
  std::sort(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  v.min_count_ = min_count;
  v.tokens_.reserve(counts.size());
  v.counts_.reserve(counts.size());
  v.token_to_id_.reserve(counts.size());
  for (auto& [tok, c] : counts) {
    v.token_to_id_.emplace(tok, static_cast<TokenId>(v.tokens_.size()));
    v.tokens_.push_back(std::move(tok));
    v.counts_.push_back(c);
    v.total_tokens_ += c;
  }
  return v;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  if (it == token_to_id_.end()) return std::nullopt;
  return it->second;
}

namespace {

void check_stamps_sorted(const std::vector<Corpus::Stamps>& ts) {
  for (const auto& s : ts) {
    if (!std::is_sorted(s.begin(), s.end())) {
      throw ValidationError("timestamps within a sequence must be non-decreasing");
    }
  }
}

}  // namespace

Corpus Corpus::from_tokens(const std::vector<std::vector<std::string>>& sequences,
                           const std::vector<Stamps>& timestamps, std::uint64_t min_count) {
  if (!timestamps.empty() && timestamps.size() != sequences.size()) {
    throw ValidationError("timestamps must be parallel to sequences");
  }
  std::unordered_map<std::string, std::uint64_t> freq;
  for (const auto& seq : sequences) {
    for (const auto& tok : seq) ++freq[tok];
  }
  Corpus c;
  c.vocab_ = Vocabulary::from_counts({freq.begin(), freq.end()}, min_count);

  // Recount after filtering so total_tokens matches what sequences contain.
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    Sequence ids;
    Stamps stamps;
    ids.reserve(sequences[s].size());
    for (std::size_t i = 0; i < sequences[s].size(); ++i) {
      if (auto id = c.vocab_.find(sequences[s][i])) {
        ids.push_back(*id);
        if (!timestamps.empty()) {
          if (timestamps[s].size() != sequences[s].size()) {
            throw ValidationError("timestamp count differs from token count in sequence " +
                                  std::to_string(s));
          }
          stamps.push_back(timestamps[s][i]);
        }
      }
    }
    if (ids.empty()) continue;
    c.sequences_.push_back(std::move(ids));
    if (!timestamps.empty()) c.timestamps_.push_back(std::move(stamps));
  }
  check_stamps_sorted(c.timestamps_);
  return c;
}

Corpus Corpus::from_ids(const Vocabulary& source, const std::vector<Sequence>& sequences,
                        const std::vector<Stamps>& timestamps, std::uint64_t min_count) {
  if (!timestamps.empty() && timestamps.size() != sequences.size()) {
    throw ValidationError("timestamps must be parallel to sequences");
  }
  std::vector<std::uint64_t> freq(source.size(), 0);
  for (const auto& seq : sequences) {
    for (TokenId id : seq) ++freq[static_cast<std::size_t>(id)];
  }
  std::vector<std::pair<std::string, std::uint64_t>> counts;
  for (std::size_t i = 0; i < freq.size(); ++i) {
    if (freq[i] > 0) counts.emplace_back(source.token(static_cast<TokenId>(i)), freq[i]);
  }
  Corpus c;
  c.vocab_ = Vocabulary::from_counts(std::move(counts), min_count);

  std::vector<TokenId> remap(source.size(), kUnknownToken);
  for (std::size_t i = 0; i < freq.size(); ++i) {
    if (freq[i] == 0) continue;
    if (auto id = c.vocab_.find(source.token(static_cast<TokenId>(i)))) remap[i] = *id;
  }
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    Sequence ids;
    Stamps stamps;
    for (std::size_t i = 0; i < sequences[s].size(); ++i) {
      TokenId id = remap[static_cast<std::size_t>(sequences[s][i])];
      if (id == kUnknownToken) continue;
      ids.push_back(id);
      if (!timestamps.empty()) stamps.push_back(timestamps[s][i]);
    }
    if (ids.empty()) continue;
    c.sequences_.push_back(std::move(ids));
    if (!timestamps.empty()) c.timestamps_.push_back(std::move(stamps));
  }
  check_stamps_sorted(c.timestamps_);
  return c;
}

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "plain") return CorpusFormat::kPlain;
  if (name == "timestamped" || name == "tsv") return CorpusFormat::kTimestamped;
  throw ValidationError("unknown corpus format '" + std::string(name) +
                        "' (expected plain or timestamped)");
}

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string where(const std::filesystem::path& path, std::size_t line_no) {
  return path.string() + ":" + std::to_string(line_no) + ": ";
}

Corpus ingest_plain(std::ifstream& in, const std::filesystem::path& path,
                    std::uint64_t min_count) {
  std::vector<std::vector<std::string>> seqs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find('\0') != std::string::npos) {
      throw ValidationError(where(path, line_no) + "malformed line (NUL byte)");
    }
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    seqs.emplace_back(toks.begin(), toks.end());
  }
  return Corpus::from_tokens(seqs, {}, min_count);
}

Corpus ingest_timestamped(std::ifstream& in, const std::filesystem::path& path,
                          std::uint64_t min_count) {
  struct Event {
    std::int64_t ts;
    std::string token;
  };
  std::vector<std::vector<Event>> users;
  std::unordered_map<std::string, std::size_t> user_index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest = line;
    for (;;) {
      auto tab = rest.find('\t');
      fields.push_back(rest.substr(0, tab));
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty()) {
      throw ValidationError(where(path, line_no) +
                            "malformed line (expected user<TAB>token<TAB>unix_seconds)");
    }
    std::int64_t ts = 0;
    auto [ptr, ec] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), ts);
    if (ec != std::errc() || ptr != fields[2].data() + fields[2].size()) {
      throw ValidationError(where(path, line_no) + "cannot parse timestamp '" +
                            std::string(fields[2]) + "'");
    }
    auto [it, inserted] = user_index.try_emplace(std::string(fields[0]), users.size());
    if (inserted) users.emplace_back();
    users[it->second].push_back({ts, std::string(fields[1])});
  }

  std::vector<std::vector<std::string>> seqs;
  std::vector<Corpus::Stamps> stamps;
  seqs.reserve(users.size());
  stamps.reserve(users.size());
  for (auto& events : users) {
    std::stable_sort(events.begin(), events.end(),
                     [](const Event& a, const Event& b) { return a.ts < b.ts; });
    auto& s = seqs.emplace_back();
    auto& t = stamps.emplace_back();
    for (auto& e : events) {
      s.push_back(std::move(e.token));
      t.push_back(e.ts);
    }
  }
  return Corpus::from_tokens(seqs, stamps, min_count);
}

}  // namespace

Corpus ingest(const std::filesystem::path& path, CorpusFormat format, std::uint64_t min_count) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open corpus file " + path.string());
  return format == CorpusFormat::kPlain ? ingest_plain(in, path, min_count)
                                        : ingest_timestamped(in, path, min_count);
}

void write_plain(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  const auto& v = corpus.vocab();
  for (const auto& seq : corpus.sequences()) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (i) out << ' ';
      out << v.token(seq[i]);
    }
    out << '\n';
  }
  if (!out) throw RuntimeFailure("error writing " + path.string());
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats s;
  s.entities = corpus.vocab().size();
  s.sequences = corpus.num_sequences();
  s.tokens = corpus.num_tokens();
  if (s.sequences == 0) return s;
  std::vector<std::size_t> lens;
  lens.reserve(s.sequences);
  for (const auto& q : corpus.sequences()) lens.push_back(q.size());
  std::sort(lens.begin(), lens.end());
  s.min_len = lens.front();
  s.max_len = lens.back();
  const std::size_t n = lens.size();
  s.median_len = n % 2 ? static_cast<double>(lens[n / 2])
                       : 0.5 * static_cast<double>(lens[n / 2 - 1] + lens[n / 2]);
  s.mean_len = static_cast<double>(s.tokens) / static_cast<double>(n);
  s.tokens_per_entity = s.entities ? static_cast<double>(s.tokens) / s.entities : 0.0;
  return s;
}

// ---------------------------------------------------------------------------

double keep_probability(double frequency, double threshold) {
  if (threshold <= 0.0) return 1.0;
  return (std::sqrt(frequency / threshold) + 1.0) * (threshold / frequency);
}

Downsampler::Downsampler(const Vocabulary& vocab, double t_ratio) {
  if (!(t_ratio >= 0.0)) throw ValidationError("downsampling ratio must be >= 0");
  threshold_ = t_ratio * static_cast<double>(vocab.total_tokens());
  keep_.resize(vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    keep_[i] = std::min(1.0, keep_probability(static_cast<double>(vocab.counts()[i]), threshold_));
  }
}

double Downsampler::expected_kept_tokens(const Vocabulary& vocab) const {
  double sum = 0;
  for (std::size_t i = 0; i < keep_.size(); ++i) {
    sum += keep_[i] * static_cast<double>(vocab.counts()[i]);
  }
  return sum;
}

std::vector<Corpus::Sequence> downsample(const Corpus& corpus, const DownsampleConfig& cfg,
                                         std::uint64_t epoch) {
  Downsampler ds(corpus.vocab(), cfg.t_ratio);
  Rng rng = make_rng(cfg.seed, epoch);
  std::vector<Corpus::Sequence> out;
  out.reserve(corpus.num_sequences());
  for (const auto& seq : corpus.sequences()) {
    auto& o = out.emplace_back();
    ds.filter(seq, rng, o);
  }
  return out;
}

// ---------------------------------------------------------------------------

EvalSplit split_last_token(const Corpus& corpus) {
  std::vector<Corpus::Sequence> train;
  std::vector<Corpus::Stamps> stamps;
  std::vector<std::pair<TokenId, TokenId>> raw_pairs;
  train.reserve(corpus.num_sequences());
  for (std::size_t s = 0; s < corpus.num_sequences(); ++s) {
    const auto& seq = corpus.sequences()[s];
    if (seq.size() >= 2) {
      raw_pairs.emplace_back(seq[seq.size() - 2], seq.back());
      train.emplace_back(seq.begin(), seq.end() - 1);
      if (corpus.has_timestamps()) {
        const auto& ts = corpus.timestamps()[s];
        stamps.emplace_back(ts.begin(), ts.end() - 1);
      }
    } else {
      train.push_back(seq);
      if (corpus.has_timestamps()) stamps.push_back(corpus.timestamps()[s]);
    }
  }
  if (raw_pairs.empty()) throw ValidationError("empty test set: no sequence has length >= 2");

  EvalSplit split;
  split.protocol = "last-token";
  split.train = Corpus::from_ids(corpus.vocab(), train, stamps, 1);
  const auto& tv = split.train.vocab();
  split.test_pairs.reserve(raw_pairs.size());
  for (auto [q, t] : raw_pairs) {
    TestPair p;
    p.query = *tv.find(corpus.vocab().token(q));
    p.target = tv.find(corpus.vocab().token(t)).value_or(kUnknownToken);
    split.test_pairs.push_back(p);
  }
  return split;
}

EvalSplit split_temporal(const Corpus& corpus, std::int64_t test_start) {
  if (!corpus.has_timestamps()) {
    throw ValidationError("temporal split requires a timestamped corpus");
  }
  std::vector<Corpus::Sequence> train;
  std::vector<Corpus::Stamps> stamps;
  std::vector<std::pair<TokenId, TokenId>> raw_pairs;
  for (std::size_t s = 0; s < corpus.num_sequences(); ++s) {
    const auto& seq = corpus.sequences()[s];
    const auto& ts = corpus.timestamps()[s];
    const auto cut = static_cast<std::size_t>(
        std::lower_bound(ts.begin(), ts.end(), test_start) - ts.begin());
    if (cut > 0) {
      train.emplace_back(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(cut));
      stamps.emplace_back(ts.begin(), ts.begin() + static_cast<std::ptrdiff_t>(cut));
    }
    if (seq.size() - cut >= 2) raw_pairs.emplace_back(seq[seq.size() - 2], seq.back());
  }

  EvalSplit split;
  split.protocol = "temporal";
  split.test_start = test_start;
  split.train = Corpus::from_ids(corpus.vocab(), train, stamps, 1);
  const auto& tv = split.train.vocab();
  for (auto [q, t] : raw_pairs) {
    auto qid = tv.find(corpus.vocab().token(q));
    if (!qid) continue;
    split.test_pairs.push_back({*qid, tv.find(corpus.vocab().token(t)).value_or(kUnknownToken)});
  }
  return split;
}

void hold_out_pairs(EvalSplit& split, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ValidationError("holdout fraction must be in (0, 1)");
  auto& pairs = split.test_pairs;
  const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(pairs.size())));
  if (k == 0 || k == pairs.size()) throw ValidationError("holdout fraction leaves an empty pair set");
  Rng rng = make_rng(seed, 0x401d);
  std::shuffle(pairs.begin(), pairs.end(), rng);
  split.holdout_pairs.assign(pairs.end() - static_cast<std::ptrdiff_t>(k), pairs.end());
  pairs.resize(pairs.size() - k);
}

Corpus sample_sequences(const Corpus& corpus, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ValidationError("sample fraction must be in (0, 1]");
  }
  const auto n = corpus.num_sequences();
  const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  if (k == 0) throw ValidationError("sample fraction yields zero sequences");

  std::vector<std::size_t> all(n), picked;
  std::iota(all.begin(), all.end(), std::size_t{0});
  picked.reserve(k);
  Rng rng = make_rng(seed, 0x5a4d);
  std::sample(all.begin(), all.end(), std::back_inserter(picked), k, rng);

  std::vector<Corpus::Sequence> seqs;
  std::vector<Corpus::Stamps> stamps;
  seqs.reserve(k);
  for (auto i : picked) {
    seqs.push_back(corpus.sequences()[i]);
    if (corpus.has_timestamps()) stamps.push_back(corpus.timestamps()[i]);
  }
  return Corpus::from_ids(corpus.vocab(), seqs, stamps, 1);
}

}  // namespace w2vt
