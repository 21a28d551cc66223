#include "w2vt/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "w2vt/sampler.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace w2vt {

EmbeddingModel::EmbeddingModel(Vocabulary vocab, int dim) : vocab_(std::move(vocab)), dim_(dim) {
  const std::size_t n = vocab_.size() * static_cast<std::size_t>(dim_);
  input_.assign(n, 0.0f);
  output_.assign(n, 0.0f);
}

bool EmbeddingModel::all_finite() const {
  auto finite = [](float x) { return std::isfinite(x); };
  return std::all_of(input_.begin(), input_.end(), finite) &&
         std::all_of(output_.begin(), output_.end(), finite);
}

std::vector<std::pair<std::size_t, std::size_t>> partition_sequences(const Corpus& corpus,
                                                                     int workers) {
  const auto& seqs = corpus.sequences();
  const auto w = static_cast<std::size_t>(std::max(1, workers));
  std::vector<std::pair<std::size_t, std::size_t>> parts;
  parts.reserve(w);
  const double per = static_cast<double>(corpus.num_tokens()) / static_cast<double>(w);
  std::size_t begin = 0;
  std::uint64_t acc = 0;
  for (std::size_t p = 0; p < w; ++p) {
    std::size_t end = begin;
    const double goal = per * static_cast<double>(p + 1);
    if (p + 1 == w) {
      end = seqs.size();
    } else {
      while (end < seqs.size() && static_cast<double>(acc) < goal) acc += seqs[end++].size();
    }
    parts.emplace_back(begin, end);
    begin = end;
  }
  return parts;
}

namespace {

constexpr std::uint64_t kInitStream = 0x1417;
constexpr int kNegativeAttempts = 8;

inline float dot_f(const float* __restrict a, const float* __restrict b, int d) {
  return dot_lanes(a, b, static_cast<std::size_t>(d));
}

inline void axpy_f(float g, const float* __restrict x, float* __restrict y, int d) {
  for (int i = 0; i < d; ++i) y[i] += g * x[i];
}

struct Worker {
  Rng rng;
  std::vector<TokenId> kept;
  std::vector<TokenId> context;
  std::vector<float> hidden;
  std::vector<float> grad;
  double loss = 0;
  std::uint64_t examples = 0;
};

struct Kernel {
  const HyperParams& hp;
  const NegativeSampler& sampler;
  bool window_sampling;
  float* in;
  float* out;
  int d;

  // One logistic-regression step of `h` against output row `u`; accumulates into grad.
  void step(const float* __restrict h, float* __restrict u, float* __restrict grad, float label,
            float lr, double& loss) const {
    const float f = dot_f(h, u, d);
    const float s = 1.0f / (1.0f + std::exp(-f));
    const float g = (label - s) * lr;
    axpy_f(g, u, grad, d);
    axpy_f(g, h, u, d);
    loss -= log_sigmoid<float>(label > 0.0f ? f : -f);
  }

  TokenId negative(TokenId target, Rng& rng) const {
    for (int a = 0; a < kNegativeAttempts; ++a) {
      const TokenId id = sampler.draw(rng);
      if (id != target) return id;
    }
    return kUnknownToken;
  }

  void skipgram(std::span<const TokenId> s, float lr, Worker& w) const {
    const int m = static_cast<int>(s.size());
    float* grad = w.grad.data();
    for (int i = 0; i < m; ++i) {
      const int l = window_sampling ? sample_window(hp.window, w.rng) : hp.window;
      const int lo = std::max(0, i - l);
      const int hi = std::min(m - 1, i + l);
      const TokenId target = s[static_cast<std::size_t>(i)];
      float* u_target = out + static_cast<std::size_t>(target) * static_cast<std::size_t>(d);
      for (int j = lo; j <= hi; ++j) {
        if (j == i) continue;
        float* v = in + static_cast<std::size_t>(s[static_cast<std::size_t>(j)]) *
                            static_cast<std::size_t>(d);
        std::fill_n(grad, d, 0.0f);
        step(v, u_target, grad, 1.0f, lr, w.loss);
        for (int k = 0; k < hp.negatives; ++k) {
          const TokenId neg = negative(target, w.rng);
          if (neg == kUnknownToken) continue;
          step(v, out + static_cast<std::size_t>(neg) * static_cast<std::size_t>(d), grad, 0.0f,
               lr, w.loss);
        }
        axpy_f(1.0f, grad, v, d);
        ++w.examples;
      }
    }
  }

  void cbow(std::span<const TokenId> s, float lr, Worker& w) const {
    const int m = static_cast<int>(s.size());
    float* hidden = w.hidden.data();
    float* grad = w.grad.data();
    for (int i = 0; i < m; ++i) {
      const int l = window_sampling ? sample_window(hp.window, w.rng) : hp.window;
      const int lo = std::max(0, i - l);
      const int hi = std::min(m - 1, i + l);
      w.context.clear();
      for (int j = lo; j <= hi; ++j) {
        if (j != i) w.context.push_back(s[static_cast<std::size_t>(j)]);
      }
      if (w.context.empty()) continue;

      std::fill_n(hidden, d, 0.0f);
      for (TokenId c : w.context) {
        axpy_f(1.0f, in + static_cast<std::size_t>(c) * static_cast<std::size_t>(d), hidden, d);
      }
      const float inv = 1.0f / static_cast<float>(w.context.size());
      for (int k = 0; k < d; ++k) hidden[k] *= inv;

      const TokenId target = s[static_cast<std::size_t>(i)];
      std::fill_n(grad, d, 0.0f);
      step(hidden, out + static_cast<std::size_t>(target) * static_cast<std::size_t>(d), grad, 1.0f,
           lr, w.loss);
      for (int k = 0; k < hp.negatives; ++k) {
        const TokenId neg = negative(target, w.rng);
        if (neg == kUnknownToken) continue;
        step(hidden, out + static_cast<std::size_t>(neg) * static_cast<std::size_t>(d), grad, 0.0f,
             lr, w.loss);
      }
      for (TokenId c : w.context) {
        axpy_f(inv, grad, in + static_cast<std::size_t>(c) * static_cast<std::size_t>(d), d);
      }
      ++w.examples;
    }
  }
};

void init_weights(EmbeddingModel& model, std::uint64_t seed) {
  Rng rng = make_rng(seed, kInitStream);
  const float r = 0.5f / static_cast<float>(model.dim());
  std::uniform_real_distribution<float> u(-r, r);
  for (auto& x : model.input()) x = u(rng);
}

}  // namespace

TrainResult train(const Corpus& corpus, const HyperParams& hp, const TrainOptions& opts) {
  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();
  double callback_s = 0;

  hp.validate();
  if (opts.workers < 1) throw ValidationError("workers must be >= 1");
  if (corpus.num_tokens() == 0) throw ValidationError("cannot train on an empty corpus");
  if (corpus.vocab().size() < 2) throw ValidationError("training needs at least 2 distinct tokens");
  const std::size_t bytes = 2 * corpus.vocab().size() * static_cast<std::size_t>(hp.dim) * sizeof(float);
  if (bytes > opts.memory_cap_bytes) {
    throw ValidationError(fmt::format("model needs {} bytes for |V|={} d={}, above the cap of {}",
                                      bytes, corpus.vocab().size(), hp.dim, opts.memory_cap_bytes));
  }

  TrainResult result{EmbeddingModel(corpus.vocab(), hp.dim), {}};
  EmbeddingModel& model = result.model;
  init_weights(model, opts.seed);

  const Downsampler downsampler(corpus.vocab(), hp.t_ratio);
  const NegativeSampler sampler(corpus.vocab(), hp.ns_exponent);
  const Kernel kernel{hp, sampler, opts.window_sampling, model.input().data(), model.output().data(),
                      hp.dim};
  const auto parts = partition_sequences(corpus, opts.workers);
  const int schedule_epochs = opts.lr_schedule_epochs > 0 ? opts.lr_schedule_epochs : hp.epochs;
  const double schedule_tokens =
      static_cast<double>(schedule_epochs) * static_cast<double>(corpus.num_tokens()) + 1.0;
  const double lr_floor = learning_rate_floor(hp.learning_rate);
  std::atomic<std::uint64_t> processed{0};
  const auto& seqs = corpus.sequences();

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    const auto t_epoch = clock::now();
    double loss = 0;
    std::uint64_t examples = 0;

#pragma omp parallel num_threads(opts.workers) reduction(+ : loss, examples)
    {
#ifdef _OPENMP
      const int tid = omp_get_thread_num();
      const int nthreads = omp_get_num_threads();
#else
      const int tid = 0;
      const int nthreads = 1;
#endif
      for (int p = tid; p < opts.workers; p += nthreads) {
        Worker w{make_rng(opts.seed, static_cast<std::uint64_t>(epoch) + 1, static_cast<std::uint64_t>(p)),
                 {}, {}, std::vector<float>(static_cast<std::size_t>(hp.dim)),
                 std::vector<float>(static_cast<std::size_t>(hp.dim)), 0.0, 0};
        for (std::size_t s = parts[static_cast<std::size_t>(p)].first;
             s < parts[static_cast<std::size_t>(p)].second; ++s) {
          const double progress = static_cast<double>(processed.load(std::memory_order_relaxed)) / schedule_tokens;
          const auto lr = static_cast<float>(std::max(lr_floor, hp.learning_rate * (1.0 - progress)));
          downsampler.filter(seqs[s], w.rng, w.kept);
          if (hp.model == ModelType::kSkipgram) {
            kernel.skipgram(w.kept, lr, w);
          } else {
            kernel.cbow(w.kept, lr, w);
          }
          processed.fetch_add(seqs[s].size(), std::memory_order_relaxed);
        }
        loss += w.loss;
        examples += w.examples;
      }
    }

    const double secs = std::chrono::duration<double>(clock::now() - t_epoch).count();
    auto& st = result.stats;
    st.epoch_times_s.push_back(secs);
    st.epoch_loss.push_back(examples ? loss / static_cast<double>(examples) : 0.0);
    st.epochs_run = epoch + 1;

    if (!model.all_finite()) {
      throw RuntimeFailure(fmt::format(
          "training diverged: non-finite weights after epoch {} ({}); lower the learning rate",
          epoch + 1, to_string(hp)));
    }
    if (opts.on_epoch) {
      const auto t_cb = clock::now();
      const bool more = opts.on_epoch(epoch + 1, model);
      callback_s += std::chrono::duration<double>(clock::now() - t_cb).count();
      if (!more) break;
    }
  }

  auto& st = result.stats;
  st.raw_tokens_processed = processed.load();
  st.total_wall_s = std::chrono::duration<double>(clock::now() - t_start).count() - callback_s;
  st.tokens_per_s = st.total_wall_s > 0 ? static_cast<double>(st.raw_tokens_processed) / st.total_wall_s : 0.0;
  st.final_loss = st.epoch_loss.empty() ? 0.0 : st.epoch_loss.back();
  return result;
}

// ---------------------------------------------------------------------------

void write_word2vec_text(const EmbeddingModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  const auto& v = model.vocab();
  out << v.size() << ' ' << model.dim() << '\n';
  std::string line;
  for (std::size_t i = 0; i < v.size(); ++i) {
    line = v.token(static_cast<TokenId>(i));
    for (float x : model.input_row(static_cast<TokenId>(i))) {
      line += ' ';
      line += fmt::format("{}", x);
    }
    line += '\n';
    out << line;
  }
  if (!out) throw RuntimeFailure("error writing " + path.string());
}

LoadedEmbeddings read_word2vec_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open embeddings file " + path.string());
  LoadedEmbeddings e;
  std::size_t rows = 0;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path.string() + ": empty embeddings file");
  {
    std::istringstream hs(line);
    if (!(hs >> rows >> e.dim) || e.dim < 1) {
      throw ValidationError(path.string() + ":1: header must be '<rows> <dim>'");
    }
  }
  e.tokens.reserve(rows);
  e.vectors.reserve(rows * static_cast<std::size_t>(e.dim));
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    for (int k = 0; k < e.dim; ++k) {
      std::string num;
      float x = 0;
      if (!(ls >> num) ||
          std::from_chars(num.data(), num.data() + num.size(), x).ec != std::errc()) {
        throw ValidationError(fmt::format("{}:{}: expected {} values", path.string(), line_no, e.dim));
      }
      e.vectors.push_back(x);
    }
    e.tokens.push_back(std::move(tok));
  }
  if (e.tokens.size() != rows) {
    throw ValidationError(fmt::format("{}: header says {} rows, found {}", path.string(), rows,
                                      e.tokens.size()));
  }
  return e;
}

EmbeddingModel bind_embeddings(const LoadedEmbeddings& loaded, const Vocabulary& vocab) {
  std::unordered_map<std::string_view, std::size_t> row;
  for (std::size_t i = 0; i < loaded.tokens.size(); ++i) row.emplace(loaded.tokens[i], i);
  EmbeddingModel model(vocab, loaded.dim);
  std::size_t missing = 0;
  std::string example;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    auto it = row.find(vocab.token(static_cast<TokenId>(i)));
    if (it == row.end()) {
      if (missing++ == 0) example = vocab.token(static_cast<TokenId>(i));
      continue;
    }
    std::copy_n(loaded.vectors.begin() + static_cast<std::ptrdiff_t>(it->second * static_cast<std::size_t>(loaded.dim)),
                loaded.dim, model.input_row(static_cast<TokenId>(i)).begin());
  }
  if (missing) {
    throw ValidationError(fmt::format(
        "vocabulary mismatch: {} training tokens have no embedding (e.g. '{}')", missing, example));
  }
  return model;
}

}  // namespace w2vt
