#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "w2vt/corpus.hpp"
#include "w2vt/hyperparams.hpp"

namespace w2vt {

/// Input (W) and output (W') embedding matrices, row-major |V| x d, bound to a vocabulary.
/// The input matrix is the learned representation.
class EmbeddingModel {
 public:
  EmbeddingModel() = default;
  EmbeddingModel(Vocabulary vocab, int dim);

  const Vocabulary& vocab() const { return vocab_; }
  int dim() const { return dim_; }
  std::size_t rows() const { return vocab_.size(); }

  std::span<float> input_row(TokenId id) { return {input_.data() + offset(id), udim()}; }
  std::span<const float> input_row(TokenId id) const { return {input_.data() + offset(id), udim()}; }
  std::span<float> output_row(TokenId id) { return {output_.data() + offset(id), udim()}; }
  std::span<const float> output_row(TokenId id) const { return {output_.data() + offset(id), udim()}; }

  std::vector<float>& input() { return input_; }
  const std::vector<float>& input() const { return input_; }
  std::vector<float>& output() { return output_; }
  const std::vector<float>& output() const { return output_; }

  bool all_finite() const;

 private:
  std::size_t udim() const { return static_cast<std::size_t>(dim_); }
  std::size_t offset(TokenId id) const { return static_cast<std::size_t>(id) * udim(); }

  Vocabulary vocab_;
  int dim_ = 0;
  std::vector<float> input_;
  std::vector<float> output_;
};

struct TrainStats {
  std::vector<double> epoch_times_s;
  std::vector<double> epoch_loss;  // mean loss per positive example
  double tokens_per_s = 0;
  double final_loss = 0;
  double total_wall_s = 0;  // training only; epoch callbacks are excluded
  std::uint64_t raw_tokens_processed = 0;
  int epochs_run = 0;
};

struct TrainOptions {
  int workers = 1;
  std::uint64_t seed = 1;
  std::size_t memory_cap_bytes = std::size_t{8} << 30;
  bool window_sampling = true;
  /// Number of epochs the linear learning-rate decay spans; 0 means hp.epochs.
  int lr_schedule_epochs = 0;
  /// Called after each epoch (1-based). Returning false stops training early.
  std::function<bool(int epoch, const EmbeddingModel&)> on_epoch;
};

struct TrainResult {
  EmbeddingModel model;
  TrainStats stats;
};

/// Multi-worker SGNS training (lock-free shared weights). Bit-reproducible at workers == 1.
TrainResult train(const Corpus& corpus, const HyperParams& hp, const TrainOptions& opts = {});

/// Linear decay target: the learning rate never drops below this.
inline double learning_rate_floor(double initial) { return std::max(1e-4, 1e-4 * initial); }

/// Effective window drawn uniformly from {1, ..., max_window}.
template <class Engine>
int sample_window(int max_window, Engine& rng) {
  return std::uniform_int_distribution<int>(1, max_window)(rng);
}

/// Sequence partition used by `train`: contiguous chunks balanced by token count.
std::vector<std::pair<std::size_t, std::size_t>> partition_sequences(const Corpus& corpus,
                                                                     int workers);

// ---------------------------------------------------------------------------
// Loss and gradients of the negative-sampling objective.

template <class T>
T log_sigmoid(T x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

template <class T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <class T>
T dot(std::span<const T> a, std::span<const T> b) {
  T s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Float dot product with a fixed 8-lane accumulation order: vectorisable and
/// identical wherever it is used.
inline float dot_lanes(const float* a, const float* b, std::size_t d) {
  float acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= d; i += 8) {
    for (std::size_t j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
  }
  for (; i < d; ++i) acc[i & 7] += a[i] * b[i];
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
}

template <class T>
struct SgnsGradient {
  T loss = 0;
  std::vector<T> context;                 // d loss / d v_c
  std::vector<T> target;                  // d loss / d u_w
  std::vector<std::vector<T>> negatives;  // d loss / d u_k
};

/// loss = -log s(u_w . v_c) - sum_k log s(-u_k . v_c)
template <class T>
SgnsGradient<T> sgns_gradient(std::span<const T> context, std::span<const T> target,
                              std::span<const std::vector<T>> negatives) {
  const std::size_t d = context.size();
  SgnsGradient<T> g;
  g.context.assign(d, T(0));
  const T pos = dot<T>(target, context);
  g.loss = -log_sigmoid(pos);
  const T cpos = sigmoid(pos) - T(1);
  g.target.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    g.context[i] += cpos * target[i];
    g.target[i] = cpos * context[i];
  }
  for (const auto& u : negatives) {
    const T s = dot<T>(std::span<const T>(u), context);
    g.loss -= log_sigmoid(-s);
    const T c = sigmoid(s);
    auto& gu = g.negatives.emplace_back(d);
    for (std::size_t i = 0; i < d; ++i) {
      g.context[i] += c * u[i];
      gu[i] = c * context[i];
    }
  }
  return g;
}

template <class T>
struct CbowGradient {
  T loss = 0;
  std::vector<std::vector<T>> contexts;   // d loss / d v_j for each context input
  std::vector<T> target;
  std::vector<std::vector<T>> negatives;
};

/// CBOW: the hidden vector is the mean of the context inputs, so each context
/// receives 1/C of the hidden-layer gradient.
template <class T>
CbowGradient<T> cbow_gradient(std::span<const std::vector<T>> contexts, std::span<const T> target,
                              std::span<const std::vector<T>> negatives) {
  const std::size_t d = target.size();
  std::vector<T> h(d, T(0));
  for (const auto& c : contexts) {
    for (std::size_t i = 0; i < d; ++i) h[i] += c[i];
  }
  const T inv = T(1) / static_cast<T>(contexts.size());
  for (auto& x : h) x *= inv;
  auto inner = sgns_gradient<T>(std::span<const T>(h), target, negatives);
  CbowGradient<T> g;
  g.loss = inner.loss;
  g.target = std::move(inner.target);
  g.negatives = std::move(inner.negatives);
  for (std::size_t j = 0; j < contexts.size(); ++j) {
    auto& gc = g.contexts.emplace_back(d);
    for (std::size_t i = 0; i < d; ++i) gc[i] = inner.context[i] * inv;
  }
  return g;
}

// ---------------------------------------------------------------------------
// word2vec text format: "|V| d" header, then "token v1 ... vd" per line.

void write_word2vec_text(const EmbeddingModel& model, const std::filesystem::path& path);

struct LoadedEmbeddings {
  int dim = 0;
  std::vector<std::string> tokens;
  std::vector<float> vectors;  // tokens.size() x dim
};

LoadedEmbeddings read_word2vec_text(const std::filesystem::path& path);

/// Rebinds loaded vectors to `vocab` (row order of the vocabulary). Every
/// vocabulary token must be present in the file.
EmbeddingModel bind_embeddings(const LoadedEmbeddings& loaded, const Vocabulary& vocab);

}  // namespace w2vt
