#include "w2vt/reference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "w2vt/sampler.hpp"

namespace w2vt::reference {

namespace {

struct Sgd {
  std::vector<float>& in;
  std::vector<float>& out;
  std::size_t d;
  double loss = 0;
  std::uint64_t examples = 0;

  // h: hidden vector (copy), row: output row index, grad: accumulated hidden gradient
  void update(const std::vector<float>& h, TokenId row, std::vector<float>& grad, float label,
              float lr) {
    const std::size_t base = static_cast<std::size_t>(row) * d;
    const float f = dot_lanes(h.data(), out.data() + base, d);
    const float s = 1.0f / (1.0f + std::exp(-f));
    const float g = (label - s) * lr;
    for (std::size_t k = 0; k < d; ++k) grad[k] += g * out[base + k];
    for (std::size_t k = 0; k < d; ++k) out[base + k] += g * h[k];
    loss -= log_sigmoid<float>(label > 0.0f ? f : -f);
  }
};

std::vector<float> row_copy(const std::vector<float>& m, TokenId id, std::size_t d) {
  const auto b = m.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(id) * d);
  return {b, b + static_cast<std::ptrdiff_t>(d)};
}

}  // namespace

EmbeddingModel train_serial(const Corpus& corpus, const HyperParams& hp, std::uint64_t seed,
                            std::vector<double>* epoch_loss) {
  hp.validate();
  const std::size_t d = static_cast<std::size_t>(hp.dim);
  EmbeddingModel model(corpus.vocab(), hp.dim);
  {
    Rng init = make_rng(seed, 0x1417);
    std::uniform_real_distribution<float> u(-0.5f / static_cast<float>(hp.dim),
                                            0.5f / static_cast<float>(hp.dim));
    for (auto& x : model.input()) x = u(init);
  }
  const Downsampler ds(corpus.vocab(), hp.t_ratio);
  const NegativeSampler ns(corpus.vocab(), hp.ns_exponent);
  const double total = static_cast<double>(hp.epochs) * static_cast<double>(corpus.num_tokens()) + 1.0;
  std::uint64_t processed = 0;

  auto draw_negative = [&](TokenId target, Rng& rng) -> TokenId {
    for (int a = 0; a < 8; ++a) {
      TokenId id = ns.draw(rng);
      if (id != target) return id;
    }
    return kUnknownToken;
  };

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(epoch) + 1, 0);
    Sgd sgd{model.input(), model.output(), d};
    std::vector<TokenId> s;
    for (const auto& raw : corpus.sequences()) {
      const float lr = static_cast<float>(std::max(
          learning_rate_floor(hp.learning_rate),
          hp.learning_rate * (1.0 - static_cast<double>(processed) / total)));
      ds.filter(raw, rng, s);
      const int m = static_cast<int>(s.size());
      for (int i = 0; i < m; ++i) {
        const int l = sample_window(hp.window, rng);
        const TokenId target = s[static_cast<std::size_t>(i)];
        if (hp.model == ModelType::kSkipgram) {
          for (int j = std::max(0, i - l); j <= std::min(m - 1, i + l); ++j) {
            if (j == i) continue;
            const TokenId c = s[static_cast<std::size_t>(j)];
            std::vector<float> v = row_copy(model.input(), c, d);
            std::vector<float> grad(d, 0.0f);
            sgd.update(v, target, grad, 1.0f, lr);
            for (int k = 0; k < hp.negatives; ++k) {
              const TokenId neg = draw_negative(target, rng);
              if (neg != kUnknownToken) sgd.update(v, neg, grad, 0.0f, lr);
            }
            for (std::size_t k = 0; k < d; ++k) model.input()[static_cast<std::size_t>(c) * d + k] += 1.0f * grad[k];
            ++sgd.examples;
          }
        } else {
          std::vector<TokenId> ctx;
          for (int j = std::max(0, i - l); j <= std::min(m - 1, i + l); ++j) {
            if (j != i) ctx.push_back(s[static_cast<std::size_t>(j)]);
          }
          if (ctx.empty()) continue;
          std::vector<float> h(d, 0.0f);
          for (TokenId c : ctx) {
            for (std::size_t k = 0; k < d; ++k) h[k] += 1.0f * model.input()[static_cast<std::size_t>(c) * d + k];
          }
          const float inv = 1.0f / static_cast<float>(ctx.size());
          for (auto& x : h) x *= inv;
          std::vector<float> grad(d, 0.0f);
          sgd.update(h, target, grad, 1.0f, lr);
          for (int k = 0; k < hp.negatives; ++k) {
            const TokenId neg = draw_negative(target, rng);
            if (neg != kUnknownToken) sgd.update(h, neg, grad, 0.0f, lr);
          }
          for (TokenId c : ctx) {
            for (std::size_t k = 0; k < d; ++k) model.input()[static_cast<std::size_t>(c) * d + k] += inv * grad[k];
          }
          ++sgd.examples;
        }
      }
      processed += raw.size();
    }
    if (epoch_loss) {
      epoch_loss->push_back(sgd.examples ? sgd.loss / static_cast<double>(sgd.examples) : 0.0);
    }
  }
  return model;
}

std::vector<TokenId> brute_force_top_k(const std::vector<float>& matrix, int dim, TokenId query,
                                       std::size_t k) {
  const std::size_t d = static_cast<std::size_t>(dim);
  const std::size_t n = matrix.size() / d;
  auto norm = [&](std::size_t r) {
    double s = 0;
    for (std::size_t i = 0; i < d; ++i) s += static_cast<double>(matrix[r * d + i]) * matrix[r * d + i];
    return std::sqrt(s);
  };
  const auto q = static_cast<std::size_t>(query);
  const double qn = norm(q);
  std::vector<std::pair<double, TokenId>> scored;
  for (std::size_t r = 0; r < n; ++r) {
    if (r == q) continue;
    double dotp = 0;
    for (std::size_t i = 0; i < d; ++i) dotp += static_cast<double>(matrix[q * d + i]) * matrix[r * d + i];
    const double denom = qn * norm(r);
    scored.emplace_back(denom > 0 ? dotp / denom : 0.0, static_cast<TokenId>(r));
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<TokenId> ids;
  for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) ids.push_back(scored[i].second);
  return ids;
}

}  // namespace w2vt::reference
