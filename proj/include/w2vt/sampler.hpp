#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "w2vt/common.hpp"
#include "w2vt/corpus.hpp"

namespace w2vt {

/// Walker/Vose alias table: exact O(1) draws from an arbitrary discrete distribution.
class AliasTable {
 public:
  AliasTable() = default;
  explicit AliasTable(std::span<const double> weights);

  std::size_t size() const { return prob_.size(); }

  /// Normalised probability of outcome i (reconstructed from the table).
  double probability(std::size_t i) const { return pmf_[i]; }

  template <class Engine>
  std::uint32_t draw(Engine& rng) const {
    // One 64-bit draw: the high 32 bits pick the column, the low 32 the coin.
    const std::uint64_t r = rng();
    const auto col = static_cast<std::uint32_t>(((r >> 32) * prob_.size()) >> 32);
    const double coin = static_cast<double>(r & 0xffffffffu) * 0x1p-32;
    return coin < prob_[col] ? col : alias_[col];
  }

 private:
  std::vector<double> prob_;
  std::vector<std::uint32_t> alias_;
  std::vector<double> pmf_;
};

/// Noise distribution for negative sampling: P(j) proportional to count_j ^ alpha.
/// alpha = 0 is uniform, 1 is unigram, -1 inverse popularity.
class NegativeSampler {
 public:
  NegativeSampler() = default;
  NegativeSampler(std::span<const std::uint64_t> counts, double alpha);
  NegativeSampler(const Vocabulary& vocab, double alpha) : NegativeSampler(vocab.counts(), alpha) {}

  double alpha() const { return alpha_; }
  double probability(TokenId id) const { return table_.probability(static_cast<std::size_t>(id)); }
  std::size_t size() const { return table_.size(); }

  template <class Engine>
  TokenId draw(Engine& rng) const {
    return static_cast<TokenId>(table_.draw(rng));
  }

 private:
  double alpha_ = 0.75;
  AliasTable table_;
};

}  // namespace w2vt
