#include "w2vt/sampler.hpp"

#include <cmath>
#include <numeric>

namespace w2vt {

AliasTable::AliasTable(std::span<const double> weights) {
  const std::size_t n = weights.size();
  if (n == 0) throw ValidationError("alias table needs at least one outcome");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw ValidationError("alias table weights must be finite with a positive sum");
  }

  prob_.assign(n, 0.0);
  alias_.assign(n, 0);
  pmf_.resize(n);
  std::vector<double> scaled(n);
  std::vector<std::uint32_t> small, large;
  small.reserve(n);
  large.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (weights[i] < 0.0) throw ValidationError("alias table weights must be non-negative");
    pmf_[i] = weights[i] / total;
    scaled[i] = pmf_[i] * static_cast<double>(n);
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
  }
  while (!small.empty() && !large.empty()) {
    const auto s = small.back();
    small.pop_back();
    const auto l = large.back();
    prob_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] -= 1.0 - scaled[s];
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  // Leftovers are 1 up to rounding.
  for (auto i : large) prob_[i] = 1.0, alias_[i] = i;
  for (auto i : small) prob_[i] = 1.0, alias_[i] = i;
}

NegativeSampler::NegativeSampler(std::span<const std::uint64_t> counts, double alpha)
    : alpha_(alpha) {
  std::vector<double> w(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    w[i] = std::pow(static_cast<double>(counts[i]), alpha);
  }
  table_ = AliasTable(w);
}

}  // namespace w2vt
