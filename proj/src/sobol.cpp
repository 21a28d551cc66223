#include "w2vt/sobol.hpp"

#include <bit>

#include "w2vt/common.hpp"

namespace w2vt {

namespace {

struct Primitive {
  int degree;
  std::uint32_t coeffs;             // a: inner coefficients of the primitive polynomial
  std::array<std::uint32_t, 8> m;   // initial direction integers
};

// new-joe-kuo-6.21201, dimensions 2..21.
constexpr Primitive kJoeKuo[] = {
    {1, 0, {1}},
    {2, 1, {1, 3}},
    {3, 1, {1, 3, 1}},
    {3, 2, {1, 1, 1}},
    {4, 1, {1, 1, 3, 3}},
    {4, 4, {1, 3, 5, 13}},
    {5, 2, {1, 1, 5, 5, 17}},
    {5, 4, {1, 1, 5, 5, 5}},
    {5, 7, {1, 1, 7, 11, 19}},
    {5, 11, {1, 1, 5, 1, 1}},
    {5, 13, {1, 1, 1, 3, 11}},
    {5, 14, {1, 3, 5, 5, 31}},
    {6, 1, {1, 3, 3, 9, 7, 49}},
    {6, 13, {1, 1, 1, 15, 21, 21}},
    {6, 16, {1, 3, 1, 13, 27, 49}},
    {6, 19, {1, 1, 1, 15, 7, 5}},
    {6, 22, {1, 3, 1, 15, 13, 25}},
    {6, 25, {1, 1, 5, 5, 19, 61}},
    {7, 1, {1, 3, 7, 11, 23, 15, 103}},
    {7, 4, {1, 3, 7, 13, 13, 15, 69}},
};

}  // namespace

SobolSequence::SobolSequence(int dim, std::optional<std::uint64_t> scramble_seed) : dim_(dim) {
  if (dim < 1 || dim > kMaxDim) {
    throw ValidationError("Sobol dimension must be in [1, " + std::to_string(kMaxDim) + "]");
  }
  directions_.resize(static_cast<std::size_t>(dim));
  for (int k = 0; k < kBits; ++k) directions_[0][static_cast<std::size_t>(k)] = 1u << (kBits - 1 - k);
  for (int j = 1; j < dim; ++j) {
    const auto& p = kJoeKuo[j - 1];
    auto& v = directions_[static_cast<std::size_t>(j)];
    const int s = p.degree;
    for (int k = 0; k < s; ++k) v[static_cast<std::size_t>(k)] = p.m[static_cast<std::size_t>(k)] << (kBits - 1 - k);
    for (int k = s; k < kBits; ++k) {
      std::uint32_t x = v[static_cast<std::size_t>(k - s)] ^ (v[static_cast<std::size_t>(k - s)] >> s);
      for (int i = 1; i < s; ++i) {
        if ((p.coeffs >> (s - 1 - i)) & 1u) x ^= v[static_cast<std::size_t>(k - i)];
      }
      v[static_cast<std::size_t>(k)] = x;
    }
  }
  state_.assign(static_cast<std::size_t>(dim), 0u);
  shift_.assign(static_cast<std::size_t>(dim), 0u);
  if (scramble_seed) {
    Rng rng = make_rng(*scramble_seed, 0x50b0);
    for (auto& s : shift_) s = static_cast<std::uint32_t>(rng() >> 32);
  }
}

std::vector<double> SobolSequence::next() {
  std::vector<double> x(static_cast<std::size_t>(dim_));
  if (index_ > 0) {
    // Gray code: flip the direction number at the lowest zero bit of (index - 1).
    const int c = std::countr_one(index_ - 1);
    if (c >= kBits) throw RuntimeFailure("Sobol sequence exhausted");
    for (std::size_t j = 0; j < state_.size(); ++j) state_[j] ^= directions_[j][static_cast<std::size_t>(c)];
  }
  for (std::size_t j = 0; j < state_.size(); ++j) {
    x[j] = static_cast<double>(state_[j] ^ shift_[j]) * 0x1p-32;
  }
  ++index_;
  return x;
}

void SobolSequence::skip(std::uint64_t count) {
  for (std::uint64_t i = 0; i < count; ++i) next();
}

std::vector<std::vector<double>> sobol_points(int dim, std::size_t count,
                                              std::optional<std::uint64_t> scramble_seed) {
  SobolSequence seq(dim, scramble_seed);
  std::vector<std::vector<double>> pts;
  pts.reserve(count);
  for (std::size_t i = 0; i < count; ++i) pts.push_back(seq.next());
  return pts;
}

}  // namespace w2vt
