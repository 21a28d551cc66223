#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace w2vt {

/// Sobol low-discrepancy sequence, Antonov-Saleev Gray-code ordering, with
/// Joe-Kuo direction numbers for up to 21 dimensions. An optional random
/// digital shift (XOR) scrambles the sequence while keeping its net structure.
class SobolSequence {
 public:
  static constexpr int kMaxDim = 21;
  static constexpr int kBits = 32;

  explicit SobolSequence(int dim, std::optional<std::uint64_t> scramble_seed = std::nullopt);

  int dim() const { return dim_; }
  std::uint64_t index() const { return index_; }

  std::vector<double> next();
  void skip(std::uint64_t count);

 private:
  int dim_;
  std::uint64_t index_ = 0;
  std::vector<std::array<std::uint32_t, kBits>> directions_;
  std::vector<std::uint32_t> state_;
  std::vector<std::uint32_t> shift_;
};

/// First `count` points of the sequence in [0, 1)^dim.
std::vector<std::vector<double>> sobol_points(int dim, std::size_t count,
                                              std::optional<std::uint64_t> scramble_seed = std::nullopt);

}  // namespace w2vt
