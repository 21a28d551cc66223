#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace w2vt {

using TokenId = std::int32_t;

/// Marks a test target that never occurred in training; it can never be a hit.
inline constexpr TokenId kUnknownToken = -1;

/// Bad user input: flags, bounds, malformed files. The CLI maps this to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Failure while doing the work itself (NaN in training, I/O, singular fits). Exit code 2.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

// Every random stream in the project is derived from a user seed plus a small
// tuple of stream coordinates (epoch, worker, trial...). No clock seeding.
inline Rng make_rng(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return Rng(seq);
}

}  // namespace w2vt
