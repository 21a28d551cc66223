#include <doctest.h>

#include <set>

#include "w2vt/common.hpp"
#include "w2vt/sobol.hpp"

using namespace w2vt;

namespace {

// Unscrambled reference rows, 21 dimensions.
const std::vector<std::pair<std::size_t, std::vector<double>>> kFrozen = {
    {2, {0.75, 0.25, 0.25, 0.25, 0.75, 0.75, 0.25, 0.75, 0.75, 0.75, 0.75, 0.75, 0.25, 0.25, 0.75, 0.25, 0.75,
         0.25, 0.75, 0.25, 0.25}},
    {3, {0.25, 0.75, 0.75, 0.75, 0.25, 0.25, 0.75, 0.25, 0.25, 0.25, 0.25, 0.25, 0.75, 0.75, 0.25, 0.75, 0.25,
         0.75, 0.25, 0.75, 0.75}},
    {4, {0.375, 0.375, 0.625, 0.875, 0.375, 0.125, 0.375, 0.875, 0.875, 0.625, 0.875, 0.375, 0.375, 0.625,
         0.375, 0.875, 0.375, 0.875, 0.875, 0.125, 0.125}},
    {5, {0.875, 0.875, 0.125, 0.375, 0.875, 0.625, 0.875, 0.375, 0.375, 0.125, 0.375, 0.875, 0.875, 0.125,
         0.875, 0.375, 0.875, 0.375, 0.375, 0.625, 0.625}},
    {6, {0.625, 0.125, 0.875, 0.625, 0.625, 0.875, 0.125, 0.125, 0.125, 0.375, 0.125, 0.625, 0.125, 0.875,
         0.625, 0.625, 0.625, 0.625, 0.125, 0.375, 0.375}},
    {7, {0.125, 0.625, 0.375, 0.125, 0.125, 0.375, 0.625, 0.625, 0.625, 0.875, 0.625, 0.125, 0.625, 0.375,
         0.125, 0.125, 0.125, 0.125, 0.625, 0.875, 0.875}},
    {13, {0.8125, 0.6875, 0.8125, 0.0625, 0.4375, 0.9375, 0.5625, 0.5625, 0.5625, 0.4375, 0.8125, 0.9375,
          0.0625, 0.8125, 0.1875, 0.5625, 0.1875, 0.6875, 0.5625, 0.9375, 0.5625}},
    {37, {0.921875, 0.640625, 0.578125, 0.921875, 0.765625, 0.296875, 0.171875, 0.796875, 0.609375, 0.171875,
          0.015625, 0.078125, 0.578125, 0.859375, 0.109375, 0.484375, 0.796875, 0.421875, 0.046875, 0.140625,
          0.953125}},
    {63, {0.015625, 0.796875, 0.359375, 0.453125, 0.859375, 0.140625, 0.578125, 0.140625, 0.828125, 0.578125,
          0.421875, 0.671875, 0.546875, 0.765625, 0.328125, 0.765625, 0.078125, 0.390625, 0.953125, 0.234375,
          0.234375}},
    {101, {0.9140625, 0.7578125, 0.2734375, 0.2265625, 0.3828125, 0.2421875, 0.5234375, 0.9765625, 0.1328125,
           0.1953125, 0.9609375, 0.1796875, 0.9765625, 0.3515625, 0.8203125, 0.9921875, 0.1796875, 0.2421875,
           0.3359375, 0.8359375, 0.2578125}},
    {200, {0.20703125, 0.38671875, 0.41015625, 0.58984375, 0.81640625, 0.55859375, 0.02734375, 0.97265625,
           0.33203125, 0.62109375, 0.99609375, 0.58984375, 0.30859375, 0.58984375, 0.09765625, 0.69140625,
           0.63671875, 0.84765625, 0.74609375, 0.17578125, 0.36328125}},
    {255, {0.00390625, 0.99609375, 0.76953125, 0.57421875, 0.61328125, 0.98046875, 0.88671875, 0.17578125,
           0.44140625, 0.35546875, 0.13671875, 0.16796875, 0.19921875, 0.63671875, 0.61328125, 0.51953125,
           0.40234375, 0.42578125, 0.73046875, 0.25390625, 0.31640625}},
};

bool stratified(const std::vector<std::vector<double>>& pts, int m) {
  const std::size_t cells = std::size_t{1} << m;
  for (std::size_t j = 0; j < pts.front().size(); ++j) {
    std::set<std::size_t> seen;
    for (const auto& p : pts) seen.insert(static_cast<std::size_t>(p[j] * static_cast<double>(cells)));
    if (seen.size() != cells) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("sobol") {
  TEST_CASE("first points of dimension one") {
    const auto pts = sobol_points(1, 4);
    CHECK(pts[0][0] == 0.0);
    CHECK(pts[1][0] == 0.5);
    CHECK(pts[2][0] == 0.75);
    CHECK(pts[3][0] == 0.25);
  }

  TEST_CASE("matches reference values in 21 dimensions") {
    const auto pts = sobol_points(21, 256);
    for (double x : pts[0]) CHECK(x == 0.0);
    for (double x : pts[1]) CHECK(x == 0.5);
    for (const auto& [i, row] : kFrozen) {
      CAPTURE(i);
      CHECK(pts[i] == row);
    }
  }

  TEST_CASE("skip equals drawing") {
    SobolSequence a(7), b(7);
    for (int i = 0; i < 37; ++i) a.next();
    b.skip(37);
    CHECK(a.next() == b.next());
    CHECK(b.index() == 38);
  }

  TEST_CASE("each power-of-two prefix is stratified") {
    for (int m = 1; m <= 8; ++m) {
      CAPTURE(m);
      CHECK(stratified(sobol_points(21, std::size_t{1} << m), m));
      CHECK(stratified(sobol_points(6, std::size_t{1} << m, 99), m));
    }
  }

  TEST_CASE("scrambling is seeded") {
    const auto a = sobol_points(6, 16, 5);
    CHECK(a == sobol_points(6, 16, 5));
    CHECK(a != sobol_points(6, 16, 6));
    CHECK(a != sobol_points(6, 16));
    for (const auto& p : a) {
      for (double x : p) {
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
      }
    }
  }

  TEST_CASE("dimension limits") {
    CHECK_THROWS_AS(SobolSequence(22), ValidationError);
    CHECK_THROWS_AS(SobolSequence(0), ValidationError);
  }
}
