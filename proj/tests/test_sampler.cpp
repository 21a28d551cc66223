#include <doctest.h>

#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>

#include "w2vt/common.hpp"
#include "w2vt/sampler.hpp"

using namespace w2vt;

namespace {

double chi_square_p(const std::vector<std::uint64_t>& observed, const std::vector<double>& pmf, std::uint64_t n) {
  double stat = 0;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    const double e = pmf[i] * static_cast<double>(n);
    stat += (static_cast<double>(observed[i]) - e) * (static_cast<double>(observed[i]) - e) / e;
  }
  const boost::math::chi_squared dist(static_cast<double>(pmf.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

}  // namespace

TEST_SUITE("sampler") {
  TEST_CASE("alias table reproduces its weights") {
    const std::vector<double> w{1, 0, 3, 6};
    const AliasTable t(w);
    CHECK(t.probability(0) == doctest::Approx(0.1));
    CHECK(t.probability(1) == 0.0);
    CHECK(t.probability(2) == doctest::Approx(0.3));
    Rng rng = make_rng(2);
    std::vector<std::uint64_t> hits(4, 0);
    const std::uint64_t n = 200000;
    for (std::uint64_t i = 0; i < n; ++i) ++hits[t.draw(rng)];
    CHECK(hits[1] == 0);
    CHECK(chi_square_p({hits[0], hits[2], hits[3]}, {0.1, 0.3, 0.6}, n) > 0.001);
  }

  TEST_CASE("single outcome and invalid weights") {
    const AliasTable one(std::vector<double>{5.0});
    Rng rng = make_rng(1);
    for (int i = 0; i < 100; ++i) CHECK(one.draw(rng) == 0u);
    CHECK_THROWS_AS(AliasTable(std::vector<double>{}), ValidationError);
    CHECK_THROWS_AS(AliasTable(std::vector<double>{0.0, 0.0}), ValidationError);
    CHECK_THROWS_AS(AliasTable(std::vector<double>{1.0, -1.0, 2.0}), ValidationError);
  }

  TEST_CASE("negative sampler follows count^alpha") {
    const std::vector<std::uint64_t> counts{1, 2, 5, 10, 40, 100, 3};
    for (double alpha : {-1.0, -0.5, 0.0, 0.5, 0.75, 1.0}) {
      CAPTURE(alpha);
      const NegativeSampler ns(counts, alpha);
      std::vector<double> pmf;
      double z = 0;
      for (auto c : counts) z += std::pow(static_cast<double>(c), alpha);
      for (auto c : counts) pmf.push_back(std::pow(static_cast<double>(c), alpha) / z);
      for (std::size_t i = 0; i < counts.size(); ++i) {
        CHECK(ns.probability(static_cast<TokenId>(i)) == doctest::Approx(pmf[i]).epsilon(1e-12));
      }
      Rng rng = make_rng(17, static_cast<std::uint64_t>((alpha + 2) * 100));
      std::vector<std::uint64_t> hits(counts.size(), 0);
      const std::uint64_t n = 200000;
      for (std::uint64_t i = 0; i < n; ++i) ++hits[static_cast<std::size_t>(ns.draw(rng))];
      CHECK(chi_square_p(hits, pmf, n) > 0.001);
    }
  }

  TEST_CASE("alpha = 0 is uniform") {
    const NegativeSampler ns(std::vector<std::uint64_t>{1, 1000, 7}, 0.0);
    for (TokenId i = 0; i < 3; ++i) CHECK(ns.probability(i) == doctest::Approx(1.0 / 3));
  }
}
