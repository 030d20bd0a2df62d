// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The lipshift Authors

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "lipshift/densities.hpp"
#include "lipshift/error.hpp"
#include "lipshift/lipfit.hpp"
#include "lipshift/quadrature.hpp"
#include "lipshift/rng.hpp"
#include "lipshift/spread.hpp"
#include "lipshift/transfer.hpp"

using namespace lipshift;

namespace {

RegressionSample noisy(const std::vector<double>& xs, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> ys;
  for (double x : xs) ys.push_back(0.5 * std::sin(3.0 * x) + 0.5 * rng.normal());
  return RegressionSample(xs, ys);
}

}  // namespace

TEST_CASE("identical samples always select the source fit") {
  const auto xs = sample(DesignDistribution::uniform(), 400, 1);
  const RegressionSample s = noisy(xs, 2);
  const TransferFit fit = fit_transfer({s, s, DesignDistribution::uniform(), DesignDistribution::uniform()}, 1.0);
  for (double x : linspace(0.0, 1.0, 201)) {
    CHECK(fit.selector(x) == 1);
    CHECK(fit(x) == fit.fit1(x));
  }
}

TEST_CASE("dense target points near zero win there") {
  std::vector<double> src;
  for (double x : sample(DesignDistribution::power(3.0), 2000, 3)) {
    if (x > 0.2) src.push_back(x);
  }
  std::vector<double> tgt;
  for (double x : linspace(0.0, 0.2, 400)) tgt.push_back(x);
  for (double x : linspace(0.2, 1.0, 50)) tgt.push_back(x);
  const TransferFit fit = fit_transfer(
      {noisy(src, 4), noisy(tgt, 5), DesignDistribution::power(3.0), DesignDistribution::uniform()}, 1.0);
  for (double x : linspace(0.0, 0.1, 51)) CHECK(fit.selector(x) == 2);
}

TEST_CASE("combined evaluation follows the spread comparison") {
  const TransferFit fit = fit_transfer({noisy(sample(DesignDistribution::power(2.0), 500, 6), 7),
                                        noisy(sample(DesignDistribution::uniform(), 80, 8), 9),
                                        DesignDistribution::power(2.0), DesignDistribution::uniform()},
                                       1.0);
  int switches = 0;
  for (double x : linspace(0.0, 1.0, 501)) {
    const bool first = fit.spread_source(x) <= fit.spread_target(x);
    CHECK(fit(x) == (first ? fit.fit1(x) : fit.fit2(x)));
    switches += first ? 0 : 1;
  }
  CHECK(switches > 0);
  CHECK(switches < 501);
  CHECK_THROWS_AS(fit_transfer({RegressionSample({0.1}, {1.0}), RegressionSample({0.1, 0.2}, {1.0, 1.0}),
                                DesignDistribution::uniform(), DesignDistribution::uniform()},
                               1.0),
                  Error);
}

TEST_CASE("selector tracks the true spread comparison") {
  // P and Q differ, so the true comparison has a clear switch point.
  const auto P = DesignDistribution::power(2.0);
  const auto Q = DesignDistribution::uniform();
  const long n = 10000, m = 2000;
  const TransferFit fit = fit_transfer({noisy(sample(P, n, 10), 11), noisy(sample(Q, m, 12), 13), P, Q}, 1.0);
  const SpreadFunction tp(P, n), tq(Q, m);
  int agree = 0;
  const auto grid = linspace(0.0, 1.0, 201);
  for (double x : grid) agree += (fit.selector(x) == 1) == (tp(x) <= tq(x));
  CHECK(agree >= static_cast<int>(0.95 * static_cast<double>(grid.size())));

  // With P = Q and n = m the true spreads tie; the empirical ones then split
  // roughly evenly and stay within a few percent of each other.
  const TransferFit same = fit_transfer({noisy(sample(Q, n, 14), 15), noisy(sample(Q, n, 16), 17), Q, Q}, 1.0);
  for (double x : grid) CHECK(std::abs(same.spread_source(x) / same.spread_target(x) - 1.0) <= 0.15);
}

TEST_CASE("mixture spread") {
  const auto U = DesignDistribution::uniform();
  for (double x : {0.0, 0.3, 0.5, 0.97}) {
    CHECK(mixture_spread(U, U, 50, 50, x) == doctest::Approx(spread_at(SpreadFunction(U, 100), x)).epsilon(1e-11));
  }
  const auto P = DesignDistribution::power(1.0);
  const long n = 10000, m = 1000;
  const double x = 0.05;
  const double mix = mixture_spread(P, U, n, m, x);
  const double tp = SpreadFunction(P, n)(x), tq = SpreadFunction(U, m)(x);
  const double ln = std::log(static_cast<double>(n + m));
  const double bound = std::min(tp * std::sqrt(ln / std::log(static_cast<double>(n))),
                                tq * std::sqrt(ln / std::log(static_cast<double>(m))));
  CHECK(mix < bound);
  // Independent check: the mixture root solves its own equation.
  const auto md = mixture_design(P, U, n, m);
  CHECK(mix * mix * window_mass(md, x, mix) == doctest::Approx(ln / static_cast<double>(n + m)).epsilon(1e-10));
  CHECK_THROWS_AS(mixture_design(P, U, n, 1), Error);
}

TEST_CASE("mixture spread inequality on a grid") {
  struct Config {
    DesignDistribution P, Q;
    long n, m;
  };
  const std::vector<Config> configs{
      {DesignDistribution::power(2.0), DesignDistribution::uniform(), 16384, 338},
      {DesignDistribution::power(1.0), DesignDistribution::uniform(), 10000, 1000},
      {DesignDistribution::uniform(), DesignDistribution::power(3.0), 5000, 5000},
      {DesignDistribution::example3(1000), DesignDistribution::power(0.5), 1000, 200},
      {DesignDistribution::power(3.0), DesignDistribution::example3(500), 20000, 500},
  };
  for (const auto& c : configs) {
    const SpreadFunction mix(mixture_design(c.P, c.Q, c.n, c.m), c.n + c.m);
    const SpreadFunction tp(c.P, c.n), tq(c.Q, c.m);
    const double ln = std::log(static_cast<double>(c.n + c.m));
    for (double x : linspace(0.0, 1.0, 513)) {
      const double bound = std::min(tp(x) * std::sqrt(ln / std::log(static_cast<double>(c.n))),
                                    tq(x) * std::sqrt(ln / std::log(static_cast<double>(c.m))));
      CHECK(mix(x) <= bound * (1.0 + 1e-8));
    }
  }
}

TEST_CASE("risk integrals") {
  const auto U = DesignDistribution::uniform();
  SUBCASE("uniform pair sits inside the squared sandwich") {
    const RiskIntegrals r = transfer_risk_integrals(U, U, 100);
    const SpreadBounds b = closed_form_bounds(SpreadFunction(U, 100), 0.5);
    CHECK(r.i1 >= b.lo * b.lo);
    CHECK(r.i1 <= b.hi * b.hi);
  }
  SUBCASE("chain of inequalities") {
    for (const auto& P : {U, DesignDistribution::power(1.0), DesignDistribution::power(2.0)}) {
      for (long n : {1000L, 100000L}) {
        const RiskIntegrals r = transfer_risk_integrals(P, U, n);
        CHECK(r.i1 <= r.tl2_rhs);
        CHECK(r.tl2_rhs == doctest::Approx(4.0 * r.i2).epsilon(1e-8));
        CHECK(r.i2 <= r.i3 * (1.0 + 1e-10));
      }
    }
  }
  SUBCASE("power source with alpha below 3/2 keeps the (log n / n)^(2/3) rate") {
    std::vector<double> scaled;
    for (long n : {1000L, 10000L, 100000L}) {
      const double nd = static_cast<double>(n);
      scaled.push_back(transfer_risk_integrals(DesignDistribution::power(1.0), U, n).i1 *
                       std::pow(nd / std::log(nd), 2.0 / 3.0));
    }
    const auto [lo, hi] = std::minmax_element(scaled.begin(), scaled.end());
    CHECK(*hi / *lo <= 1.5);
  }
  CHECK_THROWS_AS(transfer_risk_integrals(U, U, 100, 32), Error);
}
