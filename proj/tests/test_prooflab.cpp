// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The lipshift Authors

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "lipshift/densities.hpp"
#include "lipshift/error.hpp"
#include "lipshift/harness.hpp"
#include "lipshift/prooflab.hpp"
#include "lipshift/quadrature.hpp"
#include "lipshift/rng.hpp"
#include "lipshift/spread.hpp"

using namespace lipshift;

namespace {

bool all_properties(const PerturbationReport& r) {
  const double pos = 2.0 * r.grid_spacing;
  return r.lipschitz_ok(1e-9) && r.support_ok(1e-9) && r.ordering_ok(1e-9) && r.outer_ok(pos) && r.inner_ok(pos) &&
         r.gap_ok(1e-9);
}

double growth_exponent(const DesignDistribution& P, const DesignDistribution& Q, double gamma) {
  std::vector<double> etas;
  for (int k = 3; k <= 10; ++k) etas.push_back(std::ldexp(1.0, -k));
  const auto xs = linspace(0.0, 1.0, 65537);
  const auto prof = transfer_exponent_profile(P, Q, gamma, etas, xs);
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < etas.size(); ++i) pts.emplace_back(1.0 / etas[i], prof[i]);
  return fit_loglog_slope(pts).slope;
}

}  // namespace

TEST_CASE("piecewise-linear helpers") {
  const PiecewiseLinear f{{0.0, 0.5, 1.0}, {0.0, 0.5, 0.25}};
  CHECK(f(0.25) == doctest::Approx(0.25));
  CHECK(f(0.75) == doctest::Approx(0.375));
  CHECK(f(-1.0) == 0.0);
  CHECK(f(2.0) == 0.25);
  CHECK(sampled_lipschitz_constant(f, linspace(0.0, 1.0, 101)) == doctest::Approx(1.0));
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const auto p = random_lipschitz_path(0.0, 1.0, 0.7, 13, 0.2, rng);
    CHECK(p(0.0) == doctest::Approx(0.2));
    CHECK(sampled_lipschitz_constant(p, linspace(0.0, 1.0, 1001)) <= 0.7 + 1e-12);
  }
}

TEST_CASE("perturbation of a triangular excess") {
  const SpreadFunction s(DesignDistribution::uniform(), 100);
  const double K = 1.0;
  const double height = 2.0 * K * s(0.5);
  auto f = [](double) { return 0.0; };
  auto psi = [height](double x) { return std::max(0.0, height - std::abs(x - 0.5)); };
  const auto grid = linspace(0.0, 1.0, 10001);
  const Perturbation p = build_perturbation(psi, f, 0.5, s, K, grid);
  CHECK(p.x_star == doctest::Approx(0.5));
  CHECK(p.x_tilde == doctest::Approx(0.5));
  CHECK(p.x_ell < p.x_tilde);
  CHECK(p.x_u > p.x_tilde);
  const PerturbationReport r = check_perturbation(p, grid);
  CHECK(r.lipschitz_ok(1e-9));
  CHECK(r.support_ok(1e-9));
  CHECK(r.ordering_ok(1e-9));
  CHECK(r.outer_ok(2.0 * r.grid_spacing));
  CHECK(r.inner_ok(2.0 * r.grid_spacing));
  CHECK(r.gap_ok(1e-9));
  // g agrees with psi outside the perturbed window and sits below it inside.
  CHECK(p.g(0.05) == psi(0.05));
  CHECK(p.g(0.5) < psi(0.5));
}

TEST_CASE("perturbation needs a K-gap") {
  const SpreadFunction s(DesignDistribution::uniform(), 100);
  auto f = [](double x) { return 0.3 * x; };
  const auto grid = linspace(0.0, 1.0, 1001);
  try {
    build_perturbation(f, f, 0.5, s, 1.0, grid);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoViolation);
  }
}

TEST_CASE("randomised perturbation instances") {
  const auto grid = linspace(0.0, 1.0, 10001);
  Rng rng(2);
  for (const auto& d : {DesignDistribution::uniform(), DesignDistribution::power(1.0)}) {
    const SpreadFunction s(d, 1000);
    for (int i = 0; i < 25; ++i) {
      const double delta = 0.1 + 0.8 * rng.uniform();
      const double K = 0.6 + 1.5 * rng.uniform();
      const PerturbationInstance inst = random_perturbation_instance(s, delta, K, grid, rng);
      const Perturbation p = build_perturbation(inst.psi, inst.f, delta, s, K, grid);
      CHECK(all_properties(check_perturbation(p, grid)));
    }
  }
}

TEST_CASE("perturbation mass lower bound") {
  const auto grid = linspace(0.0, 1.0, 10001);
  const SpreadFunction s(DesignDistribution::uniform(), 1000);
  Rng rng(3);
  const std::vector<double> cs{1.0 / 16.0, 0.25, 1.0};
  for (int i = 0; i < 30; ++i) {
    const double delta = 0.2 + 0.6 * rng.uniform();
    const double K = 0.75 + 0.5 * rng.uniform();
    const PerturbationInstance inst = random_perturbation_instance(s, delta, K, grid, rng);
    const Perturbation p = build_perturbation(inst.psi, inst.f, delta, s, K, grid);
    for (const auto& m : perturbation_mass_bounds(p, s, 2.0, cs)) CHECK(m.lhs >= m.rhs);
  }
  const PerturbationInstance inst = random_perturbation_instance(s, 0.5, 0.5, grid, rng);
  const Perturbation p = build_perturbation(inst.psi, inst.f, 0.5, s, 0.5, grid);
  CHECK_THROWS_AS(perturbation_mass_bounds(p, s, 2.0, cs), Error);
  const SpreadFunction small(DesignDistribution::uniform(), 20);
  const PerturbationInstance inst2 = random_perturbation_instance(small, 0.5, 2.0, grid, rng);
  const Perturbation p2 = build_perturbation(inst2.psi, inst2.f, 0.5, small, 2.0, grid);
  CHECK_THROWS_AS(perturbation_mass_bounds(p2, small, 2.0, cs), Error);
}

TEST_CASE("Lipschitz cover") {
  SUBCASE("size and members") {
    const auto H = lipschitz_cover(0.0, 1.0, 0.5);
    CHECK(H.size() == 9);
    const auto H2 = lipschitz_cover(0.0, 1.0, 0.2);
    CHECK(H2.size() == 243);
    const auto grid = linspace(0.0, 1.0, 2001);
    for (const auto& h : H2) {
      CHECK(sampled_lipschitz_constant(h, grid) <= 1.0 + 1e-12);
      for (double x : linspace(0.0, 0.2, 21)) CHECK(h(x) == 0.0);
    }
  }
  SUBCASE("single cell") {
    const auto H = lipschitz_cover(0.2, 0.5, 0.4);
    REQUIRE(H.size() == 1);
    for (double x : linspace(0.2, 0.5, 31)) CHECK(H[0](x) == 0.0);
  }
  SUBCASE("size cap") {
    CHECK(cover_cells(0.0, 1.0, 1.0 / 12.0) == 12);
    try {
      cover_cells(0.0, 1.0, 0.05);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SizeCap);
    }
  }
  SUBCASE("random supported functions are covered") {
    Rng rng(4);
    const auto grid = linspace(0.0, 1.0, 4001);
    for (double r : {0.1, 0.2}) {
      const auto H = r > 0.15 ? lipschitz_cover(0.0, 1.0, r) : std::vector<PiecewiseLinear>{};
      for (int t = 0; t < 200; ++t) {
        const auto g = random_supported_lipschitz(0.0, 1.0, 4 + t % 28, rng);
        CHECK(std::abs(g(0.0)) <= 1e-12);
        CHECK(std::abs(g(1.0)) <= 1e-12);
        std::vector<int> choice;
        const auto c = cover_center_for(g, 0.0, 1.0, r, grid, &choice);
        double dist = 0.0;
        for (double x : grid) dist = std::max(dist, std::abs(g(x) - c(x)));
        CHECK(dist <= r + 1e-12);
        if (!H.empty()) {
          const auto& member = H.at(cover_index(choice));
          for (double x : linspace(0.0, 1.0, 101)) CHECK(member(x) == doctest::Approx(c(x)).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("Gaussian regression KL") {
  const auto U = DesignDistribution::uniform();
  const double h = 0.1;
  auto bump = [h](double x) { return std::max(0.0, h - std::abs(x - 0.5)); };
  auto zero = [](double) { return 0.0; };
  CHECK(std::abs(kl_divergence(bump, zero, U, U, 100, 0) - 50.0 * 2.0 * h * h * h / 3.0) <= 1e-6);
  CHECK(std::abs(kl_divergence(bump, zero, U, U, 100, 0) - 0.033333) <= 1e-6);
  CHECK(kl_divergence(bump, zero, U, U, 100, 100) == doctest::Approx(2.0 * kl_divergence(bump, zero, U, U, 100, 0)));
  CHECK(kl_divergence(bump, bump, U, U, 100, 100) == 0.0);
  auto g = [](double x) { return std::sin(4.0 * x); };
  const auto P = DesignDistribution::power(1.5);
  CHECK(std::abs(kl_divergence(g, bump, P, U, 30, 70) - kl_divergence(bump, g, P, U, 30, 70)) <= 1e-12);
  CHECK_THROWS_AS(kl_divergence(g, bump, P, U, -1, 0), Error);
}

TEST_CASE("lower-bound hypothesis family") {
  const auto U = DesignDistribution::uniform();
  const HypothesisFamily fam = build_lower_bound_family(U, U, 10000, 0);
  const double N = 10000.0;
  CHECK(fam.psi_N == doctest::Approx(std::cbrt(std::log(N) / N)));
  CHECK(fam.c_infinity == 1.0);
  CHECK(fam.two_b == doctest::Approx(1.0 / 3.0));
  CHECK(static_cast<double>(fam.kept.size()) >= fam.two_b * std::cbrt(N / std::log(N)));

  const auto grid = linspace(0.0, 1.0, 20001);
  CHECK(family_separation(fam, grid) >= 1.0 / 6.0 - 0.01);
  CHECK(family_mean_kl(fam) <= std::log(N) / 36.0);

  for (std::size_t i = 0; i < fam.centers.size(); ++i) {
    const double half_i = fam.heights[i] / 6.0;
    for (std::size_t j = i + 1; j < fam.centers.size(); ++j) {
      const double half_j = fam.heights[j] / 6.0;
      CHECK(fam.centers[i] + half_i <= fam.centers[j] - half_j);
    }
    const auto local = linspace(fam.centers[i] - half_i, fam.centers[i] + half_i, 601);
    CHECK(sampled_lipschitz_constant([&](double x) { return fam.f(i, x); }, local) == doctest::Approx(1.0));
    CHECK(fam.f(i, fam.centers[i] + half_i + 1e-9) == 0.0);
  }

  SUBCASE("with target sample") {
    const HypothesisFamily two = build_lower_bound_family(DesignDistribution::power(2.0), U, 8000, 2000);
    CHECK(two.N == 10000);
    CHECK(two.c_infinity == 3.0);
    CHECK(family_separation(two, grid) >= 1.0 / 6.0 - 0.01);
    CHECK(family_mean_kl(two) <= std::log(10000.0) / 36.0);
    for (double x : {0.1, 0.5, 0.9}) CHECK(two.t_nm(x) == std::min(two.spread_P(x), (*two.spread_Q)(x)));
  }
  SUBCASE("parameter checks") {
    CHECK_THROWS_AS(build_lower_bound_family(U, U, 20, 0), Error);
    CHECK_THROWS_AS(build_lower_bound_family(U, U, 1000, 1), Error);
  }
}

TEST_CASE("sample-size threshold of the lower-bound proof") {
  for (double c : {1.0, 2.0}) {
    const double N0 = lower_bound_n0(c);
    auto holds = [c](double N) {
      return std::pow(N, 0.25) <= std::cbrt(N / std::log(N)) / (6.0 * (2.0 * c - 1.0));
    };
    CHECK(holds(N0 * 1.0001));
    CHECK(holds(N0 * 100.0));
    CHECK_FALSE(holds(N0 * 0.99));
  }
}

TEST_CASE("transfer exponent") {
  const auto U = DesignDistribution::uniform();
  SUBCASE("uniform pair matches the analytic value") {
    std::vector<double> etas{0.125, 0.03125, 0.001};
    const auto prof = transfer_exponent_profile(U, U, 1.0, etas, linspace(0.0, 1.0, 200001));
    for (std::size_t i = 0; i < etas.size(); ++i) {
      const double e = etas[i];
      CHECK(prof[i] == doctest::Approx((1.0 - 2.0 * e) / 2.0 + 2.0 * e * std::log(2.0)).epsilon(1e-5));
    }
  }
  SUBCASE("power source against uniform target") {
    std::vector<double> etas;
    for (int k = 3; k <= 10; ++k) etas.push_back(std::ldexp(1.0, -k));
    const auto xs = linspace(0.0, 1.0, 65537);
    const auto P1 = DesignDistribution::power(1.0);
    // alpha = 1, gamma = 1: 1/2 + log((1 - eta) / eta) / 4 + O(eta), a logarithmic divergence.
    const auto linear = transfer_exponent_profile(P1, U, 1.0, etas, xs);
    for (std::size_t i = 0; i < etas.size(); ++i) {
      const double e = etas[i];
      CHECK(std::abs(linear[i] - 0.5 - std::log((1.0 - e) / e) / 4.0) <= 1.2 * e);
    }
    CHECK_FALSE(profile_settles(linear));
    CHECK_FALSE(profile_settles(transfer_exponent_profile(P1, U, 0.5, etas, xs)));
    const auto P2 = DesignDistribution::power(2.0);
    CHECK(profile_settles(transfer_exponent_profile(P2, U, 2.0, etas, xs)));
    CHECK_FALSE(profile_settles(transfer_exponent_profile(P2, U, 1.5, etas, xs)));
    CHECK(profile_settles(transfer_exponent_profile(U, U, 1.0, etas, xs)));
    CHECK(growth_exponent(P1, U, 0.5) >= 0.4);
    CHECK(transfer_exponent_check(P2, U, 2.0, etas, xs) ==
          doctest::Approx(transfer_exponent_profile(P2, U, 2.0, etas, xs).back()));
  }
  SUBCASE("zero source mass") {
    const auto gap = DesignDistribution::tabulated({0.0, 0.4, 0.5, 1.0}, {0.0, 0.0, 1.0, 1.0});
    const std::vector<double> etas{0.01};
    CHECK_THROWS_AS(transfer_exponent_profile(gap, U, 1.0, etas, linspace(0.0, 1.0, 101)), Error);
  }
}
