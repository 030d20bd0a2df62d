// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The lipshift Authors
//
// Executable versions of the constructions behind the rate proofs: the local
// perturbation of a fitted function, the sup-norm covering of Lipschitz
// functions, the Gaussian KL identity, the lower-bound hypothesis family and
// the transfer-exponent functional.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lipshift/densities.hpp"
#include "lipshift/lipfit.hpp"
#include "lipshift/rng.hpp"
#include "lipshift/spread.hpp"

namespace lipshift {

/// Continuous piecewise-linear function through (knots[i], values[i]),
/// constant outside the knot range.
struct PiecewiseLinear {
  std::vector<double> knots;
  std::vector<double> values;

  double operator()(double x) const;
};

/// Largest |f(x_{i+1}) - f(x_i)| / (x_{i+1} - x_i) over consecutive grid points.
double sampled_lipschitz_constant(const RealFunction& f, std::span<const double> grid);

/// Random Lipschitz path on [a, b]: `pieces` equal cells with slopes uniform
/// in [-slope, slope], started at `start`.
PiecewiseLinear random_lipschitz_path(double a, double b, double slope, int pieces, double start, Rng& rng);

// ---------------------------------------------------------------------------
// Local perturbation

struct Perturbation {
  RealFunction psi;
  RealFunction f;
  double delta = 0.0;
  double K = 0.0;
  double x_star = 0.0;
  double x_tilde = 0.0;
  double s_n = 0.0;
  double x_ell = 0.0;
  double x_u = 1.0;

  /// psi(x~) - f(x~) + delta |x - x~| + f(x) - s_n / 2.
  double h(double x) const;
  /// psi outside [x_ell, x_u], h inside.
  double g(double x) const;
};

/// Builds the perturbation on a sorted grid over [0, 1]. Argmax searches run
/// on the grid; crossing points get one bisection pass to 1e-10. Throws
/// InvalidInput when psi or f break their Lipschitz budgets on the grid and
/// NoViolation when max (psi - f) / t_n < K.
Perturbation build_perturbation(const RealFunction& psi, const RealFunction& f, double delta, const SpreadFunction& s,
                                double K, std::span<const double> grid);

struct PerturbationReport {
  double lipschitz_g = 0.0;       // sampled Lipschitz constant of g
  double support_violation = 0.0; // |psi - g| outside [x_ell, x_u] plus negative part inside
  double ordering_violation = 0.0;// (ii): max of (f - g)_+ and (g - psi)_+ on [x_ell, x_u]
  double outer_violation = 0.0;   // (iii) outer inequalities, positive part
  double inner_violation = 0.0;   // (iii) inner inequalities, positive part
  double gap_min = 0.0;           // (iv): min of psi - g - s_n / 4 on [x~ ± s_n / 8]
  double grid_spacing = 0.0;

  bool lipschitz_ok(double slack) const { return lipschitz_g <= 1.0 + slack; }
  bool support_ok(double slack) const { return support_violation <= slack; }
  bool ordering_ok(double slack) const { return ordering_violation <= slack; }
  bool outer_ok(double slack) const { return outer_violation <= slack; }
  bool inner_ok(double slack) const { return inner_violation <= slack; }
  bool gap_ok(double slack) const { return gap_min >= -slack; }
};

PerturbationReport check_perturbation(const Perturbation& p, std::span<const double> grid);

/// One instance of the mass lower bound for the perturbation:
/// s_n^2 P([x~ ± c s_n]) >= (1 ∧ D^{-ceil(log2(1/(delta c))) - 1}) 4 K^2 log n / n.
struct MassBoundCheck {
  double c;
  double lhs;
  double rhs;
};

/// Requires K > 1/2 and n >= exp(4 K^2); throws InvalidParameter otherwise.
std::vector<MassBoundCheck> perturbation_mass_bounds(const Perturbation& p, const SpreadFunction& s, double D,
                                                     std::span<const double> cs);

/// Random (psi, f) pair meeting the perturbation precondition: psi in Lip(1),
/// f in Lip(1 - delta), shifted so that max (psi - f) / t_n >= K on the grid.
struct PerturbationInstance {
  PiecewiseLinear psi;
  PiecewiseLinear f;
};

PerturbationInstance random_perturbation_instance(const SpreadFunction& s, double delta, double K,
                                                  std::span<const double> grid, Rng& rng);

// ---------------------------------------------------------------------------
// Covering of Lip(1) functions supported on [a, b]

inline constexpr int kMaxCoverCells = 12;

/// Cell count floor((b - a) / r); throws SizeCap above kMaxCoverCells.
int cover_cells(double a, double b, double r);

/// Every center of the cell construction: zero on [a, a + r], then on each of
/// the k following cells of width r slope +1, -1 or 0. Size exactly 3^k.
std::vector<PiecewiseLinear> lipschitz_cover(double a, double b, double r);

/// The center chosen for g by the r-band rule, evaluated on a dense grid.
/// `choice` receives the per-cell slopes (+1, -1, 0) when non-null.
PiecewiseLinear cover_center_for(const RealFunction& g, double a, double b, double r, std::span<const double> grid,
                                 std::vector<int>* choice = nullptr);

/// Position of a slope pattern inside lipschitz_cover's output.
std::size_t cover_index(std::span<const int> choice);

/// Random Lip(1) function supported in [a, b] (vanishing at a and b).
PiecewiseLinear random_supported_lipschitz(double a, double b, int pieces, Rng& rng);

// ---------------------------------------------------------------------------
// KL divergence between regression models with N(0, 1) noise

inline constexpr int kDefaultKlNodes = 4097;

/// (n/2) integral (f - g)^2 p + (m/2) integral (f - g)^2 q.
double kl_divergence(const RealFunction& f, const RealFunction& g, const DesignDistribution& P,
                     const DesignDistribution& Q, long n, long m, int nodes = kDefaultKlNodes);

// ---------------------------------------------------------------------------
// Lower-bound hypothesis family

struct HypothesisFamily {
  long n = 0;
  long m = 0;
  long N = 0;
  double psi_N = 0.0;
  long M_N = 0;
  long s_N = 0;
  double c_infinity = 1.0;
  double two_b = 0.0;  // 1 / (3 (2 C_inf - 1))
  double N0 = 0.0;     // threshold of the first sample-size constraint
  std::vector<long> kept;  // kept interval indices k (1-based)
  std::vector<double> centers;
  std::vector<double> heights;  // t_{n,m}(x_j), bump height is heights[j] / 6
  SpreadFunction spread_P = SpreadFunction(DesignDistribution::uniform(), 2);
  std::optional<SpreadFunction> spread_Q;
  DesignDistribution target = DesignDistribution::uniform();

  /// min(t_n^P(x), t_m^Q(x)); t_m^Q is +inf when m < 2.
  double t_nm(double x) const;
  /// f_j(x) = (t_{n,m}(x_j) / 6 - |x - x_j|)_+, j in [0, s_N).
  double f(std::size_t j, double x) const;
};

HypothesisFamily build_lower_bound_family(const DesignDistribution& P, const DesignDistribution& Q, long n, long m);

/// min over pairs i != j of max over grid of |f_i - f_j| / t_{n,m}.
double family_separation(const HypothesisFamily& family, std::span<const double> grid);

/// Mean over j of kl_divergence(f_j, 0, P, Q, n, m).
double family_mean_kl(const HypothesisFamily& family, int nodes = kDefaultKlNodes);

/// Smallest N from which N^{1/4} <= (N / log N)^{1/3} / (6 (2 C_inf - 1)) holds.
double lower_bound_n0(double c_infinity);

// ---------------------------------------------------------------------------
// Transfer exponent

/// eta^gamma * integral q(x) / P([x ± eta]) dx for each eta (trapezoid rule on
/// the sorted x_grid). Throws NonDoubling on zero mass.
std::vector<double> transfer_exponent_profile(const DesignDistribution& P, const DesignDistribution& Q, double gamma,
                                              std::span<const double> eta_grid, std::span<const double> x_grid);

/// Maximum of the profile.
double transfer_exponent_check(const DesignDistribution& P, const DesignDistribution& Q, double gamma,
                               std::span<const double> eta_grid, std::span<const double> x_grid);

/// Finite-range boundedness test for a profile sampled at successively halved
/// eta: true when the last increment is at most half the size of the first.
bool profile_settles(std::span<const double> profile);

}  // namespace lipshift
