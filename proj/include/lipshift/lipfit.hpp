// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The lipshift Authors
//
// Lipschitz-constrained least squares, the isotonic min-max estimator, a
// fixed-bandwidth kernel smoother and the losses used to compare them.

#pragma once

#include <functional>
#include <span>
#include <vector>

#include "lipshift/densities.hpp"

namespace lipshift {

using RealFunction = std::function<double(double)>;

/// (x, y) pairs kept sorted by x (stable, so ties keep their input order).
class RegressionSample {
 public:
  RegressionSample() = default;
  RegressionSample(std::vector<double> x, std::vector<double> y);

  std::size_t size() const noexcept { return x_.size(); }
  bool empty() const noexcept { return x_.empty(); }
  const std::vector<double>& x() const noexcept { return x_; }
  const std::vector<double>& y() const noexcept { return y_; }
  double max_abs_y() const noexcept;

 private:
  std::vector<double> x_;
  std::vector<double> y_;
};

/// Solution of the Lipschitz LSE at the distinct design points.
struct LipschitzFit {
  std::vector<double> knots;
  std::vector<double> values;
  double budget = 1.0;
  double objective = 0.0;
  double kkt_residual = 0.0;

  /// Linear interpolation between knots, constant beyond them.
  double operator()(double x) const;
};

inline constexpr double kDefaultFitTolerance = 1e-10;
inline constexpr double kKktTolerance = 1e-8;

/// Minimises sum (y_i - f_i)^2 subject to |f_{i+1} - f_i| <= L (x_{i+1} - x_i)
/// with an exact dynamic program over the piecewise-linear derivative of the
/// value function. The result carries a KKT certificate; a residual above
/// kKktTolerance * (1 + max|y|) raises SolverFailure.
LipschitzFit fit_lipschitz_lse(const RegressionSample& sample, double L, double tol = kDefaultFitTolerance);

double evaluate(const LipschitzFit& fit, double x);

/// Stationarity/complementarity residual of candidate values f (one per sorted
/// sample point) for the Lipschitz LSE. Multipliers are recovered in a single
/// forward sweep: nu_i = nu_{i-1} + 2 (f_i - y_i).
double lipschitz_kkt_residual(const RegressionSample& sample, std::span<const double> f, double L);

/// sum (y_i - f_i)^2 over the sorted sample.
double residual_sum_of_squares(const RegressionSample& sample, std::span<const double> f);

/// Isotonic LSE at every sorted design point via the min-max partial-sum
/// formula. Nondecreasing output; tied x values share one value.
std::vector<double> fit_isotonic_lse(const RegressionSample& sample);

/// Pool-adjacent-violators solution of the same problem (tied x values are
/// pooled first). O(n); used where the fit is needed at every point.
std::vector<double> isotonic_pava(const RegressionSample& sample);

/// The min-max formula min_{i >= k+} max_{j <= k-} (S_i - S_j) / (i - j) at an
/// arbitrary x, in O(n log n) through a lower convex hull of the partial sums.
/// Beyond the last design point the value at that point is returned.
double isotonic_at(const RegressionSample& sample, double x);

/// (1 / (n h p(x))) sum y_i K((x_i - x) / h) with the triangular kernel.
/// Throws DivisionByZeroDensity when p(x) = 0.
double kernel_smoother(const RegressionSample& sample, const DesignDistribution& d, double h, double x);

/// max over grid of |fit(x) - f0(x)| / t(x).
double weighted_sup_loss(const RealFunction& fit, const RealFunction& f0, const RealFunction& t,
                         std::span<const double> grid);

/// max over grid of |fit(x) - f0(x)|.
double sup_loss(const RealFunction& fit, const RealFunction& f0, std::span<const double> grid);

/// Simpson approximation of the integral of (fit - f0)^2 q over [0, 1].
double l2_risk(const RealFunction& fit, const RealFunction& f0, const DesignDistribution& q, int nodes);

}  // namespace lipshift
