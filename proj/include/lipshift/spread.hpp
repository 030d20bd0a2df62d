// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The lipshift Authors
//
// The spread function t_n(x): the unique t > 0 with t^2 P([x ± t]) = log n / n,
// its derivative, closed-form sandwich bounds and the empirical plug-in version.

#pragma once

#include <memory>
#include <vector>

#include "lipshift/densities.hpp"

namespace lipshift {

inline constexpr double kDefaultSpreadTolerance = 1e-12;

/// log n / n, the right-hand side of the spread equation.
double spread_level(long n);

class SpreadFunction {
 public:
  SpreadFunction(DesignDistribution d, long n, double tolerance = kDefaultSpreadTolerance);

  const DesignDistribution& distribution() const noexcept { return dist_; }
  long n() const noexcept { return n_; }
  double tolerance() const noexcept { return tol_; }
  double level() const noexcept { return level_; }

  /// Exact root-finding evaluation; x is clamped to [0, 1].
  double operator()(double x) const;

  /// Copy carrying a uniform-grid cache of `nodes` exact values.
  SpreadFunction with_cache(int nodes) const;
  bool has_cache() const noexcept { return cache_ != nullptr; }
  /// Linear interpolation in the cache (error at most the grid spacing, by the
  /// 1-Lipschitz property); exact evaluation when no cache was built.
  double cached(double x) const;

 private:
  DesignDistribution dist_;
  long n_;
  double tol_;
  double level_;
  std::shared_ptr<const std::vector<double>> cache_;
};

double spread_at(const SpreadFunction& s, double x);

/// Residual |t^2 P([x ± t]) - log n / n| relative to log n / n.
double spread_residual(const SpreadFunction& s, double x, double t);

/// Solutions of t_n(x) = x and t_n(x) = 1 - x.
struct CrossingPoints {
  double x1;
  double x2;
};

CrossingPoints crossing_points(const SpreadFunction& s);

/// Closed-form derivative of t_n, valid for continuous densities away from the
/// crossing points. Throws NondifferentiablePoint within 1e-6 of x1, x2 or at
/// the endpoints of [0, 1].
double spread_derivative(const SpreadFunction& s, double x);

struct SpreadBounds {
  double lo;
  double hi;
};

/// Known sandwich for t_n(x): bounded densities (Uniform, Tabulated with a
/// positive floor), Power(alpha) for n > 9, Example3. Throws NoBoundAvailable
/// otherwise.
SpreadBounds closed_form_bounds(const SpreadFunction& s, double x);

/// Bounds at a point x0 where the density behaves like A |x - x0|^alpha.
SpreadBounds vanishing_density_bounds(long n, double alpha, double A);

/// Plug-in spread from design points: inf{t >= 0 : t^2 #{|X_i - x| <= t} >= log n}.
class EmpiricalSpread {
 public:
  explicit EmpiricalSpread(std::vector<double> points);

  std::size_t n() const noexcept { return points_.size(); }
  const std::vector<double>& points() const noexcept { return points_; }

  double operator()(double x) const;

 private:
  std::vector<double> points_;
  double log_n_;
};

double empirical_spread(const EmpiricalSpread& e, double x);

}  // namespace lipshift
