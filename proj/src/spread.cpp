// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The lipshift Authors

#include "lipshift/spread.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lipshift/error.hpp"

namespace lipshift {

namespace {

constexpr int kMaxBisection = 200;
constexpr double kCrossingGuard = 1e-6;

double solve_spread(const DesignDistribution& d, double level, double x) {
  const double lower = std::sqrt(level) * (1.0 - 1e-9);
  double lo = lower;
  double hi = 1.0;
  auto excess = [&](double t) { return t * t * window_mass(d, x, t) - level; };
  for (int it = 0; it < kMaxBisection; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (excess(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::abs(excess(lo)) < std::abs(excess(hi)) ? lo : hi;
}

// Root of a monotone function on [a, b] given the sign at a.
template <class F>
double bisect_sign(const F& f, double a, double b) {
  const bool neg_at_a = f(a) < 0.0;
  for (int it = 0; it < kMaxBisection; ++it) {
    const double mid = 0.5 * (a + b);
    if (mid <= a || mid >= b) break;
    if ((f(mid) < 0.0) == neg_at_a) {
      a = mid;
    } else {
      b = mid;
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

double spread_level(long n) {
  if (n <= 1) throw Error(ErrorCode::InvalidParameter, "spread function requires n > 1");
  const double nd = static_cast<double>(n);
  return std::log(nd) / nd;
}

SpreadFunction::SpreadFunction(DesignDistribution d, long n, double tolerance)
    : dist_(std::move(d)), n_(n), tol_(tolerance), level_(spread_level(n)) {
  if (!(tolerance > 0.0)) throw Error(ErrorCode::InvalidParameter, "spread tolerance must be positive");
}

double SpreadFunction::operator()(double x) const {
  return solve_spread(dist_, level_, std::clamp(x, 0.0, 1.0));
}

SpreadFunction SpreadFunction::with_cache(int nodes) const {
  if (nodes < 2) throw Error(ErrorCode::InvalidParameter, "spread cache needs at least 2 nodes");
  auto values = std::make_shared<std::vector<double>>(static_cast<std::size_t>(nodes));
  for (int i = 0; i < nodes; ++i) (*values)[i] = (*this)(static_cast<double>(i) / (nodes - 1));
  SpreadFunction copy = *this;
  copy.cache_ = std::move(values);
  return copy;
}

double SpreadFunction::cached(double x) const {
  if (!cache_) return (*this)(x);
  const auto& v = *cache_;
  const double pos = std::clamp(x, 0.0, 1.0) * static_cast<double>(v.size() - 1);
  const auto i = std::min(static_cast<std::size_t>(pos), v.size() - 2);
  const double w = pos - static_cast<double>(i);
  return v[i] + w * (v[i + 1] - v[i]);
}

double spread_at(const SpreadFunction& s, double x) {
  if (x < 0.0 || x > 1.0) throw Error(ErrorCode::InvalidParameter, "spread_at requires x in [0, 1]");
  return s(x);
}

double spread_residual(const SpreadFunction& s, double x, double t) {
  return std::abs(t * t * window_mass(s.distribution(), x, t) - s.level()) / s.level();
}

CrossingPoints crossing_points(const SpreadFunction& s) {
  // t_n is 1-Lipschitz, so t_n(x) - x is nonincreasing and t_n(x) + x - 1 is
  // nondecreasing; each has exactly one sign change on [0, 1].
  const double x1 = bisect_sign([&](double x) { return s(x) - x; }, 0.0, 1.0);
  const double x2 = bisect_sign([&](double x) { return s(x) + x - 1.0; }, 0.0, 1.0);
  return {x1, x2};
}

double spread_derivative(const SpreadFunction& s, double x) {
  if (!(x > 0.0 && x < 1.0)) {
    throw Error(ErrorCode::NondifferentiablePoint, "derivative is one-sided at the endpoints");
  }
  const auto [x1, x2] = crossing_points(s);
  if (std::abs(x - x1) < kCrossingGuard || std::abs(x - x2) < kCrossingGuard) {
    throw Error(ErrorCode::NondifferentiablePoint, "x is a crossing point of t_n");
  }
  const auto& d = s.distribution();
  const double t = s(x);
  const double left = t <= x ? d.density(x - t) : 0.0;
  const double right = t <= 1.0 - x ? d.density(x + t) : 0.0;
  return (left - right) / (2.0 * s.level() / (t * t * t) + left + right);
}

SpreadBounds closed_form_bounds(const SpreadFunction& s, double x) {
  const double level = s.level();
  const auto& d = s.distribution();
  switch (d.kind()) {
    case DistributionKind::Uniform:
    case DistributionKind::Tabulated: {
      const double p_hi = d.density_bound();
      const double p_lo = d.density_floor();
      if (!(p_lo > 0.0)) throw Error(ErrorCode::NoBoundAvailable, "density is not bounded away from zero");
      return {std::cbrt(level / (2.0 * p_hi)), std::cbrt(level / p_lo)};
    }
    case DistributionKind::Power: {
      if (s.n() <= 9) throw Error(ErrorCode::NoBoundAvailable, "power bounds need n > 9");
      const double a = d.alpha();
      const double two_a1 = std::pow(2.0, a + 1.0);
      const double a_n = std::pow(level / two_a1, 1.0 / (a + 3.0));
      if (x <= a_n) {
        return {std::pow(level / two_a1, 1.0 / (a + 3.0)), std::pow(level, 1.0 / (a + 3.0))};
      }
      const double xa = std::pow(x, a);
      return {std::cbrt(level / (two_a1 * (a + 1.0) * xa)), std::cbrt(level / xa)};
    }
    case DistributionKind::Example3: {
      const double p = d.density(x);
      return {std::cbrt(level / (3.0 * p)), std::cbrt(2.0 * level / p)};
    }
    case DistributionKind::Mixture: break;
  }
  throw Error(ErrorCode::NoBoundAvailable, "no closed-form bound for " + to_string(d.kind()));
}

SpreadBounds vanishing_density_bounds(long n, double alpha, double A) {
  if (!(alpha > 0.0) || !(A > 0.0)) throw Error(ErrorCode::InvalidParameter, "alpha and A must be positive");
  const double level = spread_level(n);
  const double e = 1.0 / (alpha + 3.0);
  return {std::pow((alpha + 1.0) * level / A, e), std::pow((alpha + 1.0) * A * level, e)};
}

EmpiricalSpread::EmpiricalSpread(std::vector<double> points) : points_(std::move(points)) {
  if (points_.size() < 2) throw Error(ErrorCode::InvalidParameter, "empirical spread needs n >= 2");
  std::sort(points_.begin(), points_.end());
  log_n_ = std::log(static_cast<double>(points_.size()));
}

double EmpiricalSpread::operator()(double x) const {
  // Walk the sorted distances r_1 <= r_2 <= ... outward from x; the answer is
  // min_k max(r_k, sqrt(log n / k)) and no k with r_k >= best can improve it.
  const auto n = points_.size();
  auto right = static_cast<std::size_t>(std::lower_bound(points_.begin(), points_.end(), x) - points_.begin());
  std::size_t left = right;  // points_[left - 1] is the next candidate on the left
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= n; ++k) {
    double r;
    const double dl = left > 0 ? x - points_[left - 1] : std::numeric_limits<double>::infinity();
    const double dr = right < n ? points_[right] - x : std::numeric_limits<double>::infinity();
    if (dl <= dr) {
      r = dl;
      --left;
    } else {
      r = dr;
      ++right;
    }
    if (r >= best) break;
    best = std::min(best, std::max(r, std::sqrt(log_n_ / static_cast<double>(k))));
  }
  return best;
}

double empirical_spread(const EmpiricalSpread& e, double x) { return e(x); }

}  // namespace lipshift
