// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The lipshift Authors

#include "lipshift/lipfit.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "lipshift/error.hpp"
#include "lipshift/quadrature.hpp"

namespace lipshift {

RegressionSample::RegressionSample(std::vector<double> x, std::vector<double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::InvalidInput, "x and y must have the same length");
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  x_.reserve(x.size());
  y_.reserve(y.size());
  for (std::size_t i : order) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw Error(ErrorCode::InvalidInput, "non-finite sample value");
    x_.push_back(x[i]);
    y_.push_back(y[i]);
  }
}

double RegressionSample::max_abs_y() const noexcept {
  double m = 0.0;
  for (double v : y_) m = std::max(m, std::abs(v));
  return m;
}

double LipschitzFit::operator()(double x) const {
  if (knots.empty()) return 0.0;
  if (x <= knots.front()) return values.front();
  if (x >= knots.back()) return values.back();
  const auto it = std::upper_bound(knots.begin(), knots.end(), x);
  const auto i = static_cast<std::size_t>(it - knots.begin()) - 1;
  const double w = (x - knots[i]) / (knots[i + 1] - knots[i]);
  return values[i] + w * (values[i + 1] - values[i]);
}

double evaluate(const LipschitzFit& fit, double x) { return fit(x); }

namespace {

struct Breakpoint {
  double pos;     // stored relative to the owning deque's offset
  double dslope;  // jump of the derivative's slope at this position
};

// Value-function derivative of the chain problem. Breakpoints at or left of
// the current minimiser live in `left`, the others in `right`; erosion by a
// shifts the two halves apart by moving their offsets.
class ChainDerivative {
 public:
  // Minimiser after adding w (f - ybar)^2 to the current value function.
  double add_term(double w, double ybar) {
    slope_inf_ += 2.0 * w;
    double g = g_;
    double v = have_term_ ? 2.0 * w * (g - ybar) : 0.0;
    if (!have_term_) {
      have_term_ = true;
      g_ = ybar;
      return g_;
    }
    if (v < 0.0) {
      for (;;) {
        const double sigma = slope_inf_ + sum_left_;
        if (right_.empty()) {
          g -= v / sigma;
          break;
        }
        const double p = right_.front().pos + off_r_;
        const double vp = v + sigma * (p - g);
        if (vp >= 0.0) {
          g -= v / sigma;
          break;
        }
        const Breakpoint b = right_.front();
        right_.pop_front();
        left_.push_back({p - off_l_, b.dslope});
        sum_left_ += b.dslope;
        g = p;
        v = vp;
      }
    } else if (v > 0.0) {
      for (;;) {
        const double sigma = slope_inf_ + sum_left_;
        if (left_.empty()) {
          g -= v / sigma;
          break;
        }
        const double p = left_.back().pos + off_l_;
        const double vp = v - sigma * (g - p);
        if (vp <= 0.0) {
          g -= v / sigma;
          break;
        }
        const Breakpoint b = left_.back();
        left_.pop_back();
        right_.push_front({p - off_r_, b.dslope});
        sum_left_ -= b.dslope;
        g = p;
        v = vp;
      }
    }
    g_ = g;
    return g_;
  }

  // Replaces V by f -> min_{|g - f| <= a} V(g).
  void erode(double a) {
    const double sigma = slope_inf_ + sum_left_;
    left_.push_back({g_ - off_l_, -sigma});
    sum_left_ -= sigma;
    right_.push_front({g_ - off_r_, sigma});
    off_l_ -= a;
    off_r_ += a;
  }

 private:
  std::deque<Breakpoint> left_;
  std::deque<Breakpoint> right_;
  double off_l_ = 0.0;
  double off_r_ = 0.0;
  double slope_inf_ = 0.0;
  double sum_left_ = 0.0;
  double g_ = 0.0;
  bool have_term_ = false;
};

}  // namespace

LipschitzFit fit_lipschitz_lse(const RegressionSample& sample, double L, double tol) {
  if (sample.empty()) throw Error(ErrorCode::InvalidInput, "cannot fit an empty sample");
  if (!(L > 0.0) || !std::isfinite(L)) throw Error(ErrorCode::InvalidParameter, "Lipschitz budget must be positive");
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidParameter, "tolerance must be positive");
  const auto& xs = sample.x();
  const auto& ys = sample.y();

  // Merge tied design points into weighted pseudo-points.
  LipschitzFit fit;
  fit.budget = L;
  std::vector<double> weight;
  std::vector<double> mean;
  for (std::size_t i = 0; i < xs.size();) {
    std::size_t j = i;
    double acc = 0.0;
    while (j < xs.size() && xs[j] == xs[i]) acc += ys[j++];
    fit.knots.push_back(xs[i]);
    weight.push_back(static_cast<double>(j - i));
    mean.push_back(acc / static_cast<double>(j - i));
    i = j;
  }
  const std::size_t m = fit.knots.size();

  std::vector<double> minimiser(m);
  std::vector<double> gap(m, 0.0);
  ChainDerivative deriv;
  for (std::size_t i = 0; i < m; ++i) {
    if (i > 0) {
      gap[i - 1] = L * (fit.knots[i] - fit.knots[i - 1]);
      deriv.erode(gap[i - 1]);
    }
    minimiser[i] = deriv.add_term(weight[i], mean[i]);
  }
  fit.values.assign(m, 0.0);
  fit.values[m - 1] = minimiser[m - 1];
  for (std::size_t i = m - 1; i-- > 0;) {
    fit.values[i] = std::clamp(minimiser[i], fit.values[i + 1] - gap[i], fit.values[i + 1] + gap[i]);
  }

  std::vector<double> per_point;
  per_point.reserve(xs.size());
  for (std::size_t i = 0, k = 0; i < xs.size(); ++i) {
    if (xs[i] != fit.knots[k]) ++k;
    per_point.push_back(fit.values[k]);
  }
  fit.objective = residual_sum_of_squares(sample, per_point);
  fit.kkt_residual = lipschitz_kkt_residual(sample, per_point, L);
  if (!(fit.kkt_residual <= kKktTolerance * (1.0 + sample.max_abs_y()))) {
    throw Error(ErrorCode::SolverFailure, "KKT residual " + std::to_string(fit.kkt_residual) + " above threshold");
  }
  return fit;
}

double residual_sum_of_squares(const RegressionSample& sample, std::span<const double> f) {
  if (f.size() != sample.size()) throw Error(ErrorCode::InvalidInput, "fitted values do not match sample size");
  double acc = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double r = sample.y()[i] - f[i];
    acc += r * r;
  }
  return acc;
}

double lipschitz_kkt_residual(const RegressionSample& sample, std::span<const double> f, double L) {
  const auto n = sample.size();
  if (f.size() != n) throw Error(ErrorCode::InvalidInput, "fitted values do not match sample size");
  const auto& xs = sample.x();
  const auto& ys = sample.y();
  double residual = 0.0;
  double nu = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    nu += 2.0 * (f[i] - ys[i]);
    if (i + 1 == n) {
      residual = std::max(residual, std::abs(nu));
      break;
    }
    const double a = L * (xs[i + 1] - xs[i]);
    const double diff = f[i + 1] - f[i];
    const double slack_up = a - diff;
    const double slack_down = a + diff;
    residual = std::max({residual, -slack_up, -slack_down});
    // nu_i > 0 needs the upper constraint active, nu_i < 0 the lower one.
    if (nu > 0.0) residual = std::max(residual, std::min(nu, std::max(slack_up, 0.0)));
    if (nu < 0.0) residual = std::max(residual, std::min(-nu, std::max(slack_down, 0.0)));
  }
  return residual;
}

std::vector<double> fit_isotonic_lse(const RegressionSample& sample) {
  const auto& xs = sample.x();
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size();) {
    const double v = isotonic_at(sample, xs[i]);
    std::size_t j = i;
    while (j < xs.size() && xs[j] == xs[i]) out[j++] = v;
    i = j;
  }
  return out;
}

std::vector<double> isotonic_pava(const RegressionSample& sample) {
  const auto& xs = sample.x();
  const auto& ys = sample.y();
  struct Block {
    double sum;
    double weight;
    std::size_t end;  // one past the last sample index in the block
  };
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < xs.size();) {
    Block b{0.0, 0.0, i};
    while (b.end < xs.size() && xs[b.end] == xs[i]) {
      b.sum += ys[b.end++];
      b.weight += 1.0;
    }
    i = b.end;
    while (!blocks.empty() && blocks.back().sum / blocks.back().weight >= b.sum / b.weight) {
      b.sum += blocks.back().sum;
      b.weight += blocks.back().weight;
      blocks.pop_back();
    }
    blocks.push_back(b);
  }
  std::vector<double> out(xs.size());
  std::size_t start = 0;
  for (const auto& b : blocks) {
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(start), out.begin() + static_cast<std::ptrdiff_t>(b.end),
              b.sum / b.weight);
    start = b.end;
  }
  return out;
}

double isotonic_at(const RegressionSample& sample, double x) {
  const auto n = sample.size();
  if (n == 0) throw Error(ErrorCode::InvalidInput, "isotonic fit of an empty sample");
  const auto& xs = sample.x();
  const auto& ys = sample.y();
  if (x > xs.back()) x = xs.back();
  // k_- = #{X_(k) < x}, k_+ = k_- + 1 in 1-based order statistics.
  const auto k_minus = static_cast<std::size_t>(std::lower_bound(xs.begin(), xs.end(), x) - xs.begin());
  const std::size_t k_plus = k_minus + 1;

  std::vector<double> partial(n + 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) partial[k + 1] = partial[k] + ys[k];

  // Lower convex hull of (j, S_j), j = 0..k_-.
  std::vector<std::size_t> hull;
  for (std::size_t j = 0; j <= k_minus; ++j) {
    while (hull.size() >= 2) {
      const std::size_t a = hull[hull.size() - 2];
      const std::size_t b = hull.back();
      const double cross = (partial[b] - partial[a]) * static_cast<double>(j - a) -
                           (partial[j] - partial[a]) * static_cast<double>(b - a);
      if (cross >= 0.0) {
        hull.pop_back();
      } else {
        break;
      }
    }
    hull.push_back(j);
  }
  auto slope = [&](std::size_t j, std::size_t i) {
    return (partial[i] - partial[j]) / static_cast<double>(i - j);
  };

  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = k_plus; i <= n; ++i) {
    // The slope from hull vertices to (i, S_i) is unimodal along the hull.
    std::size_t lo = 0;
    std::size_t hi = hull.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (slope(hull[mid], i) >= slope(hull[mid + 1], i)) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    best = std::min(best, slope(hull[lo], i));
  }
  return best;
}

double kernel_smoother(const RegressionSample& sample, const DesignDistribution& d, double h, double x) {
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidParameter, "bandwidth must be positive");
  if (sample.empty()) throw Error(ErrorCode::InvalidInput, "kernel smoother of an empty sample");
  const double p = d.density(x);
  if (!(p > 0.0)) throw Error(ErrorCode::DivisionByZeroDensity, "design density vanishes at x");
  const auto& xs = sample.x();
  const auto& ys = sample.y();
  auto it = std::lower_bound(xs.begin(), xs.end(), x - h);
  double acc = 0.0;
  for (auto i = static_cast<std::size_t>(it - xs.begin()); i < xs.size() && xs[i] <= x + h; ++i) {
    acc += ys[i] * std::max(0.0, 1.0 - std::abs(xs[i] - x) / h);
  }
  return acc / (static_cast<double>(sample.size()) * h * p);
}

double weighted_sup_loss(const RealFunction& fit, const RealFunction& f0, const RealFunction& t,
                         std::span<const double> grid) {
  if (grid.empty()) throw Error(ErrorCode::InvalidParameter, "loss grid is empty");
  double worst = 0.0;
  for (double x : grid) worst = std::max(worst, std::abs(fit(x) - f0(x)) / t(x));
  return worst;
}

double sup_loss(const RealFunction& fit, const RealFunction& f0, std::span<const double> grid) {
  if (grid.empty()) throw Error(ErrorCode::InvalidParameter, "loss grid is empty");
  double worst = 0.0;
  for (double x : grid) worst = std::max(worst, std::abs(fit(x) - f0(x)));
  return worst;
}

double l2_risk(const RealFunction& fit, const RealFunction& f0, const DesignDistribution& q, int nodes) {
  if (nodes < 16) throw Error(ErrorCode::InvalidParameter, "l2_risk needs at least 16 nodes");
  return simpson(
      [&](double x) {
        const double e = fit(x) - f0(x);
        return e * e * q.density(x);
      },
      0.0, 1.0, nodes);
}

}  // namespace lipshift
