// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The lipshift Authors

#include "lipshift/prooflab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lipshift/error.hpp"
#include "lipshift/quadrature.hpp"

namespace lipshift {

double PiecewiseLinear::operator()(double x) const {
  if (knots.empty()) return 0.0;
  if (x <= knots.front()) return values.front();
  if (x >= knots.back()) return values.back();
  const auto it = std::upper_bound(knots.begin(), knots.end(), x);
  const auto i = static_cast<std::size_t>(it - knots.begin()) - 1;
  const double w = (x - knots[i]) / (knots[i + 1] - knots[i]);
  return values[i] + w * (values[i + 1] - values[i]);
}

double sampled_lipschitz_constant(const RealFunction& f, std::span<const double> grid) {
  double worst = 0.0;
  double prev = grid.empty() ? 0.0 : f(grid[0]);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double cur = f(grid[i]);
    const double dx = grid[i] - grid[i - 1];
    if (dx > 0.0) worst = std::max(worst, std::abs(cur - prev) / dx);
    prev = cur;
  }
  return worst;
}

PiecewiseLinear random_lipschitz_path(double a, double b, double slope, int pieces, double start, Rng& rng) {
  if (pieces < 1 || !(b > a)) throw Error(ErrorCode::InvalidParameter, "random path needs a < b and pieces >= 1");
  PiecewiseLinear out;
  out.knots = linspace(a, b, pieces + 1);
  out.values.resize(out.knots.size());
  out.values[0] = start;
  for (std::size_t j = 1; j < out.knots.size(); ++j) {
    const double s = slope * (2.0 * rng.uniform() - 1.0);
    out.values[j] = out.values[j - 1] + s * (out.knots[j] - out.knots[j - 1]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Local perturbation

double Perturbation::h(double x) const {
  return psi(x_tilde) - f(x_tilde) + delta * std::abs(x - x_tilde) + f(x) - 0.5 * s_n;
}

double Perturbation::g(double x) const { return (x >= x_ell && x <= x_u) ? h(x) : psi(x); }

namespace {

constexpr double kCrossingTol = 1e-10;
constexpr double kBudgetSlack = 1e-9;

// Root of d between lo (d <= 0) and hi (d > 0).
template <class F>
double refine_crossing(const F& d, double lo, double hi) {
  for (int it = 0; it < 200 && std::abs(hi - lo) > kCrossingTol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (d(mid) <= 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

void check_grid(std::span<const double> grid) {
  if (grid.size() < 2) throw Error(ErrorCode::InvalidParameter, "grid needs at least two points");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 0.0 || grid[i] > 1.0) throw Error(ErrorCode::InvalidParameter, "grid must lie in [0, 1]");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw Error(ErrorCode::InvalidParameter, "grid must be ascending");
  }
}

}  // namespace

Perturbation build_perturbation(const RealFunction& psi, const RealFunction& f, double delta, const SpreadFunction& s,
                                double K, std::span<const double> grid) {
  if (!(delta > 0.0 && delta < 1.0)) throw Error(ErrorCode::InvalidParameter, "delta must lie in (0, 1)");
  if (!(K > 0.0)) throw Error(ErrorCode::InvalidParameter, "K must be positive");
  check_grid(grid);
  if (sampled_lipschitz_constant(psi, grid) > 1.0 + kBudgetSlack) {
    throw Error(ErrorCode::InvalidInput, "psi is not 1-Lipschitz on the grid");
  }
  if (sampled_lipschitz_constant(f, grid) > 1.0 - delta + kBudgetSlack) {
    throw Error(ErrorCode::InvalidInput, "f is not (1 - delta)-Lipschitz on the grid");
  }

  const std::size_t n = grid.size();
  std::vector<double> gap(n);
  std::size_t i_star = 0;
  double best_ratio = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    gap[i] = psi(grid[i]) - f(grid[i]);
    const double ratio = gap[i] / s(grid[i]);
    if (ratio > best_ratio) {
      best_ratio = ratio;
      i_star = i;
    }
  }
  if (best_ratio < K) {
    throw Error(ErrorCode::NoViolation, "max (psi - f) / t_n = " + std::to_string(best_ratio) + " is below K");
  }
  const double x_star = grid[i_star];
  std::size_t i_tilde = 0;
  double best_tilted = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = gap[i] - 0.5 * delta * std::abs(grid[i] - x_star);
    if (v > best_tilted) {
      best_tilted = v;
      i_tilde = i;
    }
  }

  Perturbation p;
  p.psi = psi;
  p.f = f;
  p.delta = delta;
  p.K = K;
  p.x_star = x_star;
  p.x_tilde = grid[i_tilde];
  p.s_n = std::min(2.0 * K * s(p.x_tilde), 2.0 * K * s(x_star) + 0.5 * delta * std::abs(x_star - p.x_tilde));

  auto d = [&p](double x) { return p.psi(x) - p.h(x); };
  p.x_ell = 0.0;
  for (std::size_t i = i_tilde; i-- > 0;) {
    if (d(grid[i]) <= 0.0) {
      p.x_ell = refine_crossing(d, grid[i], grid[i + 1]);
      break;
    }
  }
  p.x_u = 1.0;
  for (std::size_t i = i_tilde + 1; i < n; ++i) {
    if (d(grid[i]) <= 0.0) {
      p.x_u = refine_crossing(d, grid[i], grid[i - 1]);
      break;
    }
  }
  return p;
}

PerturbationReport check_perturbation(const Perturbation& p, std::span<const double> grid) {
  check_grid(grid);
  PerturbationReport r;
  for (std::size_t i = 1; i < grid.size(); ++i) r.grid_spacing = std::max(r.grid_spacing, grid[i] - grid[i - 1]);
  r.lipschitz_g = sampled_lipschitz_constant([&p](double x) { return p.g(x); }, grid);

  for (double x : grid) {
    const double psi = p.psi(x);
    const double g = p.g(x);
    if (x < p.x_ell || x > p.x_u) {
      r.support_violation = std::max(r.support_violation, std::abs(psi - g));
    } else {
      r.support_violation = std::max(r.support_violation, g - psi);
      r.ordering_violation = std::max({r.ordering_violation, p.f(x) - g, g - psi});
    }
  }

  const double sn = p.s_n;
  const double xt = p.x_tilde;
  r.outer_violation = std::max({0.0, (xt - sn / p.delta) - p.x_ell, p.x_u - (xt + sn / p.delta)});
  r.inner_violation = std::max({0.0, p.x_ell - std::max(xt - sn / 4.0, 0.0), std::min(xt + sn / 4.0, 1.0) - p.x_u});

  const double lo = std::max(0.0, xt - sn / 8.0);
  const double hi = std::min(1.0, xt + sn / 8.0);
  r.gap_min = std::numeric_limits<double>::infinity();
  auto probe = [&](double x) { r.gap_min = std::min(r.gap_min, p.psi(x) - p.g(x) - sn / 4.0); };
  probe(lo);
  probe(hi);
  probe(xt);
  for (double x : grid) {
    if (x >= lo && x <= hi) probe(x);
  }
  return r;
}

std::vector<MassBoundCheck> perturbation_mass_bounds(const Perturbation& p, const SpreadFunction& s, double D,
                                                     std::span<const double> cs) {
  if (!(p.K > 0.5)) throw Error(ErrorCode::InvalidParameter, "mass bound needs K > 1/2");
  if (static_cast<double>(s.n()) < std::exp(4.0 * p.K * p.K)) {
    throw Error(ErrorCode::InvalidParameter, "mass bound needs n >= exp(4 K^2)");
  }
  std::vector<MassBoundCheck> out;
  for (double c : cs) {
    if (!(c > 0.0)) throw Error(ErrorCode::InvalidParameter, "c must be positive");
    const double steps = std::ceil(std::log2(1.0 / (p.delta * c))) + 1.0;
    const double factor = std::min(1.0, std::pow(D, -steps));
    out.push_back({c, p.s_n * p.s_n * window_mass(s.distribution(), p.x_tilde, c * p.s_n),
                   factor * 4.0 * p.K * p.K * s.level()});
  }
  return out;
}

PerturbationInstance random_perturbation_instance(const SpreadFunction& s, double delta, double K,
                                                  std::span<const double> grid, Rng& rng) {
  PerturbationInstance inst;
  const int pieces = 4 + static_cast<int>(rng.uniform() * 28.0);
  inst.psi = random_lipschitz_path(0.0, 1.0, 1.0, pieces, 2.0 * rng.uniform() - 1.0, rng);
  inst.f = random_lipschitz_path(0.0, 1.0, 1.0 - delta, 4 + static_cast<int>(rng.uniform() * 28.0),
                                 2.0 * rng.uniform() - 1.0, rng);
  double best = -std::numeric_limits<double>::infinity();
  double t_at_best = 1.0;
  for (double x : grid) {
    const double t = s(x);
    const double ratio = (inst.psi(x) - inst.f(x)) / t;
    if (ratio > best) {
      best = ratio;
      t_at_best = t;
    }
  }
  // Lower f just enough for the K-gap, plus a random extra margin.
  const double shift = std::max(0.0, (K - best) * t_at_best) + 0.5 * K * t_at_best * rng.uniform() + 1e-9;
  for (double& v : inst.f.values) v -= shift;
  return inst;
}

// ---------------------------------------------------------------------------
// Covering

int cover_cells(double a, double b, double r) {
  if (!(a < b) || !(r > 0.0)) throw Error(ErrorCode::InvalidParameter, "cover needs a < b and r > 0");
  const double ratio = (b - a) / r;
  if (ratio > kMaxCoverCells + 1) throw Error(ErrorCode::SizeCap, "more than 3^12 covering centers requested");
  const int k = static_cast<int>(std::floor(ratio + 1e-9));
  if (k > kMaxCoverCells) throw Error(ErrorCode::SizeCap, "more than 3^12 covering centers requested");
  return k;
}

namespace {

int slope_of_digit(std::size_t digit) { return digit == 0 ? 0 : (digit == 1 ? 1 : -1); }

PiecewiseLinear center_from_slopes(double a, double r, std::span<const int> slopes) {
  PiecewiseLinear h;
  h.knots.push_back(a);
  h.values.push_back(0.0);
  h.knots.push_back(a + r);
  h.values.push_back(0.0);
  for (std::size_t i = 0; i < slopes.size(); ++i) {
    h.knots.push_back(a + static_cast<double>(i + 2) * r);
    h.values.push_back(h.values.back() + slopes[i] * r);
  }
  return h;
}

}  // namespace

std::vector<PiecewiseLinear> lipschitz_cover(double a, double b, double r) {
  const int k = cover_cells(a, b, r);
  std::size_t total = 1;
  for (int i = 0; i < k; ++i) total *= 3;
  std::vector<PiecewiseLinear> out;
  out.reserve(total);
  std::vector<int> slopes(static_cast<std::size_t>(k));
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rest = idx;
    for (int i = 0; i < k; ++i) {
      slopes[i] = slope_of_digit(rest % 3);
      rest /= 3;
    }
    out.push_back(center_from_slopes(a, r, slopes));
  }
  return out;
}

std::size_t cover_index(std::span<const int> choice) {
  std::size_t idx = 0;
  for (std::size_t i = choice.size(); i-- > 0;) {
    const std::size_t digit = choice[i] == 0 ? 0 : (choice[i] > 0 ? 1 : 2);
    idx = idx * 3 + digit;
  }
  return idx;
}

PiecewiseLinear cover_center_for(const RealFunction& g, double a, double b, double r, std::span<const double> grid,
                                 std::vector<int>* choice) {
  const int k = cover_cells(a, b, r);
  std::vector<int> slopes;
  double level = 0.0;
  for (int i = 1; i <= k; ++i) {
    const double lo = a + i * r;
    const double hi = a + (i + 1) * r;
    bool up = false;
    bool down = false;
    for (double y : grid) {
      if (y < lo || y > hi) continue;
      const double diff = g(y) - level;
      up = up || diff > r;
      down = down || diff < -r;
    }
    const int slope = up ? 1 : (down ? -1 : 0);
    slopes.push_back(slope);
    level += slope * r;
  }
  if (choice != nullptr) *choice = slopes;
  return center_from_slopes(a, r, slopes);
}

PiecewiseLinear random_supported_lipschitz(double a, double b, int pieces, Rng& rng) {
  if (pieces < 1 || !(b > a)) throw Error(ErrorCode::InvalidParameter, "random function needs a < b, pieces >= 1");
  PiecewiseLinear out;
  out.knots = linspace(a, b, pieces + 1);
  out.values.assign(out.knots.size(), 0.0);
  for (std::size_t j = 1; j < out.knots.size(); ++j) {
    const double room = b - out.knots[j];
    const double step = (2.0 * rng.uniform() - 1.0) * (out.knots[j] - out.knots[j - 1]);
    out.values[j] = std::clamp(out.values[j - 1] + step, -room, room);
  }
  out.values.back() = 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// KL

namespace {

double kl_on(const RealFunction& f, const RealFunction& g, const DesignDistribution& P, const DesignDistribution& Q,
             long n, long m, double lo, double hi, int nodes) {
  const double nd = static_cast<double>(n);
  const double md = static_cast<double>(m);
  return simpson(
      [&](double x) {
        const double e = f(x) - g(x);
        return 0.5 * e * e * (nd * P.density(x) + (m > 0 ? md * Q.density(x) : 0.0));
      },
      lo, hi, nodes);
}

}  // namespace

double kl_divergence(const RealFunction& f, const RealFunction& g, const DesignDistribution& P,
                     const DesignDistribution& Q, long n, long m, int nodes) {
  if (nodes < 64) throw Error(ErrorCode::InvalidParameter, "kl_divergence needs at least 64 nodes");
  if (n < 0 || m < 0) throw Error(ErrorCode::InvalidParameter, "sample sizes must be non-negative");
  return kl_on(f, g, P, Q, n, m, 0.0, 1.0, nodes);
}

// ---------------------------------------------------------------------------
// Lower-bound family

double HypothesisFamily::t_nm(double x) const {
  const double tp = spread_P(x);
  return spread_Q ? std::min(tp, (*spread_Q)(x)) : tp;
}

double HypothesisFamily::f(std::size_t j, double x) const {
  return std::max(0.0, heights[j] / 6.0 - std::abs(x - centers[j]));
}

double lower_bound_n0(double c_infinity) {
  if (!(c_infinity >= 1.0)) throw Error(ErrorCode::InvalidParameter, "a density bound is at least 1");
  const double c0 = std::log(6.0 * (2.0 * c_infinity - 1.0));
  // With L = log N the constraint reads L/12 - log(L)/3 >= c0; the left side
  // increases for L >= 4 and is negative below.
  auto phi = [c0](double L) { return L / 12.0 - std::log(L) / 3.0 - c0; };
  double lo = 4.0;
  double hi = 8.0;
  while (phi(hi) < 0.0) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (phi(mid) < 0.0 ? lo : hi) = mid;
  }
  double n0 = std::exp(hi);
  // The second constraint, (log N / N)^{1/3} <= 1/4.
  while (std::log(n0) / n0 > 1.0 / 64.0) n0 *= 2.0;
  return n0;
}

HypothesisFamily build_lower_bound_family(const DesignDistribution& P, const DesignDistribution& Q, long n, long m) {
  if (n < 2) throw Error(ErrorCode::InvalidParameter, "lower-bound family needs n >= 2");
  if (m < 0 || m == 1) throw Error(ErrorCode::InvalidParameter, "lower-bound family needs m = 0 or m >= 2");
  HypothesisFamily fam;
  fam.n = n;
  fam.m = m;
  fam.N = n + m;
  const double Nd = static_cast<double>(fam.N);
  fam.psi_N = std::cbrt(std::log(Nd) / Nd);
  if (fam.psi_N > 0.25) throw Error(ErrorCode::InvalidParameter, "N too small: psi_N exceeds 1/4");
  fam.M_N = static_cast<long>(std::ceil(1.0 / (2.0 * fam.psi_N)));
  fam.spread_P = SpreadFunction(P, n);
  if (m >= 2) fam.spread_Q = SpreadFunction(Q, m);
  fam.target = Q;
  fam.c_infinity = std::max(P.density_bound(), m > 0 ? Q.density_bound() : 0.0);
  fam.two_b = 1.0 / (3.0 * (2.0 * fam.c_infinity - 1.0));
  fam.N0 = lower_bound_n0(fam.c_infinity);

  const double wp = static_cast<double>(n) / Nd;
  const double wq = static_cast<double>(m) / Nd;
  for (long k = 1; k <= fam.M_N; ++k) {
    const double center = (2.0 * static_cast<double>(k) - 1.0) * fam.psi_N;
    const double lo = center - fam.psi_N;
    const double hi = center + fam.psi_N;
    const double mass = wp * interval_mass(P, lo, hi) + (m > 0 ? wq * interval_mass(Q, lo, hi) : 0.0);
    if (mass >= fam.psi_N) {
      fam.kept.push_back(k);
      fam.centers.push_back(center);
      fam.heights.push_back(fam.t_nm(std::clamp(center, 0.0, 1.0)));
    }
  }
  fam.s_N = static_cast<long>(fam.kept.size());
  if (fam.s_N == 0) throw Error(ErrorCode::DegenerateScale, "no interval carries mixture mass >= psi_N");
  return fam;
}

double family_separation(const HypothesisFamily& family, std::span<const double> grid) {
  const auto s = family.centers.size();
  if (s < 2) return std::numeric_limits<double>::infinity();
  std::vector<double> t(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) t[i] = family.t_nm(grid[i]);
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < s; ++a) {
    for (std::size_t b = a + 1; b < s; ++b) {
      double sep = 0.0;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        sep = std::max(sep, std::abs(family.f(a, grid[i]) - family.f(b, grid[i])) / t[i]);
      }
      worst = std::min(worst, sep);
    }
  }
  return worst;
}

double family_mean_kl(const HypothesisFamily& family, int nodes) {
  if (nodes < 64) throw Error(ErrorCode::InvalidParameter, "kl integration needs at least 64 nodes");
  const auto& P = family.spread_P.distribution();
  double acc = 0.0;
  for (std::size_t j = 0; j < family.centers.size(); ++j) {
    const double half = family.heights[j] / 6.0;
    const double lo = std::max(0.0, family.centers[j] - half);
    const double hi = std::min(1.0, family.centers[j] + half);
    if (!(hi > lo)) continue;
    acc += kl_on([&](double x) { return family.f(j, x); }, [](double) { return 0.0; }, P, family.target, family.n,
                 family.m, lo, hi, nodes);
  }
  return acc / static_cast<double>(family.centers.size());
}

// ---------------------------------------------------------------------------
// Transfer exponent

std::vector<double> transfer_exponent_profile(const DesignDistribution& P, const DesignDistribution& Q, double gamma,
                                              std::span<const double> eta_grid, std::span<const double> x_grid) {
  if (eta_grid.empty() || x_grid.size() < 2) throw Error(ErrorCode::InvalidParameter, "grids must be nonempty");
  std::vector<double> out;
  out.reserve(eta_grid.size());
  for (double eta : eta_grid) {
    if (!(eta > 0.0)) throw Error(ErrorCode::InvalidParameter, "eta must be positive");
    double integral = 0.0;
    double prev = 0.0;
    for (std::size_t i = 0; i < x_grid.size(); ++i) {
      const double mass = window_mass(P, x_grid[i], eta);
      if (!(mass > 0.0)) throw Error(ErrorCode::NonDoubling, "zero source mass on a window");
      const double v = Q.density(x_grid[i]) / mass;
      if (i > 0) integral += 0.5 * (v + prev) * (x_grid[i] - x_grid[i - 1]);
      prev = v;
    }
    out.push_back(std::pow(eta, gamma) * integral);
  }
  return out;
}

double transfer_exponent_check(const DesignDistribution& P, const DesignDistribution& Q, double gamma,
                               std::span<const double> eta_grid, std::span<const double> x_grid) {
  const auto profile = transfer_exponent_profile(P, Q, gamma, eta_grid, x_grid);
  return *std::max_element(profile.begin(), profile.end());
}

bool profile_settles(std::span<const double> profile) {
  if (profile.size() < 3) throw Error(ErrorCode::InvalidInput, "profile needs at least 3 values");
  const double first = profile[1] - profile[0];
  const double last = profile[profile.size() - 1] - profile[profile.size() - 2];
  return last <= 0.5 * std::abs(first);
}

}  // namespace lipshift
