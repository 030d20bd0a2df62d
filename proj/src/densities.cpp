// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The lipshift Authors

#include "lipshift/densities.hpp"

#include <algorithm>
#include <cmath>

#include "lipshift/error.hpp"
#include "lipshift/quadrature.hpp"
#include "lipshift/rng.hpp"

namespace lipshift {

struct TabulatedData {
  std::vector<double> grid;
  std::vector<double> values;
  std::vector<double> cumulative;
  double max_value = 0.0;
  double min_value = 0.0;
};

struct MixtureData {
  std::vector<double> weights;
  std::vector<DesignDistribution> parts;
};

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

// Bisection for the generalized inverse of a continuous nondecreasing CDF.
template <class Cdf>
double invert_by_bisection(const Cdf& cdf, double u, double lo, double hi, double tol) {
  for (int it = 0; it < 200 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid) < u) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double tabulated_density(const TabulatedData& t, double x) {
  auto it = std::upper_bound(t.grid.begin(), t.grid.end(), x);
  if (it == t.grid.end()) return t.values.back();
  if (it == t.grid.begin()) return t.values.front();
  const auto i = static_cast<std::size_t>(it - t.grid.begin()) - 1;
  const double w = (x - t.grid[i]) / (t.grid[i + 1] - t.grid[i]);
  return t.values[i] + w * (t.values[i + 1] - t.values[i]);
}

double tabulated_cdf(const TabulatedData& t, double x) {
  if (x >= 1.0) return 1.0;
  auto it = std::upper_bound(t.grid.begin(), t.grid.end(), x);
  const auto i = static_cast<std::size_t>(it - t.grid.begin()) - 1;
  const double h = t.grid[i + 1] - t.grid[i];
  const double dx = x - t.grid[i];
  const double slope = (t.values[i + 1] - t.values[i]) / h;
  return std::min(1.0, t.cumulative[i] + t.values[i] * dx + 0.5 * slope * dx * dx);
}

double tabulated_quantile(const TabulatedData& t, double u) {
  auto it = std::lower_bound(t.cumulative.begin(), t.cumulative.end(), u);
  std::size_t hi = static_cast<std::size_t>(it - t.cumulative.begin());
  hi = std::clamp<std::size_t>(hi, 1, t.grid.size() - 1);
  return invert_by_bisection([&](double x) { return tabulated_cdf(t, x); }, u, t.grid[hi - 1], t.grid[hi],
                             1e-12);
}

double example3_cdf(double phi, double x) {
  const double c = 1.0 - phi;
  if (x <= 0.25) return phi * x + c * (4.0 * x - 8.0 * x * x);
  if (x <= 0.75) return phi * x + 0.5 * c;
  const double z = x - 0.75;
  return phi * x + 0.5 * c + 8.0 * c * z * z;
}

double example3_quantile(double phi, double u) {
  const double c = 1.0 - phi;
  const double f_lo = 0.25 * phi + 0.5 * c;
  const double f_hi = 0.75 * phi + 0.5 * c;
  if (u <= f_lo) {
    // 8c x^2 - (4 - 3 phi) x + u = 0, smaller root in the stable form.
    const double b = 4.0 - 3.0 * phi;
    return 2.0 * u / (b + std::sqrt(std::max(0.0, b * b - 32.0 * c * u)));
  }
  if (u <= f_hi) return (u - 0.5 * c) / phi;
  const double r = u - f_hi;
  if (r <= 0.0) return 0.75;
  return 0.75 + 2.0 * r / (phi + std::sqrt(phi * phi + 32.0 * c * r));
}

}  // namespace

std::string to_string(DistributionKind kind) {
  switch (kind) {
    case DistributionKind::Uniform: return "uniform";
    case DistributionKind::Power: return "power";
    case DistributionKind::Example3: return "example3";
    case DistributionKind::Tabulated: return "tabulated";
    case DistributionKind::Mixture: return "mixture";
  }
  return "unknown";
}

double example3_phi(long n) {
  if (n <= 2) throw Error(ErrorCode::InvalidParameter, "example3 requires n > 2");
  const double nd = static_cast<double>(n);
  return std::min(1.0, std::pow(nd, -0.25) * std::log(nd));
}

DesignDistribution DesignDistribution::uniform() { return DesignDistribution(UniformSpec{}); }

DesignDistribution DesignDistribution::power(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorCode::InvalidParameter, "power alpha must be positive");
  }
  return DesignDistribution(PowerSpec{alpha});
}

DesignDistribution DesignDistribution::example3(long n) {
  return DesignDistribution(Example3Spec{n, lipshift::example3_phi(n)});
}

DesignDistribution DesignDistribution::tabulated(std::vector<double> grid, std::vector<double> values) {
  if (grid.size() < 2 || grid.size() != values.size()) {
    throw Error(ErrorCode::InvalidParameter, "tabulated density needs matching grid/values of size >= 2");
  }
  if (std::abs(grid.front()) > 1e-12 || std::abs(grid.back() - 1.0) > 1e-12) {
    throw Error(ErrorCode::InvalidParameter, "tabulated grid must start at 0 and end at 1");
  }
  grid.front() = 0.0;
  grid.back() = 1.0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    if (!(grid[i + 1] > grid[i])) throw Error(ErrorCode::InvalidParameter, "tabulated grid must be ascending");
  }
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::InvalidParameter, "tabulated density values must be finite and non-negative");
    }
  }
  auto data = std::make_shared<TabulatedData>();
  data->cumulative.assign(grid.size(), 0.0);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    data->cumulative[i + 1] = data->cumulative[i] + 0.5 * (values[i] + values[i + 1]) * (grid[i + 1] - grid[i]);
  }
  const double total = data->cumulative.back();
  if (!(total > 0.0)) throw Error(ErrorCode::InvalidParameter, "tabulated density has zero mass");
  for (double& v : values) v /= total;
  for (double& c : data->cumulative) c /= total;
  data->cumulative.back() = 1.0;
  data->max_value = *std::max_element(values.begin(), values.end());
  data->min_value = *std::min_element(values.begin(), values.end());
  data->grid = std::move(grid);
  data->values = std::move(values);
  return DesignDistribution(std::shared_ptr<const TabulatedData>(std::move(data)));
}

DesignDistribution DesignDistribution::mixture(std::vector<std::pair<double, DesignDistribution>> parts) {
  if (parts.empty()) throw Error(ErrorCode::InvalidParameter, "mixture needs at least one component");
  double total = 0.0;
  for (const auto& [w, d] : parts) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorCode::InvalidParameter, "mixture weights must be >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::InvalidParameter, "mixture weights sum to zero");
  auto data = std::make_shared<MixtureData>();
  for (auto& [w, d] : parts) {
    data->weights.push_back(w / total);
    data->parts.push_back(std::move(d));
  }
  return DesignDistribution(std::shared_ptr<const MixtureData>(std::move(data)));
}

DistributionKind DesignDistribution::kind() const noexcept {
  switch (spec_.index()) {
    case 0: return DistributionKind::Uniform;
    case 1: return DistributionKind::Power;
    case 2: return DistributionKind::Example3;
    case 3: return DistributionKind::Tabulated;
    default: return DistributionKind::Mixture;
  }
}

double DesignDistribution::density(double x) const {
  if (x < 0.0 || x > 1.0) return 0.0;
  return std::visit(
      Overloaded{
          [](const UniformSpec&) { return 1.0; },
          [x](const PowerSpec& s) { return (s.alpha + 1.0) * std::pow(x, s.alpha); },
          [x](const Example3Spec& s) {
            return s.phi + 16.0 * (1.0 - s.phi) * std::max({0.25 - x, 0.0, x - 0.75});
          },
          [x](const std::shared_ptr<const TabulatedData>& t) { return tabulated_density(*t, x); },
          [x](const std::shared_ptr<const MixtureData>& m) {
            double acc = 0.0;
            for (std::size_t k = 0; k < m->parts.size(); ++k) acc += m->weights[k] * m->parts[k].density(x);
            return acc;
          },
      },
      spec_);
}

double DesignDistribution::cdf(double x) const {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return std::visit(
      Overloaded{
          [x](const UniformSpec&) { return x; },
          [x](const PowerSpec& s) { return std::pow(x, s.alpha + 1.0); },
          [x](const Example3Spec& s) { return example3_cdf(s.phi, x); },
          [x](const std::shared_ptr<const TabulatedData>& t) { return tabulated_cdf(*t, x); },
          [x](const std::shared_ptr<const MixtureData>& m) {
            double acc = 0.0;
            for (std::size_t k = 0; k < m->parts.size(); ++k) acc += m->weights[k] * m->parts[k].cdf(x);
            return std::min(acc, 1.0);
          },
      },
      spec_);
}

double DesignDistribution::quantile(double u) const {
  u = clamp01(u);
  return std::visit(
      Overloaded{
          [u](const UniformSpec&) { return u; },
          [u](const PowerSpec& s) { return std::pow(u, 1.0 / (s.alpha + 1.0)); },
          [u](const Example3Spec& s) { return clamp01(example3_quantile(s.phi, u)); },
          [u](const std::shared_ptr<const TabulatedData>& t) { return tabulated_quantile(*t, u); },
          [this, u](const std::shared_ptr<const MixtureData>&) {
            return invert_by_bisection([this](double x) { return cdf(x); }, u, 0.0, 1.0, 1e-13);
          },
      },
      spec_);
}

double DesignDistribution::density_bound() const {
  return std::visit(Overloaded{
                        [](const UniformSpec&) { return 1.0; },
                        [](const PowerSpec& s) { return s.alpha + 1.0; },
                        [](const Example3Spec& s) { return 4.0 - 3.0 * s.phi; },
                        [](const std::shared_ptr<const TabulatedData>& t) { return t->max_value; },
                        [](const std::shared_ptr<const MixtureData>& m) {
                          double acc = 0.0;
                          for (std::size_t k = 0; k < m->parts.size(); ++k) {
                            acc += m->weights[k] * m->parts[k].density_bound();
                          }
                          return acc;
                        },
                    },
                    spec_);
}

double DesignDistribution::density_floor() const {
  return std::visit(Overloaded{
                        [](const UniformSpec&) { return 1.0; },
                        [](const PowerSpec&) { return 0.0; },
                        [](const Example3Spec& s) { return s.phi; },
                        [](const std::shared_ptr<const TabulatedData>& t) { return t->min_value; },
                        [](const std::shared_ptr<const MixtureData>& m) {
                          double acc = 0.0;
                          for (std::size_t k = 0; k < m->parts.size(); ++k) {
                            acc += m->weights[k] * m->parts[k].density_floor();
                          }
                          return acc;
                        },
                    },
                    spec_);
}

double DesignDistribution::alpha() const {
  if (const auto* s = std::get_if<PowerSpec>(&spec_)) return s->alpha;
  throw Error(ErrorCode::InvalidParameter, "alpha() called on a non-power distribution");
}

long DesignDistribution::example3_n() const {
  if (const auto* s = std::get_if<Example3Spec>(&spec_)) return s->n;
  throw Error(ErrorCode::InvalidParameter, "example3_n() called on a non-example3 distribution");
}

double DesignDistribution::example3_phi() const {
  if (const auto* s = std::get_if<Example3Spec>(&spec_)) return s->phi;
  throw Error(ErrorCode::InvalidParameter, "example3_phi() called on a non-example3 distribution");
}

nlohmann::json DesignDistribution::to_json() const {
  using nlohmann::json;
  return std::visit(Overloaded{
                        [](const UniformSpec&) { return json{{"kind", "uniform"}}; },
                        [](const PowerSpec& s) { return json{{"kind", "power"}, {"alpha", s.alpha}}; },
                        [](const Example3Spec& s) { return json{{"kind", "example3"}, {"n", s.n}}; },
                        [](const std::shared_ptr<const TabulatedData>& t) {
                          return json{{"kind", "tabulated"}, {"grid", t->grid}, {"values", t->values}};
                        },
                        [](const std::shared_ptr<const MixtureData>& m) {
                          json parts = json::array();
                          for (std::size_t k = 0; k < m->parts.size(); ++k) {
                            parts.push_back({{"weight", m->weights[k]}, {"dist", m->parts[k].to_json()}});
                          }
                          return json{{"kind", "mixture"}, {"components", parts}};
                        },
                    },
                    spec_);
}

double interval_mass(const DesignDistribution& d, double a, double b) {
  if (a > b || std::isnan(a) || std::isnan(b)) {
    throw Error(ErrorCode::InvalidInterval, "interval_mass requires a <= b");
  }
  const double lo = std::max(a, 0.0);
  const double hi = std::min(b, 1.0);
  if (hi <= lo) return 0.0;
  return std::clamp(d.cdf(hi) - d.cdf(lo), 0.0, 1.0);
}

std::vector<double> sample(const DesignDistribution& d, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out(count);
  for (auto& x : out) x = d.quantile(rng.uniform());
  return out;
}

double doubling_constant(const DesignDistribution& d, double eta_max, std::span<const double> x_grid,
                         std::span<const double> eta_grid) {
  if (x_grid.empty() || eta_grid.empty()) throw Error(ErrorCode::InvalidParameter, "doubling grids must be nonempty");
  double worst = 0.0;
  for (double eta : eta_grid) {
    if (!(eta > 0.0) || eta > eta_max * (1.0 + 1e-12)) {
      throw Error(ErrorCode::InvalidParameter, "eta grid must lie in (0, eta_max]");
    }
    for (double x : x_grid) {
      if (x < 0.0 || x > 1.0) throw Error(ErrorCode::InvalidParameter, "x grid must lie in [0, 1]");
      const double inner = window_mass(d, x, eta);
      if (!(inner > 0.0)) {
        throw Error(ErrorCode::NonDoubling, "zero mass at x=" + std::to_string(x) + " eta=" + std::to_string(eta));
      }
      worst = std::max(worst, window_mass(d, x, 2.0 * eta) / inner);
    }
  }
  return worst;
}

double doubling_constant(const DesignDistribution& d, double eta_max) {
  const auto xs = linspace(0.0, 1.0, kDefaultDoublingXGrid);
  const auto etas = logspace(eta_max * 1e-3, eta_max, kDefaultDoublingEtaGrid);
  return doubling_constant(d, eta_max, xs, etas);
}

DesignDistribution parse_distribution(const nlohmann::json& spec) {
  try {
    if (!spec.is_object()) throw Error(ErrorCode::ConfigError, "distribution spec must be a JSON object");
    const std::string kind = spec.at("kind").get<std::string>();
    if (kind == "uniform") return DesignDistribution::uniform();
    if (kind == "power") return DesignDistribution::power(spec.at("alpha").get<double>());
    if (kind == "example3") return DesignDistribution::example3(spec.at("n").get<long>());
    if (kind == "tabulated") {
      return DesignDistribution::tabulated(spec.at("grid").get<std::vector<double>>(),
                                           spec.at("values").get<std::vector<double>>());
    }
    if (kind == "mixture") {
      std::vector<std::pair<double, DesignDistribution>> parts;
      for (const auto& c : spec.at("components")) {
        parts.emplace_back(c.at("weight").get<double>(), parse_distribution(c.at("dist")));
      }
      return DesignDistribution::mixture(std::move(parts));
    }
    throw Error(ErrorCode::ConfigError, "unknown distribution kind '" + kind + "'");
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    throw Error(ErrorCode::ConfigError, e.what());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("bad distribution spec: ") + e.what());
  }
}

}  // namespace lipshift
