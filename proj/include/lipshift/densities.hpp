// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The lipshift Authors
//
// Design distributions on [0, 1]: exact densities, CDFs, interval masses,
// inverse-CDF samplers and a grid diagnostic for the local doubling property.

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

namespace lipshift {

enum class DistributionKind { Uniform, Power, Example3, Tabulated, Mixture };

std::string to_string(DistributionKind kind);

struct TabulatedData;
struct MixtureData;

class DesignDistribution {
 public:
  static DesignDistribution uniform();
  /// Density (alpha + 1) x^alpha.
  static DesignDistribution power(double alpha);
  /// Density phi_n + 16 (1 - phi_n) max(1/4 - x, 0, x - 3/4) with
  /// phi_n = min(1, n^{-1/4} log n).
  static DesignDistribution example3(long n);
  /// Piecewise-linear density through (grid[i], values[i]); grid must start
  /// at 0 and end at 1. The values are rescaled to integrate to one.
  static DesignDistribution tabulated(std::vector<double> grid, std::vector<double> values);
  /// Convex combination; weights are normalised.
  static DesignDistribution mixture(std::vector<std::pair<double, DesignDistribution>> parts);

  DistributionKind kind() const noexcept;

  /// Zero outside [0, 1].
  double density(double x) const;
  /// Clamped to [0, 1] outside the unit interval.
  double cdf(double x) const;
  double quantile(double u) const;

  /// Upper bound on the density: exact for single families, the convex
  /// combination of component bounds for mixtures.
  double density_bound() const;
  /// Infimum of the density over [0, 1]; a lower bound for mixtures.
  double density_floor() const;

  double alpha() const;        // Power only
  long example3_n() const;     // Example3 only
  double example3_phi() const; // Example3 only

  nlohmann::json to_json() const;

 private:
  struct UniformSpec {};
  struct PowerSpec {
    double alpha;
  };
  struct Example3Spec {
    long n;
    double phi;
  };
  using Spec = std::variant<UniformSpec, PowerSpec, Example3Spec, std::shared_ptr<const TabulatedData>,
                            std::shared_ptr<const MixtureData>>;

  explicit DesignDistribution(Spec spec) : spec_(std::move(spec)) {}

  Spec spec_;
};

/// Example3 weight phi_n = min(1, n^{-1/4} log n).
double example3_phi(long n);

/// P([a, b] ∩ [0, 1]). Throws InvalidInterval when a > b.
double interval_mass(const DesignDistribution& d, double a, double b);

/// P([x - t, x + t] ∩ [0, 1]).
inline double window_mass(const DesignDistribution& d, double x, double t) {
  return interval_mass(d, x - t, x + t);
}

/// Inverse-CDF sampling driven by Rng(seed).
std::vector<double> sample(const DesignDistribution& d, std::size_t count, std::uint64_t seed);

inline constexpr int kDefaultDoublingXGrid = 512;
inline constexpr int kDefaultDoublingEtaGrid = 64;

/// max over the grids of P([x ± 2η]) / P([x ± η]) (intervals clipped to [0, 1]).
/// A lower estimate of the doubling constant on (0, eta_max]. Throws
/// NonDoubling when a denominator mass vanishes.
double doubling_constant(const DesignDistribution& d, double eta_max, std::span<const double> x_grid,
                         std::span<const double> eta_grid);

/// Same diagnostic on the default grids: 512 equispaced x and 64 log-spaced
/// η in [eta_max / 1000, eta_max].
double doubling_constant(const DesignDistribution& d, double eta_max);

/// Parses {"kind": "uniform"|"power"|"example3"|"tabulated"|"mixture", ...}.
/// Throws ConfigError on malformed specs.
DesignDistribution parse_distribution(const nlohmann::json& spec);

}  // namespace lipshift
