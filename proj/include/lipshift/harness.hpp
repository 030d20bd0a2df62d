// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The lipshift Authors
//
// Monte Carlo rate experiments: data generation from Y = f0(X) + noise,
// replicated estimator runs over sample-size grids, log-log slope fits and
// report writers.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lipshift/densities.hpp"
#include "lipshift/lipfit.hpp"

namespace lipshift {

enum class F0Kind { Zero, Triangle, Sine };

/// Regression function of the simulation model.
///   Triangle: slope * (0.25 - |x - center|)_+
///   Sine:     amplitude * sin(2 pi frequency x)
struct F0Spec {
  F0Kind kind = F0Kind::Zero;
  double center = 0.5;
  double slope = 0.5;
  double amplitude = 0.0;
  double frequency = 1.0;

  double operator()(double x) const;
  double lipschitz_constant() const;
};

enum class EstimatorKind { Lse, Kernel, Isotonic, Transfer };

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::Lse;
  /// Kernel only: h = (log n / n)^{1/3} when true, else `bandwidth`.
  bool adaptive_bandwidth = true;
  double bandwidth = 0.0;

  std::string name() const;
};

enum class LossKind { WeightedSup, Sup, L2Q, DensityWeightedSup };

std::string to_string(LossKind loss);

struct ExperimentConfig {
  DesignDistribution design = DesignDistribution::uniform();
  std::optional<DesignDistribution> target_design;
  F0Spec f0;
  double delta = 0.1;
  std::vector<long> n_grid;
  std::vector<long> m_grid;
  int replicates = 1;
  std::uint64_t seed = 0;
  double noise_sd = 1.0;
  double budget = 1.0;
  std::vector<EstimatorSpec> estimators;
  std::vector<LossKind> losses;
  int eval_points = 201;
  int quadrature_nodes = 2049;
  std::string output;
  nlohmann::json source;  // the parsed JSON, kept for hashing and reporting
};

/// Validates and parses an experiment config; throws ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j);

/// FNV-1a hash of the canonical JSON dump of the config.
std::uint64_t config_hash(const ExperimentConfig& config);

/// n points with X drawn from `design` and Y = f0(X) + noise_sd * eps, all
/// from one Rng(seed) stream (n uniforms for X, then n normals).
RegressionSample generate(const ExperimentConfig& config, const DesignDistribution& design, long n,
                          std::uint64_t seed);
RegressionSample generate(const ExperimentConfig& config, long n, std::uint64_t seed);

/// Seed of replicate r: base seed combined with a hash of r.
std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t replicate);

struct LossRecord {
  std::string estimator;
  std::string loss;
  long n = 0;
  long m = 0;
  int replicate = 0;
  double value = 0.0;
};

struct LossSummary {
  std::string estimator;
  std::string loss;
  long n = 0;
  long m = 0;
  int count = 0;
  int failures = 0;
  double mean = 0.0;
  double median = 0.0;
  double std_error = 0.0;
};

struct SlopeFit {
  double slope = 0.0;
  double std_error = 0.0;
};

struct SlopeSummary {
  std::string estimator;
  std::string loss;
  long m = 0;
  bool defined = false;
  SlopeFit fit;
  std::string note;
};

struct RateReport {
  std::vector<LossRecord> records;
  std::vector<LossSummary> summaries;
  std::vector<SlopeSummary> slopes;
  nlohmann::json metadata;

  const LossSummary* find(const std::string& estimator, const std::string& loss, long n, long m = 0) const;
  const SlopeSummary* find_slope(const std::string& estimator, const std::string& loss, long m = 0) const;
};

/// OLS of log(loss) on log(n). Needs >= 3 points; throws InvalidInput on a
/// nonpositive loss.
SlopeFit fit_loglog_slope(const std::vector<std::pair<double, double>>& points);

/// Runs every (estimator, n[, m], replicate) cell, replicates in parallel.
/// Throws ExperimentError when more than 5% of the replicates of a cell fail.
RateReport run_rate_experiment(const ExperimentConfig& config, unsigned threads = 0);

nlohmann::json report_to_json(const RateReport& report);
void write_losses_csv(const RateReport& report, const std::string& path);
void write_report_json(const RateReport& report, const std::string& path);

}  // namespace lipshift
