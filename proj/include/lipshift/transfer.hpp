// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The lipshift Authors
//
// Covariate-shift estimator: two Lipschitz LSEs (source and target sample)
// combined pointwise by comparing their empirical spreads.

#pragma once

#include "lipshift/densities.hpp"
#include "lipshift/lipfit.hpp"
#include "lipshift/spread.hpp"

namespace lipshift {

struct TwoSampleData {
  RegressionSample source;
  RegressionSample target;
  DesignDistribution source_design;
  DesignDistribution target_design;
};

struct TransferFit {
  LipschitzFit fit1;
  LipschitzFit fit2;
  EmpiricalSpread spread_source;
  EmpiricalSpread spread_target;

  /// 1 when the source spread is no larger than the target spread, else 2.
  int selector(double x) const;
  double operator()(double x) const;
};

TransferFit fit_transfer(const TwoSampleData& data, double L);

/// Mixture (n P + m Q) / (n + m) as a design distribution.
DesignDistribution mixture_design(const DesignDistribution& P, const DesignDistribution& Q, long n, long m);

/// Spread of the mixture design at sample size n + m.
double mixture_spread(const DesignDistribution& P, const DesignDistribution& Q, long n, long m, double x);

inline constexpr int kDefaultRiskNodes = 2049;

struct RiskIntegrals {
  double i1;      // integral of t_n^P(x)^2 q(x)
  double i2;      // (log n / n) integral of Q([x ± t]) / (t P([x ± t]))
  double i3;      // 2^{1/3} (log n / n)^{2/3} ||p||^{1/3} integral of Q([x ± t]) / P([x ± t])
  double tl2_rhs; // 4 integral of t Q([x ± t])
};

RiskIntegrals transfer_risk_integrals(const DesignDistribution& P, const DesignDistribution& Q, long n,
                                      int nodes = kDefaultRiskNodes);

}  // namespace lipshift
