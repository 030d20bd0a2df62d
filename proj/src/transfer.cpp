// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The lipshift Authors

#include "lipshift/transfer.hpp"

#include <cmath>

#include "lipshift/error.hpp"
#include "lipshift/quadrature.hpp"

namespace lipshift {

int TransferFit::selector(double x) const { return spread_source(x) <= spread_target(x) ? 1 : 2; }

double TransferFit::operator()(double x) const { return selector(x) == 1 ? fit1(x) : fit2(x); }

TransferFit fit_transfer(const TwoSampleData& data, double L) {
  if (data.source.size() < 2 || data.target.size() < 2) {
    throw Error(ErrorCode::InvalidInput, "transfer needs at least two source and two target points");
  }
  return TransferFit{fit_lipschitz_lse(data.source, L), fit_lipschitz_lse(data.target, L),
                     EmpiricalSpread(data.source.x()), EmpiricalSpread(data.target.x())};
}

DesignDistribution mixture_design(const DesignDistribution& P, const DesignDistribution& Q, long n, long m) {
  if (n < 2 || m < 2) throw Error(ErrorCode::InvalidParameter, "mixture spread needs n, m >= 2");
  const double total = static_cast<double>(n + m);
  return DesignDistribution::mixture({{static_cast<double>(n) / total, P}, {static_cast<double>(m) / total, Q}});
}

double mixture_spread(const DesignDistribution& P, const DesignDistribution& Q, long n, long m, double x) {
  return spread_at(SpreadFunction(mixture_design(P, Q, n, m), n + m), x);
}

RiskIntegrals transfer_risk_integrals(const DesignDistribution& P, const DesignDistribution& Q, long n, int nodes) {
  if (nodes < 64) throw Error(ErrorCode::InvalidParameter, "risk integrals need at least 64 nodes");
  if (nodes % 2 == 0) ++nodes;
  const SpreadFunction t = SpreadFunction(P, n).with_cache(nodes);
  const auto xs = linspace(0.0, 1.0, nodes);
  std::vector<double> f1(xs.size()), f2(xs.size()), f3(xs.size()), f4(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double x = xs[i];
    const double tx = t.cached(x);
    const double qm = window_mass(Q, x, tx);
    const double pm = window_mass(P, x, tx);
    if (!(pm > 0.0)) throw Error(ErrorCode::NonDoubling, "source mass vanishes on a spread window");
    f1[i] = tx * tx * Q.density(x);
    f2[i] = qm / (tx * pm);
    f3[i] = qm / pm;
    f4[i] = tx * qm;
  }
  const double level = t.level();
  RiskIntegrals r;
  r.i1 = simpson_sampled(f1, 0.0, 1.0);
  r.i2 = level * simpson_sampled(f2, 0.0, 1.0);
  r.i3 = std::cbrt(2.0) * std::pow(level, 2.0 / 3.0) * std::cbrt(P.density_bound()) * simpson_sampled(f3, 0.0, 1.0);
  r.tl2_rhs = 4.0 * simpson_sampled(f4, 0.0, 1.0);
  return r;
}

}  // namespace lipshift
