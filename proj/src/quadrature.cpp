// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The lipshift Authors

#include "lipshift/quadrature.hpp"

#include <cmath>

#include "lipshift/error.hpp"

namespace lipshift {

double simpson(const std::function<double(double)>& f, double a, double b, int nodes) {
  if (nodes < 3) throw Error(ErrorCode::InvalidParameter, "simpson needs at least 3 nodes");
  if (nodes % 2 == 0) ++nodes;
  const int panels = nodes - 1;
  const double h = (b - a) / panels;
  double odd = 0.0;
  double even = 0.0;
  for (int i = 1; i < panels; ++i) {
    const double v = f(a + i * h);
    (i % 2 == 1 ? odd : even) += v;
  }
  return h / 3.0 * (f(a) + f(b) + 4.0 * odd + 2.0 * even);
}

double simpson_sampled(const std::vector<double>& values, double a, double b) {
  const auto nodes = static_cast<int>(values.size());
  if (nodes < 3 || nodes % 2 == 0) {
    throw Error(ErrorCode::InvalidParameter, "simpson_sampled needs an odd number (>= 3) of samples");
  }
  const double h = (b - a) / (nodes - 1);
  double acc = values.front() + values.back();
  for (int i = 1; i + 1 < nodes; ++i) acc += (i % 2 == 1 ? 4.0 : 2.0) * values[i];
  return h / 3.0 * acc;
}

std::vector<double> linspace(double a, double b, int count) {
  std::vector<double> out(static_cast<std::size_t>(count));
  if (count == 1) {
    out[0] = a;
    return out;
  }
  for (int i = 0; i < count; ++i) out[i] = a + (b - a) * i / (count - 1);
  out.back() = b;
  return out;
}

std::vector<double> logspace(double lo, double hi, int count) {
  std::vector<double> out(static_cast<std::size_t>(count));
  if (count == 1) {
    out[0] = hi;
    return out;
  }
  const double llo = std::log(lo);
  const double lhi = std::log(hi);
  for (int i = 0; i < count; ++i) out[i] = std::exp(llo + (lhi - llo) * i / (count - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

}  // namespace lipshift
