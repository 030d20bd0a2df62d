// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The lipshift Authors

#pragma once

#include <functional>
#include <vector>

namespace lipshift {

inline constexpr int kDefaultQuadratureNodes = 4097;

/// Composite Simpson rule on [a, b]. An even node count is bumped to the next
/// odd one so that every panel has a midpoint.
double simpson(const std::function<double(double)>& f, double a, double b, int nodes);

/// Same rule applied to values already sampled on an equispaced grid (odd size).
double simpson_sampled(const std::vector<double>& values, double a, double b);

std::vector<double> linspace(double a, double b, int count);
std::vector<double> logspace(double lo, double hi, int count);

}  // namespace lipshift
