// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <span>
#include <vector>

namespace adacap {

// Central-finite-difference gradient verification.
//
// Returns max over coordinates of
//   |analytic_i - (f(x + eps e_i) - f(x - eps e_i)) / (2 eps)| / max(1, |analytic_i|).
//
// eps must lie in [1e-7, 1e-3]; throws if any probe of f is non-finite.
double grad_check(const std::function<double(std::span<const double>)>& f,
                  std::span<const double> analytic_grad,
                  std::span<const double> x, double eps);

}  // namespace adacap
