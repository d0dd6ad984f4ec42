// Copyright (c) 2026 The AdaCap Authors
// SPDX-License-Identifier: Apache-2.0

#include "adacap/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace adacap {

double grad_check(const std::function<double(std::span<const double>)>& f,
                  std::span<const double> analytic_grad,
                  std::span<const double> x, double eps) {
  if (eps < 1e-7 || eps > 1e-3) throw std::invalid_argument("grad_check: eps out of [1e-7, 1e-3]");
  if (analytic_grad.size() != x.size()) throw std::invalid_argument("grad_check: size mismatch");

  std::vector<double> probe(x.begin(), x.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    double saved = probe[i];
    probe[i] = saved + eps;
    double fp = f(probe);
    probe[i] = saved - eps;
    double fm = f(probe);
    probe[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw std::runtime_error("grad_check: non-finite probe value");
    }
    double numeric = (fp - fm) / (2.0 * eps);
    double rel = std::abs(analytic_grad[i] - numeric) / std::max(1.0, std::abs(analytic_grad[i]));
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace adacap
