// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "avsr/error.hpp"
#include "avsr/numerics.hpp"

namespace avsr {

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double h) {
  if (!(h > 0.0)) throw ParameterError("finite_diff_grad: step must be positive");
  Tensor grad = zeros_like(x);
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = f(probe);
    probe[i] = orig - h;
    const double down = f(probe);
    probe[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_diff_grad: f not finite near element " + std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace avsr
