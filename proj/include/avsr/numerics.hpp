// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "avsr/rng.hpp"
#include "avsr/tensor.hpp"

namespace avsr {

/// Central-difference gradient of a scalar function: for each element,
/// (f(x + h e_i) - f(x - h e_i)) / 2h. Throws NumericError if f is not finite.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double h = 1e-5);

// Multiply-accumulate policies. Every weight application in the layer kernels
// goes through mac(); the counting policy lets the resource oracle observe
// exactly how many multiply-accumulates a forward pass performs.

struct PlainMac {
  static constexpr bool counting = false;
};

struct CountingMac {
  static constexpr bool counting = true;
  std::uint64_t count = 0;
};

template <class Mac>
inline void mac(Mac& m, double& acc, double a, double b) {
  acc += a * b;
  if constexpr (Mac::counting) ++m.count;
}

template <class Mac>
inline double dot(Mac& m, const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) mac(m, acc, a[i], b[i]);
  return acc;
}

}  // namespace avsr
