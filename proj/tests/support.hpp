// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <string>

#include <unistd.h>

#include "avsr/numerics.hpp"
#include "avsr/rng.hpp"
#include "avsr/tensor.hpp"

namespace avsr::testing {

// Gradient checks: central differences at h = 1e-5 in 64-bit arithmetic.
// Relative error uses max(|a|, |b|, kGradFloor) as denominator so entries
// whose true gradient is ~0 are judged on absolute error below 1e-10.
inline constexpr double kGradTol = 1e-4;
inline constexpr double kGradFloor = 1e-6;
inline constexpr double kGradStep = 1e-5;

/// Max relative error of `analytic` against central differences of `loss`
/// taken with respect to `param`, which is perturbed in place and restored.
inline double check_param(const std::function<double()>& loss, Tensor& param, const Tensor& analytic) {
  const Tensor saved = param;
  const Tensor fd = finite_diff_grad(
      [&](const Tensor& x) {
        param = x;
        return loss();
      },
      saved, kGradStep);
  param = saved;
  return max_relative_error(analytic, fd, kGradFloor);
}

inline double project(const Tensor& y, const Tensor& r) {
  require_same_shape(y, r, "project");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
  return s;
}

inline Tensor randn(Rng& rng, Shape shape, double std = 1.0) { return rng_normal(rng, std::move(shape), 0.0, std); }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("avsr_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace avsr::testing
