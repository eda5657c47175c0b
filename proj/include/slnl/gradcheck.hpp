#pragma once

#include <functional>
#include <string>
#include <vector>

#include "slnl/tensor.hpp"

namespace slnl {

/// Central-difference comparison used across the gradient suites:
/// |analytic - numeric| <= atol + rtol * |numeric|.
struct GradCheckResult {
  bool pass = true;
  double worst_abs = 0.0;    // worst |a - b|
  double worst_excess = 0.0; // worst |a - b| - (atol + rtol*|b|), <= 0 when passing
  std::size_t checked = 0;
  std::string detail;        // first failing coordinate, when any
};

struct GradCheckSettings {
  double step = 1e-5;
  double atol = 1e-6;
  double rtol = 1e-4;
  // Check at most this many coordinates per tensor (0 = all), sampled
  // deterministically from the given seed.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
};

/// f evaluates a scalar from the current contents of the wiggled tensors;
/// analytic[i] must hold d f / d wiggled[i] at the unperturbed point.
GradCheckResult finite_difference_check(const std::function<double()>& f,
                                        const std::vector<Tensor*>& wiggled,
                                        const std::vector<const Tensor*>& analytic,
                                        const GradCheckSettings& s = {});

}  // namespace slnl
