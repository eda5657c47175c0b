#pragma once

#include <vector>

#include "slnl/report.hpp"

namespace slnl {

/// Oracle and property suites behind the `verify` command. For exact checks
/// the tolerance column is 0; gradient checks report how far the worst
/// coordinate exceeds the mixed bound |a-b| <= 1e-6 + 1e-4|b| (<= 0 passes).
std::vector<CheckResult> verify_dft();
std::vector<CheckResult> verify_nonlocal();
std::vector<CheckResult> verify_losses();
std::vector<CheckResult> verify_gradients();
std::vector<CheckResult> verify_suite(const std::string& name);  // and "all"

/// Toy end-to-end configuration used by the gradient sweep (about 2k
/// learnable scalars).
ModelConfig toy_model_config();

/// Central-difference sweep over every learnable tensor of a freshly
/// initialized toy model; samples at least min_coords coordinates.
CheckResult toy_model_gradient_sweep(std::size_t min_coords = 200);

}  // namespace slnl
