#include "slnl/gradcheck.hpp"

#include <cmath>
#include <random>

namespace slnl {

GradCheckResult finite_difference_check(const std::function<double()>& f,
                                        const std::vector<Tensor*>& wiggled,
                                        const std::vector<const Tensor*>& analytic,
                                        const GradCheckSettings& s) {
  check(wiggled.size() == analytic.size(), "gradcheck: tensor list size mismatch");
  GradCheckResult r;
  Rng rng(s.seed);
  for (std::size_t ti = 0; ti < wiggled.size(); ++ti) {
    Tensor& x = *wiggled[ti];
    const Tensor& a = *analytic[ti];
    check(x.same_shape(a), "gradcheck: analytic gradient shape mismatch");
    std::vector<std::size_t> coords;
    if (s.max_coords == 0 || x.numel() <= s.max_coords) {
      coords.resize(x.numel());
      for (std::size_t i = 0; i < x.numel(); ++i) coords[i] = i;
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, x.numel() - 1);
      coords.resize(s.max_coords);
      for (std::size_t i = 0; i < s.max_coords; ++i) coords[i] = pick(rng);
    }
    for (std::size_t i : coords) {
      const double keep = x[i];
      x[i] = keep + s.step;
      const double fp = f();
      x[i] = keep - s.step;
      const double fm = f();
      x[i] = keep;
      const double numeric = (fp - fm) / (2.0 * s.step);
      const double diff = std::abs(a[i] - numeric);
      const double excess = diff - (s.atol + s.rtol * std::abs(numeric));
      r.checked += 1;
      r.worst_abs = std::max(r.worst_abs, diff);
      if (excess > r.worst_excess) r.worst_excess = excess;
      if (excess > 0.0 && r.pass) {
        r.pass = false;
        r.detail = "tensor " + std::to_string(ti) + " coord " + std::to_string(i) +
                   ": analytic " + std::to_string(a[i]) + " vs numeric " +
                   std::to_string(numeric);
      }
    }
  }
  return r;
}

}  // namespace slnl
