#pragma once

#include <cmath>
#include <functional>
#include <numbers>

#include "slnl/dft.hpp"
#include "slnl/gradcheck.hpp"
#include "slnl/nonlocal.hpp"
#include "slnl/ops.hpp"

// Independent oracles and the finite-difference harness. Everything here
// computes expectations by brute force and must stay decoupled from the
// implementation paths it checks.
namespace slnl::testing {

// Direct O((T*N)^2) double sum per channel: the textbook transform.
inline FreqComponents dft2_direct(const Tensor& x) {
  const std::size_t C = x.shape[0], T = x.shape[1], N = x.shape[2];
  FreqComponents f{Tensor({C, T, N}), Tensor({C, T, N})};
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t u = 0; u < T; ++u)
      for (std::size_t v = 0; v < N; ++v) {
        double re = 0.0, im = 0.0;
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t n = 0; n < N; ++n) {
            const double ang = -two_pi * (static_cast<double>(u * t) / static_cast<double>(T) +
                                          static_cast<double>(v * n) / static_cast<double>(N));
            re += x.at3(c, t, n) * std::cos(ang);
            im += x.at3(c, t, n) * std::sin(ang);
          }
        f.f_cos.at3(c, u, v) = re;
        f.f_sin.at3(c, u, v) = im;
      }
  return f;
}

// Naive 4-loop convolution with explicit zero padding.
inline Tensor conv2d_direct(const Tensor& x, const Tensor& k, const Tensor& b) {
  const std::size_t C = x.shape[0], T = x.shape[1], N = x.shape[2];
  const std::size_t O = k.shape[0], kt = k.shape[2], kn = k.shape[3];
  const std::ptrdiff_t pt = static_cast<std::ptrdiff_t>((kt - 1) / 2);
  const std::ptrdiff_t pn = static_cast<std::ptrdiff_t>((kn - 1) / 2);
  Tensor y({O, T, N});
  for (std::size_t o = 0; o < O; ++o)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t n = 0; n < N; ++n) {
        double acc = b[o];
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t dt = 0; dt < kt; ++dt)
            for (std::size_t dn = 0; dn < kn; ++dn) {
              const std::ptrdiff_t ts = static_cast<std::ptrdiff_t>(t + dt) - pt;
              const std::ptrdiff_t ns = static_cast<std::ptrdiff_t>(n + dn) - pn;
              if (ts < 0 || ns < 0 || ts >= static_cast<std::ptrdiff_t>(T) ||
                  ns >= static_cast<std::ptrdiff_t>(N))
                continue;
              acc += x.at3(c, static_cast<std::size_t>(ts), static_cast<std::size_t>(ns)) *
                     k.data[((o * C + c) * kt + dt) * kn + dn];
            }
        y.at3(o, t, n) = acc;
      }
  return y;
}

// Brute-force pairwise non-local sum: explicit exp affinities, explicit
// normalization, no softmax shortcut.
inline Tensor nonlocal_direct(const Tensor& x, const NonLocalParams& p) {
  const std::size_t M = x.shape[0], P = x.shape[1];
  const std::size_t Q = p.w_g.shape[0], L = p.w_phi.shape[0];
  auto embed = [&](const Tensor& w, std::size_t rows, std::size_t i, std::size_t r) {
    double acc = 0.0;
    (void)rows;
    for (std::size_t c = 0; c < P; ++c) acc += w.at2(r, c) * x.at2(i, c);
    return acc;
  };
  Tensor y({M, Q});
  for (std::size_t i = 0; i < M; ++i) {
    std::vector<double> weights(M);
    double z = 0.0;
    for (std::size_t j = 0; j < M; ++j) {
      double dot = 0.0;
      for (std::size_t l = 0; l < L; ++l) dot += embed(p.w_phi, L, i, l) * embed(p.w_psi, L, j, l);
      weights[j] = std::exp(dot);
      z += weights[j];
    }
    std::vector<double> pooled(Q, 0.0);
    for (std::size_t j = 0; j < M; ++j)
      for (std::size_t q = 0; q < Q; ++q) {
        double gj = 0.0;
        for (std::size_t c = 0; c < P; ++c) gj += p.w_g.at2(q, c) * x.at2(j, c);
        pooled[q] += weights[j] / z * gj;
      }
    for (std::size_t q = 0; q < Q; ++q) {
      double acc = 0.0;
      for (std::size_t q2 = 0; q2 < Q; ++q2) acc += p.w_w.at2(q, q2) * pooled[q2];
      y.at2(i, q) = acc;
    }
  }
  return y;
}

// Finite-difference check of a scalar-valued tape program. build() must be a
// pure function of the leaves it is given.
inline GradCheckResult fd_check(
    std::vector<Tensor> inputs,
    const std::function<Value(Tape&, const std::vector<Value>&)>& build,
    GradCheckSettings s = {}) {
  std::vector<Tensor> analytic;
  {
    Tape t;
    std::vector<Value> leaves;
    leaves.reserve(inputs.size());
    for (const Tensor& in : inputs) leaves.push_back(t.leaf(in, true));
    Value root = build(t, leaves);
    t.backward(root);
    for (Value v : leaves) analytic.push_back(t.grad(v));
  }
  auto eval = [&]() {
    Tape t;
    std::vector<Value> leaves;
    leaves.reserve(inputs.size());
    for (const Tensor& in : inputs) leaves.push_back(t.leaf(in, false));
    return t.value(build(t, leaves))[0];
  };
  std::vector<Tensor*> wiggled;
  std::vector<const Tensor*> grads;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    wiggled.push_back(&inputs[i]);
    grads.push_back(&analytic[i]);
  }
  return finite_difference_check(eval, wiggled, grads, s);
}

}  // namespace slnl::testing
