#pragma once

#include <array>
#include <cstdint>

#include "slnl/tape.hpp"

namespace slnl {

enum class Mode { train, eval };

// ---- elementwise ----
Value add(Tape& t, Value a, Value b);
Value sub(Tape& t, Value a, Value b);
Value mul(Tape& t, Value a, Value b);
Value affine(Tape& t, Value x, double scale, double shift);  // scale*x + shift
Value relu(Tape& t, Value x);
Value sigmoid(Tape& t, Value x);
Value log_ew(Tape& t, Value x);
Value pow_const(Tape& t, Value x, double p);
Value clamp(Tape& t, Value x, double lo, double hi);
Value hypot_ew(Tape& t, Value a, Value b);  // sqrt(a^2 + b^2)

// ---- shape ----
Value reshape(Tape& t, Value x, std::vector<std::size_t> shape);
Value permute3(Tape& t, Value x, std::array<std::size_t, 3> axes);
Value slice_axis0(Tape& t, Value x, std::size_t begin, std::size_t end);
Value concat_axis0(Tape& t, Value a, Value b);
Value select(Tape& t, Value x, std::size_t flat_index);  // -> shape {1}

// ---- reductions / broadcast ----
Value sum_all(Tape& t, Value x);     // -> {1}
Value mean_axis0(Tape& t, Value x);  // (C, rest...) -> (rest...)
// x (C, rest...) * m (rest...) with m duplicated across axis 0.
Value mul_bcast0(Tape& t, Value x, Value m);

// ---- linear algebra ----
// y[..., q] = sum_k w[q,k] * x[..., k]; w is (Q,K), x has last extent K.
Value linear_rows(Tape& t, Value x, Value w);
Value add_bias_rows(Tape& t, Value x, Value b);  // b has the last extent of x
Value bmm_nn(Tape& t, Value a, Value b);  // (B,M,K)x(B,K,N) -> (B,M,N)
Value bmm_nt(Tape& t, Value a, Value b);  // (B,M,K)x(B,N,K) -> (B,M,N)
Value softmax_lastaxis(Tape& t, Value x);

inline Value dense(Tape& t, Value x, Value w, Value b) {
  return add_bias_rows(t, linear_rows(t, x, w), b);
}

// ---- neural-net primitives ----
// x (C,T,N), kernel (O,C,kt,kn) with odd kt,kn, bias (O); stride 1, zero
// padding, same-size output.
Value conv2d(Tape& t, Value x, Value kernel, Value bias);

struct BatchNormParams {
  Tensor gamma, beta;        // learnable
  Tensor run_mean, run_var;  // running statistics (buffers)
  static BatchNormParams init(std::size_t channels);
};

// Per-channel normalization over all non-channel axes of x (C, rest...).
// Train mode uses batch moments and updates *run_mean / *run_var in place;
// eval mode normalizes with the running statistics.
Value batchnorm(Tape& t, Value x, Value gamma, Value beta, Tensor* run_mean,
                Tensor* run_var, Mode mode, double momentum = 0.9, double eps = 1e-5);

Value maxpool2(Tape& t, Value x);         // (C,T,N) -> (C,T/2,N/2), floor
Value global_avg_pool(Tape& t, Value x);  // (C,T,N) -> (C)
Value dropout(Tape& t, Value x, double rate, Mode mode, std::uint64_t seed);

// ---- Fourier pair ----
// (C,T,N) -> (2C,T,N): channels [0,C) hold the cosine component, [C,2C) the
// sinusoidal one. Linear; backward is the scaled adjoint transform.
Value dft2_packed(Tape& t, Value x);
// (2C,T,N) -> (C,T,N): real part of the inverse transform, 1/(T*N) scaling.
Value idft2_packed(Tape& t, Value f);

// ---- plain-tensor wrappers (single-op evaluation, no gradients) ----
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias);
Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor softmax_lastaxis(const Tensor& x);
Tensor maxpool2(const Tensor& x);
Tensor global_avg_pool(const Tensor& x);
Tensor dropout(const Tensor& x, double rate, Mode mode, std::uint64_t seed);
Tensor batchnorm(const Tensor& x, BatchNormParams& params, Mode mode,
                 double momentum = 0.9, double eps = 1e-5);

}  // namespace slnl
