#pragma once

#include "slnl/tensor.hpp"

namespace slnl {

/// Paired cosine/sinusoidal components of the per-channel 2D DFT of a
/// (C,T,N) stack. f_cos is the real part and f_sin the imaginary part of
/// the unnormalized forward transform with negative exponent.
struct FreqComponents {
  Tensor f_cos;
  Tensor f_sin;
};

struct SpectraOut {
  Tensor amplitude;
  Tensor phase;
};

/// Forward 2D transform of each channel of x (C,T,N). Unnormalized.
/// Row-column factorization; power-of-two axes go through radix-2 FFT.
FreqComponents dft2(const Tensor& x);

/// Inverse of dft2 with 1/(T*N) scaling; returns the real part. When
/// imag_residual is given it receives the max |imaginary part| of the
/// reconstruction, which is ~0 for components of a real signal.
Tensor idft2(const FreqComponents& f, double* imag_residual = nullptr);

/// Amplitude sqrt(cos^2+sin^2) and phase atan2(-sin, cos); phase is 0 by
/// convention where the amplitude vanishes.
SpectraOut spectra(const FreqComponents& f);

}  // namespace slnl
