#include "slnl/dft.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace slnl {

namespace {

using cplx = std::complex<double>;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Twiddle table for one axis length; sign -1 forward, +1 inverse.
std::vector<cplx> twiddles(std::size_t n, int sign) {
  std::vector<cplx> w(n);
  for (std::size_t k = 0; k < n; ++k) {
    double a = sign * kTwoPi * static_cast<double>(k) / static_cast<double>(n);
    w[k] = cplx(std::cos(a), std::sin(a));
  }
  return w;
}

// In-place iterative radix-2 Cooley-Tukey. n must be a power of two.
void fft_pow2(cplx* a, std::size_t n, int sign) {
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = sign * kTwoPi / static_cast<double>(len);
    cplx wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cplx w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        cplx u = a[i + k];
        cplx v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

// Length-n transform of a strided line; direct O(n^2) for non power-of-two.
void transform_line(cplx* base, std::size_t n, std::size_t stride, int sign,
                    const std::vector<cplx>& tw, std::vector<cplx>& scratch) {
  if (n == 1) return;
  if (is_pow2(n)) {
    for (std::size_t i = 0; i < n; ++i) scratch[i] = base[i * stride];
    fft_pow2(scratch.data(), n, sign);
    for (std::size_t i = 0; i < n; ++i) base[i * stride] = scratch[i];
    return;
  }
  for (std::size_t k = 0; k < n; ++k) {
    cplx acc(0.0, 0.0);
    for (std::size_t t = 0; t < n; ++t) acc += base[t * stride] * tw[(k * t) % n];
    scratch[k] = acc;
  }
  for (std::size_t i = 0; i < n; ++i) base[i * stride] = scratch[i];
}

// 2D transform of each channel of a (C,T,N) complex buffer, in place.
void fft2_channels(std::vector<cplx>& buf, std::size_t C, std::size_t T, std::size_t N,
                   int sign) {
  auto tw_n = twiddles(N, sign);
  auto tw_t = twiddles(T, sign);
  std::vector<cplx> scratch(std::max(T, N));
  for (std::size_t c = 0; c < C; ++c) {
    cplx* ch = buf.data() + c * T * N;
    for (std::size_t t = 0; t < T; ++t) transform_line(ch + t * N, N, 1, sign, tw_n, scratch);
    for (std::size_t n = 0; n < N; ++n) transform_line(ch + n, T, N, sign, tw_t, scratch);
  }
}

}  // namespace

FreqComponents dft2(const Tensor& x) {
  require_rank(x, 3, "dft2");
  const std::size_t C = x.shape[0], T = x.shape[1], N = x.shape[2];
  std::vector<cplx> buf(x.numel());
  for (std::size_t i = 0; i < x.numel(); ++i) buf[i] = cplx(x.data[i], 0.0);
  fft2_channels(buf, C, T, N, -1);
  FreqComponents f{Tensor({C, T, N}), Tensor({C, T, N})};
  for (std::size_t i = 0; i < buf.size(); ++i) {
    f.f_cos.data[i] = buf[i].real();
    f.f_sin.data[i] = buf[i].imag();
  }
  return f;
}

Tensor idft2(const FreqComponents& f, double* imag_residual) {
  require_rank(f.f_cos, 3, "idft2");
  check(f.f_cos.same_shape(f.f_sin), "idft2: component shape mismatch " +
                                         f.f_cos.shape_string() + " vs " + f.f_sin.shape_string());
  const std::size_t C = f.f_cos.shape[0], T = f.f_cos.shape[1], N = f.f_cos.shape[2];
  std::vector<cplx> buf(f.f_cos.numel());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = cplx(f.f_cos.data[i], f.f_sin.data[i]);
  fft2_channels(buf, C, T, N, +1);
  const double scale = 1.0 / (static_cast<double>(T) * static_cast<double>(N));
  Tensor out({C, T, N});
  double resid = 0.0;
  for (std::size_t i = 0; i < buf.size(); ++i) {
    out.data[i] = buf[i].real() * scale;
    resid = std::max(resid, std::abs(buf[i].imag()) * scale);
  }
  if (imag_residual) *imag_residual = resid;
  return out;
}

SpectraOut spectra(const FreqComponents& f) {
  check(f.f_cos.same_shape(f.f_sin), "spectra: component shape mismatch");
  SpectraOut s{Tensor(f.f_cos.shape), Tensor(f.f_cos.shape)};
  for (std::size_t i = 0; i < f.f_cos.numel(); ++i) {
    double a = std::hypot(f.f_cos.data[i], f.f_sin.data[i]);
    s.amplitude.data[i] = a;
    s.phase.data[i] = (a == 0.0) ? 0.0 : std::atan2(-f.f_sin.data[i], f.f_cos.data[i]);
  }
  return s;
}

}  // namespace slnl
