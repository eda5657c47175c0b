#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace slnl {

using Rng = std::mt19937_64;

[[noreturn]] inline void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

inline void check(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

// SplitMix64-style mixer for deriving independent per-sample / per-op seeds
// from a master seed without correlated streams.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline double uniform(Rng& g, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  return d(g);
}

inline double gaussian(Rng& g, double mean, double sigma) {
  std::normal_distribution<double> d(mean, sigma);
  return d(g);
}

}  // namespace slnl
