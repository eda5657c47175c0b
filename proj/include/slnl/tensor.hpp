#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "slnl/util.hpp"

namespace slnl {

/// Dense rank-N tensor of 64-bit reals, row-major. The universal value type
/// of the engine; shape is a list of positive extents and data holds exactly
/// product(shape) entries.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s, double fill = 0.0);
  Tensor(std::vector<std::size_t> s, std::vector<double> values);

  static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }
  static Tensor ones(std::vector<std::size_t> s) { return Tensor(std::move(s), 1.0); }
  static Tensor full(std::vector<std::size_t> s, double v) { return Tensor(std::move(s), v); }
  static Tensor scalar(double v) { return Tensor({1}, v); }

  std::size_t rank() const { return shape.size(); }
  std::size_t numel() const { return data.size(); }
  std::size_t extent(std::size_t axis) const;

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  // Rank-3 (C,T,N) flat offset; the dominant layout in this codebase.
  std::size_t idx3(std::size_t c, std::size_t t, std::size_t n) const {
    return (c * shape[1] + t) * shape[2] + n;
  }
  double& at3(std::size_t c, std::size_t t, std::size_t n) { return data[idx3(c, t, n)]; }
  double at3(std::size_t c, std::size_t t, std::size_t n) const { return data[idx3(c, t, n)]; }

  std::size_t idx2(std::size_t r, std::size_t c) const { return r * shape[1] + c; }
  double& at2(std::size_t r, std::size_t c) { return data[idx2(r, c)]; }
  double at2(std::size_t r, std::size_t c) const { return data[idx2(r, c)]; }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;
  void fill(double v);

  std::string shape_string() const;
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);
std::string shape_string(const std::vector<std::size_t>& shape);

void require_shape(const Tensor& t, const std::vector<std::size_t>& shape,
                   const std::string& who);
void require_rank(const Tensor& t, std::size_t rank, const std::string& who);

Tensor random_uniform(std::vector<std::size_t> shape, Rng& rng, double lo, double hi);
Tensor random_gaussian(std::vector<std::size_t> shape, Rng& rng, double mean, double sigma);

double max_abs_diff(const Tensor& a, const Tensor& b);
bool bitwise_equal(const Tensor& a, const Tensor& b);

// Flat binary record: magic "TNSR", u32 rank, u32 extents, little-endian f64
// payload.
void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in, std::size_t* offset);

}  // namespace slnl
