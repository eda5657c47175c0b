#include "slnl/tensor.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

namespace slnl {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

Tensor::Tensor(std::vector<std::size_t> s, double fill) : shape(std::move(s)) {
  check(!shape.empty(), "tensor: rank-0 shape not allowed");
  for (std::size_t e : shape) check(e > 0, "tensor: zero extent in shape " + slnl::shape_string(shape));
  data.assign(shape_numel(shape), fill);
}

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> values)
    : shape(std::move(s)), data(std::move(values)) {
  check(!shape.empty(), "tensor: rank-0 shape not allowed");
  for (std::size_t e : shape) check(e > 0, "tensor: zero extent in shape " + slnl::shape_string(shape));
  check(shape_numel(shape) == data.size(),
        "tensor: data length " + std::to_string(data.size()) + " does not match shape " +
            slnl::shape_string(shape));
}

std::size_t Tensor::extent(std::size_t axis) const {
  check(axis < shape.size(), "tensor: axis out of range");
  return shape[axis];
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tensor::fill(double v) {
  for (double& x : data) x = v;
}

std::string Tensor::shape_string() const { return slnl::shape_string(shape); }

void require_shape(const Tensor& t, const std::vector<std::size_t>& shape,
                   const std::string& who) {
  if (t.shape != shape)
    fail(who + ": expected shape " + shape_string(shape) + ", got " + t.shape_string());
}

void require_rank(const Tensor& t, std::size_t rank, const std::string& who) {
  if (t.rank() != rank)
    fail(who + ": expected rank " + std::to_string(rank) + ", got " + t.shape_string());
}

Tensor random_uniform(std::vector<std::size_t> shape, Rng& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (double& v : t.data) v = d(rng);
  return t;
}

Tensor random_gaussian(std::vector<std::size_t> shape, Rng& rng, double mean, double sigma) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> d(mean, sigma);
  for (double& v : t.data) v = d(rng);
  return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  check(a.same_shape(b), "max_abs_diff: shape mismatch " + a.shape_string() + " vs " +
                             b.shape_string());
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) return false;
  return std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0;
}

namespace {

constexpr char kTensorMagic[4] = {'T', 'N', 'S', 'R'};

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t u = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

[[noreturn]] void io_fail(const std::string& what, std::size_t offset) {
  throw std::runtime_error(what + " at byte offset " + std::to_string(offset));
}

void get_bytes(std::istream& in, unsigned char* dst, std::size_t n, std::size_t* offset,
               const std::string& what) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    io_fail("truncated file while reading " + what, *offset);
  *offset += n;
}

std::uint32_t get_u32(std::istream& in, std::size_t* offset, const std::string& what) {
  unsigned char b[4];
  get_bytes(in, b, 4, offset, what);
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

double get_f64(std::istream& in, std::size_t* offset, const std::string& what) {
  unsigned char b[8];
  get_bytes(in, b, 8, offset, what);
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= std::uint64_t(b[i]) << (8 * i);
  return std::bit_cast<double>(u);
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor& t) {
  out.write(kTensorMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t e : t.shape) put_u32(out, static_cast<std::uint32_t>(e));
  for (double v : t.data) put_f64(out, v);
}

Tensor read_tensor(std::istream& in, std::size_t* offset) {
  std::size_t local = 0;
  if (!offset) offset = &local;
  std::size_t magic_at = *offset;
  unsigned char magic[4];
  get_bytes(in, magic, 4, offset, "tensor magic");
  if (std::memcmp(magic, kTensorMagic, 4) != 0) io_fail("bad tensor magic", magic_at);
  std::uint32_t rank = get_u32(in, offset, "tensor rank");
  if (rank == 0 || rank > 8) io_fail("bad tensor rank " + std::to_string(rank), *offset - 4);
  std::vector<std::size_t> shape(rank);
  for (std::uint32_t i = 0; i < rank; ++i) {
    shape[i] = get_u32(in, offset, "tensor extent");
    if (shape[i] == 0) io_fail("zero tensor extent", *offset - 4);
  }
  Tensor t(shape);
  for (double& v : t.data) v = get_f64(in, offset, "tensor payload");
  return t;
}

}  // namespace slnl
