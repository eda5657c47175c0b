#include "slnl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "kernels.hpp"
#include "slnl/dft.hpp"

namespace slnl {

namespace {

bool wants(Tape& t, int id) { return t.node(Value{id}).requires_grad; }

bool any_grad(Tape& t, std::initializer_list<Value> vs) {
  for (Value v : vs)
    if (t.node(v).requires_grad) return true;
  return false;
}

const Tensor& val(Tape& t, int id) { return t.node(Value{id}).value; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* who) {
  if (!a.same_shape(b))
    fail(std::string(who) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// Builds the node, then patches in a backward closure that receives the
// finished node (own value + pulled gradient) so ops can reuse their forward
// result without re-deriving it.
template <typename Back>
Value make_op(Tape& t, Tensor out, bool rg, Back&& back) {
  Value v = t.make(std::move(out), rg, nullptr);
  if (rg) {
    const int self = v.id;
    t.node(v).backward = [self, back = std::forward<Back>(back)](Tape& tp) {
      const Tape::Node& node = tp.node(Value{self});
      back(tp, node.value, node.grad);
    };
  }
  return v;
}

}  // namespace

// ---- elementwise ----

Value add(Tape& t, Value a, Value b) {
  const Tensor &av = t.value(a), &bv = t.value(b);
  require_same_shape(av, bv, "add");
  Tensor out(av.shape);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] + bv[i];
  int ai = a.id, bi = b.id;
  return make_op(t, std::move(out), any_grad(t, {a, b}),
                 [ai, bi](Tape& tp, const Tensor&, const Tensor& g) {
                   if (wants(tp, ai)) {
                     Tensor& ga = tp.grad_buffer(ai);
                     for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
                   }
                   if (wants(tp, bi)) {
                     Tensor& gb = tp.grad_buffer(bi);
                     for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i];
                   }
                 });
}

Value sub(Tape& t, Value a, Value b) {
  const Tensor &av = t.value(a), &bv = t.value(b);
  require_same_shape(av, bv, "sub");
  Tensor out(av.shape);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] - bv[i];
  int ai = a.id, bi = b.id;
  return make_op(t, std::move(out), any_grad(t, {a, b}),
                 [ai, bi](Tape& tp, const Tensor&, const Tensor& g) {
                   if (wants(tp, ai)) {
                     Tensor& ga = tp.grad_buffer(ai);
                     for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
                   }
                   if (wants(tp, bi)) {
                     Tensor& gb = tp.grad_buffer(bi);
                     for (std::size_t i = 0; i < g.numel(); ++i) gb[i] -= g[i];
                   }
                 });
}

Value mul(Tape& t, Value a, Value b) {
  const Tensor &av = t.value(a), &bv = t.value(b);
  require_same_shape(av, bv, "mul");
  Tensor out(av.shape);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] * bv[i];
  int ai = a.id, bi = b.id;
  return make_op(t, std::move(out), any_grad(t, {a, b}),
                 [ai, bi](Tape& tp, const Tensor&, const Tensor& g) {
                   if (wants(tp, ai)) {
                     Tensor& ga = tp.grad_buffer(ai);
                     const Tensor& bv2 = val(tp, bi);
                     for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * bv2[i];
                   }
                   if (wants(tp, bi)) {
                     Tensor& gb = tp.grad_buffer(bi);
                     const Tensor& av2 = val(tp, ai);
                     for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * av2[i];
                   }
                 });
}

Value affine(Tape& t, Value x, double scale, double shift) {
  const Tensor& xv = t.value(x);
  Tensor out(xv.shape);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = scale * xv[i] + shift;
  int xi = x.id;
  return make_op(t, std::move(out), wants(t, xi),
                 [xi, scale](Tape& tp, const Tensor&, const Tensor& g) {
                   Tensor& gx = tp.grad_buffer(xi);
                   for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += scale * g[i];
                 });
}

Value relu(Tape& t, Value x) {
  const Tensor& xv = t.value(x);
  Tensor out(xv.shape);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  int xi = x.id;
  return make_op(t, std::move(out), wants(t, xi),
                 [xi](Tape& tp, const Tensor&, const Tensor& g) {
                   Tensor& gx = tp.grad_buffer(xi);
                   const Tensor& xv2 = val(tp, xi);
                   for (std::size_t i = 0; i < g.numel(); ++i)
                     if (xv2[i] > 0.0) gx[i] += g[i];
                 });
}

Value sigmoid(Tape& t, Value x) {
  const Tensor& xv = t.value(x);
  Tensor out(xv.shape);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = stable_sigmoid(xv[i]);
  int xi = x.id;
  return make_op(t, std::move(out), wants(t, xi),
                 [xi](Tape& tp, const Tensor& y, const Tensor& g) {
                   Tensor& gx = tp.grad_buffer(xi);
                   for (std::size_t i = 0; i < g.numel(); ++i)
                     gx[i] += g[i] * y[i] * (1.0 - y[i]);
                 });
}

Value log_ew(Tape& t, Value x) {
  const Tensor& xv = t.value(x);
  Tensor out(xv.shape);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::log(xv[i]);
  int xi = x.id;
  return make_op(t, std::move(out), wants(t, xi),
                 [xi](Tape& tp, const Tensor&, const Tensor& g) {
                   Tensor& gx = tp.grad_buffer(xi);
                   const Tensor& xv2 = val(tp, xi);
                   for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] / xv2[i];
                 });
}

Value pow_const(Tape& t, Value x, double p) {
  const Tensor& xv = t.value(x);
  Tensor out(xv.shape);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::pow(xv[i], p);
  int xi = x.id;
  return make_op(t, std::move(out), wants(t, xi),
                 [xi, p](Tape& tp, const Tensor&, const Tensor& g) {
                   if (p == 0.0) return;
                   Tensor& gx = tp.grad_buffer(xi);
                   const Tensor& xv2 = val(tp, xi);
                   for (std::size_t i = 0; i < g.numel(); ++i)
                     gx[i] += g[i] * p * std::pow(xv2[i], p - 1.0);
                 });
}

Value clamp(Tape& t, Value x, double lo, double hi) {
  check(lo < hi, "clamp: lo must be below hi");
  const Tensor& xv = t.value(x);
  Tensor out(xv.shape);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::min(std::max(xv[i], lo), hi);
  int xi = x.id;
  return make_op(t, std::move(out), wants(t, xi),
                 [xi, lo, hi](Tape& tp, const Tensor&, const Tensor& g) {
                   Tensor& gx = tp.grad_buffer(xi);
                   const Tensor& xv2 = val(tp, xi);
                   for (std::size_t i = 0; i < g.numel(); ++i)
                     if (xv2[i] > lo && xv2[i] < hi) gx[i] += g[i];
                 });
}

Value hypot_ew(Tape& t, Value a, Value b) {
  const Tensor &av = t.value(a), &bv = t.value(b);
  require_same_shape(av, bv, "hypot_ew");
  Tensor out(av.shape);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::hypot(av[i], bv[i]);
  int ai = a.id, bi = b.id;
  return make_op(t, std::move(out), any_grad(t, {a, b}),
                 [ai, bi](Tape& tp, const Tensor& y, const Tensor& g) {
                   const Tensor& av2 = val(tp, ai);
                   const Tensor& bv2 = val(tp, bi);
                   const bool wa = wants(tp, ai), wb = wants(tp, bi);
                   for (std::size_t i = 0; i < g.numel(); ++i) {
                     if (y[i] == 0.0) continue;  // gradient defined as 0 at the origin
                     const double s = g[i] / y[i];
                     if (wa) tp.grad_buffer(ai)[i] += s * av2[i];
                     if (wb) tp.grad_buffer(bi)[i] += s * bv2[i];
                   }
                 });
}

// ---- shape ----

Value reshape(Tape& t, Value x, std::vector<std::size_t> shape) {
  const Tensor& xv = t.value(x);
  check(shape_numel(shape) == xv.numel(),
        "reshape: element count mismatch " + xv.shape_string() + " -> " + shape_string(shape));
  Tensor out(shape, xv.data);
  int xi = x.id;
  return make_op(t, std::move(out), wants(t, xi),
                 [xi](Tape& tp, const Tensor&, const Tensor& g) {
                   Tensor& gx = tp.grad_buffer(xi);
                   for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
                 });
}

Value permute3(Tape& t, Value x, std::array<std::size_t, 3> axes) {
  const Tensor& xv = t.value(x);
  require_rank(xv, 3, "permute3");
  std::array<bool, 3> seen{false, false, false};
  for (std::size_t a : axes) {
    check(a < 3 && !seen[a], "permute3: invalid axis permutation");
    seen[a] = true;
  }
  const std::size_t d0 = xv.shape[0], d1 = xv.shape[1], d2 = xv.shape[2];
  Tensor out({xv.shape[axes[0]], xv.shape[axes[1]], xv.shape[axes[2]]});
  {
    std::size_t idx[3];
    for (idx[0] = 0; idx[0] < d0; ++idx[0])
      for (idx[1] = 0; idx[1] < d1; ++idx[1])
        for (idx[2] = 0; idx[2] < d2; ++idx[2])
          out.data[(idx[axes[0]] * out.shape[1] + idx[axes[1]]) * out.shape[2] + idx[axes[2]]] =
              xv.data[(idx[0] * d1 + idx[1]) * d2 + idx[2]];
  }
  int xi = x.id;
  return make_op(t, std::move(out), wants(t, xi),
                 [xi, axes, d0, d1, d2](Tape& tp, const Tensor&, const Tensor& g) {
                   Tensor& gx = tp.grad_buffer(xi);
                   std::size_t idx[3];
                   for (idx[0] = 0; idx[0] < d0; ++idx[0])
                     for (idx[1] = 0; idx[1] < d1; ++idx[1])
                       for (idx[2] = 0; idx[2] < d2; ++idx[2])
                         gx.data[(idx[0] * d1 + idx[1]) * d2 + idx[2]] +=
                             g.data[(idx[axes[0]] * g.shape[1] + idx[axes[1]]) * g.shape[2] +
                                    idx[axes[2]]];
                 });
}

Value slice_axis0(Tape& t, Value x, std::size_t begin, std::size_t end) {
  const Tensor& xv = t.value(x);
  check(begin < end && end <= xv.shape[0], "slice_axis0: range out of bounds");
  const std::size_t inner = xv.numel() / xv.shape[0];
  std::vector<std::size_t> shape = xv.shape;
  shape[0] = end - begin;
  Tensor out(shape);
  std::copy(xv.data.begin() + static_cast<std::ptrdiff_t>(begin * inner),
            xv.data.begin() + static_cast<std::ptrdiff_t>(end * inner), out.data.begin());
  int xi = x.id;
  return make_op(t, std::move(out), wants(t, xi),
                 [xi, begin, inner](Tape& tp, const Tensor&, const Tensor& g) {
                   Tensor& gx = tp.grad_buffer(xi);
                   for (std::size_t i = 0; i < g.numel(); ++i) gx[begin * inner + i] += g[i];
                 });
}

Value concat_axis0(Tape& t, Value a, Value b) {
  const Tensor &av = t.value(a), &bv = t.value(b);
  check(av.rank() == bv.rank(), "concat_axis0: rank mismatch");
  for (std::size_t i = 1; i < av.rank(); ++i)
    check(av.shape[i] == bv.shape[i], "concat_axis0: trailing extent mismatch");
  std::vector<std::size_t> shape = av.shape;
  shape[0] += bv.shape[0];
  Tensor out(shape);
  std::copy(av.data.begin(), av.data.end(), out.data.begin());
  std::copy(bv.data.begin(), bv.data.end(),
            out.data.begin() + static_cast<std::ptrdiff_t>(av.numel()));
  int ai = a.id, bi = b.id;
  const std::size_t na = av.numel();
  return make_op(t, std::move(out), any_grad(t, {a, b}),
                 [ai, bi, na](Tape& tp, const Tensor&, const Tensor& g) {
                   if (wants(tp, ai)) {
                     Tensor& ga = tp.grad_buffer(ai);
                     for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
                   }
                   if (wants(tp, bi)) {
                     Tensor& gb = tp.grad_buffer(bi);
                     for (std::size_t i = na; i < g.numel(); ++i) gb[i - na] += g[i];
                   }
                 });
}

Value select(Tape& t, Value x, std::size_t flat_index) {
  const Tensor& xv = t.value(x);
  check(flat_index < xv.numel(), "select: index out of range");
  Tensor out({1}, xv[flat_index]);
  int xi = x.id;
  return make_op(t, std::move(out), wants(t, xi),
                 [xi, flat_index](Tape& tp, const Tensor&, const Tensor& g) {
                   tp.grad_buffer(xi)[flat_index] += g[0];
                 });
}

// ---- reductions / broadcast ----

Value sum_all(Tape& t, Value x) {
  const Tensor& xv = t.value(x);
  double s = 0.0;
  for (double v : xv.data) s += v;
  int xi = x.id;
  return make_op(t, Tensor({1}, std::vector<double>{s}), wants(t, xi),
                 [xi](Tape& tp, const Tensor&, const Tensor& g) {
                   Tensor& gx = tp.grad_buffer(xi);
                   for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += g[0];
                 });
}

Value mean_axis0(Tape& t, Value x) {
  const Tensor& xv = t.value(x);
  check(xv.rank() >= 2, "mean_axis0: needs rank >= 2, got " + xv.shape_string());
  const std::size_t C = xv.shape[0];
  const std::size_t inner = xv.numel() / C;
  Tensor out(std::vector<std::size_t>(xv.shape.begin() + 1, xv.shape.end()));
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < inner; ++i) out[i] += xv[c * inner + i];
  const double inv = 1.0 / static_cast<double>(C);
  for (std::size_t i = 0; i < inner; ++i) out[i] *= inv;
  int xi = x.id;
  return make_op(t, std::move(out), wants(t, xi),
                 [xi, C, inner, inv](Tape& tp, const Tensor&, const Tensor& g) {
                   Tensor& gx = tp.grad_buffer(xi);
                   for (std::size_t c = 0; c < C; ++c)
                     for (std::size_t i = 0; i < inner; ++i) gx[c * inner + i] += g[i] * inv;
                 });
}

Value mul_bcast0(Tape& t, Value x, Value m) {
  const Tensor &xv = t.value(x), &mv = t.value(m);
  check(xv.rank() == mv.rank() + 1, "mul_bcast0: m must drop the leading axis of x");
  for (std::size_t i = 0; i < mv.rank(); ++i)
    check(xv.shape[i + 1] == mv.shape[i], "mul_bcast0: trailing extent mismatch");
  const std::size_t C = xv.shape[0];
  const std::size_t inner = mv.numel();
  Tensor out(xv.shape);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < inner; ++i) out[c * inner + i] = xv[c * inner + i] * mv[i];
  int xi = x.id, mi = m.id;
  return make_op(t, std::move(out), any_grad(t, {x, m}),
                 [xi, mi, C, inner](Tape& tp, const Tensor&, const Tensor& g) {
                   if (wants(tp, xi)) {
                     Tensor& gx = tp.grad_buffer(xi);
                     const Tensor& mv2 = val(tp, mi);
                     for (std::size_t c = 0; c < C; ++c)
                       for (std::size_t i = 0; i < inner; ++i)
                         gx[c * inner + i] += g[c * inner + i] * mv2[i];
                   }
                   if (wants(tp, mi)) {
                     Tensor& gm = tp.grad_buffer(mi);
                     const Tensor& xv2 = val(tp, xi);
                     for (std::size_t c = 0; c < C; ++c)
                       for (std::size_t i = 0; i < inner; ++i)
                         gm[i] += g[c * inner + i] * xv2[c * inner + i];
                   }
                 });
}

// ---- linear algebra ----

Value linear_rows(Tape& t, Value x, Value w) {
  const Tensor &xv = t.value(x), &wv = t.value(w);
  require_rank(wv, 2, "linear_rows weight");
  check(xv.rank() >= 1 && xv.shape.back() == wv.shape[1],
        "linear_rows: last extent of x " + xv.shape_string() + " must equal weight cols " +
            wv.shape_string());
  const std::size_t K = wv.shape[1], Q = wv.shape[0];
  const std::size_t R = xv.numel() / K;
  std::vector<std::size_t> shape = xv.shape;
  shape.back() = Q;
  Tensor out(shape);
  detail::mm_nt_acc(out.data.data(), xv.data.data(), wv.data.data(), R, K, Q);
  int xi = x.id, wi = w.id;
  return make_op(t, std::move(out), any_grad(t, {x, w}),
                 [xi, wi, R, K, Q](Tape& tp, const Tensor&, const Tensor& g) {
                   if (wants(tp, xi))
                     detail::mm_nn_acc(tp.grad_buffer(xi).data.data(), g.data.data(),
                                       val(tp, wi).data.data(), R, Q, K);
                   if (wants(tp, wi))
                     detail::mm_tn_acc(tp.grad_buffer(wi).data.data(), g.data.data(),
                                       val(tp, xi).data.data(), Q, R, K);
                 });
}

Value add_bias_rows(Tape& t, Value x, Value b) {
  const Tensor &xv = t.value(x), &bv = t.value(b);
  require_rank(bv, 1, "add_bias_rows bias");
  check(xv.shape.back() == bv.shape[0], "add_bias_rows: bias extent mismatch");
  const std::size_t Q = bv.shape[0];
  const std::size_t R = xv.numel() / Q;
  Tensor out(xv.shape);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t q = 0; q < Q; ++q) out[r * Q + q] = xv[r * Q + q] + bv[q];
  int xi = x.id, bi = b.id;
  return make_op(t, std::move(out), any_grad(t, {x, b}),
                 [xi, bi, R, Q](Tape& tp, const Tensor&, const Tensor& g) {
                   if (wants(tp, xi)) {
                     Tensor& gx = tp.grad_buffer(xi);
                     for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i];
                   }
                   if (wants(tp, bi)) {
                     Tensor& gb = tp.grad_buffer(bi);
                     for (std::size_t r = 0; r < R; ++r)
                       for (std::size_t q = 0; q < Q; ++q) gb[q] += g[r * Q + q];
                   }
                 });
}

namespace {

void require_bmm(const Tensor& a, const Tensor& b, const char* who) {
  require_rank(a, 3, who);
  require_rank(b, 3, who);
  check(a.shape[0] == b.shape[0], std::string(who) + ": batch extent mismatch");
}

}  // namespace

Value bmm_nn(Tape& t, Value a, Value b) {
  const Tensor &av = t.value(a), &bv = t.value(b);
  require_bmm(av, bv, "bmm_nn");
  check(av.shape[2] == bv.shape[1], "bmm_nn: inner extent mismatch");
  const std::size_t B = av.shape[0], M = av.shape[1], K = av.shape[2], N = bv.shape[2];
  Tensor out({B, M, N});
  for (std::size_t bb = 0; bb < B; ++bb)
    detail::mm_nn_acc(out.data.data() + bb * M * N, av.data.data() + bb * M * K,
                      bv.data.data() + bb * K * N, M, K, N);
  int ai = a.id, bi = b.id;
  return make_op(t, std::move(out), any_grad(t, {a, b}),
                 [ai, bi, B, M, K, N](Tape& tp, const Tensor&, const Tensor& g) {
                   const Tensor& av2 = val(tp, ai);
                   const Tensor& bv2 = val(tp, bi);
                   const bool wa = wants(tp, ai), wb = wants(tp, bi);
                   for (std::size_t bb = 0; bb < B; ++bb) {
                     const double* gb = g.data.data() + bb * M * N;
                     if (wa)
                       detail::mm_nt_acc(tp.grad_buffer(ai).data.data() + bb * M * K, gb,
                                         bv2.data.data() + bb * K * N, M, N, K);
                     if (wb)
                       detail::mm_tn_acc(tp.grad_buffer(bi).data.data() + bb * K * N,
                                         av2.data.data() + bb * M * K, gb, K, M, N);
                   }
                 });
}

Value bmm_nt(Tape& t, Value a, Value b) {
  const Tensor &av = t.value(a), &bv = t.value(b);
  require_bmm(av, bv, "bmm_nt");
  check(av.shape[2] == bv.shape[2], "bmm_nt: inner extent mismatch");
  const std::size_t B = av.shape[0], M = av.shape[1], K = av.shape[2], N = bv.shape[1];
  Tensor out({B, M, N});
  for (std::size_t bb = 0; bb < B; ++bb)
    detail::mm_nt_acc(out.data.data() + bb * M * N, av.data.data() + bb * M * K,
                      bv.data.data() + bb * N * K, M, K, N);
  int ai = a.id, bi = b.id;
  return make_op(t, std::move(out), any_grad(t, {a, b}),
                 [ai, bi, B, M, K, N](Tape& tp, const Tensor&, const Tensor& g) {
                   const Tensor& av2 = val(tp, ai);
                   const Tensor& bv2 = val(tp, bi);
                   const bool wa = wants(tp, ai), wb = wants(tp, bi);
                   for (std::size_t bb = 0; bb < B; ++bb) {
                     const double* gb = g.data.data() + bb * M * N;
                     if (wa)
                       detail::mm_nn_acc(tp.grad_buffer(ai).data.data() + bb * M * K, gb,
                                         bv2.data.data() + bb * N * K, M, N, K);
                     if (wb)
                       detail::mm_tn_acc(tp.grad_buffer(bi).data.data() + bb * N * K, gb,
                                         av2.data.data() + bb * M * K, N, M, K);
                   }
                 });
}

Value softmax_lastaxis(Tape& t, Value x) {
  const Tensor& xv = t.value(x);
  check(xv.rank() >= 1, "softmax_lastaxis: rank >= 1 required");
  const std::size_t C = xv.shape.back();
  const std::size_t R = xv.numel() / C;
  Tensor out(xv.shape);
  for (std::size_t r = 0; r < R; ++r) {
    const double* row = xv.data.data() + r * C;
    double* orow = out.data.data() + r * C;
    double mx = row[0];
    for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      orow[c] = std::exp(row[c] - mx);
      sum += orow[c];
    }
    const double inv = 1.0 / sum;
    for (std::size_t c = 0; c < C; ++c) orow[c] *= inv;
  }
  int xi = x.id;
  return make_op(t, std::move(out), wants(t, xi),
                 [xi, R, C](Tape& tp, const Tensor& y, const Tensor& g) {
                   Tensor& gx = tp.grad_buffer(xi);
                   for (std::size_t r = 0; r < R; ++r) {
                     const double* yrow = y.data.data() + r * C;
                     const double* grow = g.data.data() + r * C;
                     double dot = 0.0;
                     for (std::size_t c = 0; c < C; ++c) dot += grow[c] * yrow[c];
                     double* gxrow = gx.data.data() + r * C;
                     for (std::size_t c = 0; c < C; ++c)
                       gxrow[c] += yrow[c] * (grow[c] - dot);
                   }
                 });
}

// ---- neural-net primitives ----

BatchNormParams BatchNormParams::init(std::size_t channels) {
  BatchNormParams p;
  p.gamma = Tensor::ones({channels});
  p.beta = Tensor::zeros({channels});
  p.run_mean = Tensor::zeros({channels});
  p.run_var = Tensor::ones({channels});
  return p;
}

Value conv2d(Tape& t, Value x, Value kernel, Value bias) {
  const Tensor &xv = t.value(x), &kv = t.value(kernel), &bv = t.value(bias);
  require_rank(xv, 3, "conv2d input");
  require_rank(kv, 4, "conv2d kernel");
  require_rank(bv, 1, "conv2d bias");
  const std::size_t C = xv.shape[0], T = xv.shape[1], N = xv.shape[2];
  const std::size_t O = kv.shape[0], kt = kv.shape[2], kn = kv.shape[3];
  check(kv.shape[1] == C, "conv2d: kernel input channels mismatch");
  check(bv.shape[0] == O, "conv2d: bias extent mismatch");
  check(kt % 2 == 1 && kn % 2 == 1,
        "conv2d: kernel extents must be odd, got " + kv.shape_string());
  const std::ptrdiff_t pt = static_cast<std::ptrdiff_t>((kt - 1) / 2);
  const std::ptrdiff_t pn = static_cast<std::ptrdiff_t>((kn - 1) / 2);
  Tensor out({O, T, N});
  for (std::size_t o = 0; o < O; ++o) {
    double* och = out.data.data() + o * T * N;
    for (std::size_t i = 0; i < T * N; ++i) och[i] = bv[o];
    for (std::size_t c = 0; c < C; ++c) {
      const double* xch = xv.data.data() + c * T * N;
      for (std::size_t dt = 0; dt < kt; ++dt)
        for (std::size_t dn = 0; dn < kn; ++dn) {
          const double w = kv.data[((o * C + c) * kt + dt) * kn + dn];
          const std::ptrdiff_t ot = static_cast<std::ptrdiff_t>(dt) - pt;
          const std::ptrdiff_t on = static_cast<std::ptrdiff_t>(dn) - pn;
          const std::size_t t0 = ot < 0 ? static_cast<std::size_t>(-ot) : 0;
          const std::size_t t1 = ot > 0 ? T - static_cast<std::size_t>(ot) : T;
          const std::size_t n0 = on < 0 ? static_cast<std::size_t>(-on) : 0;
          const std::size_t n1 = on > 0 ? N - static_cast<std::size_t>(on) : N;
          for (std::size_t tt = t0; tt < t1; ++tt) {
            double* orow = och + tt * N;
            const double* xrow =
                xch + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(tt) + ot) * N + on;
            for (std::size_t nn = n0; nn < n1; ++nn) orow[nn] += w * xrow[nn];
          }
        }
    }
  }
  int xi = x.id, ki = kernel.id, bi = bias.id;
  return make_op(
      t, std::move(out), any_grad(t, {x, kernel, bias}),
      [xi, ki, bi, C, T, N, O, kt, kn, pt, pn](Tape& tp, const Tensor&, const Tensor& g) {
        const Tensor& xv2 = val(tp, xi);
        const Tensor& kv2 = val(tp, ki);
        if (wants(tp, bi)) {
          Tensor& gb = tp.grad_buffer(bi);
          for (std::size_t o = 0; o < O; ++o) {
            const double* gch = g.data.data() + o * T * N;
            double acc = 0.0;
            for (std::size_t i = 0; i < T * N; ++i) acc += gch[i];
            gb[o] += acc;
          }
        }
        const bool wx = wants(tp, xi), wk = wants(tp, ki);
        if (!wx && !wk) return;
        Tensor* gx = wx ? &tp.grad_buffer(xi) : nullptr;
        Tensor* gk = wk ? &tp.grad_buffer(ki) : nullptr;
        for (std::size_t o = 0; o < O; ++o) {
          const double* gch = g.data.data() + o * T * N;
          for (std::size_t c = 0; c < C; ++c) {
            const double* xch = xv2.data.data() + c * T * N;
            double* gxch = wx ? gx->data.data() + c * T * N : nullptr;
            for (std::size_t dt = 0; dt < kt; ++dt)
              for (std::size_t dn = 0; dn < kn; ++dn) {
                const std::ptrdiff_t ot = static_cast<std::ptrdiff_t>(dt) - pt;
                const std::ptrdiff_t on = static_cast<std::ptrdiff_t>(dn) - pn;
                const std::size_t t0 = ot < 0 ? static_cast<std::size_t>(-ot) : 0;
                const std::size_t t1 = ot > 0 ? T - static_cast<std::size_t>(ot) : T;
                const std::size_t n0 = on < 0 ? static_cast<std::size_t>(-on) : 0;
                const std::size_t n1 = on > 0 ? N - static_cast<std::size_t>(on) : N;
                const std::size_t kidx = ((o * C + c) * kt + dt) * kn + dn;
                const double w = kv2.data[kidx];
                double wacc = 0.0;
                for (std::size_t tt = t0; tt < t1; ++tt) {
                  const double* grow = gch + tt * N;
                  const std::size_t ts =
                      static_cast<std::size_t>(static_cast<std::ptrdiff_t>(tt) + ot);
                  const double* xrow = xch + ts * N + on;
                  double* gxrow = wx ? gxch + ts * N + on : nullptr;
                  for (std::size_t nn = n0; nn < n1; ++nn) {
                    if (wk) wacc += grow[nn] * xrow[nn];
                    if (wx) gxrow[nn] += grow[nn] * w;
                  }
                }
                if (wk) gk->data[kidx] += wacc;
              }
          }
        }
      });
}

Value batchnorm(Tape& t, Value x, Value gamma, Value beta, Tensor* run_mean, Tensor* run_var,
                Mode mode, double momentum, double eps) {
  const Tensor &xv = t.value(x), &gv = t.value(gamma), &bv = t.value(beta);
  check(xv.rank() >= 2, "batchnorm: input rank >= 2 required");
  const std::size_t C = xv.shape[0];
  const std::size_t inner = xv.numel() / C;
  require_shape(gv, {C}, "batchnorm gamma");
  require_shape(bv, {C}, "batchnorm beta");
  check(run_mean && run_var, "batchnorm: running statistics required");
  require_shape(*run_mean, {C}, "batchnorm run_mean");
  require_shape(*run_var, {C}, "batchnorm run_var");

  std::vector<double> mean(C), istd(C);
  if (mode == Mode::train) {
    for (std::size_t c = 0; c < C; ++c) {
      const double* row = xv.data.data() + c * inner;
      double m = 0.0;
      for (std::size_t i = 0; i < inner; ++i) m += row[i];
      m /= static_cast<double>(inner);
      double v = 0.0;
      for (std::size_t i = 0; i < inner; ++i) v += (row[i] - m) * (row[i] - m);
      v /= static_cast<double>(inner);
      mean[c] = m;
      istd[c] = 1.0 / std::sqrt(v + eps);
      run_mean->data[c] = momentum * run_mean->data[c] + (1.0 - momentum) * m;
      run_var->data[c] = momentum * run_var->data[c] + (1.0 - momentum) * v;
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = run_mean->data[c];
      istd[c] = 1.0 / std::sqrt(run_var->data[c] + eps);
    }
  }
  Tensor out(xv.shape);
  for (std::size_t c = 0; c < C; ++c) {
    const double* row = xv.data.data() + c * inner;
    double* orow = out.data.data() + c * inner;
    const double sc = gv[c] * istd[c];
    const double sh = bv[c] - mean[c] * sc;
    for (std::size_t i = 0; i < inner; ++i) orow[i] = sc * row[i] + sh;
  }
  int xi = x.id, gi = gamma.id, bi = beta.id;
  const bool train = mode == Mode::train;
  return make_op(
      t, std::move(out), any_grad(t, {x, gamma, beta}),
      [xi, gi, bi, C, inner, mean = std::move(mean), istd = std::move(istd), train](
          Tape& tp, const Tensor&, const Tensor& g) {
        const Tensor& xv2 = val(tp, xi);
        const Tensor& gv2 = val(tp, gi);
        const double n = static_cast<double>(inner);
        for (std::size_t c = 0; c < C; ++c) {
          const double* xrow = xv2.data.data() + c * inner;
          const double* grow = g.data.data() + c * inner;
          double sum_g = 0.0, sum_gx = 0.0;  // sums of g and g * xhat
          for (std::size_t i = 0; i < inner; ++i) {
            sum_g += grow[i];
            sum_gx += grow[i] * (xrow[i] - mean[c]) * istd[c];
          }
          if (wants(tp, gi)) tp.grad_buffer(gi)[c] += sum_gx;
          if (wants(tp, bi)) tp.grad_buffer(bi)[c] += sum_g;
          if (wants(tp, xi)) {
            double* gxrow = tp.grad_buffer(xi).data.data() + c * inner;
            const double gam = gv2[c];
            if (train) {
              for (std::size_t i = 0; i < inner; ++i) {
                const double xhat = (xrow[i] - mean[c]) * istd[c];
                gxrow[i] += gam * istd[c] * (grow[i] - sum_g / n - xhat * sum_gx / n);
              }
            } else {
              for (std::size_t i = 0; i < inner; ++i) gxrow[i] += gam * istd[c] * grow[i];
            }
          }
        }
      });
}

Value maxpool2(Tape& t, Value x) {
  const Tensor& xv = t.value(x);
  require_rank(xv, 3, "maxpool2");
  const std::size_t C = xv.shape[0], T = xv.shape[1], N = xv.shape[2];
  check(T >= 2 && N >= 2, "maxpool2: spatial extents must be >= 2, got " + xv.shape_string());
  const std::size_t To = T / 2, No = N / 2;
  Tensor out({C, To, No});
  std::vector<std::size_t> arg(C * To * No);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t to = 0; to < To; ++to)
      for (std::size_t no = 0; no < No; ++no) {
        std::size_t best = xv.idx3(c, 2 * to, 2 * no);
        double bmax = xv.data[best];
        for (std::size_t dt = 0; dt < 2; ++dt)
          for (std::size_t dn = 0; dn < 2; ++dn) {
            const std::size_t idx = xv.idx3(c, 2 * to + dt, 2 * no + dn);
            if (xv.data[idx] > bmax) {  // strict >: first maximum wins ties
              bmax = xv.data[idx];
              best = idx;
            }
          }
        const std::size_t oidx = (c * To + to) * No + no;
        out.data[oidx] = bmax;
        arg[oidx] = best;
      }
  int xi = x.id;
  return make_op(t, std::move(out), wants(t, xi),
                 [xi, arg = std::move(arg)](Tape& tp, const Tensor&, const Tensor& g) {
                   Tensor& gx = tp.grad_buffer(xi);
                   for (std::size_t i = 0; i < g.numel(); ++i) gx.data[arg[i]] += g[i];
                 });
}

Value global_avg_pool(Tape& t, Value x) {
  const Tensor& xv = t.value(x);
  require_rank(xv, 3, "global_avg_pool");
  const std::size_t C = xv.shape[0];
  const std::size_t inner = xv.numel() / C;
  Tensor out({C});
  const double inv = 1.0 / static_cast<double>(inner);
  for (std::size_t c = 0; c < C; ++c) {
    double acc = 0.0;
    const double* row = xv.data.data() + c * inner;
    for (std::size_t i = 0; i < inner; ++i) acc += row[i];
    out[c] = acc * inv;
  }
  int xi = x.id;
  return make_op(t, std::move(out), wants(t, xi),
                 [xi, C, inner, inv](Tape& tp, const Tensor&, const Tensor& g) {
                   Tensor& gx = tp.grad_buffer(xi);
                   for (std::size_t c = 0; c < C; ++c) {
                     double* row = gx.data.data() + c * inner;
                     for (std::size_t i = 0; i < inner; ++i) row[i] += g[c] * inv;
                   }
                 });
}

Value dropout(Tape& t, Value x, double rate, Mode mode, std::uint64_t seed) {
  check(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0,1)");
  if (mode == Mode::eval || rate == 0.0) return x;
  const Tensor& xv = t.value(x);
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double scale = 1.0 / (1.0 - rate);
  Tensor mask(xv.shape);
  for (std::size_t i = 0; i < mask.numel(); ++i) mask[i] = u(rng) >= rate ? scale : 0.0;
  Tensor out(xv.shape);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = xv[i] * mask[i];
  int xi = x.id;
  return make_op(t, std::move(out), wants(t, xi),
                 [xi, mask = std::move(mask)](Tape& tp, const Tensor&, const Tensor& g) {
                   Tensor& gx = tp.grad_buffer(xi);
                   for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * mask[i];
                 });
}

// ---- Fourier pair ----

Value dft2_packed(Tape& t, Value x) {
  const Tensor& xv = t.value(x);
  require_rank(xv, 3, "dft2");
  const std::size_t C = xv.shape[0], T = xv.shape[1], N = xv.shape[2];
  FreqComponents f = dft2(xv);
  Tensor out({2 * C, T, N});
  std::copy(f.f_cos.data.begin(), f.f_cos.data.end(), out.data.begin());
  std::copy(f.f_sin.data.begin(), f.f_sin.data.end(),
            out.data.begin() + static_cast<std::ptrdiff_t>(C * T * N));
  int xi = x.id;
  return make_op(t, std::move(out), wants(t, xi),
                 [xi, C, T, N](Tape& tp, const Tensor&, const Tensor& g) {
                   // both component maps are symmetric, so the adjoint is
                   // T*N times the real inverse transform of the gradient pair
                   FreqComponents gc{Tensor({C, T, N}), Tensor({C, T, N})};
                   std::copy(g.data.begin(),
                             g.data.begin() + static_cast<std::ptrdiff_t>(C * T * N),
                             gc.f_cos.data.begin());
                   std::copy(g.data.begin() + static_cast<std::ptrdiff_t>(C * T * N),
                             g.data.end(), gc.f_sin.data.begin());
                   Tensor adj = idft2(gc);
                   const double scale = static_cast<double>(T) * static_cast<double>(N);
                   Tensor& gx = tp.grad_buffer(xi);
                   for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += adj[i] * scale;
                 });
}

Value idft2_packed(Tape& t, Value f) {
  const Tensor& fv = t.value(f);
  require_rank(fv, 3, "idft2");
  check(fv.shape[0] % 2 == 0, "idft2: packed components need an even channel extent");
  const std::size_t C = fv.shape[0] / 2, T = fv.shape[1], N = fv.shape[2];
  FreqComponents comp{Tensor({C, T, N}), Tensor({C, T, N})};
  std::copy(fv.data.begin(), fv.data.begin() + static_cast<std::ptrdiff_t>(C * T * N),
            comp.f_cos.data.begin());
  std::copy(fv.data.begin() + static_cast<std::ptrdiff_t>(C * T * N), fv.data.end(),
            comp.f_sin.data.begin());
  Tensor out = idft2(comp);
  int fi = f.id;
  return make_op(t, std::move(out), wants(t, fi),
                 [fi, C, T, N](Tape& tp, const Tensor&, const Tensor& g) {
                   FreqComponents adj = dft2(g);
                   const double inv = 1.0 / (static_cast<double>(T) * static_cast<double>(N));
                   Tensor& gf = tp.grad_buffer(fi);
                   const std::size_t half = C * T * N;
                   for (std::size_t i = 0; i < half; ++i) {
                     gf[i] += adj.f_cos[i] * inv;
                     gf[half + i] += adj.f_sin[i] * inv;
                   }
                 });
}

// ---- plain-tensor wrappers ----

namespace {

template <typename Build>
Tensor eval_op(Build&& build) {
  Tape t;
  Value v = build(t);
  return t.value(v);
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  return eval_op([&](Tape& t) { return conv2d(t, t.leaf(x), t.leaf(kernel), t.leaf(bias)); });
}

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
  return eval_op([&](Tape& t) { return dense(t, t.leaf(x), t.leaf(w), t.leaf(b)); });
}

Tensor relu(const Tensor& x) {
  return eval_op([&](Tape& t) { return relu(t, t.leaf(x)); });
}

Tensor sigmoid(const Tensor& x) {
  return eval_op([&](Tape& t) { return sigmoid(t, t.leaf(x)); });
}

Tensor softmax_lastaxis(const Tensor& x) {
  return eval_op([&](Tape& t) { return softmax_lastaxis(t, t.leaf(x)); });
}

Tensor maxpool2(const Tensor& x) {
  return eval_op([&](Tape& t) { return maxpool2(t, t.leaf(x)); });
}

Tensor global_avg_pool(const Tensor& x) {
  return eval_op([&](Tape& t) { return global_avg_pool(t, t.leaf(x)); });
}

Tensor dropout(const Tensor& x, double rate, Mode mode, std::uint64_t seed) {
  return eval_op([&](Tape& t) { return dropout(t, t.leaf(x), rate, mode, seed); });
}

Tensor batchnorm(const Tensor& x, BatchNormParams& params, Mode mode, double momentum,
                 double eps) {
  return eval_op([&](Tape& t) {
    return batchnorm(t, t.leaf(x), t.leaf(params.gamma), t.leaf(params.beta), &params.run_mean,
                     &params.run_var, mode, momentum, eps);
  });
}

}  // namespace slnl
