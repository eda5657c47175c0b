#include "slnl/nonlocal.hpp"

#include <cmath>

namespace slnl {

NonLocalParams NonLocalParams::init(std::size_t p, std::size_t q, std::size_t l, Rng& rng) {
  check(p >= 1 && q >= 1 && l >= 1, "nonlocal init: bad channel plan");
  NonLocalParams params;
  const double sp = 1.0 / std::sqrt(static_cast<double>(p));
  const double sq = 1.0 / std::sqrt(static_cast<double>(q));
  params.w_g = random_uniform({q, p}, rng, -sp, sp);
  params.w_phi = random_uniform({l, p}, rng, -sp, sp);
  params.w_psi = random_uniform({l, p}, rng, -sp, sp);
  params.w_w = random_uniform({q, q}, rng, -sq, sq);
  return params;
}

Value nonlocal_core_node(Tape& t, Value xb, const NonLocalValues& v) {
  const Tensor& xv = t.value(xb);
  require_rank(xv, 3, "nonlocal_core input");
  Value g = linear_rows(t, xb, v.wg);      // (B,M,Q)
  Value phi = linear_rows(t, xb, v.wphi);  // (B,M,L)
  Value psi = linear_rows(t, xb, v.wpsi);  // (B,M,L)
  Value logits = bmm_nt(t, phi, psi);      // (B,M,M)
  Value attn = softmax_lastaxis(t, logits);
  Value y = bmm_nn(t, attn, g);            // (B,M,Q)
  return linear_rows(t, y, v.ww);
}

Value nonlocal_axis_node(Tape& t, Value x, const NonLocalValues& v, NLAxis axis) {
  const Tensor& xv = t.value(x);
  require_rank(xv, 3, "nonlocal_axis input");
  const std::size_t T = xv.shape[1], N = xv.shape[2];
  switch (axis) {
    case NLAxis::temporal: {
      Value xb = permute3(t, x, {2, 1, 0});  // (N,T,C)
      Value y = nonlocal_core_node(t, xb, v);
      return permute3(t, y, {2, 1, 0});      // (Q,T,N)
    }
    case NLAxis::spatial: {
      Value xb = permute3(t, x, {1, 2, 0});  // (T,N,C)
      Value y = nonlocal_core_node(t, xb, v);
      return permute3(t, y, {2, 0, 1});      // (Q,T,N)
    }
    case NLAxis::spatiotemporal: {
      Value xb = reshape(t, permute3(t, x, {1, 2, 0}), {1, T * N, xv.shape[0]});
      Value y = nonlocal_core_node(t, xb, v);
      const std::size_t q = t.value(y).shape[2];
      return permute3(t, reshape(t, y, {T, N, q}), {2, 0, 1});
    }
  }
  fail("nonlocal_axis: bad axis");
}

namespace {

NonLocalValues bind_nl(Tape& t, const NonLocalParams& p) {
  return NonLocalValues{t.leaf(p.w_g), t.leaf(p.w_phi), t.leaf(p.w_psi), t.leaf(p.w_w)};
}

}  // namespace

Tensor nonlocal_forward(const Tensor& x_mp, const NonLocalParams& p) {
  require_rank(x_mp, 2, "nonlocal_forward input");
  Tape t;
  Value xb = t.leaf(Tensor({1, x_mp.shape[0], x_mp.shape[1]}, x_mp.data));
  Value y = nonlocal_core_node(t, xb, bind_nl(t, p));
  const Tensor& yv = t.value(y);
  return Tensor({yv.shape[1], yv.shape[2]}, yv.data);
}

Tensor nonlocal_1d(const Tensor& x, const NonLocalParams& p, NLAxis axis) {
  check(axis != NLAxis::spatiotemporal, "nonlocal_1d: axis must be temporal or spatial");
  Tape t;
  return t.value(nonlocal_axis_node(t, t.leaf(x), bind_nl(t, p), axis));
}

Tensor nonlocal_2d(const Tensor& x, const NonLocalParams& p) {
  Tape t;
  return t.value(nonlocal_axis_node(t, t.leaf(x), bind_nl(t, p), NLAxis::spatiotemporal));
}

// ---- blocks ----

namespace {

ConvPair conv_init(std::size_t c_in, std::size_t c_out, std::size_t kt, std::size_t kn,
                   Rng& rng) {
  const double fan_in = static_cast<double>(c_in * kt * kn);
  const double fan_out = static_cast<double>(c_out * kt * kn);
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  return ConvPair{random_uniform({c_out, c_in, kt, kn}, rng, -a, a), Tensor::zeros({c_out})};
}

}  // namespace

LocalBlockParams LocalBlockParams::init(std::size_t c_in, std::size_t c_out, std::size_t k,
                                        Rng& rng) {
  check(k % 2 == 1, "local block: kernel extent must be odd");
  LocalBlockParams p;
  p.tconv = conv_init(c_in, c_out, k, 1, rng);
  p.sconv = conv_init(c_in, c_out, 1, k, rng);
  p.stconv = conv_init(c_in, c_out, k, k, rng);
  if (c_in != c_out) p.proj = conv_init(c_in, c_out, 1, 1, rng);
  p.bn = BatchNormParams::init(c_out);
  return p;
}

SlnlBlockParams SlnlBlockParams::init(std::size_t c_in, std::size_t c_out, std::size_t k,
                                      std::size_t l_embed, Rng& rng) {
  SlnlBlockParams p;
  p.local = LocalBlockParams::init(c_in, c_out, k, rng);
  p.t_nl = NonLocalParams::init(c_in, c_out, l_embed, rng);
  p.s_nl = NonLocalParams::init(c_in, c_out, l_embed, rng);
  p.st_nl = NonLocalParams::init(c_in, c_out, l_embed, rng);
  return p;
}

Value block_node(Tape& t, Value x, const BlockValues& v, Mode mode) {
  Value tt = conv2d(t, x, v.tconv.kernel, v.tconv.bias);
  Value ss = conv2d(t, x, v.sconv.kernel, v.sconv.bias);
  Value st = conv2d(t, x, v.stconv.kernel, v.stconv.bias);
  Value acc = add(t, add(t, tt, ss), st);
  if (v.nl) {
    acc = add(t, acc, nonlocal_axis_node(t, x, (*v.nl)[0], NLAxis::temporal));
    acc = add(t, acc, nonlocal_axis_node(t, x, (*v.nl)[1], NLAxis::spatial));
    acc = add(t, acc, nonlocal_axis_node(t, x, (*v.nl)[2], NLAxis::spatiotemporal));
  }
  Value res = v.proj ? conv2d(t, x, v.proj->kernel, v.proj->bias) : x;
  acc = add(t, acc, res);
  return batchnorm(t, relu(t, acc), v.bn.gamma, v.bn.beta, v.bn.run_mean, v.bn.run_var, mode);
}

namespace {

BlockValues bind_local(Tape& t, LocalBlockParams& p) {
  BlockValues v;
  v.tconv = ConvValues{t.leaf(p.tconv.kernel), t.leaf(p.tconv.bias)};
  v.sconv = ConvValues{t.leaf(p.sconv.kernel), t.leaf(p.sconv.bias)};
  v.stconv = ConvValues{t.leaf(p.stconv.kernel), t.leaf(p.stconv.bias)};
  if (p.proj) v.proj = ConvValues{t.leaf(p.proj->kernel), t.leaf(p.proj->bias)};
  v.bn = BNValues{t.leaf(p.bn.gamma), t.leaf(p.bn.beta), &p.bn.run_mean, &p.bn.run_var};
  return v;
}

}  // namespace

Tensor local_block(const Tensor& x, LocalBlockParams& p, Mode mode) {
  Tape t;
  return t.value(block_node(t, t.leaf(x), bind_local(t, p), mode));
}

Tensor slnl_block(const Tensor& x, SlnlBlockParams& p, Mode mode) {
  Tape t;
  BlockValues v = bind_local(t, p.local);
  v.nl = std::array<NonLocalValues, 3>{bind_nl(t, p.t_nl), bind_nl(t, p.s_nl),
                                       bind_nl(t, p.st_nl)};
  return t.value(block_node(t, t.leaf(x), v, mode));
}

// ---- affinity field ----

PositionSet affinity_field(BlockKind kind, std::size_t k, std::size_t t_extent,
                           std::size_t n_extent, std::pair<std::size_t, std::size_t> target) {
  check(k % 2 == 1, "affinity_field: kernel extent must be odd");
  check(target.first < t_extent && target.second < n_extent,
        "affinity_field: target out of range");
  PositionSet set;
  if (kind == BlockKind::slnl) {
    for (std::size_t tt = 0; tt < t_extent; ++tt)
      for (std::size_t nn = 0; nn < n_extent; ++nn) set.insert({tt, nn});
    return set;
  }
  const std::ptrdiff_t h = static_cast<std::ptrdiff_t>((k - 1) / 2);
  const std::ptrdiff_t tc = static_cast<std::ptrdiff_t>(target.first);
  const std::ptrdiff_t nc = static_cast<std::ptrdiff_t>(target.second);
  auto insert_clipped = [&](std::ptrdiff_t tt, std::ptrdiff_t nn) {
    if (tt < 0 || nn < 0) return;
    if (tt >= static_cast<std::ptrdiff_t>(t_extent) || nn >= static_cast<std::ptrdiff_t>(n_extent))
      return;
    set.insert({static_cast<std::size_t>(tt), static_cast<std::size_t>(nn)});
  };
  for (std::ptrdiff_t dt = -h; dt <= h; ++dt)
    for (std::ptrdiff_t dn = -h; dn <= h; ++dn) insert_clipped(tc + dt, nc + dn);  // stLocal
  for (std::ptrdiff_t dt = -h; dt <= h; ++dt) insert_clipped(tc + dt, nc);         // tLocal
  for (std::ptrdiff_t dn = -h; dn <= h; ++dn) insert_clipped(tc, nc + dn);         // sLocal
  set.insert(target);                                                              // residual
  return set;
}

PositionSet empirical_affinity_field(BlockKind kind, std::size_t k, std::size_t c_in,
                                     std::size_t c_out, std::size_t t_extent,
                                     std::size_t n_extent,
                                     std::pair<std::size_t, std::size_t> target,
                                     std::uint64_t seed, double delta) {
  check(target.first < t_extent && target.second < n_extent,
        "empirical_affinity_field: target out of range");
  Rng rng(seed);
  SlnlBlockParams params =
      SlnlBlockParams::init(c_in, c_out, k, std::max<std::size_t>(1, c_out / 2), rng);
  Tensor x = random_uniform({c_in, t_extent, n_extent}, rng, -1.0, 1.0);

  auto run = [&](const Tensor& input) {
    // eval-mode BN so positions only interact through the block structure,
    // not through batch statistics
    return kind == BlockKind::slnl ? slnl_block(input, params, Mode::eval)
                                   : local_block(input, params.local, Mode::eval);
  };
  const Tensor base = run(x);
  PositionSet set;
  for (std::size_t tt = 0; tt < t_extent; ++tt)
    for (std::size_t nn = 0; nn < n_extent; ++nn) {
      double moved = 0.0;
      for (double sign : {+1.0, -1.0}) {
        Tensor xp = x;
        for (std::size_t c = 0; c < c_in; ++c) xp.at3(c, tt, nn) += sign * delta;
        const Tensor out = run(xp);
        for (std::size_t c = 0; c < c_out; ++c)
          moved = std::max(
              moved, std::abs(out.at3(c, target.first, target.second) -
                              base.at3(c, target.first, target.second)));
      }
      if (moved > 1e-12) set.insert({tt, nn});
    }
  return set;
}

}  // namespace slnl
