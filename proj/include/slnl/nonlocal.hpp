#pragma once

#include <array>
#include <optional>
#include <set>
#include <utility>

#include "slnl/ops.hpp"

namespace slnl {

enum class NLAxis { temporal, spatial, spatiotemporal };

/// Embedded-Gaussian non-local operation. Affinities are softmax-normalized
/// inner products of linear embeddings; the result is linearly embedded by
/// w_g and gated by w_w.
struct NonLocalParams {
  Tensor w_g;    // (Q, P)
  Tensor w_phi;  // (L, P)
  Tensor w_psi;  // (L, P)
  Tensor w_w;    // (Q, Q)
  static NonLocalParams init(std::size_t p, std::size_t q, std::size_t l, Rng& rng);
};

struct NonLocalValues {
  Value wg, wphi, wpsi, ww;
};

/// Core operation on batched row matrices xb (B,M,P) -> (B,M,Q); every
/// affinity row is a softmax over the M source positions.
Value nonlocal_core_node(Tape& t, Value xb, const NonLocalValues& v);

/// Axis adapters on (C,T,N): temporal treats each joint's T time steps as
/// positions (batch over joints), spatial each frame's N joints (batch over
/// frames), spatiotemporal all T*N cells at once.
Value nonlocal_axis_node(Tape& t, Value x, const NonLocalValues& v, NLAxis axis);

Tensor nonlocal_forward(const Tensor& x_mp, const NonLocalParams& p);  // (M,P) -> (M,Q)
Tensor nonlocal_1d(const Tensor& x, const NonLocalParams& p, NLAxis axis);
Tensor nonlocal_2d(const Tensor& x, const NonLocalParams& p);

// ---- blocks ----

struct ConvPair {
  Tensor kernel, bias;
};

/// Baseline local block: parallel temporal (k x 1), spatial (1 x k) and
/// spatio-temporal (k x k) convolutions, summed with a residual path
/// (1x1-projected when the channel count changes), then ReLU, then BN.
struct LocalBlockParams {
  ConvPair tconv, sconv, stconv;
  std::optional<ConvPair> proj;
  BatchNormParams bn;
  static LocalBlockParams init(std::size_t c_in, std::size_t c_out, std::size_t k, Rng& rng);
};

/// SLnL block: the local block plus three parallel non-local branches
/// (temporal, spatial, spatio-temporal) merged into the same sum.
struct SlnlBlockParams {
  LocalBlockParams local;
  NonLocalParams t_nl, s_nl, st_nl;
  static SlnlBlockParams init(std::size_t c_in, std::size_t c_out, std::size_t k,
                              std::size_t l_embed, Rng& rng);
};

struct BNValues {
  Value gamma, beta;
  Tensor* run_mean = nullptr;
  Tensor* run_var = nullptr;
};

struct ConvValues {
  Value kernel, bias;
};

struct BlockValues {
  ConvValues tconv, sconv, stconv;
  std::optional<ConvValues> proj;
  BNValues bn;
  std::optional<std::array<NonLocalValues, 3>> nl;  // temporal, spatial, spatiotemporal
};

/// One block forward; nl disengaged gives the baseline local block.
Value block_node(Tape& t, Value x, const BlockValues& v, Mode mode);

Tensor local_block(const Tensor& x, LocalBlockParams& p, Mode mode);
Tensor slnl_block(const Tensor& x, SlnlBlockParams& p, Mode mode);

// ---- affinity field ----

enum class BlockKind { local, slnl };

using PositionSet = std::set<std::pair<std::size_t, std::size_t>>;

/// Structural set of input positions with a nonzero path to the target
/// output position of one block. Local: union of the three kernel supports
/// clipped at the borders. SLnL: every position.
PositionSet affinity_field(BlockKind kind, std::size_t k, std::size_t t_extent,
                           std::size_t n_extent, std::pair<std::size_t, std::size_t> target);

/// Perturbation probe of a randomly initialized block (BN in eval mode):
/// positions whose +/-delta perturbation changes the target output.
PositionSet empirical_affinity_field(BlockKind kind, std::size_t k, std::size_t c_in,
                                     std::size_t c_out, std::size_t t_extent,
                                     std::size_t n_extent,
                                     std::pair<std::size_t, std::size_t> target,
                                     std::uint64_t seed, double delta = 0.5);

}  // namespace slnl
