#pragma once

#include "slnl/ops.hpp"

namespace slnl {

/// Learnable input transform: a linear map on the joint axis that augments
/// and reorders joints (any permutation is a special case of the weight
/// matrix), followed by K learned oblique coordinate systems whose outputs
/// are stacked along the channel axis.
struct TransformParams {
  Tensor joint_w;  // (N_out, N_in)
  Tensor joint_b;  // (N_out)
  std::vector<Tensor> coord_maps;  // K matrices (d, d), no bias

  /// joint map: row i copies input joint i mod N_in, plus uniform noise;
  /// coordinate maps: identity plus uniform(-0.05, 0.05) noise.
  static TransformParams init(std::size_t n_in, std::size_t n_out, std::size_t d,
                              std::size_t k, Rng& rng);
};

// x (d,T,N_in) -> (d,T,N_out)
Value skeleton_transform_node(Tape& t, Value x, Value joint_w, Value joint_b);
// x (d,T,N) -> (K*d,T,N)
Value coordinate_transform_node(Tape& t, Value x, const std::vector<Value>& coord_maps);
Value transform_forward_node(Tape& t, Value x, Value joint_w, Value joint_b,
                             const std::vector<Value>& coord_maps);

Tensor skeleton_transform(const Tensor& x, const Tensor& joint_w, const Tensor& joint_b);
Tensor coordinate_transform(const Tensor& x, const std::vector<Tensor>& coord_maps);
Tensor transform_forward(const Tensor& x, const TransformParams& params);

}  // namespace slnl
