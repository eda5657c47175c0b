#include "slnl/transform_net.hpp"

namespace slnl {

TransformParams TransformParams::init(std::size_t n_in, std::size_t n_out, std::size_t d,
                                      std::size_t k, Rng& rng) {
  check(n_in >= 1 && n_out >= 1 && d >= 1 && k >= 1, "transform init: bad dimensions");
  TransformParams p;
  p.joint_w = random_uniform({n_out, n_in}, rng, -0.05, 0.05);
  for (std::size_t i = 0; i < n_out; ++i) p.joint_w.at2(i, i % n_in) += 1.0;
  p.joint_b = Tensor::zeros({n_out});
  p.coord_maps.reserve(k);
  for (std::size_t kk = 0; kk < k; ++kk) {
    Tensor m = random_uniform({d, d}, rng, -0.05, 0.05);
    for (std::size_t i = 0; i < d; ++i) m.at2(i, i) += 1.0;
    p.coord_maps.push_back(std::move(m));
  }
  return p;
}

Value skeleton_transform_node(Tape& t, Value x, Value joint_w, Value joint_b) {
  const Tensor& xv = t.value(x);
  require_rank(xv, 3, "skeleton_transform");
  const Tensor& wv = t.value(joint_w);
  require_rank(wv, 2, "skeleton_transform weight");
  check(xv.shape[2] == wv.shape[1],
        "skeleton_transform: joint count " + std::to_string(xv.shape[2]) +
            " does not match weight " + wv.shape_string());
  const std::size_t d = xv.shape[0], T = xv.shape[1], n_out = wv.shape[0];
  // joints sit on the last axis, so the map is a plain row-wise dense layer
  Value rows = reshape(t, x, {d * T, xv.shape[2]});
  Value mapped = dense(t, rows, joint_w, joint_b);
  return reshape(t, mapped, {d, T, n_out});
}

Value coordinate_transform_node(Tape& t, Value x, const std::vector<Value>& coord_maps) {
  const Tensor& xv = t.value(x);
  require_rank(xv, 3, "coordinate_transform");
  check(!coord_maps.empty(), "coordinate_transform: needs at least one coordinate map");
  const std::size_t d = xv.shape[0];
  for (Value m : coord_maps) {
    const Tensor& mv = t.value(m);
    if (mv.rank() != 2 || mv.shape[0] != d || mv.shape[1] != d)
      fail("coordinate_transform: channel extent " + std::to_string(d) +
           " does not match map " + mv.shape_string());
  }
  // (d,T,N) -> (T,N,d), apply each map to the trailing coordinate vectors
  Value tnd = permute3(t, x, {1, 2, 0});
  Value out{};
  for (Value m : coord_maps) {
    Value y = permute3(t, linear_rows(t, tnd, m), {2, 0, 1});  // back to (d,T,N)
    out = out.valid() ? concat_axis0(t, out, y) : y;
  }
  return out;
}

Value transform_forward_node(Tape& t, Value x, Value joint_w, Value joint_b,
                             const std::vector<Value>& coord_maps) {
  return coordinate_transform_node(t, skeleton_transform_node(t, x, joint_w, joint_b),
                                   coord_maps);
}

Tensor skeleton_transform(const Tensor& x, const Tensor& joint_w, const Tensor& joint_b) {
  Tape t;
  return t.value(skeleton_transform_node(t, t.leaf(x), t.leaf(joint_w), t.leaf(joint_b)));
}

Tensor coordinate_transform(const Tensor& x, const std::vector<Tensor>& coord_maps) {
  Tape t;
  std::vector<Value> maps;
  maps.reserve(coord_maps.size());
  for (const Tensor& m : coord_maps) maps.push_back(t.leaf(m));
  return t.value(coordinate_transform_node(t, t.leaf(x), maps));
}

Tensor transform_forward(const Tensor& x, const TransformParams& params) {
  Tape t;
  std::vector<Value> maps;
  maps.reserve(params.coord_maps.size());
  for (const Tensor& m : params.coord_maps) maps.push_back(t.leaf(m));
  return t.value(transform_forward_node(t, t.leaf(x), t.leaf(params.joint_w),
                                        t.leaf(params.joint_b), maps));
}

}  // namespace slnl
