#pragma once

#include <functional>
#include <vector>

#include "slnl/tensor.hpp"

namespace slnl {

class Tape;

/// Handle to a node on a Tape.
struct Value {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode tape. Nodes are appended in forward order, so creation
/// order is a topological order; backward walks it once in reverse. Each
/// node stores its value, a lazily allocated gradient of the same shape,
/// and a closure that pulls the node's gradient and pushes vector-Jacobian
/// products into its parents.
class Tape {
 public:
  struct Node {
    Tensor value;
    Tensor grad;  // empty until first accumulation
    bool requires_grad = false;
    std::function<void(Tape&)> backward;  // null for leaves
  };

  Value leaf(Tensor v, bool requires_grad = false);
  Value make(Tensor v, bool requires_grad, std::function<void(Tape&)> backward);

  const Tensor& value(Value v) const { return node(v).value; }
  bool requires_grad(Value v) const { return node(v).requires_grad; }

  /// Gradient of v after backward(); zeros if the node was never reached.
  Tensor grad(Value v) const;

  /// Accumulation target used by op backward closures; allocates on first use.
  Tensor& grad_buffer(int id);
  bool grad_touched(int id) const { return !nodes_[static_cast<std::size_t>(id)].grad.data.empty(); }

  /// Seeds d(root)/d(root) = 1 and runs every recorded backward map once in
  /// reverse creation order. root must be scalar (one element).
  void backward(Value root);

  std::size_t size() const { return nodes_.size(); }

  const Node& node(Value v) const;
  Node& node(Value v);

 private:
  std::vector<Node> nodes_;
};

}  // namespace slnl
