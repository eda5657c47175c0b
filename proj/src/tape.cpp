#include "slnl/tape.hpp"

namespace slnl {

Value Tape::leaf(Tensor v, bool requires_grad) {
  nodes_.push_back(Node{std::move(v), Tensor{}, requires_grad, nullptr});
  return Value{static_cast<int>(nodes_.size()) - 1};
}

Value Tape::make(Tensor v, bool requires_grad, std::function<void(Tape&)> backward) {
  nodes_.push_back(Node{std::move(v), Tensor{}, requires_grad, std::move(backward)});
  return Value{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::node(Value v) const {
  check(v.valid() && static_cast<std::size_t>(v.id) < nodes_.size(),
        "tape: invalid value handle");
  return nodes_[static_cast<std::size_t>(v.id)];
}

Tape::Node& Tape::node(Value v) {
  check(v.valid() && static_cast<std::size_t>(v.id) < nodes_.size(),
        "tape: invalid value handle");
  return nodes_[static_cast<std::size_t>(v.id)];
}

Tensor Tape::grad(Value v) const {
  const Node& n = node(v);
  if (n.grad.data.empty()) return Tensor::zeros(n.value.shape);
  return n.grad;
}

Tensor& Tape::grad_buffer(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.data.empty()) n.grad = Tensor::zeros(n.value.shape);
  return n.grad;
}

void Tape::backward(Value root) {
  check(!nodes_.empty(), "tape: backward called before any forward pass was recorded");
  Node& r = node(root);
  check(r.value.numel() == 1, "tape: backward root must be scalar, got " +
                                  r.value.shape_string());
  grad_buffer(root.id)[0] += 1.0;
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.backward || n.grad.data.empty()) continue;
    n.backward(*this);
  }
}

}  // namespace slnl
