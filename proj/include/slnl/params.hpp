#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "slnl/tape.hpp"

namespace slnl {

/// Named parameter/buffer registry. Learnable entries carry a gradient
/// accumulator the optimizer consumes; buffers (running statistics) are
/// serialized but never differentiated.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    Tensor grad;  // same shape, learnable entries only
    bool learnable = true;
  };

  int add(const std::string& name, Tensor init, bool learnable = true);

  std::size_t size() const { return entries_.size(); }
  Entry& entry(int id);
  const Entry& entry(int id) const;
  int find(const std::string& name) const;  // -1 when absent

  Tensor& value(int id) { return entry(id).value; }
  const Tensor& value(int id) const { return entry(id).value; }
  Tensor& grad(int id) { return entry(id).grad; }

  void zero_grads();
  std::size_t learnable_count() const;  // total learnable scalars

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> index_;
};

/// Per-forward binding of store entries to tape leaves. After backward,
/// accumulate_grads() adds the tape gradients into the store accumulators.
class BoundParams {
 public:
  Value bind(Tape& t, ParamStore& store, int id);
  void accumulate_grads(Tape& t, ParamStore& store) const;

 private:
  std::vector<std::pair<int, int>> bound_;  // (tape node id, store id)
};

}  // namespace slnl
