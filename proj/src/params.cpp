#include "slnl/params.hpp"

namespace slnl {

int ParamStore::add(const std::string& name, Tensor init, bool learnable) {
  check(index_.find(name) == index_.end(), "param store: duplicate name " + name);
  Entry e;
  e.name = name;
  e.grad = learnable ? Tensor::zeros(init.shape) : Tensor{};
  e.value = std::move(init);
  e.learnable = learnable;
  entries_.push_back(std::move(e));
  int id = static_cast<int>(entries_.size()) - 1;
  index_[name] = id;
  return id;
}

ParamStore::Entry& ParamStore::entry(int id) {
  check(id >= 0 && static_cast<std::size_t>(id) < entries_.size(), "param store: bad id");
  return entries_[static_cast<std::size_t>(id)];
}

const ParamStore::Entry& ParamStore::entry(int id) const {
  check(id >= 0 && static_cast<std::size_t>(id) < entries_.size(), "param store: bad id");
  return entries_[static_cast<std::size_t>(id)];
}

int ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? -1 : it->second;
}

void ParamStore::zero_grads() {
  for (Entry& e : entries_)
    if (e.learnable) e.grad.fill(0.0);
}

std::size_t ParamStore::learnable_count() const {
  std::size_t n = 0;
  for (const Entry& e : entries_)
    if (e.learnable) n += e.value.numel();
  return n;
}

Value BoundParams::bind(Tape& t, ParamStore& store, int id) {
  const ParamStore::Entry& e = store.entry(id);
  Value v = t.leaf(e.value, e.learnable);
  bound_.emplace_back(v.id, id);
  return v;
}

void BoundParams::accumulate_grads(Tape& t, ParamStore& store) const {
  for (auto [node_id, store_id] : bound_) {
    ParamStore::Entry& e = store.entry(store_id);
    if (!e.learnable) continue;
    if (!t.grad_touched(node_id)) continue;
    const Tensor& g = t.node(Value{node_id}).grad;
    for (std::size_t i = 0; i < g.numel(); ++i) e.grad[i] += g[i];
  }
}

}  // namespace slnl
