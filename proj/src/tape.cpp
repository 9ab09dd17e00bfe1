#include "hyperflow/tape.hpp"

#include <stdexcept>

#include "hyperflow/errors.hpp"

namespace hyperflow {

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, true, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, false, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::span<const Var> parents,
                 Backward backward) {
  bool needs = false;
  for (const Var& p : parents) {
    if (p.tape_ != this) {
      throw std::invalid_argument("operands recorded on different tapes");
    }
    needs = needs || nodes_[p.id_].requires_grad;
  }
  Node node{std::move(value), {}, needs, false, {}};
  if (needs) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor* Tape::grad_sink(std::size_t id) {
  Node& node = nodes_[id];
  if (!node.requires_grad) return nullptr;
  if (!node.has_grad) {
    node.grad = Tensor::zeros_like(node.value);
    node.has_grad = true;
  }
  return &node.grad;
}

std::vector<Tensor> Tape::grad(const Var& output, std::span<const Var> wrt) {
  if (output.tape_ != this) {
    throw std::invalid_argument("output recorded on a different tape");
  }
  if (!output.value().is_scalar()) {
    throw ContractViolation("grad requires a scalar output, got shape " +
                            shape_string(output.value().shape()));
  }
  for (Node& node : nodes_) {
    node.has_grad = false;
    node.grad = Tensor();
  }
  if (Tensor* seed = grad_sink(output.id_)) {
    (*seed)[0] = 1.0;
    for (std::size_t id = output.id_ + 1; id-- > 0;) {
      Node& node = nodes_[id];
      if (node.has_grad && node.backward) node.backward(*this, id);
    }
  }
  std::vector<Tensor> result;
  result.reserve(wrt.size());
  for (const Var& v : wrt) {
    if (v.tape_ != this) {
      throw std::invalid_argument("gradient target on a different tape");
    }
    const Node& node = nodes_[v.id_];
    result.push_back(node.has_grad ? node.grad : Tensor::zeros_like(node.value));
  }
  return result;
}

std::vector<Tensor> Tape::grad(const Var& output,
                               std::initializer_list<Var> wrt) {
  return grad(output, std::span<const Var>(wrt.begin(), wrt.size()));
}

}  // namespace hyperflow
