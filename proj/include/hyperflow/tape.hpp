#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "hyperflow/tensor.hpp"

namespace hyperflow {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape
/// lives.
class Var {
 public:
  Var() = default;

  inline const Tensor& value() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode recording of tensor operations.
///
/// Nodes are appended in evaluation order, so a reverse sweep over node ids is
/// a valid reverse topological order. Gradients accumulate additively into
/// lazily allocated buffers. One tape per thread.
class Tape {
 public:
  /// Called during the reverse sweep with the node's own id; reads
  /// grad_of(self) and adds into grad_sink(parent).
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input.
  Var leaf(Tensor value);
  /// Input that never receives a gradient.
  Var constant(Tensor value);
  Var record(Tensor value, std::span<const Var> parents, Backward backward);
  Var record(Tensor value, std::initializer_list<Var> parents,
             Backward backward) {
    return record(std::move(value),
                  std::span<const Var>(parents.begin(), parents.size()),
                  std::move(backward));
  }

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const Tensor& grad_of(std::size_t id) const { return nodes_[id].grad; }
  /// Gradient accumulator of a parent, or nullptr when the parent does not
  /// need one.
  Tensor* grad_sink(std::size_t id);

  /// d(output)/d(wrt[i]) for a scalar output. Unreached inputs get zeros.
  std::vector<Tensor> grad(const Var& output, std::span<const Var> wrt);
  std::vector<Tensor> grad(const Var& output, std::initializer_list<Var> wrt);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    Backward backward;
  };

  std::deque<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

}  // namespace hyperflow
