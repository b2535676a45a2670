#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "metaadapt/tensor/tensor.h"

namespace metaadapt {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid until the
// owning tape is reset.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  Tape* tape() const { return tape_; }
  std::size_t index() const { return index_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

// Receives the gradient of the loss w.r.t. the recorded output (and the
// output value itself) and accumulates into the inputs through
// Tape::GradFor.
using BackwardFn =
    std::function<void(Tape& tape, std::span<const double> out_grad, const Tensor& out)>;

// Reverse-mode tape. Nodes are appended in execution order, so every
// node's inputs precede it and Backward() walks the list in reverse.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Binds a persistent tensor (a model parameter). If the tensor requires
  // grad, Backward() accumulates into its gradient buffer.
  Var Leaf(Tensor& tensor);
  Var Constant(Tensor value);

  // Appends an op output. The backward rule is kept only if gradient
  // recording is enabled and some input requires grad. Throws a numeric
  // error when the output contains NaN or Inf.
  Var Record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;

  // Gradient buffer of an input, allocated on first use. Only valid while
  // Backward() is running.
  std::span<double> GradFor(Var v);

  // Populates gradients of every grad-requiring leaf reachable from the
  // scalar loss; bound leaves that are not reachable receive zeros.
  void Backward(Var loss);

  // Drops every node. Required before Backward() can run again.
  void Reset();

  std::size_t size() const { return nodes_.size(); }
  bool grad_enabled() const { return grad_enabled_; }
  void set_grad_enabled(bool enabled) { grad_enabled_ = enabled; }

 private:
  struct Node {
    Tensor value;
    Tensor* bound = nullptr;
    std::vector<double> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var Push(Node node);
  const Tensor& ValueOf(const Node& node) const { return node.bound ? *node.bound : node.value; }

  // deque keeps references to recorded values stable across appends.
  std::deque<Node> nodes_;
  bool grad_enabled_ = true;
  bool backward_done_ = false;
};

// Disables gradient recording on a tape for the guard's lifetime.
class NoGradGuard {
 public:
  explicit NoGradGuard(Tape& tape) : tape_(tape), previous_(tape.grad_enabled()) {
    tape_.set_grad_enabled(false);
  }
  ~NoGradGuard() { tape_.set_grad_enabled(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape& tape_;
  bool previous_;
};

}  // namespace metaadapt
