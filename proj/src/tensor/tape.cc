#include "metaadapt/tensor/tape.h"

#include <algorithm>

#include "metaadapt/core/error.h"

namespace metaadapt {

const Tensor& Var::value() const {
  Require(tape_ != nullptr, ErrorKind::kState, "use of an unbound Var");
  return tape_->value(*this);
}

bool Var::requires_grad() const { return tape_ != nullptr && tape_->requires_grad(*this); }

Var Tape::Push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::Leaf(Tensor& tensor) {
  Node node;
  node.bound = &tensor;
  node.requires_grad = grad_enabled_ && tensor.requires_grad();
  return Push(std::move(node));
}

Var Tape::Constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  return Push(std::move(node));
}

Var Tape::Record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  if (!value.AllFinite()) {
    Fail(ErrorKind::kNumeric, "non-finite value produced at tape node " +
                                  std::to_string(nodes_.size()));
  }
  bool needs_grad = false;
  if (grad_enabled_) {
    for (const Var& in : inputs) {
      Require(in.tape() == this, ErrorKind::kState, "input recorded on a different tape");
      needs_grad = needs_grad || nodes_[in.index()].requires_grad;
    }
  }
  Node node;
  node.value = std::move(value);
  node.requires_grad = needs_grad;
  if (needs_grad) node.backward = std::move(backward);
  return Push(std::move(node));
}

const Tensor& Tape::value(Var v) const {
  Require(v.tape() == this && v.index() < nodes_.size(), ErrorKind::kState,
          "stale Var for this tape");
  return ValueOf(nodes_[v.index()]);
}

bool Tape::requires_grad(Var v) const { return nodes_.at(v.index()).requires_grad; }

std::span<double> Tape::GradFor(Var v) {
  Node& node = nodes_.at(v.index());
  if (node.grad.empty()) node.grad.assign(ValueOf(node).size(), 0.0);
  return node.grad;
}

void Tape::Backward(Var loss) {
  Require(!backward_done_, ErrorKind::kState, "backward called twice without tape reset");
  Require(!nodes_.empty(), ErrorKind::kState, "backward on an empty tape");
  Require(loss.tape() == this, ErrorKind::kState, "loss recorded on a different tape");
  Require(value(loss).size() == 1, ErrorKind::kDimension,
          "backward requires a scalar loss, got shape " + ShapeToString(value(loss).shape()));
  backward_done_ = true;

  if (nodes_[loss.index()].requires_grad) {
    GradFor(loss)[0] = 1.0;
    for (std::size_t i = loss.index() + 1; i-- > 0;) {
      Node& node = nodes_[i];
      if (!node.requires_grad || node.grad.empty() || !node.backward) continue;
      // The callback may allocate other nodes' grads; keep our buffer alive.
      std::vector<double> out_grad = std::move(node.grad);
      node.backward(*this, out_grad, node.value);
      node.grad = std::move(out_grad);
    }
  }

  for (Node& node : nodes_) {
    if (node.bound == nullptr || !node.requires_grad) continue;
    std::span<double> dst = node.bound->EnsureGrad();
    if (node.grad.empty()) continue;
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += node.grad[j];
  }
}

void Tape::Reset() {
  nodes_.clear();
  backward_done_ = false;
}

}  // namespace metaadapt
