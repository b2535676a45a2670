#include "metaadapt/tensor/tensor.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "metaadapt/core/error.h"

namespace metaadapt {

std::size_t NumElements(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string ShapeToString(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(NumElements(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  Require(data_.size() == NumElements(shape_), ErrorKind::kDimension,
          "data length " + std::to_string(data_.size()) + " does not match shape " +
              ShapeToString(shape_));
}

Tensor Tensor::Scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

double Tensor::item() const {
  Require(data_.size() == 1, ErrorKind::kDimension,
          "item() on tensor of shape " + ShapeToString(shape_));
  return data_[0];
}

std::span<double> Tensor::grad() {
  Require(grad_.has_value(), ErrorKind::kState, "tensor has no gradient");
  return *grad_;
}

std::span<const double> Tensor::grad() const {
  Require(grad_.has_value(), ErrorKind::kState, "tensor has no gradient");
  return *grad_;
}

std::span<double> Tensor::EnsureGrad() {
  if (!grad_) grad_.emplace(data_.size(), 0.0);
  return *grad_;
}

void Tensor::ZeroGrad() {
  if (grad_) std::fill(grad_->begin(), grad_->end(), 0.0);
}

bool Tensor::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace metaadapt
