#include "core/tensor.hpp"

#include <sstream>

namespace xbt {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int d : shape) {
    require(d >= 0, ErrorCode::dimension, "negative extent in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  data_.assign(static_cast<size_t>(shape_numel(shape_)), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  require(shape_numel(shape_) == static_cast<int64_t>(data_.size()), ErrorCode::dimension,
          "data length " + std::to_string(data_.size()) + " does not match shape " + shape_str(shape_));
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  data_.assign(static_cast<size_t>(shape_numel(shape_)), fill);
}

double Tensor::item() const {
  require(size() == 1, ErrorCode::dimension, "item() on non-scalar tensor " + shape_str(shape_));
  return data_[0];
}

std::vector<double>& Tensor::grad() {
  if (grad_.empty()) grad_.assign(data_.size(), 0.0);
  return grad_;
}

void Tensor::zero_grad() {
  if (!grad_.empty()) grad_.assign(data_.size(), 0.0);
}

Tensor Tensor::reshaped(Shape shape) const {
  require(shape_numel(shape) == size(), ErrorCode::dimension,
          "reshape " + shape_str(shape_) + " -> " + shape_str(shape) + " changes element count");
  return Tensor(std::move(shape), data_);
}

}  // namespace xbt
