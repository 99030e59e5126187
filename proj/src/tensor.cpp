#include "t3conv/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace t3conv {

int64_t numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

bool all_finite(std::span<const double> values) {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor::Impl& Tensor::ref() {
  if (!impl_) throw std::logic_error("use of undefined Tensor");
  return *impl_;
}

const Tensor::Impl& Tensor::ref() const {
  if (!impl_) throw std::logic_error("use of undefined Tensor");
  return *impl_;
}

Tensor::Tensor(Shape shape) {
  for (int64_t e : shape)
    if (e < 1) throw std::invalid_argument("Tensor: non-positive extent in shape " + shape_str(shape));
  impl_ = std::make_shared<Impl>();
  impl_->shape = std::move(shape);
  impl_->data.assign(static_cast<size_t>(numel(impl_->shape)), 0.0);
}

Tensor Tensor::zeros(Shape shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = value;
  return t;
}

Tensor Tensor::from_vector(Shape shape, std::vector<double> values) {
  Tensor t(std::move(shape));
  if (static_cast<int64_t>(values.size()) != t.size())
    throw std::invalid_argument("Tensor::from_vector: " + std::to_string(values.size()) +
                                " values for shape " + shape_str(t.shape()));
  if (!all_finite(values))
    throw std::invalid_argument("Tensor::from_vector: non-finite value");
  t.ref().data = std::move(values);
  return t;
}

const Shape& Tensor::shape() const { return ref().shape; }
int64_t Tensor::ndim() const { return static_cast<int64_t>(ref().shape.size()); }
int64_t Tensor::size() const { return static_cast<int64_t>(ref().data.size()); }

int64_t Tensor::extent(int64_t axis) const {
  const Shape& s = ref().shape;
  if (axis < 0 || axis >= static_cast<int64_t>(s.size()))
    throw std::out_of_range("Tensor::extent: axis " + std::to_string(axis) + " of " + shape_str(s));
  return s[static_cast<size_t>(axis)];
}

double* Tensor::data() { return ref().data.data(); }
const double* Tensor::data() const { return ref().data.data(); }
std::span<double> Tensor::values() { return {ref().data.data(), ref().data.size()}; }
std::span<const double> Tensor::values() const { return {ref().data.data(), ref().data.size()}; }

int64_t Tensor::offset(std::initializer_list<int64_t> idx) const {
  const Shape& s = ref().shape;
  if (idx.size() != s.size())
    throw std::invalid_argument("Tensor::offset: rank mismatch for " + shape_str(s));
  int64_t off = 0;
  size_t axis = 0;
  for (int64_t i : idx) {
    if (i < 0 || i >= s[axis])
      throw std::out_of_range("Tensor::offset: index " + std::to_string(i) + " on axis " +
                              std::to_string(axis) + " of " + shape_str(s));
    off = off * s[axis] + i;
    ++axis;
  }
  return off;
}

bool Tensor::has_grad() const { return !ref().grad.empty(); }

double* Tensor::grad() {
  Impl& im = ref();
  if (im.grad.empty()) im.grad.assign(im.data.size(), 0.0);
  return im.grad.data();
}

const double* Tensor::grad_ptr() const {
  const Impl& im = ref();
  return im.grad.empty() ? nullptr : im.grad.data();
}

std::span<double> Tensor::grad_values() {
  grad();
  return {ref().grad.data(), ref().grad.size()};
}

void Tensor::zero_grad() {
  Impl& im = ref();
  if (!im.grad.empty()) im.grad.assign(im.data.size(), 0.0);
}

Tensor Tensor::clone() const {
  Tensor t(ref().shape);
  t.ref().data = ref().data;
  t.ref().name = ref().name;
  return t;
}

Tensor Tensor::grad_snapshot() const {
  Tensor t(ref().shape);
  if (!ref().grad.empty()) t.ref().data = ref().grad;
  return t;
}

const std::string& Tensor::name() const { return ref().name; }

Tensor& Tensor::set_name(std::string name) {
  ref().name = std::move(name);
  return *this;
}

}  // namespace t3conv
