#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace t3conv {

using Shape = std::vector<int64_t>;

int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major f64 tensor with shared storage: copying a Tensor aliases
// the same buffer, clone() makes an independent one. The gradient buffer is
// allocated on demand, always matches the data shape, and accumulates (+=)
// across backward passes until zero_grad().
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);  // zero-filled
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  // Rejects non-finite values; use this for parameters and external inputs.
  static Tensor from_vector(Shape shape, std::vector<double> values);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int64_t ndim() const;
  int64_t size() const;
  int64_t extent(int64_t axis) const;

  double* data();
  const double* data() const;
  std::span<double> values();
  std::span<const double> values() const;

  double& operator[](int64_t i) { return data()[i]; }
  double operator[](int64_t i) const { return data()[i]; }
  int64_t offset(std::initializer_list<int64_t> idx) const;
  double& at(std::initializer_list<int64_t> idx) { return data()[offset(idx)]; }
  double at(std::initializer_list<int64_t> idx) const { return data()[offset(idx)]; }

  bool has_grad() const;
  double* grad();                    // allocates zeros on first use
  const double* grad_ptr() const;    // nullptr until allocated
  std::span<double> grad_values();
  void zero_grad();

  Tensor clone() const;          // copies data, drops grad
  Tensor grad_snapshot() const;  // current grad as a fresh Tensor (zeros if unset)

  const std::string& name() const;
  Tensor& set_name(std::string name);

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until requested
    std::string name;
  };
  std::shared_ptr<Impl> impl_;
  Impl& ref();
  const Impl& ref() const;
};

bool all_finite(std::span<const double> values);

}  // namespace t3conv
