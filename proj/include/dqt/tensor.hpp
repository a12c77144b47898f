#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace dqt {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major tensor of 64-bit reals.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  void fill(double v);
  /// Same element count, new extents.
  void reshape(Shape shape);
  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// A learnable tensor plus its gradient and AdamW moments. `grad`, `m` and `v`
/// stay empty until first needed, so a target copy never carries optimizer state.
struct Parameter {
  std::string name;
  std::string component;  // grouping for gradient-norm diagnostics
  Tensor value;
  Tensor grad;
  Tensor m;
  Tensor v;

  Tensor& ensure_grad();
  bool has_optimizer_state() const { return !m.empty() || !v.empty(); }
};

class ParamSet {
 public:
  Parameter& add(std::string name, std::string component, Shape shape);

  std::size_t count() const { return params_.size(); }
  std::size_t total_size() const;

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  /// Distinct component labels in registration order.
  std::vector<std::string> components() const;

  /// FNV-1a over names, shapes and value bytes.
  std::uint64_t checksum() const;
  /// Copy without gradients or optimizer state.
  ParamSet clone_values() const;
  bool same_layout(const ParamSet& other) const;

  std::int64_t step = 0;  // optimizer steps taken

 private:
  std::vector<Parameter> params_;
};

}  // namespace dqt
