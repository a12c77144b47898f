#include "dqt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

#include "dqt/error.hpp"

namespace dqt {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != shape_size(shape_)) {
    throw ShapeError("tensor of shape " + shape_string(shape_) + " given " + std::to_string(data_.size()) +
                     " values");
  }
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::reshape(Shape shape) {
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  shape_ = std::move(shape);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

Tensor& Parameter::ensure_grad() {
  if (grad.size() != value.size()) grad = Tensor(value.shape());
  return grad;
}

Parameter& ParamSet::add(std::string name, std::string component, Shape shape) {
  for (const auto& p : params_) {
    if (p.name == name) throw std::invalid_argument("duplicate parameter " + name);
  }
  Parameter p;
  p.name = std::move(name);
  p.component = std::move(component);
  p.value = Tensor(std::move(shape));
  params_.push_back(std::move(p));
  return params_.back();
}

std::size_t ParamSet::total_size() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

Parameter& ParamSet::get(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw std::out_of_range("no parameter named " + name);
}

const Parameter& ParamSet::get(const std::string& name) const {
  return const_cast<ParamSet*>(this)->get(name);
}

void ParamSet::zero_grad() {
  for (auto& p : params_) {
    if (!p.grad.empty()) p.grad.fill(0.0);
  }
}

std::vector<std::string> ParamSet::components() const {
  std::vector<std::string> out;
  for (const auto& p : params_) {
    if (std::find(out.begin(), out.end(), p.component) == out.end()) out.push_back(p.component);
  }
  return out;
}

std::uint64_t ParamSet::checksum() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& p : params_) {
    mix(p.name.data(), p.name.size());
    for (auto d : p.value.shape()) mix(&d, sizeof d);
    mix(p.value.data(), p.value.size() * sizeof(double));
  }
  return h;
}

ParamSet ParamSet::clone_values() const {
  ParamSet out;
  for (const auto& p : params_) {
    auto& q = out.add(p.name, p.component, p.value.shape());
    q.value = p.value;
  }
  return out;
}

bool ParamSet::same_layout(const ParamSet& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name != other.params_[i].name || params_[i].value.shape() != other.params_[i].value.shape()) {
      return false;
    }
  }
  return true;
}

}  // namespace dqt
