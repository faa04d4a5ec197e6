#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "authformer/error.hpp"
#include "authformer/rng.hpp"
#include "authformer/tensor.hpp"

namespace authformer {

/// Named learnable tensors in registration order. Handles returned by get()
/// alias the stored tensors, so model views and optimizers share storage.
template <typename T>
class ParamStore {
 public:
  Tensor<T>& add(std::string name, Tensor<T> value) {
    if (index_.count(name)) throw ValidationError("parameter '" + name + "' registered twice");
    value.set_requires_grad(true);
    index_.emplace(name, entries_.size());
    entries_.emplace_back(std::move(name), std::move(value));
    return entries_.back().second;
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const Tensor<T>& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValidationError("no parameter named '" + name + "'");
    return entries_[it->second].second;
  }

  const std::vector<std::pair<std::string, Tensor<T>>>& entries() const { return entries_; }
  std::vector<std::pair<std::string, Tensor<T>>>& entries() { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::size_t element_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : entries_) n += t.numel();
    return n;
  }

  void zero_grad() {
    for (auto& [name, t] : entries_) t.zero_grad();
  }

 private:
  std::vector<std::pair<std::string, Tensor<T>>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace init {

/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename T>
Tensor<T> fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
  return Tensor<T>(std::move(shape), std::move(v));
}

template <typename T>
Tensor<T> normal(Shape shape, double stddev, Rng& rng) {
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(stddev * rng.normal());
  return Tensor<T>(std::move(shape), std::move(v));
}

}  // namespace init
}  // namespace authformer
