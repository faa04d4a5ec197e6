#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "authformer/rng.hpp"
#include "authformer/tensor.hpp"

namespace authformer::testing {

template <typename T = double>
Tensor<T> random_tensor(Shape shape, Rng& rng, double stddev = 1.0) {
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(stddev * rng.normal());
  return Tensor<T>(std::move(shape), std::move(v));
}

template <typename T>
std::vector<T> values(const Tensor<T>& t) {
  return {t.data().begin(), t.data().end()};
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.numel(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i])));
  return worst;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& stem) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / (stem + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace authformer::testing
