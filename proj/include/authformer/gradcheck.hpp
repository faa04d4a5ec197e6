#pragma once

#include <functional>
#include <vector>

#include "authformer/tensor.hpp"

namespace authformer {

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|)
/// for the gradient of the scalar `f()` with respect to every tensor in `wrt`.
/// `f` must be deterministic and must read the tensors in `wrt` (it is
/// re-evaluated with their data perturbed in place, then restored).
template <typename T>
double finite_diff_check(const std::function<Tensor<T>()>& f, std::vector<Tensor<T>> wrt, T h = T(1e-5));

/// Single-input form: f receives x.
template <typename T>
double finite_diff_check(const std::function<Tensor<T>(const Tensor<T>&)>& f, Tensor<T> x, T h = T(1e-5));

}  // namespace authformer
