#pragma once

// Differentiable primitives. Every function here is a pure function of its
// arguments and records a backward rule when a tape is active.
//
// Broadcasting is limited to the bias style: in add/sub/mul the right operand
// may have a shape equal to a trailing suffix of the left operand's shape.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "authformer/tensor.hpp"

namespace authformer {

// Linear algebra

/// [..., m, k] x [k, n] or [..., m, k] x [..., k, n] (equal batch dims).
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// Swaps the last two axes.
template <typename T>
Tensor<T> transpose(const Tensor<T>& x);

/// x W + b over the last axis; W is [in, out], b is [out].
template <typename T>
Tensor<T> affine(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

// Elementwise

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T>
Tensor<T> relu(const Tensor<T>& x);
/// Exact (erf) form.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

/// Elementwise map with a caller-supplied derivative. Used for one-off
/// functions and for fault-injection fixtures in the gradient checker.
template <typename T>
Tensor<T> map_unary(const Tensor<T>& x, std::function<T(T)> fn, std::function<T(T)> derivative);

// Normalization

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);

/// Normalizes over the last axis; gamma and beta are [last_dim].
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps = T(1e-5));

// Convolution

/// Causal dilated 1-D convolution over x [T, C_in] with weight [K, C_in, C_out]
/// and bias [C_out]. Left zero-padding of (K-1)*dilation keeps length T; tap
/// K-1 multiplies the current step, tap K-1-j multiplies step t - j*dilation.
template <typename T>
Tensor<T> conv1d_causal(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                        std::size_t dilation);

// Shape manipulation and reductions

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length);
template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, std::size_t axis);
template <typename T>
Tensor<T> mean_pool(const Tensor<T>& x, std::size_t axis);
template <typename T>
Tensor<T> sum(const Tensor<T>& x);

// Loss

/// Mean over the batch of -log softmax(logits)[label]; logits are [B, C].
template <typename T>
Tensor<T> cross_entropy_loss(const Tensor<T>& logits, std::span<const std::size_t> labels);

}  // namespace authformer
