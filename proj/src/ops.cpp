#include "authformer/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "authformer/error.hpp"

namespace authformer {
namespace {

template <typename T>
using NodePtr = std::shared_ptr<detail::TensorNode<T>>;

template <typename T>
bool tracking(std::initializer_list<const Tensor<T>*> inputs) {
  if (Tape<T>::current() == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor<T>* t) { return t->requires_grad(); });
}

/// Marks `out` as tracked and records `rule` on the current tape.
template <typename T, typename Rule>
void record(std::string_view op, Tensor<T>& out, std::vector<NodePtr<T>> inputs, Rule rule) {
  out.set_requires_grad(true);
  Tape<T>::current()->record({op, std::move(inputs), out.node(), std::function<void()>(std::move(rule))});
}

// C += op(A) op(B) for row-major operands; op is an optional transpose.
// A is m x k (or k x m when trans_a), B is k x n (or n x k when trans_b).
template <typename T>
void gemm_acc(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b,
              T* c) {
  if (!trans_a && !trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      T* crow = c + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const T av = a[i * k + p];
        const T* brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else if (!trans_a && trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      const T* arow = a + i * k;
      for (std::size_t j = 0; j < n; ++j) {
        const T* brow = b + j * k;
        T acc = 0;
        for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
        c[i * n + j] += acc;
      }
    }
  } else if (trans_a && !trans_b) {
    for (std::size_t p = 0; p < k; ++p) {
      const T* arow = a + p * m;
      const T* brow = b + p * n;
      for (std::size_t i = 0; i < m; ++i) {
        const T av = arow[i];
        T* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        T acc = 0;
        for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[j * k + p];
        c[i * n + j] += acc;
      }
  }
}

struct AxisSplit {
  std::size_t outer;
  std::size_t length;
  std::size_t inner;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(shape));
  }
  AxisSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

bool is_suffix(const Shape& big, const Shape& small) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

template <typename T>
void require_suffix(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (!is_suffix(a.shape(), b.shape())) {
    throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(b.shape()) + " onto " +
                     shape_str(a.shape()));
  }
}

template <typename T>
T sigmoid_scalar(T x) {
  if (x >= 0) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

/// Elementwise op whose derivative is a function of input and output.
template <typename T, typename Fwd, typename Deriv>
Tensor<T> elementwise(std::string_view name, const Tensor<T>& x, Fwd fwd, Deriv deriv) {
  std::vector<T> out(x.numel());
  const auto xs = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xs[i]);
  Tensor<T> y(x.shape(), std::move(out));
  if (tracking({&x})) {
    auto xn = x.node();
    auto yn = y.node();
    record(name, y, {xn}, [xn, yn, deriv] {
      if (!xn->requires_grad) return;
      auto& gx = xn->ensure_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += yn->grad[i] * deriv(xn->data[i], yn->data[i]);
    });
  }
  return y;
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() < 2 || b.rank() < 2) {
    throw ShapeError("matmul needs rank >= 2 operands, got " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const std::size_t m = a.dim(a.rank() - 2);
  const std::size_t k = a.dim(a.rank() - 1);
  const std::size_t kb = b.dim(b.rank() - 2);
  const std::size_t n = b.dim(b.rank() - 1);
  const bool shared_rhs = b.rank() == 2;
  const Shape a_batch(a.shape().begin(), a.shape().end() - 2);
  const Shape b_batch(b.shape().begin(), b.shape().end() - 2);
  if (k != kb || (!shared_rhs && a_batch != b_batch)) {
    throw ShapeError("matmul shape mismatch: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t batch = shape_numel(a_batch);
  Shape out_shape = a_batch;
  out_shape.push_back(m);
  out_shape.push_back(n);
  std::vector<T> out(batch * m * n, T(0));
  if (shared_rhs) {
    gemm_acc(false, false, batch * m, n, k, a.data().data(), b.data().data(), out.data());
  } else {
    for (std::size_t i = 0; i < batch; ++i)
      gemm_acc(false, false, m, n, k, a.data().data() + i * m * k, b.data().data() + i * k * n,
               out.data() + i * m * n);
  }
  Tensor<T> y(std::move(out_shape), std::move(out));
  if (tracking({&a, &b})) {
    auto an = a.node(), bn = b.node(), yn = y.node();
    record("matmul", y, {an, bn}, [=] {
      const T* g = yn->grad.data();
      if (an->requires_grad) {
        T* ga = an->ensure_grad().data();
        if (shared_rhs) {
          gemm_acc(false, true, batch * m, k, n, g, bn->data.data(), ga);
        } else {
          for (std::size_t i = 0; i < batch; ++i)
            gemm_acc(false, true, m, k, n, g + i * m * n, bn->data.data() + i * k * n, ga + i * m * k);
        }
      }
      if (bn->requires_grad) {
        T* gb = bn->ensure_grad().data();
        if (shared_rhs) {
          gemm_acc(true, false, k, n, batch * m, an->data.data(), g, gb);
        } else {
          for (std::size_t i = 0; i < batch; ++i)
            gemm_acc(true, false, k, n, m, an->data.data() + i * m * k, g + i * m * n, gb + i * k * n);
        }
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  if (x.rank() < 2) throw ShapeError("transpose needs rank >= 2, got " + shape_str(x.shape()));
  const std::size_t r = x.dim(x.rank() - 2);
  const std::size_t c = x.dim(x.rank() - 1);
  const std::size_t batch = x.numel() / (r * c);
  Shape out_shape = x.shape();
  std::swap(out_shape[out_shape.size() - 2], out_shape[out_shape.size() - 1]);
  std::vector<T> out(x.numel());
  const auto xs = x.data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out[b * r * c + j * r + i] = xs[b * r * c + i * c + j];
  Tensor<T> y(std::move(out_shape), std::move(out));
  if (tracking({&x})) {
    auto xn = x.node(), yn = y.node();
    record("transpose", y, {xn}, [=] {
      if (!xn->requires_grad) return;
      auto& gx = xn->ensure_grad();
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gx[b * r * c + i * c + j] += yn->grad[b * r * c + j * r + i];
    });
  }
  return y;
}

template <typename T>
Tensor<T> affine(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (weight.rank() != 2 || bias.rank() != 1 || bias.dim(0) != weight.dim(1)) {
    throw ShapeError("affine: weight " + shape_str(weight.shape()) + " and bias " + shape_str(bias.shape()) +
                     " are inconsistent");
  }
  return add(matmul(x, weight), bias);
}

namespace {

template <typename T, typename Combine, typename GradA, typename GradB>
Tensor<T> broadcast_binary(std::string_view name, const Tensor<T>& a, const Tensor<T>& b, Combine combine,
                           GradA grad_a, GradB grad_b) {
  require_suffix(name.data(), a, b);
  const std::size_t nb = b.numel();
  std::vector<T> out(a.numel());
  const auto as = a.data();
  const auto bs = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = combine(as[i], bs[i % nb]);
  Tensor<T> y(a.shape(), std::move(out));
  if (tracking({&a, &b})) {
    auto an = a.node(), bn = b.node(), yn = y.node();
    record(name, y, {an, bn}, [=] {
      const auto& g = yn->grad;
      if (an->requires_grad) {
        auto& ga = an->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += grad_a(g[i], an->data[i], bn->data[i % nb]);
      }
      if (bn->requires_grad) {
        auto& gb = bn->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i % nb] += grad_b(g[i], an->data[i], bn->data[i % nb]);
      }
    });
  }
  return y;
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return broadcast_binary<T>(
      "add", a, b, [](T x, T y) { return x + y; }, [](T g, T, T) { return g; }, [](T g, T, T) { return g; });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return broadcast_binary<T>(
      "sub", a, b, [](T x, T y) { return x - y; }, [](T g, T, T) { return g; }, [](T g, T, T) { return -g; });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return broadcast_binary<T>(
      "mul", a, b, [](T x, T y) { return x * y; }, [](T g, T, T y) { return g * y; },
      [](T g, T x, T) { return g * x; });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  return elementwise<T>("scale", x, [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return elementwise<T>("sigmoid", x, [](T v) { return sigmoid_scalar(v); },
                        [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return elementwise<T>("relu", x, [](T v) { return v < T(0) ? T(0) : v; },
                        [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  constexpr T inv_sqrt_2pi = std::numbers::inv_sqrtpi_v<T> * inv_sqrt2;
  return elementwise<T>(
      "gelu", x, [](T v) { return T(0.5) * v * (T(1) + std::erf(v * inv_sqrt2)); },
      [](T v, T) {
        const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
        return cdf + v * inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
      });
}

template <typename T>
Tensor<T> map_unary(const Tensor<T>& x, std::function<T(T)> fn, std::function<T(T)> derivative) {
  return elementwise<T>("map_unary", x, [fn](T v) { return fn(v); },
                        [derivative](T v, T) { return derivative(v); });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  const auto s = split_at(x.shape(), axis);
  std::vector<T> out(x.numel());
  const auto xs = x.data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.length * s.inner + in;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t l = 0; l < s.length; ++l) mx = std::max(mx, xs[base + l * s.inner]);
      T total = 0;
      for (std::size_t l = 0; l < s.length; ++l) {
        const T e = std::exp(xs[base + l * s.inner] - mx);
        out[base + l * s.inner] = e;
        total += e;
      }
      for (std::size_t l = 0; l < s.length; ++l) out[base + l * s.inner] /= total;
    }
  Tensor<T> y(x.shape(), std::move(out));
  if (tracking({&x})) {
    auto xn = x.node(), yn = y.node();
    record("softmax", y, {xn}, [=] {
      if (!xn->requires_grad) return;
      auto& gx = xn->ensure_grad();
      const auto& g = yn->grad;
      const auto& ys = yn->data;
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t in = 0; in < s.inner; ++in) {
          const std::size_t base = o * s.length * s.inner + in;
          T dot = 0;
          for (std::size_t l = 0; l < s.length; ++l) dot += g[base + l * s.inner] * ys[base + l * s.inner];
          for (std::size_t l = 0; l < s.length; ++l) {
            const std::size_t i = base + l * s.inner;
            gx[i] += ys[i] * (g[i] - dot);
          }
        }
    });
  }
  return y;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  if (x.rank() == 0) throw ShapeError("layer_norm needs a normalization axis");
  const std::size_t d = x.dim(x.rank() - 1);
  if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) {
    throw ShapeError("layer_norm: gamma " + shape_str(gamma.shape()) + " / beta " + shape_str(beta.shape()) +
                     " do not match last dim of " + shape_str(x.shape()));
  }
  const std::size_t rows = x.numel() / d;
  const auto xs = x.data();
  const auto gs = gamma.data();
  const auto bs = beta.data();
  std::vector<T> out(x.numel());
  std::vector<T> xhat(x.numel());
  std::vector<T> rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = xs.data() + r * d;
    T mean = 0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= T(d);
    T var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= T(d);
    rstd[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (row[j] - mean) * rstd[r];
      xhat[r * d + j] = h;
      out[r * d + j] = h * gs[j] + bs[j];
    }
  }
  Tensor<T> y(x.shape(), std::move(out));
  if (tracking({&x, &gamma, &beta})) {
    auto xn = x.node(), gn = gamma.node(), bn = beta.node(), yn = y.node();
    record("layer_norm", y, {xn, gn, bn}, [=, xhat = std::move(xhat), rstd = std::move(rstd)] {
      const auto& g = yn->grad;
      if (gn->requires_grad) {
        auto& gg = gn->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) gg[i % d] += g[i] * xhat[i];
      }
      if (bn->requires_grad) {
        auto& gb = bn->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i % d] += g[i];
      }
      if (xn->requires_grad) {
        auto& gx = xn->ensure_grad();
        std::vector<T> dh(d);
        for (std::size_t r = 0; r < rows; ++r) {
          T mean_dh = 0;
          T mean_dh_h = 0;
          for (std::size_t j = 0; j < d; ++j) {
            dh[j] = g[r * d + j] * gn->data[j];
            mean_dh += dh[j];
            mean_dh_h += dh[j] * xhat[r * d + j];
          }
          mean_dh /= T(d);
          mean_dh_h /= T(d);
          for (std::size_t j = 0; j < d; ++j)
            gx[r * d + j] += rstd[r] * (dh[j] - mean_dh - xhat[r * d + j] * mean_dh_h);
        }
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> conv1d_causal(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                        std::size_t dilation) {
  if (dilation < 1) throw ShapeError("conv1d_causal: dilation must be >= 1");
  if (x.rank() != 2 || weight.rank() != 3) {
    throw ShapeError("conv1d_causal expects x [T,C_in] and weight [K,C_in,C_out], got " + shape_str(x.shape()) +
                     " and " + shape_str(weight.shape()));
  }
  const std::size_t steps = x.dim(0);
  const std::size_t cin = x.dim(1);
  const std::size_t taps = weight.dim(0);
  const std::size_t cout = weight.dim(2);
  if (weight.dim(1) != cin || bias.shape() != Shape{cout}) {
    throw ShapeError("conv1d_causal: x " + shape_str(x.shape()) + ", weight " + shape_str(weight.shape()) +
                     ", bias " + shape_str(bias.shape()) + " are inconsistent");
  }
  const auto xs = x.data();
  const auto ws = weight.data();
  const auto bs = bias.data();
  std::vector<T> out(steps * cout);
  for (std::size_t t = 0; t < steps; ++t) {
    T* orow = out.data() + t * cout;
    for (std::size_t o = 0; o < cout; ++o) orow[o] = bs[o];
    for (std::size_t k = 0; k < taps; ++k) {
      const std::size_t back = (taps - 1 - k) * dilation;
      if (back > t) continue;
      const T* xrow = xs.data() + (t - back) * cin;
      const T* wk = ws.data() + k * cin * cout;
      for (std::size_t c = 0; c < cin; ++c) {
        const T xv = xrow[c];
        const T* wrow = wk + c * cout;
        for (std::size_t o = 0; o < cout; ++o) orow[o] += xv * wrow[o];
      }
    }
  }
  Tensor<T> y(Shape{steps, cout}, std::move(out));
  if (tracking({&x, &weight, &bias})) {
    auto xn = x.node(), wn = weight.node(), bn = bias.node(), yn = y.node();
    record("conv1d_causal", y, {xn, wn, bn}, [=] {
      const auto& g = yn->grad;
      if (bn->requires_grad) {
        auto& gb = bn->ensure_grad();
        for (std::size_t t = 0; t < steps; ++t)
          for (std::size_t o = 0; o < cout; ++o) gb[o] += g[t * cout + o];
      }
      T* gx = xn->requires_grad ? xn->ensure_grad().data() : nullptr;
      T* gw = wn->requires_grad ? wn->ensure_grad().data() : nullptr;
      for (std::size_t t = 0; t < steps; ++t) {
        const T* grow = g.data() + t * cout;
        for (std::size_t k = 0; k < taps; ++k) {
          const std::size_t back = (taps - 1 - k) * dilation;
          if (back > t) continue;
          const std::size_t src = t - back;
          for (std::size_t c = 0; c < cin; ++c) {
            const std::size_t widx = (k * cin + c) * cout;
            if (gx) {
              T acc = 0;
              for (std::size_t o = 0; o < cout; ++o) acc += grow[o] * wn->data[widx + o];
              gx[src * cin + c] += acc;
            }
            if (gw) {
              const T xv = xn->data[src * cin + c];
              for (std::size_t o = 0; o < cout; ++o) gw[widx + o] += xv * grow[o];
            }
          }
        }
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape) + " changes element count");
  }
  Tensor<T> y(std::move(shape), std::vector<T>(x.data().begin(), x.data().end()));
  if (tracking({&x})) {
    auto xn = x.node(), yn = y.node();
    record("reshape", y, {xn}, [=] {
      if (!xn->requires_grad) return;
      auto& gx = xn->ensure_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += yn->grad[i];
    });
  }
  return y;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length) {
  const auto s = split_at(x.shape(), axis);
  if (length == 0 || start + length > s.length) {
    throw ShapeError("slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") out of range on axis " + std::to_string(axis) + " of " + shape_str(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  std::vector<T> out(s.outer * length * s.inner);
  const auto xs = x.data();
  for (std::size_t o = 0; o < s.outer; ++o)
    std::copy_n(xs.data() + (o * s.length + start) * s.inner, length * s.inner, out.data() + o * length * s.inner);
  Tensor<T> y(std::move(out_shape), std::move(out));
  if (tracking({&x})) {
    auto xn = x.node(), yn = y.node();
    record("slice", y, {xn}, [=] {
      if (!xn->requires_grad) return;
      auto& gx = xn->ensure_grad();
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t i = 0; i < length * s.inner; ++i)
          gx[(o * s.length + start) * s.inner + i] += yn->grad[o * length * s.inner + i];
    });
  }
  return y;
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, std::size_t axis) {
  if (xs.empty()) throw ShapeError("concat of zero tensors");
  const Shape& ref = xs.front().shape();
  split_at(ref, axis);
  std::vector<std::size_t> lengths;
  std::size_t total = 0;
  for (const auto& t : xs) {
    Shape a = t.shape(), b = ref;
    if (a.size() != b.size()) throw ShapeError("concat rank mismatch: " + shape_str(a) + " vs " + shape_str(b));
    a[axis] = b[axis] = 0;
    if (a != b) throw ShapeError("concat shape mismatch: " + shape_str(t.shape()) + " vs " + shape_str(ref));
    lengths.push_back(t.dim(axis));
    total += t.dim(axis);
  }
  Shape out_shape = ref;
  out_shape[axis] = total;
  const auto s = split_at(out_shape, axis);
  std::vector<T> out(shape_numel(out_shape));
  std::size_t offset = 0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    const auto src = xs[t].data();
    for (std::size_t o = 0; o < s.outer; ++o)
      std::copy_n(src.data() + o * lengths[t] * s.inner, lengths[t] * s.inner,
                  out.data() + (o * total + offset) * s.inner);
    offset += lengths[t];
  }
  Tensor<T> y(std::move(out_shape), std::move(out));
  bool any = false;
  for (const auto& t : xs) any = any || t.requires_grad();
  if (any && Tape<T>::current() != nullptr) {
    std::vector<NodePtr<T>> nodes;
    for (const auto& t : xs) nodes.push_back(t.node());
    auto yn = y.node();
    record("concat", y, nodes, [=] {
      std::size_t off = 0;
      for (std::size_t t = 0; t < nodes.size(); ++t) {
        if (nodes[t]->requires_grad) {
          auto& g = nodes[t]->ensure_grad();
          for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t i = 0; i < lengths[t] * s.inner; ++i)
              g[o * lengths[t] * s.inner + i] += yn->grad[(o * total + off) * s.inner + i];
        }
        off += lengths[t];
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> mean_pool(const Tensor<T>& x, std::size_t axis) {
  const auto s = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  std::vector<T> out(s.outer * s.inner, T(0));
  const auto xs = x.data();
  const T inv = T(1) / T(s.length);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t l = 0; l < s.length; ++l)
      for (std::size_t in = 0; in < s.inner; ++in)
        out[o * s.inner + in] += xs[(o * s.length + l) * s.inner + in];
  for (auto& v : out) v *= inv;
  Tensor<T> y(std::move(out_shape), std::move(out));
  if (tracking({&x})) {
    auto xn = x.node(), yn = y.node();
    record("mean_pool", y, {xn}, [=] {
      if (!xn->requires_grad) return;
      auto& gx = xn->ensure_grad();
      for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t l = 0; l < s.length; ++l)
          for (std::size_t in = 0; in < s.inner; ++in)
            gx[(o * s.length + l) * s.inner + in] += yn->grad[o * s.inner + in] * inv;
    });
  }
  return y;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T total = 0;
  for (T v : x.data()) total += v;
  Tensor<T> y(Shape{}, std::vector<T>{total});
  if (tracking({&x})) {
    auto xn = x.node(), yn = y.node();
    record("sum", y, {xn}, [=] {
      if (!xn->requires_grad) return;
      auto& gx = xn->ensure_grad();
      for (auto& g : gx) g += yn->grad[0];
    });
  }
  return y;
}

template <typename T>
Tensor<T> cross_entropy_loss(const Tensor<T>& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 2) throw ShapeError("cross_entropy_loss expects [B,C] logits, got " + shape_str(logits.shape()));
  const std::size_t batch = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  if (labels.size() != batch) {
    throw ValidationError("cross_entropy_loss: " + std::to_string(labels.size()) + " labels for batch of " +
                          std::to_string(batch));
  }
  for (auto l : labels) {
    if (l >= classes) {
      throw ValidationError("cross_entropy_loss: label " + std::to_string(l) + " outside [0, " +
                            std::to_string(classes) + ")");
    }
  }
  const auto xs = logits.data();
  std::vector<T> probs(xs.size());
  T loss = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    const T* row = xs.data() + b * classes;
    const T mx = *std::max_element(row, row + classes);
    T total = 0;
    for (std::size_t c = 0; c < classes; ++c) total += std::exp(row[c] - mx);
    const T lse = mx + std::log(total);
    loss += lse - row[labels[b]];
    for (std::size_t c = 0; c < classes; ++c) probs[b * classes + c] = std::exp(row[c] - lse);
  }
  Tensor<T> y(Shape{}, std::vector<T>{loss / T(batch)});
  if (tracking({&logits})) {
    auto xn = logits.node(), yn = y.node();
    std::vector<std::size_t> label_copy(labels.begin(), labels.end());
    record("cross_entropy", y, {xn}, [=, probs = std::move(probs)] {
      if (!xn->requires_grad) return;
      auto& gx = xn->ensure_grad();
      const T g = yn->grad[0] / T(batch);
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < classes; ++c) {
          const T target = c == label_copy[b] ? T(1) : T(0);
          gx[b * classes + c] += g * (probs[b * classes + c] - target);
        }
    });
  }
  return y;
}

#define AUTHFORMER_INSTANTIATE_OPS(T)                                                                  \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> transpose(const Tensor<T>&);                                                      \
  template Tensor<T> affine(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> scale(const Tensor<T>&, T);                                                       \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                        \
  template Tensor<T> relu(const Tensor<T>&);                                                           \
  template Tensor<T> gelu(const Tensor<T>&);                                                           \
  template Tensor<T> map_unary(const Tensor<T>&, std::function<T(T)>, std::function<T(T)>);            \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                                           \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);              \
  template Tensor<T> conv1d_causal(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t); \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                                 \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);                   \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                               \
  template Tensor<T> mean_pool(const Tensor<T>&, std::size_t);                                         \
  template Tensor<T> sum(const Tensor<T>&);                                                            \
  template Tensor<T> cross_entropy_loss(const Tensor<T>&, std::span<const std::size_t>);

AUTHFORMER_INSTANTIATE_OPS(float)
AUTHFORMER_INSTANTIATE_OPS(double)

#undef AUTHFORMER_INSTANTIATE_OPS

}  // namespace authformer
