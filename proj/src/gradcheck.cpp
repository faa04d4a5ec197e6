#include "authformer/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "authformer/error.hpp"

namespace authformer {

template <typename T>
double finite_diff_check(const std::function<Tensor<T>()>& f, std::vector<Tensor<T>> wrt, T h) {
  std::vector<bool> saved_flags;
  for (auto& t : wrt) {
    saved_flags.push_back(t.requires_grad());
    t.set_requires_grad(true);
    t.zero_grad();
  }
  std::vector<std::vector<T>> analytic;
  {
    Tape<T> tape;
    TapeScope<T> scope(tape);
    const Tensor<T> loss = f();
    if (loss.numel() != 1) throw ContractError("finite_diff_check needs a scalar function");
    tape.backward(loss);
  }
  for (auto& t : wrt) {
    if (t.has_grad()) {
      analytic.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      analytic.emplace_back(t.numel(), T(0));
    }
  }

  double worst = 0.0;
  for (std::size_t w = 0; w < wrt.size(); ++w) {
    auto data = wrt[w].mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const T original = data[i];
      data[i] = original + h;
      const double plus = static_cast<double>(f().item());
      data[i] = original - h;
      const double minus = static_cast<double>(f().item());
      data[i] = original;
      const double numeric = (plus - minus) / (2.0 * static_cast<double>(h));
      const double a = static_cast<double>(analytic[w][i]);
      worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
    }
  }
  for (std::size_t w = 0; w < wrt.size(); ++w) {
    wrt[w].zero_grad();
    wrt[w].set_requires_grad(saved_flags[w]);
  }
  return worst;
}

template <typename T>
double finite_diff_check(const std::function<Tensor<T>(const Tensor<T>&)>& f, Tensor<T> x, T h) {
  return finite_diff_check<T>(std::function<Tensor<T>()>([&f, x] { return f(x); }), std::vector<Tensor<T>>{x}, h);
}

template double finite_diff_check(const std::function<Tensor<float>()>&, std::vector<Tensor<float>>, float);
template double finite_diff_check(const std::function<Tensor<double>()>&, std::vector<Tensor<double>>, double);
template double finite_diff_check(const std::function<Tensor<float>(const Tensor<float>&)>&, Tensor<float>, float);
template double finite_diff_check(const std::function<Tensor<double>(const Tensor<double>&)>&, Tensor<double>,
                                  double);

}  // namespace authformer
