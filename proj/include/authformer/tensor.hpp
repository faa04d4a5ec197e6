#pragma once

// Dense row-major tensors with tape-based reverse-mode differentiation.
//
// A Tensor is a shared handle: copying it aliases the same storage, which is
// what lets parameter stores, optimizers and model views all see one buffer.
// Operations never write to their inputs; they return fresh tensors.
//
// Gradients are recorded only while a Tape is active on the calling thread
// (see TapeScope) and at least one input requires a gradient. Outside a
// scope every operation is a plain forward computation.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace authformer {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until a backward pass reaches this node
  bool requires_grad = false;

  std::vector<T>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

}  // namespace detail

template <typename T>
class Tensor {
 public:
  using value_type = T;
  using Node = detail::TensorNode<T>;

  Tensor();
  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor scalar(T value);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<const T> data() const { return node_->data; }
  /// Direct write access, for initializers and optimizers. Not recorded.
  std::span<T> mutable_data() { return node_->data; }

  T item() const;
  T at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool value);

  bool has_grad() const { return !node_->grad.empty(); }
  /// Empty span when no gradient has been accumulated.
  std::span<const T> grad() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  /// Untracked deep copy.
  Tensor detach() const;

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

/// Ordered record of primitive applications. One tape belongs to one thread.
template <typename T>
class Tape {
 public:
  using Node = detail::TensorNode<T>;

  struct Entry {
    std::string_view op;
    std::vector<std::shared_ptr<Node>> inputs;
    std::shared_ptr<Node> output;
    std::function<void()> backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(Entry entry) { entries_.push_back(std::move(entry)); }

  /// Seeds d(loss)/d(loss) = 1 and replays entries newest-first. Gradients
  /// accumulate into every reachable node that requires them.
  void backward(const Tensor<T>& loss);

  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }
  void clear() { entries_.clear(); }

  /// Tape active on the calling thread, or nullptr.
  static Tape* current();

 private:
  template <typename>
  friend class TapeScope;
  static Tape*& slot();

  std::vector<Entry> entries_;
};

/// Makes a tape current on this thread for the scope's lifetime.
template <typename T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>& tape) : previous_(Tape<T>::slot()) { Tape<T>::slot() = &tape; }
  ~TapeScope() { Tape<T>::slot() = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* previous_;
};

/// Convenience wrapper: tape + scope + backward in one call.
template <typename T>
void backward(const Tensor<T>& loss);

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace authformer
