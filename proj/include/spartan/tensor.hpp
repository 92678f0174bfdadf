#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "spartan/error.hpp"

namespace spartan {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

template <class T>
struct dtype_of;
template <>
struct dtype_of<float> {
  static constexpr DType value = DType::f32;
};
template <>
struct dtype_of<double> {
  static constexpr DType value = DType::f64;
};

const char* dtype_name(DType dtype);

// Whether newly created op results record a backward node. Thread-local, so
// each thread owns its own tape.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <class T>
class Tensor;

// One recorded op on the tape. `apply` receives the gradient of the op's
// output together with the output values, and accumulates into the inputs.
template <class T>
struct Node {
  using BackwardFn =
      std::function<void(std::span<const T> grad_out, std::span<const T> out)>;

  std::string op;
  std::vector<Tensor<T>> inputs;
  BackwardFn apply;
};

template <class T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  std::shared_ptr<Node<T>> grad_fn;
};

/// Dense row-major tensor with shared handle semantics.
///
/// Copying a Tensor copies the handle, not the storage. Values produced by
/// ops are never mutated afterwards; only leaves (parameters, buffers) are
/// updated in place through mutable_data().
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0});
  Tensor(Shape shape, std::vector<T> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), T{0}); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), T{1}); }
  static Tensor full(Shape shape, T value) { return Tensor(std::move(shape), value); }

  bool defined() const { return static_cast<bool>(impl_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t i) const;
  std::size_t numel() const;
  static constexpr DType dtype() { return dtype_of<T>::value; }

  std::span<const T> data() const;
  std::span<T> mutable_data();
  const T* ptr() const { return data().data(); }

  T item() const;
  // Rank-4 accessor (n, c, h, w).
  T at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool value);
  bool is_leaf() const;

  bool has_grad() const;
  std::span<const T> grad() const;
  Tensor grad_tensor() const;
  void zero_grad();

  /// Reverse-mode sweep from this scalar. Gradients accumulate on leaves.
  void backward() const;

  /// Copy of the values with no tape history.
  Tensor detach() const;

  TensorImpl<T>* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl<T>>& impl_ptr() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl<T>> impl_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

namespace detail {

// Builds an op result. A backward node is attached only when grad mode is on
// and at least one input requires grad.
template <class T>
Tensor<T> make_result(Shape shape, std::vector<T> data, std::string op,
                      std::vector<Tensor<T>> inputs,
                      typename Node<T>::BackwardFn backward);

// Gradient buffer of `t`, allocated as zeros on first use.
template <class T>
std::span<T> grad_buffer(const Tensor<T>& t);

}  // namespace detail

}  // namespace spartan
