#include "spartan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace spartan {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

const char* dtype_name(DType dtype) {
  switch (dtype) {
    case DType::f32:
      return "f32";
    case DType::f64:
      return "f64";
  }
  return "?";
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <class T>
Tensor<T>::Tensor(Shape shape, T fill) : impl_(std::make_shared<TensorImpl<T>>()) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  }
  impl_->data.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
}

template <class T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : impl_(std::make_shared<TensorImpl<T>>()) {
  for (auto d : shape) {
    if (d == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("shape " + shape_str(shape) + " holds " + std::to_string(shape_numel(shape)) +
                     " values, got " + std::to_string(data.size()));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
}

template <class T>
const Shape& Tensor<T>::shape() const {
  static const Shape empty;
  return impl_ ? impl_->shape : empty;
}

template <class T>
std::size_t Tensor<T>::dim(std::size_t i) const {
  if (i >= rank()) {
    throw ShapeError("dim " + std::to_string(i) + " out of range for shape " + shape_str(shape()));
  }
  return impl_->shape[i];
}

template <class T>
std::size_t Tensor<T>::numel() const {
  return impl_ ? impl_->data.size() : 0;
}

template <class T>
std::span<const T> Tensor<T>::data() const {
  if (!impl_) return {};
  return impl_->data;
}

template <class T>
std::span<T> Tensor<T>::mutable_data() {
  if (!impl_) return {};
  return impl_->data;
}

template <class T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

template <class T>
T Tensor<T>::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
  const auto& s = shape();
  if (s.size() != 4) throw ShapeError("at(n,c,h,w) needs a rank-4 tensor");
  return impl_->data[((n * s[1] + c) * s[2] + h) * s[3] + w];
}

template <class T>
bool Tensor<T>::requires_grad() const {
  return impl_ && impl_->requires_grad;
}

template <class T>
Tensor<T>& Tensor<T>::set_requires_grad(bool value) {
  if (!impl_) throw ContractError("set_requires_grad on undefined tensor");
  if (impl_->grad_fn) throw ContractError("requires_grad can only be set on leaf tensors");
  impl_->requires_grad = value;
  return *this;
}

template <class T>
bool Tensor<T>::is_leaf() const {
  return impl_ && !impl_->grad_fn;
}

template <class T>
bool Tensor<T>::has_grad() const {
  return impl_ && !impl_->grad.empty();
}

template <class T>
std::span<const T> Tensor<T>::grad() const {
  if (!impl_) return {};
  return impl_->grad;
}

template <class T>
Tensor<T> Tensor<T>::grad_tensor() const {
  if (!has_grad()) throw ContractError("tensor has no gradient");
  return Tensor<T>(impl_->shape, impl_->grad);
}

template <class T>
void Tensor<T>::zero_grad() {
  if (impl_) impl_->grad.clear();
}

template <class T>
Tensor<T> Tensor<T>::detach() const {
  if (!impl_) return {};
  return Tensor<T>(impl_->shape, impl_->data);
}

template <class T>
void Tensor<T>::backward() const {
  if (!impl_) throw ContractError("backward on undefined tensor");
  if (numel() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " + shape_str(shape()));
  }
  if (!impl_->requires_grad) {
    throw ContractError("loss does not depend on any tensor that requires grad");
  }

  // Iterative post-order DFS; reversed it is a topological order of the DAG.
  std::vector<TensorImpl<T>*> order;
  std::unordered_set<TensorImpl<T>*> visited;
  std::vector<std::pair<TensorImpl<T>*, std::size_t>> stack;
  stack.emplace_back(impl_.get(), 0);
  visited.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    const auto* fn = node->grad_fn.get();
    if (fn && next < fn->inputs.size()) {
      TensorImpl<T>* child = fn->inputs[next++].impl();
      if (child && child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }

  // Interior gradients are scratch space for this sweep.
  for (auto* node : order) {
    if (node->grad_fn) node->grad.clear();
  }
  if (impl_->grad.empty()) impl_->grad.assign(1, T{0});
  impl_->grad[0] += T{1};

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl<T>* node = *it;
    if (!node->grad_fn || node->grad.empty()) continue;
    node->grad_fn->apply(node->grad, node->data);
    node->grad.clear();
    node->grad.shrink_to_fit();
  }
}

namespace detail {

template <class T>
Tensor<T> make_result(Shape shape, std::vector<T> data, std::string op,
                      std::vector<Tensor<T>> inputs, typename Node<T>::BackwardFn backward) {
  Tensor<T> out(std::move(shape), std::move(data));
#ifndef NDEBUG
  {
    auto finite = [](std::span<const T> v) {
      return std::all_of(v.begin(), v.end(), [](T x) { return std::isfinite(x); });
    };
    bool inputs_finite = true;
    for (const auto& in : inputs) inputs_finite = inputs_finite && finite(in.data());
    if (inputs_finite && !finite(out.data())) {
      throw NumericError("op '" + op + "' produced non-finite values from finite inputs");
    }
  }
#endif
  if (!grad_enabled()) return out;
  bool needs = false;
  for (const auto& in : inputs) needs = needs || in.requires_grad();
  if (!needs) return out;

  auto node = std::make_shared<Node<T>>();
  node->op = std::move(op);
  node->inputs = std::move(inputs);
  node->apply = std::move(backward);
  out.impl()->requires_grad = true;
  out.impl()->grad_fn = std::move(node);
  return out;
}

template <class T>
std::span<T> grad_buffer(const Tensor<T>& t) {
  auto* impl = t.impl();
  if (impl->grad.empty()) impl->grad.assign(impl->data.size(), T{0});
  return impl->grad;
}

template Tensor<float> make_result(Shape, std::vector<float>, std::string, std::vector<Tensor<float>>,
                                   Node<float>::BackwardFn);
template Tensor<double> make_result(Shape, std::vector<double>, std::string,
                                    std::vector<Tensor<double>>, Node<double>::BackwardFn);
template std::span<float> grad_buffer(const Tensor<float>&);
template std::span<double> grad_buffer(const Tensor<double>&);

}  // namespace detail

template class Tensor<float>;
template class Tensor<double>;

}  // namespace spartan
