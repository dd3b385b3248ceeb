#include "mrmnet/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

namespace mrmnet {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) throw ConfigError("negative extent in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

namespace {
std::atomic<bool> g_finite_checks{false};
}

void set_finite_checks(bool enabled) { g_finite_checks.store(enabled); }
bool finite_checks_enabled() { return g_finite_checks.load(); }

uint64_t derive_seed(uint64_t seed, uint64_t stream, uint64_t index) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1) + 0xbf58476d1ce4e5b9ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

template <typename T>
TensorT<T> TensorT<T>::zeros(Shape shape) {
  TensorT t;
  t.impl_ = std::make_shared<Impl>();
  int64_t n = shape_numel(shape);
  t.impl_->shape = std::move(shape);
  t.impl_->data.assign(static_cast<size_t>(n), T(0));
  return t;
}

template <typename T>
TensorT<T> TensorT<T>::full(Shape shape, T value) {
  TensorT t = zeros(std::move(shape));
  for (auto& v : t.impl_->data) v = value;
  return t;
}

template <typename T>
TensorT<T> TensorT<T>::from(Shape shape, std::vector<T> values) {
  if (shape_numel(shape) != static_cast<int64_t>(values.size()))
    throw ConfigError("value count " + std::to_string(values.size()) +
                      " does not match shape " + shape_str(shape));
  TensorT t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = std::move(shape);
  t.impl_->data = std::move(values);
  return t;
}

template <typename T>
TensorT<T> TensorT<T>::uniform(Shape shape, T lo, T hi, std::mt19937_64& rng) {
  TensorT t = zeros(std::move(shape));
  std::uniform_real_distribution<T> dist(lo, hi);
  for (auto& v : t.impl_->data) v = dist(rng);
  return t;
}

template <typename T>
TensorT<T> TensorT<T>::normal(Shape shape, T mean, T stddev, std::mt19937_64& rng) {
  TensorT t = zeros(std::move(shape));
  std::normal_distribution<T> dist(mean, stddev);
  for (auto& v : t.impl_->data) v = dist(rng);
  return t;
}

template <typename T>
T& TensorT<T>::at(int64_t i, int64_t j) {
  return impl().data[static_cast<size_t>(i * impl().shape[1] + j)];
}

template <typename T>
T TensorT<T>::at(int64_t i, int64_t j) const {
  return impl().data[static_cast<size_t>(i * impl().shape[1] + j)];
}

template <typename T>
T& TensorT<T>::at(int64_t i, int64_t j, int64_t k) {
  const auto& s = impl().shape;
  return impl().data[static_cast<size_t>((i * s[1] + j) * s[2] + k)];
}

template <typename T>
T TensorT<T>::at(int64_t i, int64_t j, int64_t k) const {
  const auto& s = impl().shape;
  return impl().data[static_cast<size_t>((i * s[1] + j) * s[2] + k)];
}

template <typename T>
T TensorT<T>::item() const {
  if (size() != 1)
    throw ConfigError("item() on non-scalar tensor of shape " + shape_str(shape()));
  return impl().data[0];
}

template <typename T>
void TensorT<T>::set_requires_grad(bool value) {
  impl().requires_grad = value;
  if (!value) impl().grad.clear();
}

template <typename T>
T* TensorT<T>::grad_data() {
  auto& im = impl();
  if (!im.requires_grad)
    throw ConfigError("gradient requested for tensor without requires_grad");
  if (im.grad.empty()) im.grad.assign(im.data.size(), T(0));
  return im.grad.data();
}

template <typename T>
const T* TensorT<T>::grad_data() const {
  const auto& im = impl();
  return im.grad.empty() ? nullptr : im.grad.data();
}

template <typename T>
std::vector<T>& TensorT<T>::grad_vec() {
  grad_data();
  return impl().grad;
}

template <typename T>
TensorT<T> TensorT<T>::grad_tensor() const {
  const auto& im = impl();
  if (im.grad.empty())
    throw ConfigError("grad_tensor() on tensor with no populated gradient");
  return TensorT::from(im.shape, im.grad);
}

template <typename T>
void TensorT<T>::zero_grad() {
  auto& im = impl();
  for (auto& g : im.grad) g = T(0);
}

template <typename T>
TensorT<T> TensorT<T>::clone() const {
  const auto& im = impl();
  TensorT t = TensorT::from(im.shape, im.data);
  return t;
}

template <typename T>
TensorT<T> TensorT<T>::detach() const {
  TensorT t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = impl().shape;
  t.impl_->data = impl().data;
  return t;
}

template <typename T>
void TensorT<T>::check_finite(const char* what) const {
  for (T v : impl().data) {
    if (!std::isfinite(static_cast<double>(v)))
      throw NumericError(std::string("non-finite value in ") + what);
  }
}

namespace {
template <typename T>
TapeT<T>*& current_tape() {
  static thread_local TapeT<T>* tape = nullptr;
  return tape;
}
}  // namespace

template <typename T>
TapeT<T>* TapeT<T>::current() {
  return current_tape<T>();
}

template <typename T>
TapeT<T>::Scope::Scope(TapeT& tape) : prev_(current_tape<T>()) {
  current_tape<T>() = &tape;
}

template <typename T>
TapeT<T>::Scope::~Scope() {
  current_tape<T>() = prev_;
}

template <typename T>
void TapeT<T>::record(std::function<void()> backward_fn) {
  nodes_.push_back(std::move(backward_fn));
}

template <typename T>
void TapeT<T>::backward(const TensorT<T>& loss) {
  if (consumed_)
    throw ConfigError("backward() called twice on the same tape; clear() first");
  if (!loss.defined() || loss.size() != 1)
    throw ConfigError("backward() expects a scalar loss");
  if (!loss.requires_grad())
    throw ConfigError("backward() on a detached loss (no gradient path)");
  consumed_ = true;
  TensorT<T> seed = loss;  // shallow handle; grad lives in shared storage
  seed.grad_data()[0] = T(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

template <typename T>
void TapeT<T>::clear() {
  nodes_.clear();
  consumed_ = false;
}

template class TensorT<float>;
template class TensorT<double>;
template class TapeT<float>;
template class TapeT<double>;

}  // namespace mrmnet
