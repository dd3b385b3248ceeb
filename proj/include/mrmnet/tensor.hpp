#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrmnet {

// Invalid shapes, mismatched dimensions, bad configs and malformed files.
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values or failed numerical checks.
class NumericError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);
bool same_shape(const Shape& a, const Shape& b);

// Dense row-major tensor of rank <= 3. Copies are shallow (shared storage);
// use clone() for a deep copy. The gradient buffer lives next to the data and
// is allocated lazily on first accumulation.
template <typename T>
class TensorT {
 public:
  TensorT() = default;

  static TensorT zeros(Shape shape);
  static TensorT full(Shape shape, T value);
  static TensorT ones(Shape shape) { return full(std::move(shape), T(1)); }
  static TensorT scalar(T value) { return full({1}, value); }
  static TensorT from(Shape shape, std::vector<T> values);
  static TensorT uniform(Shape shape, T lo, T hi, std::mt19937_64& rng);
  static TensorT normal(Shape shape, T mean, T stddev, std::mt19937_64& rng);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl().shape; }
  int rank() const { return static_cast<int>(impl().shape.size()); }
  int64_t dim(int i) const { return impl().shape.at(i); }
  int64_t size() const { return static_cast<int64_t>(impl().data.size()); }

  T* data() { return impl().data.data(); }
  const T* data() const { return impl().data.data(); }
  std::vector<T>& vec() { return impl().data; }
  const std::vector<T>& vec() const { return impl().data; }

  T& at(int64_t i) { return impl().data[i]; }
  T at(int64_t i) const { return impl().data[i]; }
  T& at(int64_t i, int64_t j);
  T at(int64_t i, int64_t j) const;
  T& at(int64_t i, int64_t j, int64_t k);
  T at(int64_t i, int64_t j, int64_t k) const;

  T item() const;

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  void set_requires_grad(bool value);

  // Gradient accumulator; allocated as zeros on first use.
  T* grad_data();
  const T* grad_data() const;
  bool has_grad() const { return impl_ && !impl_->grad.empty(); }
  std::vector<T>& grad_vec();
  TensorT grad_tensor() const;
  void zero_grad();

  TensorT clone() const;
  // Same storage, detached from gradient tracking.
  TensorT detach() const;

  void check_finite(const char* what) const;

  // Identity of the underlying storage; used for parameter bookkeeping.
  const void* id() const { return impl_.get(); }

 private:
  struct Impl {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
  };

  Impl& impl() {
    if (!impl_) throw ConfigError("use of undefined tensor");
    return *impl_;
  }
  const Impl& impl() const {
    if (!impl_) throw ConfigError("use of undefined tensor");
    return *impl_;
  }

  std::shared_ptr<Impl> impl_;
};

// Reverse-mode tape. Ops append their backward rule during the forward pass;
// backward() replays them in reverse. A tape instance belongs to one thread
// and supports exactly one backward pass.
template <typename T>
class TapeT {
 public:
  TapeT() = default;
  TapeT(const TapeT&) = delete;
  TapeT& operator=(const TapeT&) = delete;

  void record(std::function<void()> backward_fn);
  void backward(const TensorT<T>& loss);
  void clear();

  size_t num_nodes() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  static TapeT* current();

  // RAII activation: ops record onto the innermost active tape.
  class Scope {
   public:
    explicit Scope(TapeT& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    TapeT* prev_;
  };

 private:
  std::vector<std::function<void()>> nodes_;
  bool consumed_ = false;
};

using Tensor = TensorT<float>;
using Tape = TapeT<float>;
using Tensor64 = TensorT<double>;
using Tape64 = TapeT<double>;

// When enabled, ops scan their outputs and raise NumericError on NaN/Inf.
// Off by default; the training loop always checks the loss scalar.
void set_finite_checks(bool enabled);
bool finite_checks_enabled();

// splitmix64 mix of a master seed with a stream tag; used to derive
// independent deterministic RNG streams (init, dropout, shuffle, ...).
uint64_t derive_seed(uint64_t seed, uint64_t stream, uint64_t index = 0);

}  // namespace mrmnet
