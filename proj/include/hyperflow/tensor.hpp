#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace hyperflow {

namespace detail {
// Leaves new elements uninitialized on resize; value-initialization still
// zeroes when asked for explicitly. Buffers start on a 64-byte boundary so
// vectorized kernels split work the same way on every run.
template <class T>
struct DefaultInitAllocator : std::allocator<T> {
  static constexpr std::align_val_t kAlign{64};
  template <class U>
  struct rebind {
    using other = DefaultInitAllocator<U>;
  };
  using std::allocator<T>::allocator;
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
  template <class U>
  void construct(U* p) {
    ::new (static_cast<void*>(p)) U;
  }
  template <class U, class... Args>
  void construct(U* p, Args&&... args) {
    ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }
};
}  // namespace detail

/// Dense row-major buffer of doubles with a shape of rank 0, 1 or 2.
///
/// Rank-1 tensors behave as a single row when an operation needs a matrix
/// view, so a flat weight vector of length n is a 1 x n matrix.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor zeros(std::size_t rows, std::size_t cols);
  static Tensor filled(std::size_t rows, std::size_t cols, double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values);
  static Tensor zeros_like(const Tensor& other);
  /// Contents are unspecified; for outputs that are fully overwritten.
  static Tensor uninitialized(std::size_t rows, std::size_t cols);
  static Tensor uninitialized_like(const Tensor& other);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const { return shape_.size() == 2 ? shape_[0] : 1; }
  std::size_t cols() const {
    return shape_.empty() ? 1 : shape_.back();
  }
  bool is_scalar() const { return data_.size() == 1; }
  bool same_shape(const Tensor& other) const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double> to_vector() const { return {data_.begin(), data_.end()}; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  /// Value of a one-element tensor.
  double item() const;

  Tensor reshaped(std::vector<std::size_t> shape) const;
  bool all_finite() const;
  void fill(double value);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double, detail::DefaultInitAllocator<double>> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);
std::size_t shape_product(const std::vector<std::size_t>& shape);

}  // namespace hyperflow
