#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace divgan {

using Shape = std::vector<std::size_t>;

/// Allocator returning 64-byte aligned blocks. Eigen's vectorised kernels
/// peel a data-dependent number of leading elements based on the address,
/// so a fixed alignment keeps the floating-point summation order, and hence
/// results, identical from run to run.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlignment{64};

    AlignedAllocator() noexcept = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept
    {
    }

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

    template <class U>
    bool operator==(const AlignedAllocator<U>&) const noexcept
    {
        return true;
    }
};

using Storage = std::vector<double, AlignedAllocator<double>>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Raised whenever two operands disagree on shape. No implicit broadcasting
/// happens anywhere in the library.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Dense row-major array of doubles.
///
/// Rank 0 is a scalar (one value), rank 1 a vector and rank 2 a matrix whose
/// rows are batch entries. Higher ranks are representable but only the
/// element-wise operations accept them.
class Tensor {
public:
    Tensor() : shape_{}, values_(1, 0.0) {}
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }
    static Tensor vector(std::vector<double> v);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v);
    static Tensor row(std::initializer_list<double> v) { return vector(std::vector<double>(v)); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return values_.size(); }
    /// Number of rows of a rank-2 tensor (1 for vectors and scalars).
    std::size_t rows() const;
    /// Number of columns of a rank-2 tensor (the length for vectors).
    std::size_t cols() const;

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }
    Storage& storage() noexcept { return values_; }
    const Storage& storage() const noexcept { return values_; }
    /// Copy of the values as a plain vector.
    std::vector<double> to_vector() const { return {values_.begin(), values_.end()}; }
    double* data() noexcept { return values_.data(); }
    const double* data() const noexcept { return values_.data(); }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

    /// Scalar value; throws unless the tensor holds exactly one value.
    double item() const;
    /// Copy of row r of a rank-2 tensor as a vector.
    Tensor row_at(std::size_t r) const;
    Tensor reshaped(Shape shape) const;

    bool all_finite() const noexcept;
    bool operator==(const Tensor& other) const = default;

private:
    Shape shape_;
    Storage values_;
};

void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

/// Stack equally sized vectors into a matrix, one per row.
Tensor stack_rows(std::span<const Tensor> rows);

double l1_norm(std::span<const double> v);
double l2_norm(std::span<const double> v);

} // namespace divgan
