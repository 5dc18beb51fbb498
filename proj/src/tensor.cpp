#include "divgan/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace divgan {

std::string shape_to_string(const Shape& shape)
{
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

std::size_t shape_size(const Shape& shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(values.begin(), values.end())
{
    if (shape_size(shape_) != values_.size()) {
        throw ShapeError("tensor: shape " + shape_to_string(shape_) + " needs " + std::to_string(shape_size(shape_)) +
                         " values, got " + std::to_string(values_.size()));
    }
}

Tensor Tensor::vector(std::vector<double> v)
{
    const std::size_t n = v.size();
    return Tensor(Shape{n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> v)
{
    return Tensor(Shape{rows, cols}, std::move(v));
}

std::size_t Tensor::rows() const
{
    if (rank() == 2) return shape_[0];
    if (rank() <= 1) return 1;
    throw ShapeError("rows: rank " + std::to_string(rank()) + " tensor");
}

std::size_t Tensor::cols() const
{
    if (rank() == 2) return shape_[1];
    if (rank() == 1) return shape_[0];
    if (rank() == 0) return 1;
    throw ShapeError("cols: rank " + std::to_string(rank()) + " tensor");
}

double Tensor::item() const
{
    if (values_.size() != 1) throw ShapeError("item: tensor of shape " + shape_to_string(shape_) + " is not a scalar");
    return values_[0];
}

Tensor Tensor::row_at(std::size_t r) const
{
    if (rank() != 2 || r >= shape_[0]) throw ShapeError("row_at: bad row index for shape " + shape_to_string(shape_));
    const auto begin = values_.begin() + static_cast<std::ptrdiff_t>(r * shape_[1]);
    return Tensor::vector(std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(shape_[1])));
}

Tensor Tensor::reshaped(Shape shape) const
{
    return Tensor(std::move(shape), to_vector());
}

bool Tensor::all_finite() const noexcept
{
    for (double v : values_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op)
{
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
    }
}

Tensor stack_rows(std::span<const Tensor> rows)
{
    if (rows.empty()) throw ShapeError("stack_rows: no rows");
    const std::size_t cols = rows.front().size();
    std::vector<double> values;
    values.reserve(rows.size() * cols);
    for (const Tensor& r : rows) {
        if (r.size() != cols) throw ShapeError("stack_rows: ragged rows");
        values.insert(values.end(), r.storage().begin(), r.storage().end());
    }
    return Tensor::matrix(rows.size(), cols, std::move(values));
}

double l1_norm(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
}

double l2_norm(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

} // namespace divgan
