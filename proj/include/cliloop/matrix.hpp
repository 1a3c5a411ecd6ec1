#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace cliloop {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles. Sized once, then indexed.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }
    const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }

    Vector row(std::size_t r) const {
        return Vector(row_ptr(r), row_ptr(r) + cols_);
    }
    void set_row(std::size_t r, const Vector& v) {
        if (v.size() != cols_) throw std::invalid_argument("Matrix::set_row: length mismatch");
        for (std::size_t c = 0; c < cols_; ++c) (*this)(r, c) = v[c];
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// C = A * B
Matrix matmul(const Matrix& a, const Matrix& b);
// C = A * B^T  (rows of both operands are contiguous dot products)
Matrix matmul_nt(const Matrix& a, const Matrix& b);
// C = A^T * B
Matrix matmul_tn(const Matrix& a, const Matrix& b);

double dot(const Vector& a, const Vector& b);
double l2_norm(const Vector& a);

bool all_finite(const Vector& v);
bool all_finite(const Matrix& m);

}  // namespace cliloop
