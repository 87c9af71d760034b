#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace gti {

/// Dense row-major matrix of doubles. Just enough linear algebra for the
/// network kernel; deliberately unclever so results are reproducible.
class Matrix {
public:
    Matrix() : rows_(0), cols_(0) {}
    Matrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), d_(static_cast<size_t>(rows) * cols, fill) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    size_t size() const { return d_.size(); }

    double& operator()(int r, int c) { return d_[static_cast<size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const { return d_[static_cast<size_t>(r) * cols_ + c]; }

    double* row(int r) { return d_.data() + static_cast<size_t>(r) * cols_; }
    const double* row(int r) const { return d_.data() + static_cast<size_t>(r) * cols_; }

    double* data() { return d_.data(); }
    const double* data() const { return d_.data(); }

    void fill(double v) { std::fill(d_.begin(), d_.end(), v); }

    Matrix& operator+=(const Matrix& o) {
        check_same_shape(o);
        for (size_t k = 0; k < d_.size(); ++k) d_[k] += o.d_[k];
        return *this;
    }

    Matrix& operator*=(double a) {
        for (double& v : d_) v *= a;
        return *this;
    }

    void check_same_shape(const Matrix& o) const {
        if (rows_ != o.rows_ || cols_ != o.cols_)
            throw std::invalid_argument("matrix shape mismatch: " + shape_str() + " vs " +
                                        o.shape_str());
    }

    std::string shape_str() const {
        return std::to_string(rows_) + "x" + std::to_string(cols_);
    }

private:
    int rows_, cols_;
    std::vector<double> d_;
};

/// out = a * b  (m x k) . (k x n)
inline void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul inner dims: " + a.shape_str() + " . " +
                                    b.shape_str());
    out = Matrix(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        const double* arow = a.row(i);
        double* orow = out.row(i);
        for (int k = 0; k < a.cols(); ++k) {
            double av = arow[k];
            if (av == 0.0) continue;
            const double* brow = b.row(k);
            for (int j = 0; j < b.cols(); ++j) orow[j] += av * brow[j];
        }
    }
}

/// out = a * b^T  (m x k) . (n x k)^T
inline void matmul_bt(const Matrix& a, const Matrix& b, Matrix& out) {
    if (a.cols() != b.cols())
        throw std::invalid_argument("matmul_bt inner dims: " + a.shape_str() + " . " +
                                    b.shape_str() + "^T");
    out = Matrix(a.rows(), b.rows());
    for (int i = 0; i < a.rows(); ++i) {
        const double* arow = a.row(i);
        for (int j = 0; j < b.rows(); ++j) {
            const double* brow = b.row(j);
            double acc = 0.0;
            for (int k = 0; k < a.cols(); ++k) acc += arow[k] * brow[k];
            out(i, j) = acc;
        }
    }
}

/// out = a^T * b  (k x m)^T . (k x n)
inline void matmul_at(const Matrix& a, const Matrix& b, Matrix& out) {
    if (a.rows() != b.rows())
        throw std::invalid_argument("matmul_at inner dims: " + a.shape_str() + "^T . " +
                                    b.shape_str());
    out = Matrix(a.cols(), b.cols());
    for (int k = 0; k < a.rows(); ++k) {
        const double* arow = a.row(k);
        const double* brow = b.row(k);
        for (int i = 0; i < a.cols(); ++i) {
            double av = arow[i];
            if (av == 0.0) continue;
            double* orow = out.row(i);
            for (int j = 0; j < b.cols(); ++j) orow[j] += av * brow[j];
        }
    }
}

}  // namespace gti
