#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "ebm/errors.hpp"

namespace ebm {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles. Sized for desk-scale models; all
// operations are plain loops.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline void require_size(const Vector& x, std::size_t n, const char* what) {
    if (x.size() != n)
        throw DimensionError(std::string(what) + ": expected length " + std::to_string(n) +
                             ", got " + std::to_string(x.size()));
}

// y = M x
inline Vector mat_vec(const Matrix& m, const Vector& x) {
    require_size(x, m.cols(), "mat_vec");
    Vector y(m.rows(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) acc += m(i, j) * x[j];
        y[i] = acc;
    }
    return y;
}

// y = M^T x
inline Vector mat_tvec(const Matrix& m, const Vector& x) {
    require_size(x, m.rows(), "mat_tvec");
    Vector y(m.cols(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) y[j] += m(i, j) * x[i];
    return y;
}

inline double dot(const Vector& a, const Vector& b) {
    require_size(b, a.size(), "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline Matrix outer(const Vector& a, const Vector& b) {
    Matrix m(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = a[i] * b[j];
    return m;
}

inline Matrix transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
    return t;
}

inline void add_scaled(Vector& y, const Vector& x, double alpha) {
    require_size(x, y.size(), "add_scaled");
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

inline void add_scaled(Matrix& y, const Matrix& x, double alpha) {
    if (y.rows() != x.rows() || y.cols() != x.cols())
        throw DimensionError("add_scaled: matrix shapes differ");
    for (std::size_t i = 0; i < y.data().size(); ++i) y.data()[i] += alpha * x.data()[i];
}

// Rank-one update y += alpha * a b^T without forming the outer product.
inline void add_outer(Matrix& y, const Vector& a, const Vector& b, double alpha = 1.0) {
    if (y.rows() != a.size() || y.cols() != b.size())
        throw DimensionError("add_outer: shape mismatch");
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) y(i, j) += alpha * a[i] * b[j];
}

inline double squared_norm(const Vector& x) {
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return acc;
}

inline double squared_norm(const Matrix& m) {
    double acc = 0.0;
    for (double v : m.data()) acc += v * v;
    return acc;
}

inline bool all_finite(const Vector& x) {
    for (double v : x)
        if (!std::isfinite(v)) return false;
    return true;
}

inline bool all_finite(const Matrix& m) {
    for (double v : m.data())
        if (!std::isfinite(v)) return false;
    return true;
}

inline double squared_distance(const Vector& a, const Vector& b) {
    require_size(b, a.size(), "squared_distance");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        acc += diff * diff;
    }
    return acc;
}

} // namespace ebm
