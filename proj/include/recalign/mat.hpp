#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "recalign/errors.hpp"

namespace recalign {

// Dense row-major matrix of doubles. The single numeric container shared by
// the exact probability wing and the autodiff tape; a 1x1 Mat is a scalar,
// a 1xN Mat a row vector.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}

    static Mat from_rows(std::vector<std::vector<double>> data) {
        Mat m;
        m.rows = data.size();
        m.cols = m.rows ? data[0].size() : 0;
        m.v.reserve(m.rows * m.cols);
        for (const auto& row : data) {
            if (row.size() != m.cols) throw ShapeMismatch("Mat::from_rows: ragged rows");
            m.v.insert(m.v.end(), row.begin(), row.end());
        }
        return m;
    }

    double& operator()(std::size_t r, std::size_t c) { return v[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return v[r * cols + c]; }

    std::size_t size() const { return v.size(); }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
    bool is_scalar() const { return rows == 1 && cols == 1; }
    double scalar() const {
        if (!is_scalar()) throw ShapeMismatch("Mat::scalar: not 1x1");
        return v[0];
    }

    void fill(double x) { std::fill(v.begin(), v.end(), x); }
};

// c = a * b. Loop order fixed (i,k,j) so every caller sees the same rounding.
inline Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols != b.rows) throw ShapeMismatch("matmul: inner dimensions differ");
    Mat c(a.rows, b.cols, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

// c = a^T * b
inline Mat matmul_tn(const Mat& a, const Mat& b) {
    if (a.rows != b.rows) throw ShapeMismatch("matmul_tn: row counts differ");
    Mat c(a.cols, b.cols, 0.0);
    for (std::size_t k = 0; k < a.rows; ++k)
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double aki = a(k, i);
            if (aki == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aki * b(k, j);
        }
    return c;
}

} // namespace recalign
