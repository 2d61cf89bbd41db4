#pragma once

#include <cstddef>
#include <vector>

#include "svit/errors.hpp"

namespace svit {

// Minimal dense row-major matrix for the plain (non-differentiable) numerics:
// eigensolvers, bases, patch extraction. The autodiff engine has its own
// storage (tensor.hpp); this type stays intentionally tiny.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
    double* row(std::size_t r) { return v.data() + r * cols; }
    const double* row(std::size_t r) const { return v.data() + r * cols; }
    std::size_t size() const { return rows * cols; }

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }
};

inline Mat transpose(const Mat& a) {
    Mat t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

inline Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols != b.rows)
        throw DimensionError("mat matmul: lhs " + std::to_string(a.rows) + "x" +
                             std::to_string(a.cols) + " vs rhs " + std::to_string(b.rows) + "x" +
                             std::to_string(b.cols));
    Mat y(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* yi = y.row(i);
        const double* ai = a.row(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = ai[k];
            const double* bk = b.row(k);
            for (std::size_t j = 0; j < b.cols; ++j) yi[j] += aik * bk[j];
        }
    }
    return y;
}

}  // namespace svit
