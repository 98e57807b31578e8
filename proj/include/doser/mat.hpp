#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "doser/errors.hpp"

namespace doser {

/// Dense row-major matrix of doubles. Deliberately minimal: storage plus
/// row views; all arithmetic lives in the kernels.
struct Mat {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(size_t r, size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}

    void resize(size_t r, size_t c) {
        rows = r;
        cols = c;
        v.assign(r * c, 0.0);
    }

    double* row(size_t i) { return v.data() + i * cols; }
    const double* row(size_t i) const { return v.data() + i * cols; }

    std::span<double> row_span(size_t i) { return {row(i), cols}; }
    std::span<const double> row_span(size_t i) const { return {row(i), cols}; }

    double& at(size_t i, size_t j) { return v[i * cols + j]; }
    double at(size_t i, size_t j) const { return v[i * cols + j]; }

    bool empty() const { return rows == 0 || cols == 0; }
    size_t size() const { return rows * cols; }

    void fill(double x) { std::fill(v.begin(), v.end(), x); }
};

/// Copy selected rows of `src` into a fresh matrix.
inline Mat gather_rows(const Mat& src, std::span<const size_t> idx) {
    Mat out(idx.size(), src.cols);
    for (size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= src.rows) throw InputError("gather_rows: index out of range");
        std::copy(src.row(idx[i]), src.row(idx[i]) + src.cols, out.row(i));
    }
    return out;
}

}  // namespace doser
