#pragma once

#include <cstddef>
#include <vector>

#include "relu/errors.hpp"

namespace relu {

// Minimal dense row-major matrix. Every matrix in this library is small
// (C x C observer matrices, tiny network weights, N x C logit tables), and
// accumulation order is part of several contracts, so the loops stay explicit
// instead of delegating to a linear-algebra backend.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    const double* row(std::size_t r) const { return data.data() + r * cols; }
    double* row(std::size_t r) { return data.data() + r * cols; }

    bool same_shape(const Matrix& other) const { return rows == other.rows && cols == other.cols; }

    double frobenius_norm_sq() const {
        double acc = 0.0;
        for (double v : data) acc += v * v;
        return acc;
    }

    Matrix& operator*=(double s) {
        for (double& v : data) v *= s;
        return *this;
    }
};

inline Matrix operator*(Matrix m, double s) {
    m *= s;
    return m;
}

// Compensated (Kahan) accumulator; used wherever a sum is part of a
// determinism or order-invariance contract.
struct KahanSum {
    double sum = 0.0;
    double comp = 0.0;

    void add(double value) {
        const double y = value - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }

    double value() const { return sum; }
};

} // namespace relu
