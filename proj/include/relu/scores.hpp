#pragma once

#include <cmath>

#include "relu/core.hpp"
#include "relu/matrix.hpp"

namespace relu {

// Per-sample uncertainty scores, all in the canonical orientation:
// higher = more uncertain = more likely misclassified. Every score is zero
// exactly on one-hot predictions.

// Shannon entropy -sum p log p (natural log, 0*log 0 handled by branch so the
// one-hot case is exactly zero).
inline double shannon_entropy(const ProbVector& p) {
    double h = 0.0;
    for (std::size_t i = 0; i < p.num_classes(); ++i) {
        const double v = p[i];
        if (v > 0.0) h -= v * std::log(v);
    }
    return h;
}

// Gini concentration 1 - sum p^2.
inline double gini_score(const ProbVector& p) {
    double sq = 0.0;
    for (std::size_t i = 0; i < p.num_classes(); ++i) sq += p[i] * p[i];
    return 1.0 - sq;
}

// Maximum-softmax-probability confidence, flipped into uncertainty: 1 - max p.
inline double msp_uncertainty(const ProbVector& p) {
    double mx = 0.0;
    for (std::size_t i = 0; i < p.num_classes(); ++i) mx = std::max(mx, p[i]);
    return 1.0 - mx;
}

// Bilinear form p D p^T for a square observer matrix D. Non-negative whenever
// D is entrywise non-negative.
inline double bilinear_form(const ProbVector& p, const Matrix& d) {
    const std::size_t c = p.num_classes();
    if (d.rows != c || d.cols != c)
        throw InputError("bilinear_form: matrix is " + std::to_string(d.rows) + "x" +
                         std::to_string(d.cols) + " but distribution has " + std::to_string(c) +
                         " classes");
    double acc = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
        const double pi = p[i];
        if (pi == 0.0) continue;
        const double* row = d.row(i);
        double inner = 0.0;
        for (std::size_t j = 0; j < c; ++j) inner += row[j] * p[j];
        acc += pi * inner;
    }
    return acc;
}

} // namespace relu
