#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include "relu/matrix.hpp"
#include "relu/observer.hpp"
#include "relu/rng.hpp"

namespace relu {

// Iterative solver for the observer-matrix problem, kept deliberately
// independent of the closed form so the two can check each other. The
// objective is linear in D, so the gradient is the fixed matrix
// G = (1-lambda) * mean_+ pp^T - lambda * mean_- pp^T and each iteration is a
// step along -G followed by projection onto the feasible set.
//
// Projection order: symmetrize, zero the diagonal, clamp negatives, rescale
// into the norm ball. Each step preserves the constraints established by the
// previous ones, which keeps failures diagnosable.

namespace detail {

// Plain (uncompensated) accumulation on purpose: a second, independent route
// to the population statistics.
inline Matrix mean_outer_plain(const std::vector<ProbVector>& probs) {
    const std::size_t c = probs.front().num_classes();
    Matrix m(c, c);
    for (const auto& p : probs)
        for (std::size_t i = 0; i < c; ++i)
            for (std::size_t j = 0; j < c; ++j) m(i, j) += p[i] * p[j];
    m *= 1.0 / static_cast<double>(probs.size());
    return m;
}

inline void project_feasible(Matrix& d, double norm_budget) {
    const std::size_t c = d.rows;
    for (std::size_t i = 0; i < c; ++i) {
        for (std::size_t j = i + 1; j < c; ++j) {
            const double sym = 0.5 * (d(i, j) + d(j, i));
            const double clamped = sym > 0.0 ? sym : 0.0;
            d(i, j) = clamped;
            d(j, i) = clamped;
        }
        d(i, i) = 0.0;
    }
    const double norm_sq = d.frobenius_norm_sq();
    if (norm_sq > norm_budget) d *= std::sqrt(norm_budget / norm_sq);
}

} // namespace detail

// Projected gradient descent on the contrastive objective. `step_size` is
// relative to the gradient's Frobenius norm, so convergence behaves the same
// across problem scales. `init` overrides the random start (used by the
// stationarity checks). Throws NumericalError when the iterate is still
// moving after max_iters.
inline RelUMatrix fit_d_matrix_oracle(const GroupedProbs& groups, double lambda, double norm_budget,
                                      std::size_t max_iters, double step_size, std::uint64_t seed,
                                      const std::optional<Matrix>& init = std::nullopt) {
    groups.require_both_sides();
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw ParameterError("fit_d_matrix_oracle: lambda must lie in [0, 1]");
    if (!(norm_budget > 0.0 && step_size > 0.0))
        throw ParameterError("fit_d_matrix_oracle: norm budget and step size must be positive");

    const Matrix mu_pos = detail::mean_outer_plain(groups.positives);
    const Matrix mu_neg = detail::mean_outer_plain(groups.negatives);
    const std::size_t c = mu_pos.rows;

    Matrix grad(c, c);
    for (std::size_t k = 0; k < c * c; ++k)
        grad.data[k] = (1.0 - lambda) * mu_pos.data[k] - lambda * mu_neg.data[k];
    const double grad_norm = std::sqrt(grad.frobenius_norm_sq());
    const double eta = step_size / std::max(grad_norm, 1e-12);

    Matrix d(c, c);
    if (init.has_value()) {
        if (init->rows != c || init->cols != c)
            throw InputError("fit_d_matrix_oracle: init shape mismatch");
        d = *init;
    } else {
        Rng rng(seed);
        for (std::size_t i = 0; i < c; ++i)
            for (std::size_t j = i + 1; j < c; ++j) d(i, j) = d(j, i) = rng.uniform();
    }
    detail::project_feasible(d, norm_budget);

    // Convergence: the iterate stops moving, or the (linear) objective
    // plateaus. The plateau guard matters when a near-zero gradient entry off
    // the solution support would otherwise decay for a very long time without
    // affecting the objective measurably.
    const double move_tol = 1e-13 * std::max(1.0, std::sqrt(norm_budget));
    const auto inner = [&](const Matrix& m) {
        double acc = 0.0;
        for (std::size_t k = 0; k < c * c; ++k) acc += m.data[k] * grad.data[k];
        return acc;
    };
    double objective = inner(d);
    std::size_t plateau = 0;
    bool converged = false;
    double move = std::numeric_limits<double>::infinity();
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        Matrix next = d;
        for (std::size_t k = 0; k < c * c; ++k) next.data[k] -= eta * grad.data[k];
        detail::project_feasible(next, norm_budget);

        double move_sq = 0.0;
        for (std::size_t k = 0; k < c * c; ++k) {
            const double delta = next.data[k] - d.data[k];
            move_sq += delta * delta;
        }
        move = std::sqrt(move_sq);
        d = std::move(next);

        const double next_objective = inner(d);
        plateau = (objective - next_objective <= 1e-15 * std::max(1.0, std::abs(next_objective)))
                      ? plateau + 1
                      : 0;
        objective = next_objective;
        if (move <= move_tol || plateau >= 50) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw NumericalError("fit_d_matrix_oracle: no fixed point after " + std::to_string(max_iters) +
                             " iterations; last step moved " + std::to_string(move) +
                             " (gradient norm " + std::to_string(grad_norm) + ")");

    RelUMatrix result;
    result.entries = std::move(d);
    result.norm_budget = norm_budget;
    result.lambda_used = lambda;
    result.fallback = (result.entries.frobenius_norm_sq() == 0.0);
    return result;
}

} // namespace relu
