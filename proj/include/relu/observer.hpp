#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "relu/core.hpp"
#include "relu/matrix.hpp"
#include "relu/scores.hpp"

namespace relu {

// Learning the observer matrix D*: grouping of soft predictions into
// positive/negative populations, their co-occurrence statistics, and the
// closed-form solution of the constrained contrastive problem
//
//   minimize (1-lambda) E+[p D p^T] - lambda E-[p D p^T]
//   subject to d_ii = 0, d_ij = d_ji >= 0, Tr(D D^T) <= K.

// The learned observer matrix plus its constraint metadata. `fallback` is set
// when every unnormalized entry clamped to zero, in which case the uniform
// off-diagonal (Hamming) matrix is substituted and the score reduces to the
// Gini concentration up to the norm budget.
struct RelUMatrix {
    Matrix entries;
    double norm_budget = 1.0;
    bool fallback = false;
    double lambda_used = 0.5;

    std::size_t num_classes() const { return entries.rows; }

    // Checks the constraint set exactly as constructed: symmetry and the zero
    // diagonal are bit-exact, the trace condition holds to 1e-9 relative.
    void validate() const {
        if (entries.rows != entries.cols || entries.rows < 2)
            throw InputError("RelUMatrix: entries must be square, C >= 2");
        if (!(norm_budget > 0.0)) throw ParameterError("RelUMatrix: norm budget must be positive");
        for (std::size_t i = 0; i < entries.rows; ++i) {
            if (entries(i, i) != 0.0) throw InputError("RelUMatrix: nonzero diagonal");
            for (std::size_t j = 0; j < entries.cols; ++j) {
                if (entries(i, j) != entries(j, i)) throw InputError("RelUMatrix: not symmetric");
                if (!(entries(i, j) >= 0.0)) throw InputError("RelUMatrix: negative entry");
            }
        }
        if (!fallback) {
            const double tr = entries.frobenius_norm_sq();
            if (std::abs(tr - norm_budget) > 1e-9 * norm_budget)
                throw InputError("RelUMatrix: Tr(DD^T) = " + std::to_string(tr) +
                                 " violates norm budget " + std::to_string(norm_budget));
        }
    }
};

// Relative-uncertainty score p D* p^T.
inline double rel_u_score(const ProbVector& p, const RelUMatrix& d) {
    return bilinear_form(p, d.entries);
}

// 1 off the diagonal, 0 on it. The fixed observer under which the relative
// uncertainty equals the Gini concentration.
inline Matrix hamming_matrix(std::size_t c) {
    Matrix m(c, c, 1.0);
    for (std::size_t i = 0; i < c; ++i) m(i, i) = 0.0;
    return m;
}

// Soft predictions split into the two populations the observer is learned
// from: positives (correct / in-distribution) and negatives (misclassified /
// mismatched).
struct GroupedProbs {
    std::vector<ProbVector> positives;
    std::vector<ProbVector> negatives;

    std::size_t n_pos() const { return positives.size(); }
    std::size_t n_neg() const { return negatives.size(); }

    void require_both_sides() const {
        if (positives.empty()) throw InputError("degenerate grouping: positive side is empty");
        if (negatives.empty()) throw InputError("degenerate grouping: negative side is empty");
    }
};

enum class GroupMode {
    Correctness, // positives = correctly classified, negatives = misclassified
    Membership,  // positives = primary dataset, negatives = secondary dataset
};

namespace detail {

inline ProbVector probs_for_sample(const EvalSample& s, double temperature, bool logits_are_probs) {
    if (logits_are_probs) {
        if (temperature != 1.0)
            throw ParameterError("temperature scaling requires logits, not precomputed probabilities");
        return ProbVector::renormalized(s.logits.values());
    }
    return softmax_with_temperature(s.logits, temperature);
}

} // namespace detail

// Fills the positive/negative populations from a dataset. CORRECTNESS mode
// groups by the correctness flag; MEMBERSHIP mode takes every primary sample
// as positive and every sample of `secondary` as negative, ignoring
// correctness. Probabilities are computed at the supplied temperature, in
// dataset order.
inline GroupedProbs assign_groups(const EvalDataset& dataset, GroupMode mode,
                                  const EvalDataset* secondary, double temperature) {
    GroupedProbs groups;
    if (mode == GroupMode::Correctness) {
        for (const auto& s : dataset.samples) {
            auto p = detail::probs_for_sample(s, temperature, dataset.logits_are_probs);
            if (s.correct)
                groups.positives.push_back(std::move(p));
            else
                groups.negatives.push_back(std::move(p));
        }
    } else {
        if (secondary == nullptr)
            throw InputError("MEMBERSHIP grouping requires a secondary dataset");
        if (secondary->num_classes != dataset.num_classes)
            throw InputError("MEMBERSHIP grouping: class-count mismatch between datasets");
        for (const auto& s : dataset.samples)
            groups.positives.push_back(detail::probs_for_sample(s, temperature, dataset.logits_are_probs));
        for (const auto& s : secondary->samples)
            groups.negatives.push_back(detail::probs_for_sample(s, temperature, secondary->logits_are_probs));
    }
    groups.require_both_sides();
    return groups;
}

// Empirical mean of the outer products p^T p. Accumulation runs in input
// order with Kahan compensation per entry, so the result is bit-reproducible
// and order-invariant to ~1e-12.
inline Matrix cooccurrence_mean(const std::vector<ProbVector>& probs) {
    if (probs.empty()) throw InputError("cooccurrence_mean: empty input");
    const std::size_t c = probs.front().num_classes();
    std::vector<KahanSum> acc(c * c);
    for (const auto& p : probs) {
        if (p.num_classes() != c) throw InputError("cooccurrence_mean: mixed class counts");
        for (std::size_t i = 0; i < c; ++i) {
            const double pi = p[i];
            for (std::size_t j = 0; j < c; ++j) acc[i * c + j].add(pi * p[j]);
        }
    }
    Matrix m(c, c);
    const double inv_n = 1.0 / static_cast<double>(probs.size());
    for (std::size_t k = 0; k < c * c; ++k) m.data[k] = acc[k].value() * inv_n;
    return m;
}

// Default trade-off weight: the positive fraction N+ / (N+ + N-), which
// balances the two population means when no grid value is imposed.
inline double default_lambda(const GroupedProbs& groups) {
    groups.require_both_sides();
    return static_cast<double>(groups.n_pos()) /
           static_cast<double>(groups.n_pos() + groups.n_neg());
}

// Closed-form fit of the observer matrix. Off-diagonal entries are
// max(0, lambda*mu-_ij - (1-lambda)*mu+_ij) rescaled so Tr(DD^T) equals the
// norm budget; when every entry clamps to zero (the optimum of the
// constrained problem is the zero matrix) the Hamming matrix is substituted
// at the same budget and `fallback` is set.
inline RelUMatrix fit_d_matrix(const GroupedProbs& groups, double lambda, double norm_budget) {
    groups.require_both_sides();
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ParameterError("fit_d_matrix: lambda must lie in [0, 1]");
    if (!(norm_budget > 0.0)) throw ParameterError("fit_d_matrix: norm budget must be positive");

    const Matrix mu_pos = cooccurrence_mean(groups.positives);
    const Matrix mu_neg = cooccurrence_mean(groups.negatives);
    const std::size_t c = mu_pos.rows;

    RelUMatrix result;
    result.norm_budget = norm_budget;
    result.lambda_used = lambda;
    result.entries = Matrix(c, c);

    double norm_sq = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
        for (std::size_t j = i + 1; j < c; ++j) {
            // mu matrices are symmetric; using the (i, j) entry for both
            // halves keeps the result bit-symmetric.
            const double raw = lambda * mu_neg(i, j) - (1.0 - lambda) * mu_pos(i, j);
            const double clamped = raw > 0.0 ? raw : 0.0;
            result.entries(i, j) = clamped;
            result.entries(j, i) = clamped;
            norm_sq += 2.0 * clamped * clamped;
        }
    }

    if (norm_sq == 0.0) {
        result.entries = hamming_matrix(c);
        result.fallback = true;
        norm_sq = result.entries.frobenius_norm_sq(); // C^2 - C
    }
    result.entries *= std::sqrt(norm_budget / norm_sq);
    return result;
}

// Contrastive objective (1-lambda) * mean_+ p D p^T - lambda * mean_- p D p^T,
// evaluated directly over the sample populations.
inline double objective_value(const Matrix& d, const GroupedProbs& groups, double lambda) {
    groups.require_both_sides();
    KahanSum pos, neg;
    for (const auto& p : groups.positives) pos.add(bilinear_form(p, d));
    for (const auto& p : groups.negatives) neg.add(bilinear_form(p, d));
    const double mean_pos = pos.value() / static_cast<double>(groups.n_pos());
    const double mean_neg = neg.value() / static_cast<double>(groups.n_neg());
    return (1.0 - lambda) * mean_pos - lambda * mean_neg;
}

inline double objective_value(const RelUMatrix& d, const GroupedProbs& groups, double lambda) {
    return objective_value(d.entries, groups, lambda);
}

} // namespace relu
