#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "relu/core.hpp"

namespace relu {

// Adaptive-prediction-set conformal baseline. Calibration fixes a quantile of
// the cumulative-mass conformity score; prediction sets are the smallest
// descending-probability prefix reaching that mass, and the rejection score
// is the second-largest probability inside the set (zero for singletons).

struct ConformalCalibration {
    double alpha = 0.1;
    double qhat = 1.0;
    std::size_t n = 0;
};

namespace detail {

// Classes in descending probability; ties resolved toward the lower class
// index so the ordering is deterministic.
inline std::vector<std::size_t> descending_class_order(const ProbVector& p) {
    std::vector<std::size_t> order(p.num_classes());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (p[a] != p[b]) return p[a] > p[b];
        return a < b;
    });
    return order;
}

} // namespace detail

// Conformity score of one calibration sample: cumulative probability mass of
// the classes ranked above and including the true class.
inline double conformity_score(const ProbVector& p, int true_label) {
    if (true_label < 0 || static_cast<std::size_t>(true_label) >= p.num_classes())
        throw InputError("conformity_score: label out of range");
    double mass = 0.0;
    for (std::size_t cls : detail::descending_class_order(p)) {
        mass += p[cls];
        if (cls == static_cast<std::size_t>(true_label)) return mass;
    }
    return mass;
}

// qhat is the ceil((n+1)(1-alpha))-th smallest conformity score (clamped to
// the sample maximum when the index exceeds n).
inline ConformalCalibration conformal_calibrate(const std::vector<ProbVector>& probs,
                                                const std::vector<int>& labels, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ParameterError("conformal_calibrate: alpha must lie in (0, 1)");
    if (probs.empty()) throw InputError("conformal_calibrate: empty calibration split");
    if (probs.size() != labels.size())
        throw InputError("conformal_calibrate: probs and labels differ in length");

    std::vector<double> scores;
    scores.reserve(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i)
        scores.push_back(conformity_score(probs[i], labels[i]));
    std::sort(scores.begin(), scores.end());

    const std::size_t n = scores.size();
    std::size_t k = static_cast<std::size_t>(
        std::ceil(static_cast<double>(n + 1) * (1.0 - alpha)));
    if (k < 1) k = 1;
    if (k > n) k = n;

    ConformalCalibration cal;
    cal.alpha = alpha;
    cal.qhat = scores[k - 1];
    cal.n = n;
    return cal;
}

// Smallest descending-probability prefix whose cumulative mass reaches qhat;
// never empty, and capped at the full label set.
inline std::vector<int> conformal_predict_set(const ProbVector& p, const ConformalCalibration& cal) {
    std::vector<int> set;
    double mass = 0.0;
    for (std::size_t cls : detail::descending_class_order(p)) {
        set.push_back(static_cast<int>(cls));
        mass += p[cls];
        if (mass >= cal.qhat) break;
    }
    return set;
}

// Second-largest probability within the prediction set; exactly zero when the
// set is a singleton. Canonical orientation: higher means reject.
inline double conformal_reject_score(const ProbVector& p, const ConformalCalibration& cal) {
    const auto set = conformal_predict_set(p, cal);
    if (set.size() < 2) return 0.0;
    return p[static_cast<std::size_t>(set[1])];
}

} // namespace relu
