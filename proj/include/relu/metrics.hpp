#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "relu/core.hpp"
#include "relu/matrix.hpp"

namespace relu {

// Detection metrics. Convention throughout: the positive class is the
// correct classification (or the in-distribution sample), scores are in
// canonical uncertainty orientation, and a positive counts as "detected
// correct" when its score is <= the threshold.

struct ScoredPopulation {
    std::vector<double> pos_scores; // correctly classified / in-distribution
    std::vector<double> neg_scores; // misclassified / mismatched

    void require_both_sides() const {
        if (pos_scores.empty() || neg_scores.empty())
            throw InputError("ScoredPopulation: both sides must be nonempty");
    }
};

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;
};

// Threshold sweep over the distinct observed scores, ascending. Equal scores
// collapse into one step, which makes the trapezoidal area agree with the
// half-credit-ties pairwise statistic. The final point is always (1, 1).
inline std::vector<RocPoint> roc_curve(const ScoredPopulation& pop) {
    pop.require_both_sides();
    std::vector<double> pos = pop.pos_scores;
    std::vector<double> neg = pop.neg_scores;
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());

    std::vector<double> thresholds;
    thresholds.reserve(pos.size() + neg.size());
    thresholds.insert(thresholds.end(), pos.begin(), pos.end());
    thresholds.insert(thresholds.end(), neg.begin(), neg.end());
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    const double np = static_cast<double>(pos.size());
    const double nn = static_cast<double>(neg.size());
    std::vector<RocPoint> curve;
    curve.reserve(thresholds.size());
    std::size_t ip = 0, in = 0;
    for (double t : thresholds) {
        while (ip < pos.size() && pos[ip] <= t) ++ip;
        while (in < neg.size() && neg[in] <= t) ++in;
        curve.push_back({static_cast<double>(in) / nn, static_cast<double>(ip) / np, t});
    }
    return curve;
}

// FPR at the smallest uncertainty threshold whose TPR reaches the requested
// level; no interpolation, so the value is reproducible and matches an
// exhaustive sweep over candidate thresholds.
inline double fpr_at_tpr(const ScoredPopulation& pop, double tpr_level = 0.95) {
    if (!(tpr_level > 0.0 && tpr_level <= 1.0))
        throw ParameterError("fpr_at_tpr: level must lie in (0, 1]");
    for (const auto& pt : roc_curve(pop)) {
        if (pt.tpr >= tpr_level) return pt.fpr;
    }
    return 1.0; // unreachable: the last swept point has TPR 1
}

// Pairwise-ranking AUROC: P(neg > pos) + 0.5 * P(neg == pos), counted exactly
// over sorted copies.
inline double auroc(const ScoredPopulation& pop) {
    pop.require_both_sides();
    std::vector<double> neg = pop.neg_scores;
    std::sort(neg.begin(), neg.end());
    unsigned long long greater = 0, equal = 0;
    for (double p : pop.pos_scores) {
        const auto lo = std::lower_bound(neg.begin(), neg.end(), p);
        const auto hi = std::upper_bound(neg.begin(), neg.end(), p);
        equal += static_cast<unsigned long long>(hi - lo);
        greater += static_cast<unsigned long long>(neg.end() - hi);
    }
    const double pairs = static_cast<double>(pop.pos_scores.size()) * static_cast<double>(neg.size());
    return (static_cast<double>(greater) + 0.5 * static_cast<double>(equal)) / pairs;
}

// Trapezoidal integration of the ROC curve, anchored at (0, 0). Second route
// to the same quantity; the two agree to ~1e-12.
inline double auroc_trapezoid(const ScoredPopulation& pop) {
    const auto curve = roc_curve(pop);
    KahanSum area;
    double prev_fpr = 0.0, prev_tpr = 0.0;
    for (const auto& pt : curve) {
        area.add((pt.fpr - prev_fpr) * 0.5 * (pt.tpr + prev_tpr));
        prev_fpr = pt.fpr;
        prev_tpr = pt.tpr;
    }
    return area.value();
}

struct RiskCoveragePoint {
    double coverage = 0.0;
    double risk = 0.0;
    double threshold = 0.0;
};

struct RiskCoverageResult {
    std::vector<RiskCoveragePoint> points;
    double aurc = 0.0;
};

// Selective-prediction sweep: at each distinct score threshold, coverage is
// the accepted fraction (score <= threshold) and risk the error rate among
// accepted. AURC integrates risk over coverage across the swept points.
inline RiskCoverageResult risk_coverage(const std::vector<double>& scores,
                                        const std::vector<bool>& correct) {
    if (scores.empty()) throw InputError("risk_coverage: empty input");
    if (scores.size() != correct.size())
        throw InputError("risk_coverage: scores and correctness flags differ in length");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    RiskCoverageResult result;
    const double n = static_cast<double>(scores.size());
    std::size_t accepted = 0, errors = 0;
    for (std::size_t k = 0; k < order.size();) {
        const double t = scores[order[k]];
        while (k < order.size() && scores[order[k]] == t) {
            ++accepted;
            if (!correct[order[k]]) ++errors;
            ++k;
        }
        result.points.push_back({static_cast<double>(accepted) / n,
                                 static_cast<double>(errors) / static_cast<double>(accepted), t});
    }

    KahanSum area;
    for (std::size_t i = 1; i < result.points.size(); ++i) {
        const auto& a = result.points[i - 1];
        const auto& b = result.points[i];
        area.add((b.coverage - a.coverage) * 0.5 * (a.risk + b.risk));
    }
    result.aurc = area.value();
    return result;
}

// Expected calibration error over equal-width, right-closed confidence bins
// on the maximum probability.
inline double ece(const std::vector<ProbVector>& probs, const std::vector<int>& labels,
                  int num_bins = 15) {
    if (probs.empty()) throw InputError("ece: empty input");
    if (probs.size() != labels.size()) throw InputError("ece: probs and labels differ in length");
    if (num_bins < 1) throw ParameterError("ece: need at least one bin");

    std::vector<double> conf_sum(num_bins, 0.0), acc_sum(num_bins, 0.0);
    std::vector<std::size_t> count(num_bins, 0);
    for (std::size_t k = 0; k < probs.size(); ++k) {
        const auto& p = probs[k];
        double conf = 0.0;
        std::size_t pred = 0;
        for (std::size_t i = 0; i < p.num_classes(); ++i) {
            if (p[i] > conf) {
                conf = p[i];
                pred = i;
            }
        }
        int bin = static_cast<int>(std::ceil(conf * num_bins)) - 1;
        bin = std::clamp(bin, 0, num_bins - 1);
        conf_sum[bin] += conf;
        acc_sum[bin] += (static_cast<int>(pred) == labels[k]) ? 1.0 : 0.0;
        ++count[bin];
    }

    const double n = static_cast<double>(probs.size());
    double err = 0.0;
    for (int b = 0; b < num_bins; ++b) {
        if (count[b] == 0) continue;
        const double nb = static_cast<double>(count[b]);
        err += (nb / n) * std::abs(acc_sum[b] / nb - conf_sum[b] / nb);
    }
    return err;
}

struct TemperatureFit {
    double t_star = 1.0;
    double ece_at_t = 0.0;
    double ece_at_one = 0.0;
    // Set when the objective was flat across the whole grid (e.g. constant
    // logits); the smallest grid temperature is returned in that case.
    bool degenerate = false;
};

// ECE-minimizing temperature: 100 log-spaced grid points in [0.05, 10],
// refined by golden-section around the grid minimum. Ties prefer the smaller
// temperature. Deterministic.
inline TemperatureFit calibrate_temperature(const Matrix& logits, const std::vector<int>& labels,
                                            int num_bins = 15) {
    if (logits.rows == 0) throw InputError("calibrate_temperature: empty tuning split");
    if (logits.rows < 2) throw InputError("calibrate_temperature: degenerate single-sample split");
    if (logits.rows != labels.size())
        throw InputError("calibrate_temperature: logits and labels differ in length");

    const auto ece_at = [&](double t) {
        std::vector<ProbVector> probs;
        probs.reserve(logits.rows);
        for (std::size_t r = 0; r < logits.rows; ++r) {
            std::vector<double> row(logits.row(r), logits.row(r) + logits.cols);
            probs.push_back(softmax_with_temperature(LogitVector(std::move(row)), t));
        }
        return ece(probs, labels, num_bins);
    };

    constexpr int kGridSize = 100;
    constexpr double kTmin = 0.05, kTmax = 10.0;
    std::vector<double> grid(kGridSize), value(kGridSize);
    for (int i = 0; i < kGridSize; ++i) {
        grid[i] = kTmin * std::pow(kTmax / kTmin, static_cast<double>(i) / (kGridSize - 1));
        value[i] = ece_at(grid[i]);
    }

    int best = 0;
    for (int i = 1; i < kGridSize; ++i) {
        if (value[i] < value[best]) best = i;
    }

    TemperatureFit fit;
    fit.ece_at_one = ece_at(1.0);

    const auto [vmin, vmax] = std::minmax_element(value.begin(), value.end());
    if (*vmax - *vmin < 1e-15) {
        fit.t_star = grid.front();
        fit.ece_at_t = value.front();
        fit.degenerate = true;
        return fit;
    }

    // Golden-section refinement inside the bracket around the grid minimum.
    double lo = grid[std::max(0, best - 1)];
    double hi = grid[std::min(kGridSize - 1, best + 1)];
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
    double f1 = ece_at(x1), f2 = ece_at(x2);
    for (int it = 0; it < 48; ++it) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = ece_at(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = ece_at(x2);
        }
    }
    const double refined = (f1 <= f2) ? x1 : x2;
    const double refined_value = std::min(f1, f2);
    if (refined_value < value[best]) {
        fit.t_star = refined;
        fit.ece_at_t = refined_value;
    } else {
        fit.t_star = grid[best];
        fit.ece_at_t = value[best];
    }
    return fit;
}

// Row = true class, column = predicted class.
inline Matrix confusion_matrix(const EvalDataset& dataset) {
    const std::size_t c = static_cast<std::size_t>(dataset.num_classes);
    Matrix m(c, c);
    for (const auto& s : dataset.samples)
        m(static_cast<std::size_t>(s.true_label), static_cast<std::size_t>(s.predicted_label)) += 1.0;
    return m;
}

// Everything one evaluation produces, plus enough provenance to reproduce it.
struct MetricsReport {
    std::string method;
    DetectorConfig config;
    std::uint64_t seed = 0;
    std::string source_tag;
    std::size_t n_tune = 0;
    std::size_t n_eval = 0;
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
    std::map<double, double> fpr_at_tpr_levels;
    double auroc = std::numeric_limits<double>::quiet_NaN();
    double aurc = std::numeric_limits<double>::quiet_NaN();
    double ece = std::numeric_limits<double>::quiet_NaN();
    double accuracy = std::numeric_limits<double>::quiet_NaN();
    std::vector<RocPoint> roc_points;
    std::vector<RiskCoveragePoint> rc_points;
    bool fallback_used = false;

    double fpr95() const {
        const auto it = fpr_at_tpr_levels.find(0.95);
        if (it == fpr_at_tpr_levels.end())
            throw InputError("MetricsReport: FPR@95%TPR not present");
        return it->second;
    }
};

} // namespace relu
