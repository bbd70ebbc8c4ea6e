#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "relu/detect.hpp"
#include "relu/metrics.hpp"
#include "relu/rng.hpp"

namespace relu {

// The experimental protocol: seeded tuning/evaluation splits, per-method grid
// search on the tuning split, evaluation on the disjoint remainder, and the
// matched / mismatch / ablation drivers. Everything here is a pure function
// of (inputs, seeds).

struct SplitSpec {
    double fraction = 0.5; // tuning share
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    bool stratify = true; // by correctness

    void validate() const {
        if (!(fraction > 0.0 && fraction < 1.0))
            throw ParameterError("SplitSpec: fraction must lie in (0, 1)");
        if (seeds.empty()) throw ParameterError("SplitSpec: need at least one seed");
        for (std::size_t i = 0; i < seeds.size(); ++i)
            for (std::size_t j = i + 1; j < seeds.size(); ++j)
                if (seeds[i] == seeds[j]) throw ParameterError("SplitSpec: seeds must be distinct");
    }
};

struct IndexSplit {
    std::vector<std::size_t> tune_idx;
    std::vector<std::size_t> eval_idx;
    std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<std::size_t> shuffled_indices(const std::vector<std::size_t>& src, Rng& rng) {
    std::vector<std::size_t> out = src;
    rng.shuffle(out);
    return out;
}

} // namespace detail

// One deterministic tuning/evaluation partition. Stratification keeps the
// correct/incorrect ratio of the tuning side within one sample per group.
inline IndexSplit make_split(const EvalDataset& ds, double fraction, bool stratify,
                             std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ParameterError("make_split: fraction must lie in (0, 1)");
    if (ds.size() < 2) throw InputError("make_split: dataset too small to split");

    IndexSplit split;
    split.seed = seed;
    Rng rng(derive_seed(seed, "split"));

    const auto take = [&](const std::vector<std::size_t>& group) {
        const auto shuffled = detail::shuffled_indices(group, rng);
        const std::size_t n_tune = static_cast<std::size_t>(
            std::llround(fraction * static_cast<double>(group.size())));
        for (std::size_t i = 0; i < shuffled.size(); ++i)
            (i < n_tune ? split.tune_idx : split.eval_idx).push_back(shuffled[i]);
    };

    if (stratify) {
        std::vector<std::size_t> correct, wrong;
        for (std::size_t i = 0; i < ds.size(); ++i)
            (ds.samples[i].correct ? correct : wrong).push_back(i);
        take(correct);
        take(wrong);
    } else {
        std::vector<std::size_t> all(ds.size());
        std::iota(all.begin(), all.end(), 0);
        take(all);
    }

    if (split.tune_idx.empty() || split.eval_idx.empty())
        throw InputError("make_split: fraction leaves an empty side");
    std::sort(split.tune_idx.begin(), split.tune_idx.end());
    std::sort(split.eval_idx.begin(), split.eval_idx.end());
    return split;
}

inline std::vector<IndexSplit> make_splits(const EvalDataset& ds, const SplitSpec& spec) {
    spec.validate();
    std::vector<IndexSplit> splits;
    splits.reserve(spec.seeds.size());
    for (std::uint64_t seed : spec.seeds)
        splits.push_back(make_split(ds, spec.fraction, spec.stratify, seed));
    return splits;
}

struct GridSpec {
    std::vector<double> temperatures = {0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 3.0, 5.0};
    std::vector<double> epsilons = {0.0, 2e-4, 5e-4, 1e-3, 2e-3, 3.5e-3};
    std::vector<double> lambdas = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    double tpr_level = 0.95; // selection metric: FPR at this TPR on the tuning split

    void validate() const {
        if (temperatures.empty() || epsilons.empty() || lambdas.empty())
            throw ParameterError("GridSpec: grids must be nonempty");
        for (double t : temperatures)
            if (!(t > 0.0)) throw ParameterError("GridSpec: temperatures must be positive");
        for (double e : epsilons)
            if (!(e >= 0.0)) throw ParameterError("GridSpec: epsilons must be non-negative");
        for (double l : lambdas)
            if (!(l >= 0.0 && l <= 1.0)) throw ParameterError("GridSpec: lambdas must lie in [0, 1]");
        if (!(tpr_level > 0.0 && tpr_level <= 1.0))
            throw ParameterError("GridSpec: tpr level must lie in (0, 1]");
    }
};

// One detection problem instance: dataset(s), optional model, the seed's
// index split, and fitting options.
struct DetectionTask {
    const EvalDataset* dataset = nullptr;
    const ClassifierModel* model = nullptr;  // required only when epsilon > 0
    const EvalDataset* secondary = nullptr;  // membership mode only
    GroupMode mode = GroupMode::Correctness;
    IndexSplit split;
    IndexSplit secondary_split;
    double alpha = 0.1;
    double norm_budget = 1.0;
    MlpDetectorOptions mlp_options;

    void validate() const {
        if (dataset == nullptr) throw InputError("DetectionTask: dataset missing");
        if (mode == GroupMode::Membership && secondary == nullptr)
            throw InputError("DetectionTask: membership mode needs a secondary dataset");
    }
};

namespace detail {

inline void require_disjoint(const std::vector<std::size_t>& tune,
                             const std::vector<std::size_t>& eval, const char* what) {
    std::vector<std::size_t> overlap;
    std::set_intersection(tune.begin(), tune.end(), eval.begin(), eval.end(),
                          std::back_inserter(overlap));
    if (!overlap.empty())
        throw ProtocolError(std::string("tuning/evaluation overlap detected in ") + what + " at index " +
                            std::to_string(overlap.front()));
}

struct ScoredSplit {
    ScoredPopulation pop;
    std::vector<double> scores;    // primary-then-secondary order
    std::vector<bool> positive;    // correct (matched) or in-distribution (membership)
};

inline ScoredSplit score_indices(const FittedDetector& det, const DetectionTask& task,
                                 const std::vector<std::size_t>& idx,
                                 const std::vector<std::size_t>& sec_idx) {
    ScoredSplit out;
    const bool membership = task.mode == GroupMode::Membership;
    for (std::size_t k : idx) {
        const auto& s = task.dataset->samples[k];
        const double score = detector_score(det, s, task.model, task.dataset->logits_are_probs);
        const bool positive = membership ? true : s.correct;
        out.scores.push_back(score);
        out.positive.push_back(positive);
        (positive ? out.pop.pos_scores : out.pop.neg_scores).push_back(score);
    }
    if (membership) {
        for (std::size_t k : sec_idx) {
            const auto& s = task.secondary->samples[k];
            const double score = detector_score(det, s, task.model, task.secondary->logits_are_probs);
            out.scores.push_back(score);
            out.positive.push_back(false);
            out.pop.neg_scores.push_back(score);
        }
    }
    return out;
}

inline FitContext fit_context_for(const DetectionTask& task, const EvalDataset& tune_primary,
                                  const EvalDataset* tune_secondary) {
    FitContext ctx;
    ctx.tune_data = &tune_primary;
    ctx.tune_secondary = tune_secondary;
    ctx.mode = task.mode;
    ctx.norm_budget = task.norm_budget;
    ctx.mlp_options = task.mlp_options;
    return ctx;
}

} // namespace detail

struct GridCell {
    DetectorConfig config;
    double tuning_metric = std::numeric_limits<double>::quiet_NaN();
    bool failed = false;
    std::string error;
};

struct GridSearchResult {
    FittedDetector best;
    double best_metric = std::numeric_limits<double>::quiet_NaN();
    std::vector<GridCell> cells;
    std::size_t cells_failed = 0;
};

// Hyperparameter combinations a method actually tunes: MSP, ENTROPY, MLP and
// CONFORMAL are fixed at the identity config; ODIN and Doctor sweep (T, eps);
// Rel-U additionally sweeps lambda.
inline std::vector<DetectorConfig> grid_cells_for(Method method, const GridSpec& grid,
                                                  double alpha) {
    std::vector<DetectorConfig> cells;
    DetectorConfig base;
    base.method = method;
    base.alpha = alpha;
    switch (method) {
        case Method::Msp:
        case Method::Entropy:
        case Method::Mlp:
        case Method::Conformal:
            cells.push_back(base);
            break;
        case Method::Odin:
        case Method::GiniDoctor:
            for (double t : grid.temperatures)
                for (double e : grid.epsilons) {
                    base.temperature = t;
                    base.epsilon = e;
                    cells.push_back(base);
                }
            break;
        case Method::RelU:
            for (double t : grid.temperatures)
                for (double e : grid.epsilons)
                    for (double l : grid.lambdas) {
                        base.temperature = t;
                        base.epsilon = e;
                        base.lambda = l;
                        cells.push_back(base);
                    }
            break;
    }
    return cells;
}

// Exhaustive search over the method's grid, selecting by FPR@TPR on the
// tuning split. Ties prefer the least intervention: lower epsilon, then T
// closest to 1, then lower lambda. Cells whose fit fails are recorded and
// skipped; if every cell fails the search itself fails.
inline GridSearchResult grid_search(Method method, const DetectionTask& task, const GridSpec& grid) {
    task.validate();
    grid.validate();

    const EvalDataset tune_primary = subset(*task.dataset, task.split.tune_idx);
    EvalDataset tune_secondary_storage;
    const EvalDataset* tune_secondary = nullptr;
    if (task.mode == GroupMode::Membership) {
        tune_secondary_storage = subset(*task.secondary, task.secondary_split.tune_idx);
        tune_secondary = &tune_secondary_storage;
    }

    GridSearchResult result;
    bool have_best = false;
    std::array<double, 4> best_key = {0, 0, 0, 0};
    std::string first_error;

    for (const DetectorConfig& cfg : grid_cells_for(method, grid, task.alpha)) {
        GridCell cell;
        cell.config = cfg;
        try {
            const FittedDetector det =
                fit_detector(cfg, detail::fit_context_for(task, tune_primary, tune_secondary));
            const auto scored =
                detail::score_indices(det, task, task.split.tune_idx, task.secondary_split.tune_idx);
            cell.tuning_metric = fpr_at_tpr(scored.pop, grid.tpr_level);

            const std::array<double, 4> key = {cell.tuning_metric, cfg.epsilon,
                                               std::abs(cfg.temperature - 1.0), cfg.lambda};
            if (!have_best || key < best_key) {
                have_best = true;
                best_key = key;
                result.best = det;
                result.best_metric = cell.tuning_metric;
            }
        } catch (const std::exception& e) {
            cell.failed = true;
            cell.error = e.what();
            ++result.cells_failed;
            if (first_error.empty()) first_error = e.what();
        }
        result.cells.push_back(std::move(cell));
    }

    if (!have_best)
        throw InputError("grid_search: every cell failed for " + std::string(method_name(method)) +
                         " (first error: " + first_error + ")");
    return result;
}

// Scores the evaluation split with a fitted detector and assembles the full
// report. Refuses to run when tuning and evaluation indices overlap.
inline MetricsReport evaluate_detector(const FittedDetector& det, const DetectionTask& task) {
    task.validate();
    detail::require_disjoint(task.split.tune_idx, task.split.eval_idx, "primary dataset");
    if (task.mode == GroupMode::Membership)
        detail::require_disjoint(task.secondary_split.tune_idx, task.secondary_split.eval_idx,
                                 "secondary dataset");

    const auto scored =
        detail::score_indices(det, task, task.split.eval_idx, task.secondary_split.eval_idx);

    MetricsReport report;
    report.method = method_name(det.config.method);
    report.config = det.config;
    report.seed = task.split.seed;
    report.source_tag = task.dataset->source_tag;
    report.n_tune = task.split.tune_idx.size() +
                    (task.mode == GroupMode::Membership ? task.secondary_split.tune_idx.size() : 0);
    report.n_eval = scored.scores.size();
    report.n_pos = scored.pop.pos_scores.size();
    report.n_neg = scored.pop.neg_scores.size();
    report.fallback_used = det.observer.has_value() && det.observer->fallback;

    for (double level : {0.80, 0.90, 0.95, 0.99})
        report.fpr_at_tpr_levels[level] = fpr_at_tpr(scored.pop, level);
    report.auroc = auroc(scored.pop);
    report.roc_points = roc_curve(scored.pop);

    const auto rc = risk_coverage(scored.scores, scored.positive);
    report.aurc = rc.aurc;
    report.rc_points = rc.points;

    std::size_t n_correct = 0;
    for (bool b : scored.positive) n_correct += b;
    report.accuracy = static_cast<double>(n_correct) / static_cast<double>(scored.positive.size());

    if (task.mode == GroupMode::Correctness &&
        (!task.dataset->logits_are_probs || det.config.temperature == 1.0)) {
        // Calibration of the probabilities actually used for scoring.
        std::vector<ProbVector> probs;
        std::vector<int> labels;
        probs.reserve(task.split.eval_idx.size());
        for (std::size_t k : task.split.eval_idx) {
            const auto& s = task.dataset->samples[k];
            probs.push_back(detail::probs_for_sample(s, det.config.temperature,
                                                     task.dataset->logits_are_probs));
            labels.push_back(s.true_label);
        }
        report.ece = ece(probs, labels);
    }
    return report;
}

struct SeedOutcome {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    MetricsReport report;
    std::optional<FittedDetector> detector; // the artifacts actually evaluated
};

struct Aggregate {
    std::size_t effective_seeds = 0;
    double mean_fpr95 = std::numeric_limits<double>::quiet_NaN();
    double std_fpr95 = std::numeric_limits<double>::quiet_NaN();
    double mean_auroc = std::numeric_limits<double>::quiet_NaN();
    double std_auroc = std::numeric_limits<double>::quiet_NaN();
    double mean_aurc = std::numeric_limits<double>::quiet_NaN();
    double std_aurc = std::numeric_limits<double>::quiet_NaN();
};

struct MethodResult {
    Method method = Method::Msp;
    std::vector<SeedOutcome> outcomes;
    Aggregate aggregate;
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& values) {
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    if (values.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0))};
}

// Failed seeds are reported but excluded from the aggregate.
inline Aggregate aggregate_outcomes(const std::vector<SeedOutcome>& outcomes) {
    Aggregate agg;
    std::vector<double> fpr, roc, rc;
    for (const auto& o : outcomes) {
        if (!o.ok) continue;
        fpr.push_back(o.report.fpr95());
        roc.push_back(o.report.auroc);
        rc.push_back(o.report.aurc);
    }
    agg.effective_seeds = fpr.size();
    if (!fpr.empty()) {
        std::tie(agg.mean_fpr95, agg.std_fpr95) = mean_std(fpr);
        std::tie(agg.mean_auroc, agg.std_auroc) = mean_std(roc);
        std::tie(agg.mean_aurc, agg.std_aurc) = mean_std(rc);
    }
    return agg;
}

} // namespace detail

struct ExperimentOptions {
    double alpha = 0.1;
    double norm_budget = 1.0;
    MlpDetectorOptions mlp_options;
};

struct ExperimentResult {
    std::string name;
    std::string protocol; // "matched" or "mismatch"
    SplitSpec splits;
    GridSpec grid;
    std::vector<MethodResult> methods;
};

// Matched protocol: per seed, split -> grid search on the tuning half ->
// evaluate on the disjoint half; aggregate mean/stddev per method.
inline ExperimentResult run_matched_experiment(const ClassifierModel* model,
                                               const EvalDataset& dataset, const SplitSpec& spec,
                                               const GridSpec& grid,
                                               const std::vector<Method>& methods,
                                               const ExperimentOptions& options = {}) {
    spec.validate();
    grid.validate();
    const auto splits = make_splits(dataset, spec);

    ExperimentResult result;
    result.protocol = "matched";
    result.splits = spec;
    result.grid = grid;

    for (Method method : methods) {
        MethodResult mr;
        mr.method = method;
        for (const auto& split : splits) {
            SeedOutcome outcome;
            outcome.seed = split.seed;
            try {
                DetectionTask task;
                task.dataset = &dataset;
                task.model = model;
                task.split = split;
                task.alpha = options.alpha;
                task.norm_budget = options.norm_budget;
                task.mlp_options = options.mlp_options;
                task.mlp_options.seed = derive_seed(split.seed, "mlp-detector");

                const auto search = grid_search(method, task, grid);
                outcome.report = evaluate_detector(search.best, task);
                outcome.detector = search.best;
                outcome.ok = true;
            } catch (const std::exception& e) {
                outcome.error = e.what();
            }
            mr.outcomes.push_back(std::move(outcome));
        }
        mr.aggregate = detail::aggregate_outcomes(mr.outcomes);
        result.methods.push_back(std::move(mr));
    }
    return result;
}

// Mismatch protocol: the secondary dataset supplies the negatives. Both
// datasets are split per seed; the secondary contribution is truncated to the
// primary side's count so the populations stay balanced.
inline ExperimentResult run_mismatch_experiment(const ClassifierModel* model,
                                                const EvalDataset& primary,
                                                const EvalDataset& secondary, const SplitSpec& spec,
                                                const GridSpec& grid,
                                                const std::vector<Method>& methods,
                                                const ExperimentOptions& options = {}) {
    spec.validate();
    grid.validate();

    ExperimentResult result;
    result.protocol = "mismatch";
    result.splits = spec;
    result.grid = grid;

    for (Method method : methods) {
        MethodResult mr;
        mr.method = method;
        for (std::uint64_t seed : spec.seeds) {
            SeedOutcome outcome;
            outcome.seed = seed;
            try {
                // Membership grouping does not depend on correctness, so the
                // primary split is unstratified here.
                IndexSplit split = make_split(primary, spec.fraction, false, seed);
                IndexSplit sec_split =
                    make_split(secondary, spec.fraction, false, derive_seed(seed, "secondary"));

                const auto truncate = [](std::vector<std::size_t>& idx, std::size_t n,
                                         const char* side) {
                    if (idx.size() < n)
                        throw InputError(std::string("insufficient secondary samples for the ") +
                                         side + " split");
                    idx.resize(n);
                    std::sort(idx.begin(), idx.end());
                };
                truncate(sec_split.tune_idx, split.tune_idx.size(), "tuning");
                truncate(sec_split.eval_idx, split.eval_idx.size(), "evaluation");

                DetectionTask task;
                task.dataset = &primary;
                task.model = model;
                task.secondary = &secondary;
                task.mode = GroupMode::Membership;
                task.split = split;
                task.secondary_split = sec_split;
                task.alpha = options.alpha;
                task.norm_budget = options.norm_budget;
                task.mlp_options = options.mlp_options;
                task.mlp_options.seed = derive_seed(seed, "mlp-detector");

                const auto search = grid_search(method, task, grid);
                outcome.report = evaluate_detector(search.best, task);
                outcome.detector = search.best;
                outcome.ok = true;
            } catch (const std::exception& e) {
                outcome.error = e.what();
            }
            mr.outcomes.push_back(std::move(outcome));
        }
        mr.aggregate = detail::aggregate_outcomes(mr.outcomes);
        result.methods.push_back(std::move(mr));
    }
    return result;
}

// Validation-size sweep for the mismatch protocol: one full run per tuning
// fraction, every fraction evaluated over the same seed list.
struct FractionSweepEntry {
    double fraction = 0.5;
    ExperimentResult result;
};

inline std::vector<FractionSweepEntry> run_mismatch_split_sweep(
    const ClassifierModel* model, const EvalDataset& primary, const EvalDataset& secondary,
    const std::vector<double>& fractions, const SplitSpec& base_spec, const GridSpec& grid,
    const std::vector<Method>& methods, const ExperimentOptions& options = {}) {
    if (fractions.empty()) throw ParameterError("run_mismatch_split_sweep: no fractions given");
    std::vector<FractionSweepEntry> sweep;
    for (double fraction : fractions) {
        SplitSpec spec = base_spec;
        spec.fraction = fraction;
        FractionSweepEntry entry;
        entry.fraction = fraction;
        entry.result =
            run_mismatch_experiment(model, primary, secondary, spec, grid, methods, options);
        sweep.push_back(std::move(entry));
    }
    return sweep;
}

enum class AblationAxis { Temperature, Epsilon, Lambda, SplitSize };

inline const char* ablation_axis_name(AblationAxis a) {
    switch (a) {
        case AblationAxis::Temperature: return "T";
        case AblationAxis::Epsilon: return "epsilon";
        case AblationAxis::Lambda: return "lambda";
        case AblationAxis::SplitSize: return "split_size";
    }
    return "?";
}

inline AblationAxis ablation_axis_from_name(const std::string& name) {
    if (name == "T" || name == "temperature") return AblationAxis::Temperature;
    if (name == "epsilon" || name == "eps") return AblationAxis::Epsilon;
    if (name == "lambda") return AblationAxis::Lambda;
    if (name == "split_size") return AblationAxis::SplitSize;
    throw InputError("unknown ablation axis: " + name);
}

struct AblationSeries {
    Method method = Method::RelU;
    std::vector<MethodResult> per_value; // aligned with AblationResult::values
};

struct AblationResult {
    AblationAxis axis = AblationAxis::Lambda;
    std::vector<double> values;
    SplitSpec splits;
    std::vector<AblationSeries> series;
};

// Sweeps one hyperparameter axis with the others pinned at the defaults
// T=1, eps=0, lambda=0.5. No grid search: each value is evaluated directly,
// one report per (method, value, seed).
inline AblationResult run_ablation(const ClassifierModel* model, const EvalDataset& dataset,
                                   AblationAxis axis, const std::vector<double>& values,
                                   const SplitSpec& spec, const std::vector<Method>& methods,
                                   const ExperimentOptions& options = {}) {
    spec.validate();
    if (values.empty()) throw ParameterError("run_ablation: need at least one axis value");

    AblationResult result;
    result.axis = axis;
    result.values = values;
    result.splits = spec;

    for (Method method : methods) {
        AblationSeries series;
        series.method = method;
        for (double value : values) {
            SplitSpec value_spec = spec;
            if (axis == AblationAxis::SplitSize) {
                if (!(value > 0.0 && value < 1.0))
                    throw ParameterError("run_ablation: split_size values must lie in (0, 1)");
                value_spec.fraction = value;
            }

            DetectorConfig cfg;
            cfg.method = method;
            cfg.temperature = axis == AblationAxis::Temperature ? value : 1.0;
            cfg.epsilon = axis == AblationAxis::Epsilon ? value : 0.0;
            cfg.lambda = axis == AblationAxis::Lambda ? value : 0.5;
            cfg.alpha = options.alpha;
            cfg.validate();

            MethodResult mr;
            mr.method = method;
            for (std::uint64_t seed : value_spec.seeds) {
                SeedOutcome outcome;
                outcome.seed = seed;
                try {
                    DetectionTask task;
                    task.dataset = &dataset;
                    task.model = model;
                    task.split = make_split(dataset, value_spec.fraction, value_spec.stratify, seed);
                    task.alpha = options.alpha;
                    task.norm_budget = options.norm_budget;
                    task.mlp_options = options.mlp_options;
                    task.mlp_options.seed = derive_seed(seed, "mlp-detector");

                    const EvalDataset tune_primary = subset(dataset, task.split.tune_idx);
                    const FittedDetector det =
                        fit_detector(cfg, detail::fit_context_for(task, tune_primary, nullptr));
                    outcome.report = evaluate_detector(det, task);
                    outcome.detector = det;
                    outcome.ok = true;
                } catch (const std::exception& e) {
                    outcome.error = e.what();
                }
                mr.outcomes.push_back(std::move(outcome));
            }
            mr.aggregate = detail::aggregate_outcomes(mr.outcomes);
            series.per_value.push_back(std::move(mr));
        }
        result.series.push_back(std::move(series));
    }
    return result;
}

} // namespace relu
