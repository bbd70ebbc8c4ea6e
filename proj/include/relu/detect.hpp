#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "relu/conformal.hpp"
#include "relu/core.hpp"
#include "relu/model.hpp"
#include "relu/observer.hpp"

namespace relu {

// A detector ready to score samples: the method configuration plus whatever
// was fitted on the tuning split (observer matrix, conformal quantile, or the
// binary MLP head). Scoring never touches labels.

struct FittedDetector {
    DetectorConfig config;
    std::optional<RelUMatrix> observer;
    std::optional<ConformalCalibration> conformal;
    std::optional<MlpDetector> mlp;
};

// Copy of the selected rows; the protocol works on small index subsets.
inline EvalDataset subset(const EvalDataset& ds, const std::vector<std::size_t>& idx) {
    EvalDataset out;
    out.num_classes = ds.num_classes;
    out.source_tag = ds.source_tag;
    out.logits_are_probs = ds.logits_are_probs;
    out.samples.reserve(idx.size());
    for (std::size_t k : idx) {
        if (k >= ds.samples.size()) throw InputError("subset: index out of range");
        out.samples.push_back(ds.samples[k]);
    }
    return out;
}

// The score functional whose signed input gradient drives pre-processing,
// in each method's native orientation (confidence for the max-probability
// step, uncertainty for the others).
inline LogitFunctional perturbation_functional(const FittedDetector& det) {
    switch (det.config.method) {
        case Method::Odin:
        case Method::Msp:
            return max_prob_functional(det.config.temperature);
        case Method::RelU:
            if (!det.observer) throw InputError("REL_U detector has no fitted observer matrix");
            return bilinear_functional(det.config.temperature, det.observer->entries);
        default:
            return gini_functional(det.config.temperature);
    }
}

// Scores one sample in canonical orientation (higher = more uncertain).
// With epsilon > 0 the input is perturbed first, which requires features and
// the classifier model.
inline double detector_score(const FittedDetector& det, const EvalSample& sample,
                             const ClassifierModel* model, bool logits_are_probs) {
    const DetectorConfig& cfg = det.config;
    std::vector<double> logits = sample.logits.values();

    if (cfg.epsilon > 0.0) {
        if (logits_are_probs)
            throw InputError("input perturbation requires logits and features, not probabilities");
        if (model == nullptr)
            throw InputError("input perturbation requires the classifier model");
        if (!sample.has_features())
            throw InputError("input perturbation requires sample features");
        const auto perturbed =
            perturb_input(*model, sample.features, cfg.epsilon, perturbation_functional(det));
        logits = model->forward(perturbed);
        for (double v : logits) {
            if (!std::isfinite(v)) throw NumericalError("detector_score: perturbed logits not finite");
        }
    }

    const auto probs_at = [&](double t) {
        if (logits_are_probs) {
            if (t != 1.0)
                throw ParameterError("temperature scaling requires logits, not probabilities");
            return ProbVector::renormalized(logits);
        }
        return softmax_with_temperature(LogitVector(logits), t);
    };

    switch (cfg.method) {
        case Method::Msp:
        case Method::Odin:
            return msp_uncertainty(probs_at(cfg.temperature));
        case Method::Entropy:
            return shannon_entropy(probs_at(cfg.temperature));
        case Method::GiniDoctor:
            return gini_score(probs_at(cfg.temperature));
        case Method::RelU:
            if (!det.observer) throw InputError("REL_U detector has no fitted observer matrix");
            return bilinear_form(probs_at(cfg.temperature), det.observer->entries);
        case Method::Mlp:
            if (!det.mlp) throw InputError("MLP detector has not been trained");
            return det.mlp->error_probability(logits);
        case Method::Conformal:
            if (!det.conformal) throw InputError("conformal detector has not been calibrated");
            return conformal_reject_score(probs_at(1.0), *det.conformal);
    }
    throw InputError("detector_score: unknown method");
}

// Everything fit_detector needs to build artifacts on a tuning split.
struct FitContext {
    const EvalDataset* tune_data = nullptr;      // primary tuning samples
    const EvalDataset* tune_secondary = nullptr; // secondary tuning samples (membership mode)
    GroupMode mode = GroupMode::Correctness;
    double norm_budget = 1.0;
    MlpDetectorOptions mlp_options;
};

inline FittedDetector fit_detector(const DetectorConfig& cfg, const FitContext& ctx) {
    cfg.validate();
    if (ctx.tune_data == nullptr) throw InputError("fit_detector: missing tuning data");
    FittedDetector det;
    det.config = cfg;

    switch (cfg.method) {
        case Method::RelU: {
            const auto groups =
                assign_groups(*ctx.tune_data, ctx.mode, ctx.tune_secondary, cfg.temperature);
            det.observer = fit_d_matrix(groups, cfg.lambda, ctx.norm_budget);
            break;
        }
        case Method::Mlp: {
            // Representation: the raw model output rows, positives first.
            std::vector<const EvalSample*> pos, neg;
            if (ctx.mode == GroupMode::Correctness) {
                for (const auto& s : ctx.tune_data->samples)
                    (s.correct ? pos : neg).push_back(&s);
            } else {
                if (ctx.tune_secondary == nullptr)
                    throw InputError("MLP fitting in membership mode needs a secondary dataset");
                for (const auto& s : ctx.tune_data->samples) pos.push_back(&s);
                for (const auto& s : ctx.tune_secondary->samples) neg.push_back(&s);
            }
            if (pos.empty() || neg.empty())
                throw InputError("MLP detector needs both outcome classes in the tuning split");
            const std::size_t c = static_cast<std::size_t>(ctx.tune_data->num_classes);
            Matrix pos_m(pos.size(), c), neg_m(neg.size(), c);
            for (std::size_t i = 0; i < pos.size(); ++i)
                for (std::size_t j = 0; j < c; ++j) pos_m(i, j) = pos[i]->logits[j];
            for (std::size_t i = 0; i < neg.size(); ++i)
                for (std::size_t j = 0; j < c; ++j) neg_m(i, j) = neg[i]->logits[j];
            det.mlp = train_mlp_detector(pos_m, neg_m, ctx.mlp_options);
            break;
        }
        case Method::Conformal: {
            std::vector<ProbVector> probs;
            std::vector<int> labels;
            probs.reserve(ctx.tune_data->size());
            for (const auto& s : ctx.tune_data->samples) {
                probs.push_back(detail::probs_for_sample(s, 1.0, ctx.tune_data->logits_are_probs));
                labels.push_back(s.true_label);
            }
            det.conformal = conformal_calibrate(probs, labels, cfg.alpha);
            break;
        }
        default:
            break; // MSP / ENTROPY / ODIN / Doctor carry no fitted state
    }
    return det;
}

} // namespace relu
