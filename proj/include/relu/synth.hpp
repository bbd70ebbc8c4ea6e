#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "relu/core.hpp"
#include "relu/matrix.hpp"
#include "relu/model.hpp"
#include "relu/rng.hpp"

namespace relu {

// Gaussian-mixture classification data with controllable pairwise class
// confusion: a desk-scale stand-in for a real model's error structure.

struct ConfusionPair {
    int class_a = 0;
    int class_b = 1;
    // Fraction of the way both means move toward their midpoint; 0 leaves
    // them untouched, 1 makes the pair indistinguishable. Values above 1 clamp.
    double strength = 0.0;
    // Which splits see the shifted means. A pair applied only to evaluation
    // makes the classifier overconfident there (confident errors); a pair
    // applied only to training makes it underconfident (benign uncertainty).
    bool in_train = true;
    bool in_eval = true;
};

struct SynthConfig {
    int num_classes = 5;
    int feature_dim = 8;
    double mean_radius = 2.5; // distance of each class mean from the origin
    double cov_scale = 1.0;   // isotropic noise scale
    std::vector<ConfusionPair> confusion_pairs;
    std::size_t train_count = 2000;
    std::size_t tune_count = 1000;
    std::size_t test_count = 4000;
    std::uint64_t seed = 7;

    void validate() const {
        if (num_classes < 2) throw InputError("SynthConfig: num_classes must be >= 2");
        if (feature_dim < 1) throw InputError("SynthConfig: feature_dim must be >= 1");
        if (train_count == 0 || tune_count == 0 || test_count == 0)
            throw InputError("SynthConfig: split counts must be positive");
        for (const auto& pair : confusion_pairs) {
            if (pair.class_a < 0 || pair.class_a >= num_classes || pair.class_b < 0 ||
                pair.class_b >= num_classes || pair.class_a == pair.class_b)
                throw InputError("SynthConfig: confusion pair references invalid classes");
            if (!(pair.strength >= 0.0)) throw InputError("SynthConfig: overlap strength must be >= 0");
        }
    }
};

struct SynthData {
    Matrix features; // N x d
    std::vector<int> labels;
};

struct SynthSplits {
    SynthData train;
    SynthData tune;
    SynthData test;
    int num_classes = 0;
    std::string tag;
    std::vector<std::vector<double>> class_means;
};

namespace detail {

inline std::vector<std::vector<double>> base_means_for(const SynthConfig& cfg) {
    const std::size_t c = static_cast<std::size_t>(cfg.num_classes);
    const std::size_t d = static_cast<std::size_t>(cfg.feature_dim);
    std::vector<std::vector<double>> means(c, std::vector<double>(d, 0.0));
    if (d >= c) {
        // Orthogonal placement: equidistant pairs, so confusion comes only
        // from the configured pairs.
        for (std::size_t k = 0; k < c; ++k) means[k][k] = cfg.mean_radius;
    } else {
        Rng rng(derive_seed(cfg.seed, "synth-means"));
        for (auto& mean : means) {
            double norm_sq = 0.0;
            for (double& v : mean) {
                v = rng.normal();
                norm_sq += v * v;
            }
            const double scale = cfg.mean_radius / std::sqrt(std::max(norm_sq, 1e-300));
            for (double& v : mean) v *= scale;
        }
    }
    return means;
}

inline std::vector<std::vector<double>> shifted_means_for(const SynthConfig& cfg, bool train_split) {
    auto means = base_means_for(cfg);
    for (const auto& pair : cfg.confusion_pairs) {
        if (train_split ? !pair.in_train : !pair.in_eval) continue;
        auto& a = means[static_cast<std::size_t>(pair.class_a)];
        auto& b = means[static_cast<std::size_t>(pair.class_b)];
        const double t = std::min(pair.strength, 1.0);
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double mid = 0.5 * (a[i] + b[i]);
            a[i] += t * (mid - a[i]);
            b[i] += t * (mid - b[i]);
        }
    }
    return means;
}

inline SynthData generate_split(const SynthConfig& cfg,
                                const std::vector<std::vector<double>>& means, std::size_t count,
                                std::uint64_t split_seed) {
    const std::size_t d = static_cast<std::size_t>(cfg.feature_dim);
    SynthData out;
    out.features = Matrix(count, d);
    out.labels.resize(count);
    Rng rng(split_seed);
    for (std::size_t k = 0; k < count; ++k) {
        // Round-robin labels keep every split balanced to within one sample.
        const int y = static_cast<int>(k % static_cast<std::size_t>(cfg.num_classes));
        out.labels[k] = y;
        const auto& mean = means[static_cast<std::size_t>(y)];
        double* row = out.features.row(k);
        for (std::size_t j = 0; j < d; ++j) row[j] = mean[j] + cfg.cov_scale * rng.normal();
    }
    return out;
}

} // namespace detail

// Reproducible for a fixed seed: each split draws from its own derived
// stream, so resizing one split never disturbs another.
inline SynthSplits synth_generate(const SynthConfig& cfg) {
    cfg.validate();
    SynthSplits splits;
    splits.num_classes = cfg.num_classes;
    splits.class_means = detail::shifted_means_for(cfg, /*train_split=*/false);
    const auto train_means = detail::shifted_means_for(cfg, /*train_split=*/true);
    splits.train = detail::generate_split(cfg, train_means, cfg.train_count,
                                          derive_seed(cfg.seed, "synth-train"));
    splits.tune = detail::generate_split(cfg, splits.class_means, cfg.tune_count,
                                         derive_seed(cfg.seed, "synth-tune"));
    splits.test = detail::generate_split(cfg, splits.class_means, cfg.test_count,
                                         derive_seed(cfg.seed, "synth-test"));
    splits.tag = "synth(C=" + std::to_string(cfg.num_classes) + ",d=" + std::to_string(cfg.feature_dim) +
                 ",seed=" + std::to_string(cfg.seed) + ")";
    return splits;
}

// Runs the model over a feature table and assembles the evaluated dataset
// (logits, labels, correctness) consumed by the detection pipeline.
inline EvalDataset infer_dataset(const ClassifierModel& model, const Matrix& features,
                                 const std::vector<int>& labels, const std::string& tag) {
    if (features.rows != labels.size())
        throw InputError("infer_dataset: features and labels differ in length");
    EvalDataset ds;
    ds.num_classes = model.num_classes;
    ds.source_tag = tag;
    ds.samples.reserve(features.rows);
    for (std::size_t k = 0; k < features.rows; ++k) {
        std::vector<double> x(features.row(k), features.row(k) + features.cols);
        std::vector<double> z = model.forward(x);
        ds.samples.emplace_back(std::move(x), LogitVector(std::move(z)), labels[k]);
    }
    ds.validate();
    return ds;
}

// The built-in benchmark: five classes whose confidence geometry disagrees
// with the true error geometry in opposite directions on two pairs. Pair
// (0, 1) overlaps only at evaluation time, so the classifier is confidently
// wrong there and errors concentrate on that confusion-matrix cell. Pair
// (2, 3) overlapped only during training, so the classifier hedges between
// the two while being almost always right: benign uncertainty a uniform
// observer cannot discount.
inline SynthConfig asymmetric_confusion_benchmark(std::uint64_t seed = 7) {
    SynthConfig cfg;
    cfg.num_classes = 5;
    cfg.feature_dim = 8;
    cfg.mean_radius = 4.5;
    cfg.cov_scale = 1.0;
    cfg.confusion_pairs = {{0, 1, 0.70, false, true}, {2, 3, 0.95, true, false}};
    cfg.train_count = 2500;
    cfg.tune_count = 1000;
    cfg.test_count = 4000;
    cfg.seed = seed;
    return cfg;
}

} // namespace relu
