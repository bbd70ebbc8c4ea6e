#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "relu/errors.hpp"

namespace relu {

// Absolute tolerance on the sum-to-one invariant of a probability vector.
inline constexpr double kProbSumTol = 1e-9;
// Rows loaded from disk as probabilities are renormalized when their sum is
// within this tolerance of one, and rejected otherwise.
inline constexpr double kProbRenormTol = 1e-6;

// Class indices are 0-based throughout the library and in every file format.

// A categorical distribution over C >= 2 classes: the model's soft prediction.
class ProbVector {
public:
    ProbVector() = default;

    // Validates the invariants strictly (entries >= 0, sum within 1e-9 of 1).
    explicit ProbVector(std::vector<double> probs) : probs_(std::move(probs)) {
        if (probs_.size() < 2) throw InputError("ProbVector: need at least 2 classes");
        double sum = 0.0;
        for (double p : probs_) {
            if (!(p >= 0.0)) throw InputError("ProbVector: negative or NaN entry");
            sum += p;
        }
        if (std::abs(sum - 1.0) > kProbSumTol)
            throw InputError("ProbVector: entries sum to " + std::to_string(sum) + ", expected 1");
    }

    // Loader path: accepts a row whose sum is within 1e-6 of one and
    // renormalizes it; anything further off is rejected.
    static ProbVector renormalized(std::vector<double> probs) {
        double sum = 0.0;
        for (double p : probs) {
            if (!(p >= 0.0)) throw InputError("probability row: negative or NaN entry");
            sum += p;
        }
        if (std::abs(sum - 1.0) > kProbRenormTol)
            throw InputError("probability row sums to " + std::to_string(sum) +
                             ", outside renormalization tolerance " + std::to_string(kProbRenormTol));
        for (double& p : probs) p /= sum;
        return ProbVector(std::move(probs));
    }

    std::size_t num_classes() const { return probs_.size(); }
    double operator[](std::size_t i) const { return probs_[i]; }
    const std::vector<double>& values() const { return probs_; }

private:
    std::vector<double> probs_;
};

// Raw model outputs; all entries must be finite.
class LogitVector {
public:
    LogitVector() = default;

    explicit LogitVector(std::vector<double> logits) : logits_(std::move(logits)) {
        for (double z : logits_) {
            if (!std::isfinite(z)) throw InputError("LogitVector: non-finite entry");
        }
    }

    std::size_t size() const { return logits_.size(); }
    double operator[](std::size_t i) const { return logits_[i]; }
    const std::vector<double>& values() const { return logits_; }

private:
    std::vector<double> logits_;
};

// Lowest index attaining the maximum. Ties break toward the lower class index
// so predictions are reproducible across platforms.
inline int argmax_predict(const std::vector<double>& values) {
    if (values.empty()) throw InputError("argmax_predict: empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return static_cast<int>(best);
}

inline int argmax_predict(const LogitVector& z) { return argmax_predict(z.values()); }

// Temperature-scaled softmax sigma(z/T), computed with max subtraction so
// that large logits cannot overflow.
inline ProbVector softmax_with_temperature(const LogitVector& z, double temperature) {
    if (!(temperature > 0.0)) throw ParameterError("softmax_with_temperature: T must be positive");
    const auto& logits = z.values();
    if (logits.size() < 2) throw InputError("softmax_with_temperature: need at least 2 classes");

    const double zmax = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp((logits[i] - zmax) / temperature);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return ProbVector(std::move(out));
}

// One evaluated input: logits, labels, and the derived correctness flag.
// The predicted label is always the argmax of the stored logits.
struct EvalSample {
    std::vector<double> features; // empty when only logits are available
    LogitVector logits;
    int true_label = -1;
    int predicted_label = -1;
    bool correct = false;

    EvalSample() = default;

    EvalSample(std::vector<double> feats, LogitVector z, int label)
        : features(std::move(feats)), logits(std::move(z)), true_label(label) {
        const int c = static_cast<int>(logits.size());
        if (label < 0 || label >= c)
            throw InputError("EvalSample: label " + std::to_string(label) + " outside [0, " +
                             std::to_string(c) + ")");
        predicted_label = argmax_predict(logits);
        correct = (predicted_label == true_label);
    }

    bool has_features() const { return !features.empty(); }
};

// A set of evaluated samples sharing one class count.
struct EvalDataset {
    std::vector<EvalSample> samples;
    int num_classes = 0;
    std::string source_tag;
    // When true the "logits" rows actually hold probabilities and every
    // consumer bypasses the softmax (temperature must stay at 1).
    bool logits_are_probs = false;

    void validate() const {
        if (num_classes < 2) throw InputError("EvalDataset: num_classes must be >= 2");
        for (const auto& s : samples) {
            if (static_cast<int>(s.logits.size()) != num_classes)
                throw InputError("EvalDataset: sample class count mismatch");
        }
    }

    std::size_t size() const { return samples.size(); }
};

// Detection methods covered by the toolkit, in canonical orientation:
// higher score = more uncertain = more likely misclassified/mismatched.
enum class Method {
    Msp,
    Entropy,
    GiniDoctor,
    Odin,
    RelU,
    Mlp,
    Conformal,
};

inline const char* method_name(Method m) {
    switch (m) {
        case Method::Msp: return "MSP";
        case Method::Entropy: return "ENTROPY";
        case Method::GiniDoctor: return "GINI_DOCTOR";
        case Method::Odin: return "ODIN";
        case Method::RelU: return "REL_U";
        case Method::Mlp: return "MLP";
        case Method::Conformal: return "CONFORMAL";
    }
    return "?";
}

inline Method method_from_name(const std::string& name) {
    if (name == "MSP") return Method::Msp;
    if (name == "ENTROPY") return Method::Entropy;
    if (name == "GINI_DOCTOR" || name == "DOCTOR") return Method::GiniDoctor;
    if (name == "ODIN") return Method::Odin;
    if (name == "REL_U" || name == "RELU") return Method::RelU;
    if (name == "MLP") return Method::Mlp;
    if (name == "CONFORMAL") return Method::Conformal;
    throw InputError("unknown method name: " + name);
}

// A method plus its hyperparameters. Scores produced under any config are
// always reported in the canonical "higher means more uncertain" orientation.
struct DetectorConfig {
    Method method = Method::Msp;
    double temperature = 1.0;
    double epsilon = 0.0;
    double lambda = 0.5; // Rel-U only
    double alpha = 0.1;  // conformal only

    void validate() const {
        if (!(temperature > 0.0)) throw ParameterError("DetectorConfig: T must be positive");
        if (!(epsilon >= 0.0)) throw ParameterError("DetectorConfig: epsilon must be non-negative");
        if (!(lambda >= 0.0 && lambda <= 1.0))
            throw ParameterError("DetectorConfig: lambda must lie in [0, 1]");
        if (!(alpha > 0.0 && alpha < 1.0))
            throw ParameterError("DetectorConfig: alpha must lie in (0, 1)");
    }
};

} // namespace relu
