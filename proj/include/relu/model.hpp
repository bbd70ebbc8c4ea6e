#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "relu/core.hpp"
#include "relu/matrix.hpp"
#include "relu/rng.hpp"

namespace relu {

// Small differentiable softmax classifiers standing in for a production
// model: a linear layer or a one-hidden-layer ReLU network, trained by
// full-batch gradient descent so that a (data, seed, hyperparameters) triple
// determines the weights bit for bit.

enum class Architecture { LinearSoftmax, Mlp1Hidden };

inline const char* architecture_name(Architecture a) {
    return a == Architecture::LinearSoftmax ? "LINEAR_SOFTMAX" : "MLP_1HIDDEN";
}

inline Architecture architecture_from_name(const std::string& name) {
    if (name == "LINEAR_SOFTMAX" || name == "linear") return Architecture::LinearSoftmax;
    if (name == "MLP_1HIDDEN" || name == "mlp") return Architecture::Mlp1Hidden;
    throw InputError("unknown architecture: " + name);
}

struct ClassifierModel {
    Architecture arch = Architecture::LinearSoftmax;
    int input_dim = 0;
    int num_classes = 0;
    int hidden_width = 0; // 0 for the linear model

    // Linear: w1 is C x D. MLP: w1 is H x D, w2 is C x H.
    Matrix w1;
    std::vector<double> b1;
    Matrix w2;
    std::vector<double> b2;

    std::vector<double> forward(const std::vector<double>& x) const {
        std::vector<double> hidden;
        return forward_cached(x, hidden);
    }

    // Forward pass that exposes the hidden pre-activations for the backward
    // sweep. `hidden_pre` stays empty for the linear model.
    std::vector<double> forward_cached(const std::vector<double>& x,
                                       std::vector<double>& hidden_pre) const {
        if (static_cast<int>(x.size()) != input_dim)
            throw InputError("ClassifierModel: input has dimension " + std::to_string(x.size()) +
                             ", expected " + std::to_string(input_dim));
        if (arch == Architecture::LinearSoftmax) {
            hidden_pre.clear();
            return affine(w1, b1, x);
        }
        hidden_pre = affine(w1, b1, x);
        std::vector<double> activated(hidden_pre.size());
        for (std::size_t i = 0; i < hidden_pre.size(); ++i)
            activated[i] = hidden_pre[i] > 0.0 ? hidden_pre[i] : 0.0;
        return affine(w2, b2, activated);
    }

    // Vector-Jacobian product of the logits with respect to the input:
    // given dL/dz, returns dL/dx. `hidden_pre` must come from forward_cached
    // on the same x.
    std::vector<double> input_vjp(const std::vector<double>& dlogits,
                                  const std::vector<double>& hidden_pre) const {
        if (arch == Architecture::LinearSoftmax) return transpose_apply(w1, dlogits);
        std::vector<double> dhidden = transpose_apply(w2, dlogits);
        for (std::size_t i = 0; i < dhidden.size(); ++i) {
            if (hidden_pre[i] <= 0.0) dhidden[i] = 0.0;
        }
        return transpose_apply(w1, dhidden);
    }

private:
    static std::vector<double> affine(const Matrix& w, const std::vector<double>& b,
                                      const std::vector<double>& x) {
        std::vector<double> out(w.rows);
        for (std::size_t r = 0; r < w.rows; ++r) {
            const double* row = w.row(r);
            double acc = b[r];
            for (std::size_t c = 0; c < w.cols; ++c) acc += row[c] * x[c];
            out[r] = acc;
        }
        return out;
    }

    static std::vector<double> transpose_apply(const Matrix& w, const std::vector<double>& v) {
        std::vector<double> out(w.cols, 0.0);
        for (std::size_t r = 0; r < w.rows; ++r) {
            const double* row = w.row(r);
            for (std::size_t c = 0; c < w.cols; ++c) out[c] += row[c] * v[r];
        }
        return out;
    }
};

struct TrainOptions {
    int epochs = 300;
    double learning_rate = 0.5;
    int hidden_width = 32; // MLP only
    std::uint64_t seed = 0;
};

struct TrainedClassifier {
    ClassifierModel model;
    double final_loss = 0.0;
};

namespace detail {

inline void init_weights(Matrix& w, std::vector<double>& b, std::size_t rows, std::size_t cols,
                         Rng& rng) {
    w = Matrix(rows, cols);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    for (double& v : w.data) v = scale * rng.normal();
    b.assign(rows, 0.0);
}

} // namespace detail

// Full-batch cross-entropy training. Deterministic for a fixed seed; aborts
// with diagnostics if the loss leaves the finite range.
inline TrainedClassifier train_classifier(const Matrix& features, const std::vector<int>& labels,
                                          Architecture arch, int num_classes,
                                          const TrainOptions& opts) {
    if (features.rows == 0) throw InputError("train_classifier: empty training set");
    if (features.rows != labels.size())
        throw InputError("train_classifier: features and labels differ in length");
    if (num_classes < 2) throw InputError("train_classifier: need at least 2 classes");
    std::vector<std::size_t> class_counts(num_classes, 0);
    for (int y : labels) {
        if (y < 0 || y >= num_classes)
            throw InputError("train_classifier: label " + std::to_string(y) + " out of range");
        ++class_counts[static_cast<std::size_t>(y)];
    }
    for (int c = 0; c < num_classes; ++c) {
        if (class_counts[static_cast<std::size_t>(c)] == 0)
            throw InputError("train_classifier: class " + std::to_string(c) +
                             " has no training samples");
    }

    const std::size_t n = features.rows;
    const std::size_t d = features.cols;
    const std::size_t c = static_cast<std::size_t>(num_classes);
    const std::size_t h = static_cast<std::size_t>(opts.hidden_width);

    ClassifierModel model;
    model.arch = arch;
    model.input_dim = static_cast<int>(d);
    model.num_classes = num_classes;
    Rng rng(derive_seed(opts.seed, "classifier-init"));
    if (arch == Architecture::LinearSoftmax) {
        detail::init_weights(model.w1, model.b1, c, d, rng);
    } else {
        if (opts.hidden_width < 1) throw ParameterError("train_classifier: hidden width must be >= 1");
        model.hidden_width = opts.hidden_width;
        detail::init_weights(model.w1, model.b1, h, d, rng);
        detail::init_weights(model.w2, model.b2, c, h, rng);
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    double loss = 0.0;
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        Matrix gw1(model.w1.rows, model.w1.cols);
        std::vector<double> gb1(model.b1.size(), 0.0);
        Matrix gw2(model.w2.rows, model.w2.cols);
        std::vector<double> gb2(model.b2.size(), 0.0);
        loss = 0.0;

        for (std::size_t k = 0; k < n; ++k) {
            std::vector<double> x(features.row(k), features.row(k) + d);
            std::vector<double> hidden_pre;
            std::vector<double> z = model.forward_cached(x, hidden_pre);
            for (double v : z) {
                if (!std::isfinite(v))
                    throw NumericalError("train_classifier: logits diverged at epoch " +
                                         std::to_string(epoch) + " (lr=" +
                                         std::to_string(opts.learning_rate) + ")");
            }
            const ProbVector p = softmax_with_temperature(LogitVector(z), 1.0);
            const int y = labels[k];
            loss -= std::log(std::max(p[static_cast<std::size_t>(y)], 1e-300));

            // dL/dz for cross-entropy after softmax.
            std::vector<double> dz(c);
            for (std::size_t j = 0; j < c; ++j)
                dz[j] = (p[j] - (static_cast<int>(j) == y ? 1.0 : 0.0)) * inv_n;

            if (arch == Architecture::LinearSoftmax) {
                for (std::size_t r = 0; r < c; ++r) {
                    for (std::size_t col = 0; col < d; ++col) gw1(r, col) += dz[r] * x[col];
                    gb1[r] += dz[r];
                }
            } else {
                std::vector<double> activated(h);
                for (std::size_t i = 0; i < h; ++i)
                    activated[i] = hidden_pre[i] > 0.0 ? hidden_pre[i] : 0.0;
                std::vector<double> dh(h, 0.0);
                for (std::size_t r = 0; r < c; ++r) {
                    for (std::size_t col = 0; col < h; ++col) {
                        gw2(r, col) += dz[r] * activated[col];
                        dh[col] += model.w2(r, col) * dz[r];
                    }
                    gb2[r] += dz[r];
                }
                for (std::size_t i = 0; i < h; ++i) {
                    if (hidden_pre[i] <= 0.0) dh[i] = 0.0;
                }
                for (std::size_t r = 0; r < h; ++r) {
                    for (std::size_t col = 0; col < d; ++col) gw1(r, col) += dh[r] * x[col];
                    gb1[r] += dh[r];
                }
            }
        }
        loss *= inv_n;
        if (!std::isfinite(loss))
            throw NumericalError("train_classifier: loss diverged at epoch " + std::to_string(epoch) +
                                 " (lr=" + std::to_string(opts.learning_rate) + ")");

        for (std::size_t i = 0; i < model.w1.data.size(); ++i)
            model.w1.data[i] -= opts.learning_rate * gw1.data[i];
        for (std::size_t i = 0; i < model.b1.size(); ++i) model.b1[i] -= opts.learning_rate * gb1[i];
        for (std::size_t i = 0; i < model.w2.data.size(); ++i)
            model.w2.data[i] -= opts.learning_rate * gw2.data[i];
        for (std::size_t i = 0; i < model.b2.size(); ++i) model.b2[i] -= opts.learning_rate * gb2[i];
    }

    return {std::move(model), loss};
}

// Scalar functional of the logits. When `grad` is present the input gradient
// is computed by the analytic reverse sweep; otherwise the central
// finite-difference fallback on value(model(x)) is used.
struct LogitFunctional {
    std::function<double(const std::vector<double>&)> value;
    std::function<std::vector<double>(const std::vector<double>&)> grad;
};

// Central finite differences with per-coordinate step h_i = 1e-4 * (1 + |x_i|).
inline std::vector<double> finite_difference_gradient(
    const std::function<double(const std::vector<double>&)>& f, const std::vector<double>& x) {
    std::vector<double> grad(x.size());
    std::vector<double> probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double h = 1e-4 * (1.0 + std::abs(x[i]));
        probe[i] = x[i] + h;
        const double up = f(probe);
        probe[i] = x[i] - h;
        const double down = f(probe);
        probe[i] = x[i];
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

// Gradient of functional(model(x)) with respect to x.
inline std::vector<double> input_gradient(const ClassifierModel& model, const std::vector<double>& x,
                                          const LogitFunctional& functional) {
    std::vector<double> grad;
    if (functional.grad) {
        std::vector<double> hidden_pre;
        const std::vector<double> z = model.forward_cached(x, hidden_pre);
        grad = model.input_vjp(functional.grad(z), hidden_pre);
    } else {
        grad = finite_difference_gradient(
            [&](const std::vector<double>& point) { return functional.value(model.forward(point)); },
            x);
    }
    for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!std::isfinite(grad[i]))
            throw NumericalError("input_gradient: non-finite component at index " + std::to_string(i));
    }
    return grad;
}

inline constexpr double kScoreLogFloor = 1e-12;

// Wraps a raw score functional s into log(max(s, 1e-12)), the quantity whose
// signed gradient drives input pre-processing.
inline LogitFunctional log_score_functional(const LogitFunctional& score) {
    LogitFunctional out;
    out.value = [value = score.value](const std::vector<double>& z) {
        return std::log(std::max(value(z), kScoreLogFloor));
    };
    if (score.grad) {
        out.grad = [value = score.value, grad = score.grad](const std::vector<double>& z) {
            const double s = std::max(value(z), kScoreLogFloor);
            std::vector<double> g = grad(z);
            for (double& v : g) v /= s;
            return g;
        };
    }
    return out;
}

// One signed-gradient step x' = x - eps * sign(-d/dx log s(x)). eps = 0
// returns the input unchanged, bit for bit.
inline std::vector<double> perturb_input(const ClassifierModel& model, const std::vector<double>& x,
                                         double epsilon, const LogitFunctional& score) {
    if (!(epsilon >= 0.0)) throw ParameterError("perturb_input: epsilon must be non-negative");
    if (epsilon == 0.0) return x;
    const std::vector<double> grad = input_gradient(model, x, log_score_functional(score));
    std::vector<double> out = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double s = grad[i] > 0.0 ? 1.0 : (grad[i] < 0.0 ? -1.0 : 0.0);
        out[i] += epsilon * s; // - eps * sign(-g) == + eps * sign(g)
    }
    return out;
}

namespace detail {

// d score / d logits from d score / d probs via the tempered-softmax
// Jacobian: dz_j = (p_j / T) * (q_j - q.p).
inline std::vector<double> softmax_vjp(const std::vector<double>& probs,
                                       const std::vector<double>& dprobs, double temperature) {
    double dot = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) dot += probs[i] * dprobs[i];
    std::vector<double> dz(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i)
        dz[i] = probs[i] / temperature * (dprobs[i] - dot);
    return dz;
}

inline std::vector<double> tempered_probs(const std::vector<double>& z, double t) {
    return softmax_with_temperature(LogitVector(z), t).values();
}

} // namespace detail

// Native perturbation scores for the gradient-based methods, each with its
// analytic logit gradient. The maximum-probability functional drives the
// ODIN-style step; Gini and the bilinear observer score drive the others.

inline LogitFunctional max_prob_functional(double temperature) {
    LogitFunctional f;
    f.value = [temperature](const std::vector<double>& z) {
        const auto p = detail::tempered_probs(z, temperature);
        return *std::max_element(p.begin(), p.end());
    };
    f.grad = [temperature](const std::vector<double>& z) {
        const auto p = detail::tempered_probs(z, temperature);
        std::vector<double> dp(p.size(), 0.0);
        dp[static_cast<std::size_t>(argmax_predict(p))] = 1.0;
        return detail::softmax_vjp(p, dp, temperature);
    };
    return f;
}

inline LogitFunctional gini_functional(double temperature) {
    LogitFunctional f;
    f.value = [temperature](const std::vector<double>& z) {
        const auto p = detail::tempered_probs(z, temperature);
        double sq = 0.0;
        for (double v : p) sq += v * v;
        return 1.0 - sq;
    };
    f.grad = [temperature](const std::vector<double>& z) {
        const auto p = detail::tempered_probs(z, temperature);
        std::vector<double> dp(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) dp[i] = -2.0 * p[i];
        return detail::softmax_vjp(p, dp, temperature);
    };
    return f;
}

inline LogitFunctional bilinear_functional(double temperature, Matrix observer) {
    auto shared = std::make_shared<Matrix>(std::move(observer));
    LogitFunctional f;
    f.value = [temperature, shared](const std::vector<double>& z) {
        const auto p = detail::tempered_probs(z, temperature);
        double acc = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double* row = shared->row(i);
            double inner = 0.0;
            for (std::size_t j = 0; j < p.size(); ++j) inner += row[j] * p[j];
            acc += p[i] * inner;
        }
        return acc;
    };
    f.grad = [temperature, shared](const std::vector<double>& z) {
        const auto p = detail::tempered_probs(z, temperature);
        std::vector<double> dp(p.size(), 0.0); // 2 D p for symmetric D
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double* row = shared->row(i);
            for (std::size_t j = 0; j < p.size(); ++j) dp[i] += 2.0 * row[j] * p[j];
        }
        return detail::softmax_vjp(p, dp, temperature);
    };
    return f;
}

// Binary error-probability head: one ReLU hidden layer over a sample
// representation (model logits by default), sigmoid output in [0, 1] used
// directly as an uncertainty score.
struct MlpDetector {
    int input_dim = 0;
    int hidden_width = 0;
    Matrix w1;
    std::vector<double> b1;
    std::vector<double> w2;
    double b2 = 0.0;

    double raw_output(const std::vector<double>& x) const {
        if (static_cast<int>(x.size()) != input_dim)
            throw InputError("MlpDetector: input dimension mismatch");
        double out = b2;
        for (int i = 0; i < hidden_width; ++i) {
            double a = b1[static_cast<std::size_t>(i)];
            const double* row = w1.row(static_cast<std::size_t>(i));
            for (int j = 0; j < input_dim; ++j) a += row[j] * x[static_cast<std::size_t>(j)];
            if (a > 0.0) out += w2[static_cast<std::size_t>(i)] * a;
        }
        return out;
    }

    double error_probability(const std::vector<double>& x) const {
        const double o = raw_output(x);
        if (o >= 0.0) return 1.0 / (1.0 + std::exp(-o));
        const double e = std::exp(o);
        return e / (1.0 + e);
    }
};

struct MlpDetectorOptions {
    int hidden_width = 128;
    int epochs = 400;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
};

// Full-batch Adam on binary cross-entropy: rows of `pos_inputs` are labelled
// 0 (no error) and rows of `neg_inputs` 1 (error). Deterministic.
inline MlpDetector train_mlp_detector(const Matrix& pos_inputs, const Matrix& neg_inputs,
                                      const MlpDetectorOptions& opts) {
    if (pos_inputs.rows == 0 || neg_inputs.rows == 0)
        throw InputError("train_mlp_detector: both classes must be present");
    if (pos_inputs.cols != neg_inputs.cols)
        throw InputError("train_mlp_detector: representation dimension mismatch");
    if (opts.hidden_width < 1) throw ParameterError("train_mlp_detector: hidden width must be >= 1");

    const std::size_t d = pos_inputs.cols;
    const std::size_t h = static_cast<std::size_t>(opts.hidden_width);
    const std::size_t n = pos_inputs.rows + neg_inputs.rows;

    MlpDetector det;
    det.input_dim = static_cast<int>(d);
    det.hidden_width = opts.hidden_width;
    Rng rng(derive_seed(opts.seed, "mlp-detector-init"));
    detail::init_weights(det.w1, det.b1, h, d, rng);
    det.w2.assign(h, 0.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(h));
    for (double& v : det.w2) v = scale * rng.normal();
    det.b2 = 0.0;

    const std::size_t n_params = h * d + h + h + 1;
    std::vector<double> m(n_params, 0.0), v(n_params, 0.0);
    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    const double inv_n = 1.0 / static_cast<double>(n);

    const auto sample_row = [&](std::size_t k, double& target) -> const double* {
        if (k < pos_inputs.rows) {
            target = 0.0;
            return pos_inputs.row(k);
        }
        target = 1.0;
        return neg_inputs.row(k - pos_inputs.rows);
    };

    for (int step = 1; step <= opts.epochs; ++step) {
        std::vector<double> grad(n_params, 0.0);
        double loss = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            double y = 0.0;
            const double* xrow = sample_row(k, y);
            std::vector<double> x(xrow, xrow + d);

            std::vector<double> a(h);
            double o = det.b2;
            for (std::size_t i = 0; i < h; ++i) {
                double acc = det.b1[i];
                const double* row = det.w1.row(i);
                for (std::size_t j = 0; j < d; ++j) acc += row[j] * x[j];
                a[i] = acc;
                if (acc > 0.0) o += det.w2[i] * acc;
            }
            loss += std::max(o, 0.0) - o * y + std::log1p(std::exp(-std::abs(o)));

            const double sig = o >= 0.0 ? 1.0 / (1.0 + std::exp(-o)) : std::exp(o) / (1.0 + std::exp(o));
            const double dout = (sig - y) * inv_n;
            double* gw1 = grad.data();
            double* gb1 = grad.data() + h * d;
            double* gw2 = grad.data() + h * d + h;
            double* gb2 = grad.data() + h * d + h + h;
            *gb2 += dout;
            for (std::size_t i = 0; i < h; ++i) {
                if (a[i] <= 0.0) continue;
                gw2[i] += dout * a[i];
                const double dh = dout * det.w2[i];
                for (std::size_t j = 0; j < d; ++j) gw1[i * d + j] += dh * x[j];
                gb1[i] += dh;
            }
        }
        loss *= inv_n;
        if (!std::isfinite(loss))
            throw NumericalError("train_mlp_detector: loss diverged at step " + std::to_string(step));

        const double bc1 = 1.0 - std::pow(beta1, step);
        const double bc2 = 1.0 - std::pow(beta2, step);
        const auto adam_update = [&](double* param, std::size_t offset, std::size_t count) {
            for (std::size_t i = 0; i < count; ++i) {
                const std::size_t k = offset + i;
                m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
                v[k] = beta2 * v[k] + (1.0 - beta2) * grad[k] * grad[k];
                param[i] -= opts.learning_rate * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + adam_eps);
            }
        };
        adam_update(det.w1.data.data(), 0, h * d);
        adam_update(det.b1.data(), h * d, h);
        adam_update(det.w2.data(), h * d + h, h);
        adam_update(&det.b2, h * d + h + h, 1);
    }
    return det;
}

} // namespace relu
