#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "relu/metrics.hpp"
#include "relu/model.hpp"
#include "relu/observer.hpp"
#include "relu/synth.hpp"
#include "test_util.hpp"

using namespace relu;
using Catch::Approx;

namespace {

double train_accuracy(const ClassifierModel& model, const Matrix& features,
                      const std::vector<int>& labels) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < features.rows; ++i) {
        std::vector<double> x(features.row(i), features.row(i) + features.cols);
        if (argmax_predict(model.forward(x)) == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(features.rows);
}

// Two well-separated 2-d blobs.
std::pair<Matrix, std::vector<int>> separable_blobs(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Matrix x(n, 2);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        y[i] = label;
        x(i, 0) = (label == 0 ? -3.0 : 3.0) + 0.5 * rng.normal();
        x(i, 1) = (label == 0 ? -3.0 : 3.0) + 0.5 * rng.normal();
    }
    return {x, y};
}

} // namespace

TEST_CASE("training reaches full accuracy on linearly separable data") {
    const auto [x, y] = separable_blobs(200, 71);
    TrainOptions opts;
    opts.epochs = 200;
    opts.learning_rate = 0.5;
    opts.seed = 5;
    const auto trained = train_classifier(x, y, Architecture::LinearSoftmax, 2, opts);
    CHECK(train_accuracy(trained.model, x, y) == 1.0);
    CHECK(std::isfinite(trained.final_loss));
}

TEST_CASE("zero epochs leaves the model at chance level") {
    SynthConfig cfg;
    cfg.num_classes = 4;
    cfg.feature_dim = 6;
    cfg.train_count = 2000;
    cfg.seed = 13;
    const auto data = synth_generate(cfg);
    TrainOptions opts;
    opts.epochs = 0;
    opts.seed = 3;
    const auto trained =
        train_classifier(data.train.features, data.train.labels, Architecture::LinearSoftmax, 4, opts);
    const double acc = train_accuracy(trained.model, data.train.features, data.train.labels);
    CHECK(acc > 0.10);
    CHECK(acc < 0.45);
}

TEST_CASE("training is deterministic in the seed") {
    const auto [x, y] = separable_blobs(120, 72);
    TrainOptions opts;
    opts.epochs = 50;
    opts.learning_rate = 0.3;
    opts.hidden_width = 8;
    opts.seed = 17;
    const auto a = train_classifier(x, y, Architecture::Mlp1Hidden, 2, opts);
    const auto b = train_classifier(x, y, Architecture::Mlp1Hidden, 2, opts);
    REQUIRE(a.model.w1.data == b.model.w1.data);
    REQUIRE(a.model.w2.data == b.model.w2.data);
    REQUIRE(a.model.b1 == b.model.b1);
    REQUIRE(a.model.b2 == b.model.b2);
}

TEST_CASE("training errors: missing class, bad labels, divergence") {
    Matrix x(4, 1);
    x(0, 0) = 0.0;
    x(1, 0) = 1.0;
    x(2, 0) = 2.0;
    x(3, 0) = 3.0;
    TrainOptions opts;
    CHECK_THROWS_AS(train_classifier(x, {0, 0, 0, 0}, Architecture::LinearSoftmax, 2, opts),
                    InputError);
    CHECK_THROWS_AS(train_classifier(x, {0, 1, 2, 0}, Architecture::LinearSoftmax, 2, opts),
                    InputError);

    const auto [bx, by] = separable_blobs(64, 73);
    TrainOptions wild;
    wild.epochs = 400;
    wild.learning_rate = 1e8;
    wild.hidden_width = 8;
    CHECK_THROWS_AS(train_classifier(bx, by, Architecture::Mlp1Hidden, 2, wild), NumericalError);
}

TEST_CASE("input gradient: constant functional and exact linear identity") {
    const auto [x, y] = separable_blobs(50, 74);
    TrainOptions opts;
    opts.epochs = 30;
    const auto trained = train_classifier(x, y, Architecture::LinearSoftmax, 2, opts);

    LogitFunctional constant;
    constant.value = [](const std::vector<double>&) { return 1.0; };
    const auto g0 = input_gradient(trained.model, {0.3, -0.2}, constant);
    for (double v : g0) CHECK(v == 0.0);

    LogitFunctional logit0;
    logit0.value = [](const std::vector<double>& z) { return z[0]; };
    logit0.grad = [](const std::vector<double>& z) {
        std::vector<double> g(z.size(), 0.0);
        g[0] = 1.0;
        return g;
    };
    const auto g = input_gradient(trained.model, {0.3, -0.2}, logit0);
    REQUIRE(g.size() == 2);
    CHECK(g[0] == trained.model.w1(0, 0));
    CHECK(g[1] == trained.model.w1(0, 1));
}

TEST_CASE("analytic gradients match central finite differences") {
    Rng rng(75);
    SynthConfig cfg;
    cfg.num_classes = 4;
    cfg.feature_dim = 5;
    cfg.train_count = 600;
    cfg.seed = 21;
    const auto data = synth_generate(cfg);

    for (Architecture arch : {Architecture::LinearSoftmax, Architecture::Mlp1Hidden}) {
        TrainOptions opts;
        opts.epochs = 120;
        opts.learning_rate = 0.4;
        opts.hidden_width = 12;
        opts.seed = 2;
        const auto trained = train_classifier(data.train.features, data.train.labels, arch, 4, opts);

        Matrix observer = hamming_matrix(4);
        observer(0, 1) = observer(1, 0) = 2.0;
        const std::vector<LogitFunctional> functionals = {
            log_score_functional(max_prob_functional(1.4)),
            log_score_functional(gini_functional(0.8)),
            log_score_functional(bilinear_functional(1.0, observer)),
        };

        for (const auto& functional : functionals) {
            for (int trial = 0; trial < 25; ++trial) {
                std::vector<double> point(5);
                for (double& v : point) v = rng.uniform(-2.0, 2.0);
                const auto analytic = input_gradient(trained.model, point, functional);
                const auto fd = finite_difference_gradient(
                    [&](const std::vector<double>& p) {
                        return functional.value(trained.model.forward(p));
                    },
                    point);
                double diff = 0.0, norm = 0.0;
                for (std::size_t i = 0; i < analytic.size(); ++i) {
                    diff += (analytic[i] - fd[i]) * (analytic[i] - fd[i]);
                    norm += fd[i] * fd[i];
                }
                REQUIRE(std::sqrt(diff) <= 1e-4 * std::max(std::sqrt(norm), 1e-8));
            }
        }
    }
}

TEST_CASE("perturbation: epsilon zero is the identity, bit for bit") {
    const auto [x, y] = separable_blobs(50, 76);
    TrainOptions opts;
    opts.epochs = 20;
    const auto trained = train_classifier(x, y, Architecture::LinearSoftmax, 2, opts);
    const std::vector<double> point = {0.123456789, -4.2e-7};
    const auto same = perturb_input(trained.model, point, 0.0, max_prob_functional(1.0));
    REQUIRE(same == point);
}

TEST_CASE("perturbation: one-dimensional sign construction") {
    // z0 = 0, z1 = -x + 0.4. At x = 0 the top class is 1 and its probability
    // falls as x grows, so d/dx log s < 0 and the step moves x to -epsilon.
    ClassifierModel model;
    model.arch = Architecture::LinearSoftmax;
    model.input_dim = 1;
    model.num_classes = 2;
    model.w1 = Matrix(2, 1, 0.0);
    model.w1(1, 0) = -1.0;
    model.b1 = {0.0, 0.4};

    const auto moved = perturb_input(model, {0.0}, 0.1, max_prob_functional(1.0));
    REQUIRE(moved.size() == 1);
    CHECK(moved[0] == Approx(-0.1).margin(1e-15));
}

TEST_CASE("mlp detector: separable representations reach high AUROC") {
    Rng rng(77);
    Matrix pos(300, 2), neg(200, 2);
    for (std::size_t i = 0; i < pos.rows; ++i) {
        pos(i, 0) = -2.0 + 0.5 * rng.normal();
        pos(i, 1) = -2.0 + 0.5 * rng.normal();
    }
    for (std::size_t i = 0; i < neg.rows; ++i) {
        neg(i, 0) = 2.0 + 0.5 * rng.normal();
        neg(i, 1) = 2.0 + 0.5 * rng.normal();
    }
    MlpDetectorOptions opts;
    opts.hidden_width = 16;
    opts.epochs = 300;
    opts.learning_rate = 0.05;
    opts.seed = 4;
    const auto det = train_mlp_detector(pos, neg, opts);

    ScoredPopulation pop;
    for (int i = 0; i < 200; ++i) {
        pop.pos_scores.push_back(det.error_probability({-2.0 + 0.5 * rng.normal(), -2.0 + 0.5 * rng.normal()}));
        pop.neg_scores.push_back(det.error_probability({2.0 + 0.5 * rng.normal(), 2.0 + 0.5 * rng.normal()}));
    }
    CHECK(auroc(pop) >= 0.99);

    CHECK_THROWS_AS(train_mlp_detector(pos, Matrix(0, 2), opts), InputError);
}

TEST_CASE("mlp detector: meaningless labels give chance-level AUROC") {
    Rng rng(78);
    const auto draw = [&](std::size_t n) {
        Matrix m(n, 3);
        for (double& v : m.data) v = rng.normal();
        return m;
    };
    // Both "classes" come from the same distribution.
    MlpDetectorOptions opts;
    opts.hidden_width = 16;
    opts.epochs = 200;
    opts.learning_rate = 0.01;
    opts.seed = 9;
    const auto det = train_mlp_detector(draw(400), draw(400), opts);

    ScoredPopulation pop;
    const auto fresh_pos = draw(500), fresh_neg = draw(500);
    for (std::size_t i = 0; i < 500; ++i) {
        pop.pos_scores.push_back(det.error_probability(
            {fresh_pos(i, 0), fresh_pos(i, 1), fresh_pos(i, 2)}));
        pop.neg_scores.push_back(det.error_probability(
            {fresh_neg(i, 0), fresh_neg(i, 1), fresh_neg(i, 2)}));
    }
    CHECK(auroc(pop) == Approx(0.5).margin(0.05));
}

TEST_CASE("mlp detector: deterministic in the seed") {
    Rng rng(79);
    Matrix pos(60, 2), neg(40, 2);
    for (double& v : pos.data) v = rng.normal();
    for (double& v : neg.data) v = rng.normal() + 1.0;
    MlpDetectorOptions opts;
    opts.hidden_width = 8;
    opts.epochs = 50;
    opts.seed = 123;
    const auto a = train_mlp_detector(pos, neg, opts);
    const auto b = train_mlp_detector(pos, neg, opts);
    REQUIRE(a.w1.data == b.w1.data);
    REQUIRE(a.w2 == b.w2);
    CHECK(a.error_probability({0.1, 0.2}) == b.error_probability({0.1, 0.2}));
}
