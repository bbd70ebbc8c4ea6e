#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "relu/core.hpp"
#include "relu/rng.hpp"
#include "test_util.hpp"

using namespace relu;
using Catch::Approx;

TEST_CASE("softmax: uniform logits give the uniform distribution") {
    const auto p = softmax_with_temperature(LogitVector({0.0, 0.0, 0.0}), 1.0);
    for (std::size_t i = 0; i < 3; ++i) CHECK(p[i] == Approx(1.0 / 3.0).margin(1e-15));
}

TEST_CASE("softmax: large temperature flattens toward uniform") {
    const auto p = softmax_with_temperature(LogitVector({1.0, 2.0}), 1e6);
    CHECK(std::abs(p[0] - 0.5) < 1e-6);
    CHECK(std::abs(p[1] - 0.5) < 1e-6);
}

TEST_CASE("softmax: frozen two-class value") {
    const auto p = softmax_with_temperature(LogitVector({1.0, 2.0}), 1.0);
    CHECK(p[0] == Approx(0.26894142136999512).margin(1e-5));
    CHECK(p[1] == Approx(0.73105857863000488).margin(1e-5));
}

TEST_CASE("softmax: parameter and input errors") {
    CHECK_THROWS_AS(softmax_with_temperature(LogitVector({1.0, 2.0}), 0.0), ParameterError);
    CHECK_THROWS_AS(softmax_with_temperature(LogitVector({1.0, 2.0}), -1.0), ParameterError);
    CHECK_THROWS_AS(LogitVector({1.0, std::numeric_limits<double>::quiet_NaN()}), InputError);
    CHECK_THROWS_AS(LogitVector({1.0, std::numeric_limits<double>::infinity()}), InputError);
}

TEST_CASE("softmax: overflow safety via max subtraction") {
    const auto p = softmax_with_temperature(LogitVector({1e300, 1e300 - 1e284}), 1.0);
    CHECK(std::isfinite(p[0]));
    CHECK(p[0] + p[1] == Approx(1.0).margin(1e-12));
}

TEST_CASE("argmax: lowest index wins ties") {
    CHECK(argmax_predict(std::vector<double>{0.1, 0.9}) == 1);
    CHECK(argmax_predict(std::vector<double>{5.0, 5.0, 1.0}) == 0);
    CHECK(argmax_predict(std::vector<double>{-3.0, -1.0, -2.0}) == 1);
    CHECK_THROWS_AS(argmax_predict(std::vector<double>{}), InputError);
}

TEST_CASE("softmax properties: log recovery, argmax preservation, shift invariance") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t c = 2 + rng.uniform_int(8);
        const auto z = testing::random_logits(rng, c);
        const double t = 0.25 + 4.0 * rng.uniform();

        const auto p = softmax_with_temperature(LogitVector(z), 1.0);
        const double offset = std::log(p[0]) - z[0];
        for (std::size_t i = 0; i < c; ++i)
            REQUIRE(std::log(p[i]) - z[i] == Approx(offset).margin(1e-9));

        const auto pt = softmax_with_temperature(LogitVector(z), t);
        REQUIRE(argmax_predict(pt.values()) == argmax_predict(z));

        const double shift = rng.uniform(-50.0, 50.0);
        auto shifted = z;
        for (double& v : shifted) v += shift;
        const auto ps = softmax_with_temperature(LogitVector(shifted), t);
        for (std::size_t i = 0; i < c; ++i) REQUIRE(ps[i] == Approx(pt[i]).margin(1e-12));
    }
}

TEST_CASE("ProbVector validation") {
    CHECK_THROWS_AS(ProbVector({1.0}), InputError);                 // C < 2
    CHECK_THROWS_AS(ProbVector({0.5, 0.4}), InputError);            // sum far from 1
    CHECK_THROWS_AS(ProbVector({0.6, 0.5, -0.1}), InputError);      // negative entry
    CHECK_NOTHROW(ProbVector({0.25, 0.75}));

    // Loader rule: within 1e-6 renormalizes, beyond rejects.
    const auto renorm = ProbVector::renormalized({0.5000004, 0.5000001});
    CHECK(renorm[0] + renorm[1] == Approx(1.0).margin(1e-15));
    CHECK_THROWS_AS(ProbVector::renormalized({0.6, 0.5}), InputError);
}

TEST_CASE("EvalSample derives prediction and correctness") {
    const EvalSample hit({}, LogitVector({0.2, 1.5, -0.3}), 1);
    CHECK(hit.predicted_label == 1);
    CHECK(hit.correct);

    const EvalSample miss({}, LogitVector({0.2, 1.5, -0.3}), 2);
    CHECK(miss.predicted_label == 1);
    CHECK_FALSE(miss.correct);

    CHECK_THROWS_AS(EvalSample({}, LogitVector({0.2, 1.5}), 2), InputError);
    CHECK_THROWS_AS(EvalSample({}, LogitVector({0.2, 1.5}), -1), InputError);
}

TEST_CASE("EvalDataset validation and DetectorConfig domains") {
    EvalDataset ds;
    ds.num_classes = 3;
    ds.samples.push_back(testing::make_sample(3, 0, 0));
    ds.samples.push_back(testing::make_sample(2, 0, 0));
    CHECK_THROWS_AS(ds.validate(), InputError);

    DetectorConfig cfg;
    cfg.temperature = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg.temperature = 1.0;
    cfg.epsilon = -1e-3;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg.epsilon = 0.0;
    cfg.lambda = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
    cfg.lambda = 0.5;
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("method names round-trip") {
    for (Method m : {Method::Msp, Method::Entropy, Method::GiniDoctor, Method::Odin, Method::RelU,
                     Method::Mlp, Method::Conformal}) {
        CHECK(method_from_name(method_name(m)) == m);
    }
    CHECK_THROWS_AS(method_from_name("BOGUS"), InputError);
}
