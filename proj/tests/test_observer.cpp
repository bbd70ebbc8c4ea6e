#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "relu/observer.hpp"
#include "relu/pgd.hpp"
#include "test_util.hpp"

using namespace relu;
using Catch::Approx;

namespace {

GroupedProbs repeated_groups(std::vector<double> pos, std::vector<double> neg, std::size_t n_pos,
                             std::size_t n_neg) {
    GroupedProbs g;
    for (std::size_t i = 0; i < n_pos; ++i) g.positives.emplace_back(pos);
    for (std::size_t i = 0; i < n_neg; ++i) g.negatives.emplace_back(neg);
    return g;
}

GroupedProbs random_groups(Rng& rng, std::size_t c, std::size_t n_pos, std::size_t n_neg) {
    GroupedProbs g;
    for (std::size_t i = 0; i < n_pos; ++i)
        g.positives.push_back(relu::testing::random_prob_vector(rng, c));
    for (std::size_t i = 0; i < n_neg; ++i)
        g.negatives.push_back(relu::testing::random_prob_vector(rng, c));
    return g;
}

} // namespace

TEST_CASE("assign_groups by correctness") {
    EvalDataset ds;
    ds.num_classes = 3;
    for (int i = 0; i < 3; ++i) ds.samples.push_back(testing::make_sample(3, 1, 1)); // correct
    for (int i = 0; i < 2; ++i) ds.samples.push_back(testing::make_sample(3, 1, 2)); // wrong

    const auto groups = assign_groups(ds, GroupMode::Correctness, nullptr, 1.0);
    CHECK(groups.n_pos() == 3);
    CHECK(groups.n_neg() == 2);

    EvalDataset all_correct;
    all_correct.num_classes = 3;
    for (int i = 0; i < 4; ++i) all_correct.samples.push_back(testing::make_sample(3, 0, 0));
    CHECK_THROWS_WITH(assign_groups(all_correct, GroupMode::Correctness, nullptr, 1.0),
                      Catch::Matchers::ContainsSubstring("negative"));
}

TEST_CASE("assign_groups by membership ignores correctness") {
    EvalDataset primary, secondary;
    primary.num_classes = secondary.num_classes = 4;
    for (int i = 0; i < 50; ++i) primary.samples.push_back(testing::make_sample(4, i % 4, (i + 1) % 4));
    for (int i = 0; i < 50; ++i) secondary.samples.push_back(testing::make_sample(4, i % 4, i % 4));

    const auto groups = assign_groups(primary, GroupMode::Membership, &secondary, 1.0);
    CHECK(groups.n_pos() == 50);
    CHECK(groups.n_neg() == 50);

    CHECK_THROWS_AS(assign_groups(primary, GroupMode::Membership, nullptr, 1.0), InputError);
}

TEST_CASE("cooccurrence_mean hand cases") {
    const auto single = cooccurrence_mean({ProbVector({1.0, 0.0})});
    CHECK(single(0, 0) == 1.0);
    CHECK(single(0, 1) == 0.0);
    CHECK(single(1, 1) == 0.0);

    const auto pair = cooccurrence_mean({ProbVector({1.0, 0.0}), ProbVector({0.0, 1.0})});
    CHECK(pair(0, 0) == Approx(0.5).margin(1e-15));
    CHECK(pair(1, 1) == Approx(0.5).margin(1e-15));
    CHECK(pair(0, 1) == 0.0);

    CHECK_THROWS_AS(cooccurrence_mean({}), InputError);
}

TEST_CASE("cooccurrence_mean matches the Dirichlet moment") {
    // E[p_i p_j] = 1/12 for i != j under Dirichlet(1,1,1); three standard
    // errors of the Monte-Carlo mean at n=1000 is about 0.0061.
    Rng rng(31);
    std::vector<ProbVector> probs;
    for (int i = 0; i < 1000; ++i) probs.push_back(testing::random_prob_vector(rng, 3));
    const auto mu = cooccurrence_mean(probs);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            if (i == j) continue;
            REQUIRE(mu(i, j) == Approx(1.0 / 12.0).margin(0.0062));
        }
}

TEST_CASE("fit_d_matrix: frozen two-class example") {
    const auto groups = repeated_groups({0.9, 0.1}, {0.6, 0.4}, 10, 10);
    const auto d = fit_d_matrix(groups, 0.5, 1.0);
    d.validate();
    CHECK_FALSE(d.fallback);
    // unnormalized entry max(0, 0.5*0.24 - 0.5*0.09) = 0.075, normalized to 1/sqrt(2)
    CHECK(d.entries(0, 1) == Approx(0.70710678118654752).margin(1e-12));
    CHECK(d.entries(1, 0) == Approx(0.70710678118654752).margin(1e-12));
    CHECK(d.entries(0, 0) == 0.0);

    CHECK(objective_value(d, groups, 0.5) == Approx(-0.10606601717798213).margin(1e-5));
}

TEST_CASE("fit_d_matrix: identical populations fall back to the uniform observer") {
    Rng rng(32);
    GroupedProbs g;
    for (int i = 0; i < 25; ++i) {
        const auto p = testing::random_prob_vector(rng, 4);
        g.positives.push_back(p);
        g.negatives.push_back(p);
    }
    const auto d = fit_d_matrix(g, 0.5, 1.0);
    d.validate();
    CHECK(d.fallback);
    const double expected = std::sqrt(1.0 / (4.0 * 4.0 - 4.0));
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(d.entries(i, j) == Approx(i == j ? 0.0 : expected).margin(1e-15));
}

TEST_CASE("fit_d_matrix: lambda=1 keeps only the negative co-occurrences") {
    Rng rng(33);
    const auto groups = random_groups(rng, 4, 60, 40);
    const auto d = fit_d_matrix(groups, 1.0, 1.0);
    const auto mu_neg = cooccurrence_mean(groups.negatives);
    // Entries proportional to mu-: equal ratios off the diagonal.
    const double ratio = d.entries(0, 1) / mu_neg(0, 1);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            if (i == j) continue;
            REQUIRE(d.entries(i, j) == Approx(ratio * mu_neg(i, j)).margin(1e-12));
        }
}

TEST_CASE("fit_d_matrix: constraints hold on random instances") {
    Rng rng(34);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t c = 2 + rng.uniform_int(8);
        const auto groups = random_groups(rng, c, 5 + rng.uniform_int(80), 5 + rng.uniform_int(80));
        const double lambda = rng.uniform();
        const auto d = fit_d_matrix(groups, lambda, 1.0);
        REQUIRE_NOTHROW(d.validate());
    }
}

TEST_CASE("fit_d_matrix: sample order within groups does not matter") {
    Rng rng(35);
    auto groups = random_groups(rng, 5, 200, 150);
    const auto d1 = fit_d_matrix(groups, 0.6, 1.0);
    Rng shuffle_rng(99);
    shuffle_rng.shuffle(groups.positives);
    shuffle_rng.shuffle(groups.negatives);
    const auto d2 = fit_d_matrix(groups, 0.6, 1.0);
    for (std::size_t k = 0; k < d1.entries.data.size(); ++k)
        REQUIRE(std::abs(d1.entries.data[k] - d2.entries.data[k]) <= 1e-12);
}

TEST_CASE("fit_d_matrix: norm budget only rescales, factor 2 for 4K") {
    Rng rng(36);
    const auto groups = random_groups(rng, 4, 80, 60);
    const auto d1 = fit_d_matrix(groups, 0.5, 1.0);
    const auto d4 = fit_d_matrix(groups, 0.5, 4.0);
    for (std::size_t k = 0; k < d1.entries.data.size(); ++k)
        REQUIRE(d4.entries.data[k] == Approx(2.0 * d1.entries.data[k]).margin(1e-12));
}

TEST_CASE("unnormalized entries are non-decreasing in lambda") {
    Rng rng(37);
    const auto groups = random_groups(rng, 5, 70, 50);
    const auto mu_pos = cooccurrence_mean(groups.positives);
    const auto mu_neg = cooccurrence_mean(groups.negatives);
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 5; ++j) {
            if (i == j) continue;
            double prev = -1.0;
            for (double lambda = 0.0; lambda <= 1.0001; lambda += 0.1) {
                const double raw = lambda * mu_neg(i, j) - (1.0 - lambda) * mu_pos(i, j);
                const double entry = std::max(raw, 0.0);
                REQUIRE(entry >= prev);
                prev = entry;
            }
        }
    }
}

TEST_CASE("default lambda is the positive fraction") {
    const auto groups = repeated_groups({0.9, 0.1}, {0.6, 0.4}, 30, 10);
    CHECK(default_lambda(groups) == Approx(0.75).margin(1e-15));
}

TEST_CASE("objective_value: zero matrix and lambda=0 sign") {
    Rng rng(38);
    const auto groups = random_groups(rng, 4, 40, 30);
    CHECK(objective_value(Matrix(4, 4, 0.0), groups, 0.7) == 0.0);

    Matrix d(4, 4, 0.3);
    for (std::size_t i = 0; i < 4; ++i) d(i, i) = 0.0;
    CHECK(objective_value(d, groups, 0.0) >= 0.0);
    CHECK_THROWS_AS(objective_value(Matrix(3, 3, 0.1), groups, 0.5), InputError);
}

TEST_CASE("pgd oracle: converges to the closed form on the two-class example") {
    const auto groups = repeated_groups({0.9, 0.1}, {0.6, 0.4}, 10, 10);
    const auto oracle = fit_d_matrix_oracle(groups, 0.5, 1.0, 5000, 0.5, 42);
    CHECK(oracle.entries(0, 1) == Approx(0.70710678118654752).margin(1e-6));
}

TEST_CASE("pgd oracle: closed form is a stationary point") {
    Rng rng(39);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t c = 2 + rng.uniform_int(6);
        const auto groups = random_groups(rng, c, 10 + rng.uniform_int(60), 10 + rng.uniform_int(60));
        const double lambda = 0.25 * static_cast<double>(rng.uniform_int(5));
        const auto closed = fit_d_matrix(groups, lambda, 1.0);
        const double l_closed = closed.fallback ? 0.0 : objective_value(closed, groups, lambda);
        const auto oracle = fit_d_matrix_oracle(groups, lambda, 1.0, 20000, 0.5, 7,
                                                closed.fallback ? Matrix(c, c, 0.0) : closed.entries);
        const double l_oracle = objective_value(oracle, groups, lambda);
        REQUIRE(l_oracle >= l_closed - 1e-9); // no descent from the optimum
        REQUIRE(l_oracle <= l_closed + 1e-9);
    }
}

TEST_CASE("pgd oracle: agrees with the closed form from random starts") {
    Rng rng(40);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t c = 2 + rng.uniform_int(6);
        const auto groups = random_groups(rng, c, 10 + rng.uniform_int(90), 10 + rng.uniform_int(90));
        const double lambda = rng.uniform();
        const auto closed = fit_d_matrix(groups, lambda, 1.0);
        const double l_closed = closed.fallback ? 0.0 : objective_value(closed, groups, lambda);
        const auto oracle =
            fit_d_matrix_oracle(groups, lambda, 1.0, 20000, 0.5, derive_seed(40, trial));
        const double l_oracle = objective_value(oracle, groups, lambda);
        REQUIRE(std::abs(l_oracle - l_closed) <= 1e-6);
        REQUIRE_NOTHROW(oracle.validate());
    }
}

TEST_CASE("fit_d_matrix rejects bad hyperparameters") {
    const auto groups = repeated_groups({0.9, 0.1}, {0.6, 0.4}, 3, 3);
    CHECK_THROWS_AS(fit_d_matrix(groups, -0.1, 1.0), ParameterError);
    CHECK_THROWS_AS(fit_d_matrix(groups, 1.1, 1.0), ParameterError);
    CHECK_THROWS_AS(fit_d_matrix(groups, 0.5, 0.0), ParameterError);
    GroupedProbs empty_side;
    empty_side.positives.emplace_back(std::vector<double>{0.5, 0.5});
    CHECK_THROWS_AS(fit_d_matrix(empty_side, 0.5, 1.0), InputError);
}
