#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "relu/metrics.hpp"
#include "relu/rng.hpp"
#include "test_util.hpp"

using namespace relu;
using Catch::Approx;

namespace {

// Brute-force reference: scan every candidate threshold, keep the best FPR
// among those reaching the TPR level. Must agree with fpr_at_tpr exactly.
double fpr_at_tpr_bruteforce(const ScoredPopulation& pop, double level) {
    std::vector<double> thresholds = pop.pos_scores;
    thresholds.insert(thresholds.end(), pop.neg_scores.begin(), pop.neg_scores.end());
    std::sort(thresholds.begin(), thresholds.end());
    double best = 1.0;
    bool found = false;
    for (double t : thresholds) {
        std::size_t tp = 0, fp = 0;
        for (double s : pop.pos_scores) tp += (s <= t);
        for (double s : pop.neg_scores) fp += (s <= t);
        const double tpr = static_cast<double>(tp) / static_cast<double>(pop.pos_scores.size());
        const double fpr = static_cast<double>(fp) / static_cast<double>(pop.neg_scores.size());
        if (tpr >= level && (!found || fpr < best)) {
            best = fpr;
            found = true;
        }
    }
    return best;
}

ScoredPopulation random_population(Rng& rng, std::size_t max_side, bool with_ties) {
    ScoredPopulation pop;
    const std::size_t np = 1 + rng.uniform_int(max_side);
    const std::size_t nn = 1 + rng.uniform_int(max_side);
    for (std::size_t i = 0; i < np; ++i)
        pop.pos_scores.push_back(with_ties ? std::floor(rng.uniform() * 20.0) / 20.0 : rng.uniform());
    for (std::size_t i = 0; i < nn; ++i)
        pop.neg_scores.push_back(with_ties ? std::floor(rng.uniform() * 20.0) / 20.0
                                           : 0.2 + rng.uniform());
    return pop;
}

} // namespace

TEST_CASE("roc: perfect separation") {
    ScoredPopulation pop{{0.1, 0.2, 0.3}, {0.5, 0.6}};
    const auto curve = roc_curve(pop);
    bool hits_corner = false;
    for (const auto& pt : curve) hits_corner |= (pt.fpr == 0.0 && pt.tpr == 1.0);
    CHECK(hits_corner);
    CHECK(auroc(pop) == 1.0);
    CHECK(auroc_trapezoid(pop) == Approx(1.0).margin(1e-15));
    for (double level : {0.5, 0.9, 0.95, 1.0}) CHECK(fpr_at_tpr(pop, level) == 0.0);
}

TEST_CASE("roc: constant scores collapse to one step") {
    ScoredPopulation pop{{0.4, 0.4, 0.4}, {0.4, 0.4}};
    const auto curve = roc_curve(pop);
    REQUIRE(curve.size() == 1);
    CHECK(curve[0].fpr == 1.0);
    CHECK(curve[0].tpr == 1.0);
    CHECK(auroc(pop) == 0.5);
    CHECK(auroc_trapezoid(pop) == Approx(0.5).margin(1e-15));
}

TEST_CASE("roc: frozen toy AUROC") {
    ScoredPopulation pop{{0.1, 0.4}, {0.3, 0.9}};
    CHECK(auroc(pop) == Approx(0.75).margin(1e-15));
    CHECK(auroc_trapezoid(pop) == Approx(0.75).margin(1e-12));
}

TEST_CASE("fpr_at_tpr: frozen staircase example") {
    ScoredPopulation pop;
    for (int i = 1; i <= 20; ++i) pop.pos_scores.push_back(i);
    for (int i = 11; i <= 30; ++i) pop.neg_scores.push_back(i);
    CHECK(fpr_at_tpr(pop, 0.95) == Approx(0.45).margin(1e-15));
}

TEST_CASE("fpr_at_tpr: class-independent scores land near the level") {
    Rng rng(51);
    ScoredPopulation pop;
    for (int i = 0; i < 10000; ++i) pop.pos_scores.push_back(rng.uniform());
    for (int i = 0; i < 10000; ++i) pop.neg_scores.push_back(rng.uniform());
    CHECK(fpr_at_tpr(pop, 0.95) == Approx(0.95).margin(0.02));
}

TEST_CASE("fpr_at_tpr equals the exhaustive sweep, exactly") {
    Rng rng(52);
    for (int trial = 0; trial < 300; ++trial) {
        const auto pop = random_population(rng, 120, trial % 2 == 0);
        const double level = 0.5 + 0.5 * rng.uniform();
        REQUIRE(fpr_at_tpr(pop, level) == fpr_at_tpr_bruteforce(pop, level));
    }
}

TEST_CASE("auroc: pairwise and trapezoid routes agree to 1e-12") {
    Rng rng(53);
    for (int trial = 0; trial < 300; ++trial) {
        const auto pop = random_population(rng, 200, trial % 3 == 0);
        REQUIRE(std::abs(auroc(pop) - auroc_trapezoid(pop)) <= 1e-12);
    }
}

TEST_CASE("ranking metrics are invariant under strictly increasing transforms") {
    Rng rng(54);
    const auto pop = random_population(rng, 150, true);
    std::vector<double> correct_scores = pop.pos_scores;
    correct_scores.insert(correct_scores.end(), pop.neg_scores.begin(), pop.neg_scores.end());
    std::vector<bool> correct(pop.pos_scores.size(), true);
    correct.resize(correct_scores.size(), false);

    ScoredPopulation mapped;
    for (double s : pop.pos_scores) mapped.pos_scores.push_back(std::exp(3.0 * s) + 1.0);
    for (double s : pop.neg_scores) mapped.neg_scores.push_back(std::exp(3.0 * s) + 1.0);
    std::vector<double> mapped_scores;
    for (double s : correct_scores) mapped_scores.push_back(std::exp(3.0 * s) + 1.0);

    const auto c1 = roc_curve(pop);
    const auto c2 = roc_curve(mapped);
    REQUIRE(c1.size() == c2.size());
    for (std::size_t i = 0; i < c1.size(); ++i) {
        REQUIRE(c1[i].fpr == c2[i].fpr);
        REQUIRE(c1[i].tpr == c2[i].tpr);
    }
    CHECK(auroc(pop) == auroc(mapped));
    CHECK(fpr_at_tpr(pop, 0.95) == fpr_at_tpr(mapped, 0.95));

    const auto rc1 = risk_coverage(correct_scores, correct);
    const auto rc2 = risk_coverage(mapped_scores, correct);
    REQUIRE(rc1.points.size() == rc2.points.size());
    for (std::size_t i = 0; i < rc1.points.size(); ++i) {
        REQUIRE(rc1.points[i].coverage == rc2.points[i].coverage);
        REQUIRE(rc1.points[i].risk == rc2.points[i].risk);
    }
    CHECK(rc1.aurc == rc2.aurc);
}

TEST_CASE("risk-coverage: hand examples") {
    const auto flawless = risk_coverage({0.5, 0.1, 0.9}, {true, true, true});
    for (const auto& pt : flawless.points) CHECK(pt.risk == 0.0);
    CHECK(flawless.aurc == 0.0);

    // Oracle ordering: risk stays zero until coverage reaches the accuracy.
    const auto oracle = risk_coverage({0.1, 0.2, 0.3, 0.8, 0.9}, {true, true, true, false, false});
    for (const auto& pt : oracle.points) {
        if (pt.coverage <= 0.6 + 1e-15) CHECK(pt.risk == 0.0);
    }

    const auto swept = risk_coverage({0.1, 0.2, 0.3, 0.4}, {true, true, false, true});
    REQUIRE(swept.points.size() == 4);
    CHECK(swept.points[0].coverage == Approx(0.25).margin(1e-15));
    CHECK(swept.points[0].risk == 0.0);
    CHECK(swept.points[1].coverage == Approx(0.5).margin(1e-15));
    CHECK(swept.points[1].risk == 0.0);
    CHECK(swept.points[2].coverage == Approx(0.75).margin(1e-15));
    CHECK(swept.points[2].risk == Approx(1.0 / 3.0).margin(1e-15));
    CHECK(swept.points[3].coverage == Approx(1.0).margin(1e-15));
    CHECK(swept.points[3].risk == Approx(0.25).margin(1e-15));
    // trapezoid over the four swept points
    CHECK(swept.aurc == Approx(11.0 / 96.0).margin(1e-15));

    CHECK_THROWS_AS(risk_coverage({}, {}), InputError);
}

TEST_CASE("risk-coverage: oracle scorer minimizes AURC") {
    Rng rng(55);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 20 + rng.uniform_int(200);
        std::vector<bool> correct(n);
        for (std::size_t i = 0; i < n; ++i) correct[i] = rng.uniform() < 0.8;

        // Oracle: distinct scores, all correct below all errors.
        std::vector<double> oracle_scores(n);
        double lo = 0.0, hi = 1000.0;
        for (std::size_t i = 0; i < n; ++i) oracle_scores[i] = correct[i] ? (lo += 1.0) : (hi += 1.0);
        const double oracle_aurc = risk_coverage(oracle_scores, correct).aurc;

        for (int rival = 0; rival < 10; ++rival) {
            std::vector<double> scores(n);
            for (double& s : scores) s = rng.uniform();
            REQUIRE(risk_coverage(scores, correct).aurc >= oracle_aurc - 1e-12);
        }
    }
}

TEST_CASE("ece hand examples and permutation invariance") {
    std::vector<ProbVector> onehot(5, ProbVector({1.0, 0.0, 0.0}));
    CHECK(ece(onehot, {0, 0, 0, 0, 0}) == 0.0);

    // Ten predictions at confidence 0.8, eight of them correct.
    std::vector<ProbVector> calibrated(10, ProbVector({0.8, 0.1, 0.1}));
    std::vector<int> labels(10, 0);
    labels[8] = 1;
    labels[9] = 1;
    CHECK(ece(calibrated, labels) == Approx(0.0).margin(1e-12));

    std::vector<ProbVector> two(2, ProbVector({0.9, 0.1}));
    CHECK(ece(two, {0, 1}) == Approx(0.4).margin(1e-12));

    Rng rng(56);
    std::vector<ProbVector> probs;
    std::vector<int> ls;
    for (int i = 0; i < 200; ++i) {
        probs.push_back(testing::random_prob_vector(rng, 4));
        ls.push_back(static_cast<int>(rng.uniform_int(4)));
    }
    const double base = ece(probs, ls);
    std::vector<std::size_t> order(probs.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::vector<ProbVector> probs2;
    std::vector<int> ls2;
    for (std::size_t k : order) {
        probs2.push_back(probs[k]);
        ls2.push_back(ls[k]);
    }
    CHECK(ece(probs2, ls2) == Approx(base).margin(1e-12));

    CHECK_THROWS_AS(ece({}, {}), InputError);
}

TEST_CASE("calibrate_temperature: scaled logits are recovered") {
    // Labels drawn from the model's own softmax make T=1 calibrated; scaling
    // the logits by 2 moves the optimum near 2.
    Rng rng(57);
    const std::size_t n = 4000, c = 4;
    Matrix logits(n, c);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> z = testing::random_logits(rng, c, 1.5);
        const auto p = softmax_with_temperature(LogitVector(z), 1.0);
        double u = rng.uniform(), acc = 0.0;
        int y = static_cast<int>(c) - 1;
        for (std::size_t k = 0; k < c; ++k) {
            acc += p[k];
            if (u < acc) {
                y = static_cast<int>(k);
                break;
            }
        }
        labels[i] = y;
        for (std::size_t k = 0; k < c; ++k) logits(i, k) = z[k];
    }

    const auto fit1 = calibrate_temperature(logits, labels);
    CHECK_FALSE(fit1.degenerate);
    CHECK(fit1.t_star >= 0.8);
    CHECK(fit1.t_star <= 1.25);

    Matrix doubled = logits;
    for (double& v : doubled.data) v *= 2.0;
    const auto fit2 = calibrate_temperature(doubled, labels);
    // One grid step of the 100-point log grid is a factor of about 1.055.
    CHECK(fit2.t_star >= 2.0 / 1.056);
    CHECK(fit2.t_star <= 2.0 * 1.056);
}

TEST_CASE("calibrate_temperature: flat objective returns the smallest grid point") {
    Matrix logits(10, 3, 0.0); // constant rows: ECE does not depend on T
    std::vector<int> labels(10, 0);
    const auto fit = calibrate_temperature(logits, labels);
    CHECK(fit.degenerate);
    CHECK(fit.t_star == Approx(0.05).margin(1e-12));

    Matrix single(1, 3, 0.0);
    CHECK_THROWS_AS(calibrate_temperature(single, {0}), InputError);
}

TEST_CASE("confusion matrix") {
    EvalDataset ds;
    ds.num_classes = 3;
    ds.samples.push_back(testing::make_sample(3, 0, 0));
    ds.samples.push_back(testing::make_sample(3, 0, 0));
    ds.samples.push_back(testing::make_sample(3, 1, 1));
    const auto perfect = confusion_matrix(ds);
    CHECK(perfect(0, 0) == 2.0);
    CHECK(perfect(1, 1) == 1.0);
    CHECK(perfect(0, 1) == 0.0);

    EvalDataset one;
    one.num_classes = 3;
    one.samples.push_back(testing::make_sample(3, 2, 1)); // true 1 predicted 2
    const auto m = confusion_matrix(one);
    CHECK(m(1, 2) == 1.0);
}

TEST_CASE("roc curves are monotone in both coordinates") {
    Rng rng(58);
    for (int trial = 0; trial < 100; ++trial) {
        ScoredPopulation pop;
        const std::size_t np = 1 + rng.uniform_int(150), nn = 1 + rng.uniform_int(150);
        for (std::size_t i = 0; i < np; ++i)
            pop.pos_scores.push_back(std::floor(rng.uniform() * 30.0) / 30.0);
        for (std::size_t i = 0; i < nn; ++i)
            pop.neg_scores.push_back(std::floor(rng.uniform() * 30.0) / 30.0);
        const auto curve = roc_curve(pop);
        for (std::size_t i = 1; i < curve.size(); ++i) {
            REQUIRE(curve[i].fpr >= curve[i - 1].fpr);
            REQUIRE(curve[i].tpr >= curve[i - 1].tpr);
            REQUIRE(curve[i].threshold > curve[i - 1].threshold);
        }
        REQUIRE(curve.back().fpr == 1.0);
        REQUIRE(curve.back().tpr == 1.0);
    }
}
