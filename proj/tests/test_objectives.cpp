#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "augcn/metrics.hpp"
#include "augcn/objectives.hpp"

using namespace augcn;

namespace {

// Pairwise-counting AUC used as an independent oracle for the rank-based
// implementation.
double brute_force_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
    double credit = 0.0;
    for (double p : pos) {
        for (double n : neg) {
            if (p > n)
                credit += 1.0;
            else if (p == n)
                credit += 0.5;
        }
    }
    return credit / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

}  // namespace

TEST_CASE("class_weights formula and normalization") {
    ClassWeights uniform = class_weights({0.3, 0.3, 0.3});
    for (std::size_t i = 0; i < 3; ++i) CHECK(uniform.w[i] == doctest::Approx(1.0));

    ClassWeights two = class_weights({0.5, 0.25});
    CHECK(two.w[0] == doctest::Approx(2.0 / 3.0));
    CHECK(two.w[1] == doctest::Approx(4.0 / 3.0));

    ClassWeights one = class_weights({0.017});
    CHECK(one.w[0] == doctest::Approx(1.0));

    std::vector<int> aus = {1, 12};
    try {
        class_weights({0.5, 0.0}, &aus);
        FAIL("expected a degenerate-rate error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("AU 12") != std::string::npos);
    }

    // weights always sum to C
    SeededRng rng(77);
    for (int round = 0; round < 1000; ++round) {
        const std::size_t c = 1 + rng.below(16);
        std::vector<double> rates(c);
        for (double& r : rates) r = rng.uniform(1e-4, 1.0);
        ClassWeights w = class_weights(rates);
        double sum = 0.0;
        for (std::size_t i = 0; i < c; ++i) {
            CHECK(w.w[i] > 0.0);
            sum += w.w[i];
        }
        CHECK(std::fabs(sum - static_cast<double>(c)) < 1e-12);
    }
}

TEST_CASE("weighted_softmax_loss examples") {
    ClassWeights w1 = class_weights({0.4});
    CHECK(weighted_softmax_loss(Tensor({1}, {1.0}), Tensor({1}, {0.5}), w1) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-10));

    ClassWeights w3 = class_weights({0.2, 0.4, 0.6});
    Tensor y({3}, {1.0, 0.0, 1.0});
    CHECK(weighted_softmax_loss(y, y, w3) < 1e-5);

    Tensor yhat({3}, {0.7, 0.2, 0.9});
    double base = weighted_softmax_loss(y, yhat, w3);
    ClassWeights doubled = w3;
    for (std::size_t i = 0; i < 3; ++i) doubled.w[i] *= 2.0;
    CHECK(weighted_softmax_loss(y, yhat, doubled) == doctest::Approx(2.0 * base));
    CHECK(base > 0.0);
}

TEST_CASE("dice_loss examples and bounds") {
    ClassWeights w1 = class_weights({0.5});
    CHECK(dice_loss(Tensor({1}, {1.0}), Tensor({1}, {0.0}), w1, 1.0) == doctest::Approx(0.5));

    // exact zero at perfect binary predictions, any positive eps
    ClassWeights w4 = class_weights({0.2, 0.4, 0.6, 0.8});
    Tensor y({4}, {1.0, 0.0, 1.0, 0.0});
    for (double eps : {1e-6, 0.5, 1.0, 7.0}) {
        CHECK(dice_loss(y, y, w4, eps) == 0.0);
    }
    CHECK_THROWS_AS(dice_loss(y, y, w4, 0.0), std::invalid_argument);

    // each unweighted term lies in [0, 1); the weighted loss under max(w)
    SeededRng rng(9);
    double wmax = 0.0;
    for (std::size_t i = 0; i < 4; ++i) wmax = std::max(wmax, w4.w[i]);
    for (int round = 0; round < 200; ++round) {
        Tensor labels({4});
        Tensor probs({4});
        for (std::size_t i = 0; i < 4; ++i) {
            labels[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
            probs[i] = rng.uniform();
        }
        double loss = dice_loss(labels, probs, w4, 1.0);
        CHECK(loss >= 0.0);
        CHECK(loss < wmax);
    }
}

TEST_CASE("loss gradients w.r.t. pre-sigmoid logits are exact") {
    SeededRng rng(10);
    ClassWeights w = class_weights({0.2, 0.5, 0.8});
    Var logits = parameter(Tensor({2, 3}));
    for (double& v : logits->value.raw()) v = rng.uniform(-1.5, 1.5);
    Tensor y({2, 3}, {1, 0, 1, 0, 0, 1});

    auto softmax_loss = [&] { return weighted_softmax_loss(y, sigmoid(logits), w); };
    CHECK(grad_check(softmax_loss, {logits}, 1e-5) < 1e-6);

    auto dice = [&] { return dice_loss(y, sigmoid(logits), w, 1.0); };
    CHECK(grad_check(dice, {logits}, 1e-5) < 1e-6);

    auto combined = [&] {
        return au_loss(weighted_softmax_loss(y, sigmoid(logits), w),
                       dice_loss(y, sigmoid(logits), w, 1.0), 4.0);
    };
    CHECK(grad_check(combined, {logits}, 1e-5) < 1e-6);
}

TEST_CASE("au_loss arithmetic") {
    CHECK(au_loss(0.37, 0.99, 0.0) == doctest::Approx(0.37));
    CHECK(au_loss(0.1, 0.05, 4.0) == doctest::Approx(0.3));
    CHECK(au_loss(0.0, 0.0, 4.0) == doctest::Approx(0.0));
    CHECK_THROWS_AS(au_loss(0.1, 0.1, -2.0), std::invalid_argument);
}

TEST_CASE("f1_scores conventions and examples") {
    Tensor labels({3, 2}, {1, 0, 0, 1, 1, 0});
    F1Result perfect = f1_scores(labels, labels);
    for (double f : perfect.per_au) CHECK(f == doctest::Approx(1.0));
    CHECK(perfect.average == doctest::Approx(1.0));

    // tp=1, fp=1, fn=0 -> p=0.5, r=1, F1=2/3
    Tensor scores({2, 1}, {0.9, 0.8});
    Tensor y({2, 1}, {1.0, 0.0});
    F1Result mixed = f1_scores(scores, y);
    CHECK(mixed.per_au[0] == doctest::Approx(2.0 / 3.0));
    CHECK(mixed.counts[0].tp == 1);
    CHECK(mixed.counts[0].fp == 1);
    CHECK(mixed.counts[0].fn == 0);

    // all-negative predictions on a batch with positives
    Tensor low({2, 1}, {0.1, 0.2});
    F1Result zero = f1_scores(low, y);
    CHECK(zero.per_au[0] == 0.0);

    CHECK_THROWS_AS(f1_scores(Tensor({0, 2}), Tensor({0, 2})), std::invalid_argument);
}

TEST_CASE("f1_scores agrees with direct counting on random batches") {
    SeededRng rng(11);
    for (int round = 0; round < 100; ++round) {
        const std::size_t n = 1 + rng.below(200);
        const std::size_t c = 1 + rng.below(6);
        Tensor scores({n, c});
        Tensor labels({n, c});
        for (std::size_t i = 0; i < scores.size(); ++i) {
            scores[i] = rng.uniform();
            labels[i] = rng.uniform() < 0.4 ? 1.0 : 0.0;
        }
        F1Result got = f1_scores(scores, labels);
        double avg = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            long tp = 0, fp = 0, fn = 0, tn = 0;
            for (std::size_t i = 0; i < n; ++i) {
                bool pred = scores.at(i, j) >= 0.5;
                bool pos = labels.at(i, j) != 0.0;
                tp += pred && pos;
                fp += pred && !pos;
                fn += !pred && pos;
                tn += !pred && !pos;
            }
            CHECK(got.counts[j].tp == tp);
            CHECK(got.counts[j].fp == fp);
            CHECK(got.counts[j].fn == fn);
            CHECK(got.counts[j].tn == tn);
            double p = tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0;
            double r = tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0;
            double f1 = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
            CHECK(got.per_au[j] == f1);  // exact
            avg += f1;
        }
        CHECK(got.average == doctest::Approx(avg / double(c)).epsilon(1e-15));
    }
}

TEST_CASE("auc_scores examples") {
    // separable scores
    Tensor s1({4, 1}, {0.9, 0.8, 0.2, 0.1});
    Tensor y1({4, 1}, {1, 1, 0, 0});
    CHECK(*auc_scores(s1, y1).per_au[0] == doctest::Approx(1.0));

    // all ties
    Tensor s2 = Tensor::full({6, 1}, 0.5);
    Tensor y2({6, 1}, {1, 0, 1, 0, 1, 0});
    CHECK(*auc_scores(s2, y2).per_au[0] == doctest::Approx(0.5));

    // pos {0.9, 0.4}, neg {0.5} -> (1 + 0) / 2
    Tensor s3({3, 1}, {0.9, 0.4, 0.5});
    Tensor y3({3, 1}, {1, 1, 0});
    CHECK(*auc_scores(s3, y3).per_au[0] == doctest::Approx(0.5));

    // single-class column is reported absent and excluded from the average
    Tensor s4({3, 2}, {0.9, 0.9, 0.4, 0.8, 0.5, 0.1});
    Tensor y4({3, 2}, {1, 1, 1, 1, 0, 1});
    AucResult partial = auc_scores(s4, y4);
    CHECK_FALSE(partial.per_au[1].has_value());
    REQUIRE(partial.per_au[0].has_value());
    CHECK(partial.average == partial.per_au[0]);
    REQUIRE(partial.undefined_columns.size() == 1);
    CHECK(partial.undefined_columns[0] == 1);
}

TEST_CASE("auc_scores agrees with brute-force pairwise counting") {
    SeededRng rng(12);
    for (int round = 0; round < 100; ++round) {
        const std::size_t n = 2 + rng.below(199);
        const std::size_t c = 1 + rng.below(4);
        Tensor scores({n, c});
        Tensor labels({n, c});
        for (std::size_t i = 0; i < scores.size(); ++i) {
            // coarse grid so ties actually happen
            scores[i] = static_cast<double>(rng.below(12)) / 11.0;
            labels[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
        }
        AucResult got = auc_scores(scores, labels);
        for (std::size_t j = 0; j < c; ++j) {
            std::vector<double> pos, neg;
            for (std::size_t i = 0; i < n; ++i) {
                (labels.at(i, j) != 0.0 ? pos : neg).push_back(scores.at(i, j));
            }
            if (pos.empty() || neg.empty()) {
                CHECK_FALSE(got.per_au[j].has_value());
                continue;
            }
            REQUIRE(got.per_au[j].has_value());
            CHECK(std::fabs(*got.per_au[j] - brute_force_auc(pos, neg)) < 1e-12);
        }
    }
}

TEST_CASE("eval report serializes per-AU metrics and run settings") {
    Tensor scores({4, 2}, {0.9, 0.2, 0.8, 0.3, 0.1, 0.7, 0.2, 0.6});
    Tensor labels({4, 2}, {1, 0, 1, 0, 0, 1, 0, 1});
    EvalReport report;
    report.au_ids = {1, 2};
    report.f1 = f1_scores(scores, labels);
    report.auc = auc_scores(scores, labels);
    report.num_samples = 4;
    report.lambda1 = 3.0;
    report.lambda2 = 4.0;
    report.dice_epsilon = 1.0;
    report.learning_rate = 0.01;
    report.adjacency_mode = "raw";
    report.seed = 7;
    report.config_name = "toy";

    std::string json = report.to_json();
    CHECK(json.find("\"avg_f1\"") != std::string::npos);
    CHECK(json.find("\"adjacency_mode\": \"raw\"") != std::string::npos);
    CHECK(json.find("\"lambda2\": 4.0") != std::string::npos);
    std::string text = report.to_text();
    CHECK(text.find("AU1") != std::string::npos);
    CHECK(text.find("Avg") != std::string::npos);
    // averages equal the arithmetic means of the per-AU values
    CHECK(report.f1.average ==
          doctest::Approx((report.f1.per_au[0] + report.f1.per_au[1]) / 2.0));
}
