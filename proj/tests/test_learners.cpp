#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ccrp/learners.hpp"

namespace ccrp {
namespace {

LabeledInstance inst(std::vector<double> x, std::size_t y) { return {std::move(x), y}; }

void expect_normalized(const ScoreVector& s) {
    double sum = 0.0;
    for (double v : s) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
}

TEST(HoeffdingBound, HandValue) { EXPECT_NEAR(hoeffding_bound(1.0, 0.05, 100), 0.12239, 5e-6); }

TEST(HoeffdingBound, QuadrupledSampleHalvesBound) {
    for (std::size_t n : {1u, 7u, 100u, 12345u})
        EXPECT_NEAR(hoeffding_bound(2.0, 1e-7, 4 * n), hoeffding_bound(2.0, 1e-7, n) / 2.0, 1e-15);
}

TEST(HoeffdingBound, UnitDeltaIsZero) { EXPECT_EQ(hoeffding_bound(1.0, 1.0, 10), 0.0); }

TEST(HoeffdingBound, DomainErrors) {
    EXPECT_THROW(hoeffding_bound(0.0, 0.05, 10), std::domain_error);
    EXPECT_THROW(hoeffding_bound(1.0, 0.0, 10), std::domain_error);
    EXPECT_THROW(hoeffding_bound(1.0, 1.5, 10), std::domain_error);
    EXPECT_THROW(hoeffding_bound(1.0, 0.05, 0), std::domain_error);
}

TEST(GaussianEstimator, MatchesTwoPassStatistics) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> d(3.0, 2.0);
    std::vector<double> xs(500);
    GaussianEstimator g;
    for (auto& x : xs) g.add(x = d(rng));
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    EXPECT_NEAR(g.mean, mean, 1e-12);
    EXPECT_NEAR(g.variance(), ss / static_cast<double>(xs.size() - 1), 1e-9);
}

TEST(GaussianEstimator, MergeEqualsSequential) {
    GaussianEstimator a, b, all;
    for (int i = 0; i < 30; ++i) {
        const double x = std::sin(i) * 4.0;
        (i < 12 ? a : b).add(x);
        all.add(x);
    }
    const auto m = GaussianEstimator::merge(a, b);
    EXPECT_DOUBLE_EQ(m.weight, all.weight);
    EXPECT_NEAR(m.mean, all.mean, 1e-12);
    EXPECT_NEAR(m.variance(), all.variance(), 1e-12);
    EXPECT_EQ(m.min, all.min);
    EXPECT_EQ(m.max, all.max);
}

// ---------------------------------------------------------------------------
// Naive Bayes

TEST(NaiveBayes, ColdIsUniform) {
    NaiveBayes nb(3, 4);
    EXPECT_TRUE(nb.cold());
    EXPECT_EQ(nb.predict_scores(std::vector<double>{1, 2, 3}), (ScoreVector{0.25, 0.25, 0.25, 0.25}));
}

TEST(NaiveBayes, PurePriorPrediction) {
    NaiveBayes nb(1, 2, {.prior_smoothing = 0.0, .use_features = false});
    for (int i = 0; i < 3; ++i) nb.train(inst({0.0}, 0));
    nb.train(inst({0.0}, 1));
    const auto s = nb.predict_scores(std::vector<double>{5.0});
    EXPECT_NEAR(s[0], 0.75, 1e-12);
    EXPECT_NEAR(s[1], 0.25, 1e-12);
}

TEST(NaiveBayes, LaplacePrior) {
    NaiveBayes nb(1, 2);
    for (int i = 0; i < 3; ++i) nb.train(inst({0.0}, 0));
    nb.train(inst({0.0}, 1));
    const auto p = nb.prior();
    EXPECT_NEAR(p[0], 4.0 / 6.0, 1e-15);
    EXPECT_NEAR(p[1], 2.0 / 6.0, 1e-15);
}

// Direct Bayes rule: prior times a product of Gaussian densities, each from
// two-pass moments over the stored raw values.
ScoreVector brute_force_posterior(const std::vector<LabeledInstance>& data, std::size_t F, std::size_t L,
                                  const std::vector<double>& x) {
    std::vector<double> post(L);
    for (std::size_t c = 0; c < L; ++c) {
        double n_c = 0.0;
        for (const auto& d : data) n_c += d.label == c;
        double p = (n_c + 1.0) / (static_cast<double>(data.size()) + static_cast<double>(L));
        for (std::size_t f = 0; f < F; ++f) {
            std::vector<double> vals;
            for (const auto& d : data)
                if (d.label == c) vals.push_back(d.features[f]);
            double mean = 0.0;
            for (double v : vals) mean += v;
            mean /= static_cast<double>(vals.size());
            double var = 0.0;
            for (double v : vals) var += (v - mean) * (v - mean);
            var = vals.size() > 1 ? var / static_cast<double>(vals.size() - 1) : 0.0;
            var += 1e-9;
            p *= std::exp(-(x[f] - mean) * (x[f] - mean) / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
        }
        post[c] = p;
    }
    double total = 0.0;
    for (double v : post) total += v;
    for (auto& v : post) v /= total;
    return post;
}

TEST(NaiveBayes, MatchesBruteForceOnIntegerFixtures) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t F = 1 + rng() % 3, L = 2 + rng() % 3;
        std::vector<LabeledInstance> data;
        for (std::size_t c = 0; c < L; ++c) {
            for (int r = 0; r < 4; ++r) {
                std::vector<double> x(F);
                for (auto& v : x) v = static_cast<double>(static_cast<int>(rng() % 7) + 2 * static_cast<int>(c));
                data.push_back(inst(x, c));
            }
        }
        NaiveBayes nb(F, L);
        for (const auto& d : data) nb.train(d);
        for (int probe = 0; probe < 5; ++probe) {
            std::vector<double> x(F);
            for (auto& v : x) v = static_cast<double>(rng() % 9);
            const auto expected = brute_force_posterior(data, F, L, x);
            const auto got = nb.predict_scores(x);
            for (std::size_t c = 0; c < L; ++c) ASSERT_NEAR(got[c], expected[c], 1e-9);
        }
    }
}

TEST(NaiveBayes, UnseenClassStaysFinite) {
    NaiveBayes nb(2, 3);
    nb.train(inst({0.0, 1.0}, 0));
    nb.train(inst({1.0, 0.0}, 1));
    const auto s = nb.predict_scores(std::vector<double>{0.5, 0.5});
    expect_normalized(s);
    EXPECT_GT(s[2], 0.0);
}

TEST(NaiveBayes, SizeFormula) {
    NaiveBayes nb(2, 2);
    EXPECT_EQ(nb.estimate_size(), size_cost::kModelOverhead + 4 * size_cost::kGaussianEntry);
    nb.train(inst({1.0, 2.0}, 1));
    EXPECT_EQ(nb.estimate_size(), size_cost::kModelOverhead + 4 * size_cost::kGaussianEntry);
}

TEST(Learners, ScoresAreNormalized) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    NaiveBayes nb(4, 5);
    HoeffdingTree ht(4, 5, {.grace_period = 50});
    for (int i = 0; i < 3000; ++i) {
        std::vector<double> x{u(rng), u(rng), u(rng), u(rng)};
        const std::size_t y = (x[0] > 0) + (x[1] > 2) * 2 + (rng() % 10 == 0);
        nb.train(inst(x, y % 5));
        ht.train(inst(x, y % 5));
    }
    for (int i = 0; i < 500; ++i) {
        std::vector<double> x{u(rng) * 3, u(rng), u(rng), u(rng) * 100};
        expect_normalized(nb.predict_scores(x));
        expect_normalized(ht.predict_scores(x));
    }
}

TEST(Learners, RejectNonConformingInstances) {
    NaiveBayes nb(2, 3);
    EXPECT_THROW(nb.train(inst({1.0}, 0)), LearnerError);
    EXPECT_THROW(nb.train(inst({1.0, 2.0}, 3)), LearnerError);
    EXPECT_THROW(nb.predict_scores(std::vector<double>{1.0}), LearnerError);
    EXPECT_THROW(NaiveBayes(0, 3), LearnerError);
    EXPECT_THROW(HoeffdingTree(2, 1), LearnerError);
}

// ---------------------------------------------------------------------------
// Hoeffding tree

TEST(HoeffdingTree, ColdIsUniform) {
    HoeffdingTree ht(2, 4);
    EXPECT_EQ(ht.predict_scores(std::vector<double>{0.3, 0.3}), (ScoreVector{0.25, 0.25, 0.25, 0.25}));
}

TEST(HoeffdingTree, LearnsSeparableBands) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    HoeffdingTree ht(3, 3);
    std::size_t correct = 0, tested = 0;
    for (int i = 0; i < 20'000; ++i) {
        std::vector<double> x{u(rng), u(rng), u(rng)};
        const std::size_t y = x[1] < 0.3 ? 0 : (x[1] < 0.7 ? 1 : 2);
        if (i >= 10'000) {
            correct += ht.predict(x) == y;
            ++tested;
        }
        ht.train(inst(x, y));
    }
    EXPECT_GE(static_cast<double>(correct) / static_cast<double>(tested), 0.95);
    EXPECT_GT(ht.internal_count(), 0u);
}

TEST(HoeffdingTree, NoSplitsWithoutInformation) {
    std::mt19937_64 rng(4);
    HoeffdingTree ht(3, 4, {.tie_threshold = 0.0});
    for (int i = 0; i < 10'000; ++i) ht.train(inst({1.0, -2.0, 0.5}, rng() % 4));
    EXPECT_EQ(ht.internal_count(), 0u);
    EXPECT_EQ(ht.node_count(), 1u);
}

TEST(HoeffdingTree, SizeFormulaAndGrowth) {
    const std::size_t F = 3, L = 3;
    HoeffdingTree ht(F, L, {.grace_period = 100});
    const std::size_t leaf_bytes = size_cost::kNodeOverhead + size_cost::kModelOverhead + F * L * size_cost::kGaussianEntry +
                                   L * size_cost::kClassCount;
    EXPECT_EQ(ht.estimate_size(), size_cost::kModelOverhead + leaf_bytes);

    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::size_t last = ht.estimate_size();
    for (int i = 0; i < 5'000; ++i) {
        std::vector<double> x{u(rng), u(rng), u(rng)};
        ht.train(inst(x, x[0] < 0.5 ? 0 : (x[2] < 0.5 ? 1 : 2)));
        ASSERT_GE(ht.estimate_size(), last);
        last = ht.estimate_size();
    }
    const std::size_t internal = ht.internal_count(), leaves = ht.leaf_count();
    EXPECT_GT(internal, 0u);
    EXPECT_EQ(ht.estimate_size(),
              size_cost::kModelOverhead + internal * size_cost::kNodeOverhead + leaves * leaf_bytes);
}

TEST(HoeffdingTree, IdenticalTrainingIsDeterministic) {
    HoeffdingTree a(2, 3), b(2, 3);
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 4'000; ++i) {
        std::vector<double> x{u(rng), u(rng)};
        const auto y = static_cast<std::size_t>(x[0] * 3.0);
        a.train(inst(x, y));
        b.train(inst(x, y));
    }
    EXPECT_EQ(a.estimate_size(), b.estimate_size());
    EXPECT_EQ(a.node_count(), b.node_count());
    for (int i = 0; i < 100; ++i) {
        std::vector<double> x{u(rng), u(rng)};
        EXPECT_EQ(a.predict_scores(x), b.predict_scores(x));
    }
}

TEST(HoeffdingTree, CloneIsIndependent) {
    HoeffdingTree a(2, 3, {.grace_period = 50});
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto step = [&](Classifier& c) {
        std::vector<double> x{u(rng), u(rng)};
        c.train(inst(x, static_cast<std::size_t>(x[1] * 3.0)));
    };
    for (int i = 0; i < 1'000; ++i) step(a);
    auto b = a.clone();
    const auto size_before = b->estimate_size();
    const auto seen_before = b->seen();
    for (int i = 0; i < 2'000; ++i) step(a);
    EXPECT_EQ(b->estimate_size(), size_before);
    EXPECT_EQ(b->seen(), seen_before);
}

TEST(HoeffdingTree, OptionValidation) {
    EXPECT_THROW(HoeffdingTree(2, 3, {.grace_period = 0}), LearnerError);
    EXPECT_THROW(HoeffdingTree(2, 3, {.split_confidence = 0.0}), LearnerError);
    EXPECT_THROW(HoeffdingTree(2, 3, {.tie_threshold = -1.0}), LearnerError);
}

TEST(Entropy, KnownValues) {
    EXPECT_EQ(entropy(std::vector<double>{5.0, 0.0}), 0.0);
    EXPECT_DOUBLE_EQ(entropy(std::vector<double>{1.0, 1.0}), 1.0);
    EXPECT_DOUBLE_EQ(entropy(std::vector<double>{2.0, 2.0, 2.0, 2.0}), 2.0);
    EXPECT_EQ(entropy(std::vector<double>{}), 0.0);
}

} // namespace
} // namespace ccrp
