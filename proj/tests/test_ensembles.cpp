#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "ccrp/ensembles.hpp"
#include "ccrp/pruner.hpp"
#include "test_support.hpp"

namespace ccrp {
namespace {

using testing::ConstantClassifier;
using testing::random_simplex;
using testing::scripted;

Chunk make_chunk(std::vector<LabeledInstance> xs, std::size_t index = 0) { return {std::move(xs), index}; }

// Balanced binary chunk; feature 0 holds the label so a scripted component is perfect.
Chunk balanced_binary_chunk(std::size_t n) {
    std::vector<LabeledInstance> xs;
    for (std::size_t i = 0; i < n; ++i) xs.push_back({{static_cast<double>(i % 2)}, i % 2});
    return make_chunk(std::move(xs));
}

TEST(Vote, SingleComponentIsIdentity) {
    const std::vector<ScoreVector> s{{0.2, 0.5, 0.3}};
    const std::vector<double> w{1.0};
    const auto r = combine_scores(s, w);
    for (std::size_t l = 0; l < 3; ++l) EXPECT_NEAR(r.combined[l], s[0][l], 1e-15);
    EXPECT_EQ(r.predicted_class, 1u);
}

TEST(Vote, WeightedMean) {
    const std::vector<ScoreVector> s{{1, 0}, {0, 1}};
    const std::vector<double> w{3, 1};
    const auto r = combine_scores(s, w);
    EXPECT_DOUBLE_EQ(r.combined[0], 0.75);
    EXPECT_DOUBLE_EQ(r.combined[1], 0.25);
    EXPECT_EQ(r.predicted_class, 0u);
}

TEST(Vote, AllNegativeWeightsFallBackToMean) {
    const std::vector<ScoreVector> s{{1, 0, 0}, {0, 0.5, 0.5}};
    const std::vector<double> w{-1, -3};
    const auto r = combine_scores(s, w);
    EXPECT_DOUBLE_EQ(r.combined[0], 0.5);
    EXPECT_DOUBLE_EQ(r.combined[1], 0.25);
    EXPECT_DOUBLE_EQ(r.combined[2], 0.25);
}

TEST(Vote, TiesGoToLowestClass) {
    const std::vector<ScoreVector> s{{0.4, 0.4, 0.2}};
    const std::vector<double> w{1};
    EXPECT_EQ(combine_scores(s, w).predicted_class, 0u);
}

TEST(Vote, EmptyEnsembleThrows) {
    Ensemble e(EnsembleKind::awe, 3, {1, 3, {}}, [] { return std::make_unique<NaiveBayes>(1, 3); });
    EXPECT_THROW(e.predict(std::vector<double>{0.0}), EnsembleError);
}

TEST(AweWeight, PerfectComponentOnBalancedChunk) {
    auto c = scripted(1, 2, 0);
    EXPECT_DOUBLE_EQ(awe_weight(*c, balanced_binary_chunk(10)), 0.25);
}

TEST(AweWeight, UniformComponentScoresZero) {
    ConstantClassifier c(1, {0.5, 0.5});
    EXPECT_DOUBLE_EQ(awe_weight(c, balanced_binary_chunk(10)), 0.0);
}

TEST(AweWeight, PermutationInvariant) {
    std::mt19937_64 rng(2);
    NaiveBayes nb(2, 3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<LabeledInstance> xs;
    for (int i = 0; i < 200; ++i) {
        std::vector<double> x{u(rng), u(rng)};
        const std::size_t y = static_cast<std::size_t>(x[0] * 3.0);
        nb.train({x, y});
        xs.push_back({x, y});
    }
    const double w0 = awe_weight(nb, make_chunk(xs));
    for (int t = 0; t < 20; ++t) {
        std::shuffle(xs.begin(), xs.end(), rng);
        EXPECT_NEAR(awe_weight(nb, make_chunk(xs)), w0, 1e-12);
    }
}

TEST(AweWeight, EmptyChunkThrows) {
    ConstantClassifier c(1, {0.5, 0.5});
    EXPECT_THROW(awe_weight(c, make_chunk({})), EnsembleError);
}

TEST(GooweWeights, SingleComponent) {
    const std::vector<std::vector<ScoreVector>> s{{{0.6, 0.4}}, {{0.3, 0.7}}, {{0.9, 0.1}}};
    const std::vector<std::size_t> y{0, 1, 1};
    const double A = 0.36 + 0.16 + 0.09 + 0.49 + 0.81 + 0.01;
    const double d = 0.6 + 0.7 + 0.1;
    const auto w = goowe_weights(s, y);
    ASSERT_EQ(w.size(), 1u);
    EXPECT_NEAR(w[0], d / A, 1e-12);
}

TEST(GooweWeights, PerfectComponentGetsUnitWeight) {
    const std::vector<std::vector<ScoreVector>> s{{{1, 0, 0}}, {{0, 0, 1}}};
    const std::vector<std::size_t> y{0, 2};
    EXPECT_NEAR(goowe_weights(s, y)[0], 1.0, 1e-12);
}

TEST(GooweWeights, IdenticalComponentsShareWeight) {
    std::vector<std::vector<ScoreVector>> s;
    std::vector<std::size_t> y;
    std::mt19937_64 rng(3);
    for (int i = 0; i < 20; ++i) {
        const auto v = random_simplex(rng, 3);
        s.push_back({v, v});
        y.push_back(rng() % 3);
    }
    const auto w = goowe_weights(s, y);
    EXPECT_NEAR(w[0], w[1], 1e-9);
    EXPECT_TRUE(std::isfinite(w[0]));
}

TEST(GooweWeights, LeastSquaresOptimality) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd(0.0, 0.5);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t q = 1 + rng() % 5, L = 3, N = 30;
        std::vector<std::vector<ScoreVector>> s(N);
        std::vector<std::size_t> y(N);
        for (std::size_t i = 0; i < N; ++i) {
            for (std::size_t j = 0; j < q; ++j) s[i].push_back(random_simplex(rng, L));
            y[i] = rng() % L;
        }
        const auto w = goowe_weights(s, y);
        auto residual = [&](const std::vector<double>& v) {
            double r = 0.0;
            for (std::size_t j = 0; j < q; ++j) {
                double row = 0.0, d = 0.0;
                for (std::size_t i = 0; i < N; ++i) {
                    d += s[i][j][y[i]];
                    for (std::size_t m = 0; m < q; ++m)
                        for (std::size_t l = 0; l < L; ++l) row += s[i][j][l] * s[i][m][l] * v[m];
                }
                r += (row - d) * (row - d);
            }
            return std::sqrt(r);
        };
        const double base = residual(w);
        for (int alt = 0; alt < 100; ++alt) {
            auto v = w;
            for (auto& x : v) x += nd(rng);
            ASSERT_LE(base, residual(v) + 1e-6);
        }
    }
}

TEST(GooweWeights, MisalignedWindowThrows) {
    const std::vector<std::vector<ScoreVector>> s{{{1, 0}}};
    const std::vector<std::size_t> y{0, 1};
    EXPECT_THROW(goowe_weights(s, y), EnsembleError);
}

// ---------------------------------------------------------------------------
// process_chunk

Chunk three_class_chunk(std::size_t index, std::size_t n = 30) {
    std::vector<LabeledInstance> xs;
    for (std::size_t i = 0; i < n; ++i) xs.push_back({{static_cast<double>(i % 3), 0.5}, i % 3});
    return make_chunk(std::move(xs), index);
}

TEST(ProcessChunk, GrowThenReplace) {
    for (auto kind : {EnsembleKind::awe, EnsembleKind::goowe}) {
        Ensemble e(kind, 2, {2, 3, {}}, [] { return std::make_unique<NaiveBayes>(2, 3); });
        std::vector<std::size_t> sizes;
        for (std::size_t c = 0; c < 3; ++c) {
            const auto out = e.process_chunk(three_class_chunk(c));
            sizes.push_back(e.size());
            EXPECT_EQ(out.replaced, c == 2);
            EXPECT_FALSE(out.pruned);
        }
        EXPECT_EQ(sizes, (std::vector<std::size_t>{1, 2, 2}));
    }
}

TEST(ProcessChunk, PruneScheduleShrinksToPhiThenGrows) {
    Ensemble e(EnsembleKind::awe, 20, {2, 3, {}}, [] { return std::make_unique<NaiveBayes>(2, 3); });
    const PruneHook keep_newest_four = [](const Ensemble& en) {
        std::vector<ComponentId> ids;
        for (const auto& m : en.members()) ids.push_back(m.id);
        return std::vector<ComponentId>(ids.end() - 4, ids.end());
    };
    std::vector<std::size_t> sizes;
    for (std::size_t c = 0; c < 24; ++c) {
        const auto out = e.process_chunk(three_class_chunk(c), keep_newest_four);
        sizes.push_back(e.size());
        ASSERT_LE(e.size(), 20u);
        if (out.pruned) {
            EXPECT_EQ(out.removed.size(), 16u);
            EXPECT_LT(out.bytes_after_removal, out.bytes_before_removal);
        }
    }
    EXPECT_EQ(sizes[18], 19u);
    EXPECT_EQ(sizes[19], 20u);
    EXPECT_EQ(sizes[20], 5u);
    EXPECT_EQ(sizes[21], 6u);
}

TEST(ProcessChunk, HookMustRemoveSomething) {
    Ensemble e(EnsembleKind::awe, 2, {2, 3, {}}, [] { return std::make_unique<NaiveBayes>(2, 3); });
    const PruneHook keep_all = [](const Ensemble& en) {
        std::vector<ComponentId> ids;
        for (const auto& m : en.members()) ids.push_back(m.id);
        return ids;
    };
    e.process_chunk(three_class_chunk(0), keep_all);
    e.process_chunk(three_class_chunk(1), keep_all);
    EXPECT_THROW(e.process_chunk(three_class_chunk(2), keep_all), EnsembleError);
}

TEST(ProcessChunk, WeightsAreFreshAfterEveryChunk) {
    Ensemble e(EnsembleKind::awe, 5, {1, 3, {}}, [] { return std::make_unique<NaiveBayes>(1, 3); });
    e.add(scripted(1, 3, 0), 0, -99.0);
    std::vector<LabeledInstance> xs;
    for (std::size_t i = 0; i < 30; ++i) xs.push_back({{static_cast<double>(i % 3)}, i % 3});
    const auto chunk = make_chunk(xs, 1);
    e.process_chunk(chunk);
    for (const auto& m : e.members()) EXPECT_DOUBLE_EQ(m.weight, awe_weight(*m.model, chunk));
}

TEST(ProcessChunk, SchemaMismatchThrows) {
    Ensemble e(EnsembleKind::awe, 2, {2, 3, {}}, [] { return std::make_unique<NaiveBayes>(2, 3); });
    EXPECT_THROW(e.process_chunk(make_chunk({{{1.0}, 0}})), StreamError);
    EXPECT_THROW(e.process_chunk(make_chunk({})), EnsembleError);
}

TEST(Ensemble, AddRespectsCapacityAndAssignsIds) {
    Ensemble e(EnsembleKind::awe, 2, {1, 3, {}}, [] { return std::make_unique<NaiveBayes>(1, 3); });
    EXPECT_EQ(e.add(scripted(1, 3, 0), 0, 1.0), 1u);
    EXPECT_EQ(e.add(scripted(1, 3, 0), 0, 1.0), 2u);
    EXPECT_THROW(e.add(scripted(1, 3, 0), 0, 1.0), EnsembleError);
    EXPECT_EQ(e.estimate_size(), 200u);
}

TEST(Ensemble, DroppingZeroWeightMemberKeepsArgmax) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t L = 3 + rng() % 3, K = 2 + rng() % 5;
        Ensemble e(EnsembleKind::awe, K, {1, L, {}}, [L] { return std::make_unique<NaiveBayes>(1, L); });
        const std::size_t zero = rng() % K;
        for (std::size_t k = 0; k < K; ++k) {
            const double w = k == zero ? 0.0 : std::uniform_real_distribution<double>(0.05, 1.0)(rng);
            e.add(std::make_unique<ConstantClassifier>(1, random_simplex(rng, L)), k, w);
        }
        const std::vector<double> probe{0.0};
        const auto before = e.predict(probe).predicted_class;
        std::vector<ComponentId> keep;
        for (const auto& m : e.members())
            if (m.weight != 0.0) keep.push_back(m.id);
        e.retain(keep);
        ASSERT_EQ(e.predict(probe).predicted_class, before);
    }
}

} // namespace
} // namespace ccrp
