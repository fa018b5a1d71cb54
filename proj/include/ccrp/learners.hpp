#ifndef CCRP_LEARNERS_HPP_
#define CCRP_LEARNERS_HPP_

// Incremental multi-class base learners: Gaussian Naive Bayes and a
// Hoeffding tree (VFDT) with Naive Bayes leaves.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccrp/stream.hpp"

namespace ccrp {

/// Per-class relevance scores h_k(X); entries in [0,1], summing to 1.
using ScoreVector = std::vector<double>;
using ComponentId = std::uint64_t;

class LearnerError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Logical byte costs used by estimate_size(). Sizes are accounting units,
/// not allocator measurements, so equal models always report equal sizes.
namespace size_cost {
inline constexpr std::size_t kModelOverhead = 64;  // per learner object
inline constexpr std::size_t kNodeOverhead = 48;   // per tree node (split test, child links)
inline constexpr std::size_t kGaussianEntry = 40;  // count, mean, M2, min, max
inline constexpr std::size_t kClassCount = 8;      // one class-distribution cell
} // namespace size_cost

/// Hoeffding bound: sqrt(R^2 ln(1/delta) / (2n)).
inline double hoeffding_bound(double range, double delta, std::size_t n) {
    if (!(range > 0.0) || !std::isfinite(range)) throw std::domain_error("hoeffding_bound: range must be > 0");
    if (!(delta > 0.0 && delta <= 1.0)) throw std::domain_error("hoeffding_bound: delta must be in (0, 1]");
    if (n < 1) throw std::domain_error("hoeffding_bound: n must be >= 1");
    return std::sqrt(range * range * std::log(1.0 / delta) / (2.0 * static_cast<double>(n)));
}

/// Running Gaussian summary (Welford) with observed range.
struct GaussianEstimator {
    double weight = 0.0;
    double mean = 0.0;
    double m2 = 0.0;
    double min = std::numeric_limits<double>::infinity();
    double max = -std::numeric_limits<double>::infinity();

    void add(double x) {
        weight += 1.0;
        const double d = x - mean;
        mean += d / weight;
        m2 += d * (x - mean);
        min = std::min(min, x);
        max = std::max(max, x);
    }

    /// Sample variance; zero below two observations.
    double variance() const { return weight > 1.0 ? m2 / (weight - 1.0) : 0.0; }

    static GaussianEstimator merge(const GaussianEstimator& a, const GaussianEstimator& b) {
        if (a.weight == 0.0) return b;
        if (b.weight == 0.0) return a;
        GaussianEstimator r;
        r.weight = a.weight + b.weight;
        const double d = b.mean - a.mean;
        r.mean = a.mean + d * b.weight / r.weight;
        r.m2 = a.m2 + b.m2 + d * d * a.weight * b.weight / r.weight;
        r.min = std::min(a.min, b.min);
        r.max = std::max(a.max, b.max);
        return r;
    }

    bool operator==(const GaussianEstimator&) const = default;
};

inline constexpr double kVarianceSmoothing = 1e-9;

inline double gaussian_log_density(const GaussianEstimator& g, double x) {
    const double var = g.variance() + kVarianceSmoothing;
    const double d = x - g.mean;
    return -0.5 * std::log(2.0 * std::numbers::pi * var) - d * d / (2.0 * var);
}

/// Converts unnormalized log-scores into a probability vector.
inline ScoreVector softmax_log(std::span<const double> logs) {
    const double top = *std::max_element(logs.begin(), logs.end());
    ScoreVector out(logs.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logs.size(); ++i) {
        out[i] = std::exp(logs[i] - top);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

inline std::size_t argmax(std::span<const double> scores) {
    return static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

/// Interface every base learner implements.
class Classifier {
  public:
    Classifier(std::size_t num_features, std::size_t num_classes) : num_features_(num_features), num_classes_(num_classes) {
        if (num_features_ < 1) throw LearnerError("learner needs at least one feature");
        if (num_classes_ < 2) throw LearnerError("learner needs at least two classes");
    }
    virtual ~Classifier() = default;

    void train(const LabeledInstance& inst) {
        if (inst.features.size() != num_features_ || inst.label >= num_classes_)
            throw LearnerError("training instance does not match the learner schema");
        do_train(inst);
        ++seen_;
    }

    /// Normalized class scores; the uniform vector while cold().
    ScoreVector predict_scores(std::span<const double> features) const {
        if (features.size() != num_features_) throw LearnerError("feature vector does not match the learner schema");
        if (cold()) return ScoreVector(num_classes_, 1.0 / static_cast<double>(num_classes_));
        return do_predict(features);
    }

    std::size_t predict(std::span<const double> features) const { return argmax(predict_scores(features)); }

    virtual std::size_t estimate_size() const = 0;
    virtual std::unique_ptr<Classifier> clone() const = 0;

    bool cold() const { return seen_ == 0; }
    std::size_t seen() const { return seen_; }
    std::size_t num_features() const { return num_features_; }
    std::size_t num_classes() const { return num_classes_; }

  protected:
    virtual void do_train(const LabeledInstance& inst) = 0;
    virtual ScoreVector do_predict(std::span<const double> features) const = 0;

  private:
    std::size_t num_features_;
    std::size_t num_classes_;
    std::size_t seen_ = 0;
};

struct NaiveBayesOptions {
    /// Additive smoothing on class counts (1 = Laplace).
    double prior_smoothing = 1.0;
    /// When false the model predicts from the class prior alone.
    bool use_features = true;
};

/// Gaussian Naive Bayes over numeric features.
///
/// Statistics are one GaussianEstimator per (feature, class); class counts
/// are read off the first feature's estimators. A class with no
/// observations borrows the pooled (all-class) Gaussian for its likelihood.
class NaiveBayes final : public Classifier {
  public:
    NaiveBayes(std::size_t num_features, std::size_t num_classes, NaiveBayesOptions opts = {})
        : Classifier(num_features, num_classes), opts_(opts), stats_(num_features * num_classes) {}

    std::unique_ptr<Classifier> clone() const override { return std::make_unique<NaiveBayes>(*this); }

    std::size_t estimate_size() const override {
        return size_cost::kModelOverhead + stats_.size() * size_cost::kGaussianEntry;
    }

    double class_weight(std::size_t c) const { return stats_[c].weight; }
    const GaussianEstimator& stat(std::size_t feature, std::size_t c) const { return stats_[feature * num_classes() + c]; }

    /// Smoothed class prior, p(c) = (n_c + a) / (n + L a).
    ScoreVector prior() const {
        const auto L = num_classes();
        ScoreVector p(L);
        double total = 0.0;
        for (std::size_t c = 0; c < L; ++c) total += class_weight(c);
        const double denom = total + opts_.prior_smoothing * static_cast<double>(L);
        for (std::size_t c = 0; c < L; ++c)
            p[c] = denom > 0.0 ? (class_weight(c) + opts_.prior_smoothing) / denom : 1.0 / static_cast<double>(L);
        return p;
    }

  protected:
    void do_train(const LabeledInstance& inst) override {
        const auto L = num_classes();
        for (std::size_t f = 0; f < inst.features.size(); ++f) stats_[f * L + inst.label].add(inst.features[f]);
    }

    ScoreVector do_predict(std::span<const double> features) const override {
        const auto L = num_classes();
        const ScoreVector p = prior();
        std::vector<double> logs(L);
        for (std::size_t c = 0; c < L; ++c) logs[c] = p[c] > 0.0 ? std::log(p[c]) : -std::numeric_limits<double>::infinity();
        if (opts_.use_features) {
            for (std::size_t f = 0; f < features.size(); ++f) {
                GaussianEstimator pooled;
                for (std::size_t c = 0; c < L; ++c) pooled = GaussianEstimator::merge(pooled, stats_[f * L + c]);
                for (std::size_t c = 0; c < L; ++c) {
                    const auto& g = stats_[f * L + c];
                    logs[c] += gaussian_log_density(g.weight > 0.0 ? g : pooled, features[f]);
                }
            }
        }
        return softmax_log(logs);
    }

  private:
    NaiveBayesOptions opts_;
    std::vector<GaussianEstimator> stats_;
};

enum class LeafPrediction { majority_class, naive_bayes };

struct HoeffdingTreeOptions {
    std::size_t grace_period = 200;
    double split_confidence = 1e-7; // delta
    double tie_threshold = 0.05;    // tau
    LeafPrediction leaf_prediction = LeafPrediction::naive_bayes;
    std::size_t split_candidates = 10;
    double min_branch_fraction = 0.01;
};

inline double entropy(std::span<const double> dist) {
    double total = 0.0;
    for (double v : dist) total += v;
    if (total <= 0.0) return 0.0;
    double h = 0.0;
    for (double v : dist) {
        if (v > 0.0) {
            const double p = v / total;
            h -= p * std::log2(p);
        }
    }
    return h;
}

/// Very Fast Decision Tree over numeric attributes.
///
/// Leaves summarize each (feature, class) with a Gaussian. Every
/// grace_period instances a leaf scores binary threshold splits by
/// information gain and splits when the best beats the runner-up (or the
/// null split) by more than the Hoeffding bound with R = log2(L), or when
/// the bound drops below the tie threshold.
class HoeffdingTree final : public Classifier {
  public:
    struct SplitSuggestion {
        std::size_t feature = 0;
        double threshold = 0.0;
        double merit = 0.0;
        std::vector<double> left_dist;
        std::vector<double> right_dist;
    };

    HoeffdingTree(std::size_t num_features, std::size_t num_classes, HoeffdingTreeOptions opts = {})
        : Classifier(num_features, num_classes), opts_(opts) {
        if (opts_.grace_period < 1) throw LearnerError("grace_period must be >= 1");
        if (!(opts_.split_confidence > 0.0 && opts_.split_confidence <= 1.0))
            throw LearnerError("split_confidence must be in (0, 1]");
        if (!(opts_.tie_threshold >= 0.0)) throw LearnerError("tie_threshold must be >= 0");
        nodes_.push_back(make_leaf({}));
    }

    std::unique_ptr<Classifier> clone() const override { return std::make_unique<HoeffdingTree>(*this); }

    std::size_t estimate_size() const override {
        std::size_t bytes = size_cost::kModelOverhead;
        for (const auto& n : nodes_) {
            bytes += size_cost::kNodeOverhead;
            if (n.is_leaf()) bytes += n.leaf->estimate_size() + n.initial_dist.size() * size_cost::kClassCount;
        }
        return bytes;
    }

    std::size_t node_count() const { return nodes_.size(); }
    std::size_t leaf_count() const {
        return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
    }
    std::size_t internal_count() const { return node_count() - leaf_count(); }
    const HoeffdingTreeOptions& options() const { return opts_; }

  protected:
    void do_train(const LabeledInstance& inst) override {
        const std::size_t idx = find_leaf(inst.features);
        Node& leaf = nodes_[idx];
        leaf.leaf->train(inst);
        leaf.class_counts[inst.label] += 1.0;
        if (static_cast<double>(leaf.leaf->seen()) - leaf.weight_at_last_eval >= static_cast<double>(opts_.grace_period)) {
            leaf.weight_at_last_eval = static_cast<double>(leaf.leaf->seen());
            attempt_split(idx);
        }
    }

    ScoreVector do_predict(std::span<const double> features) const override {
        const Node& leaf = nodes_[find_leaf(features)];
        const auto L = num_classes();
        if (leaf.leaf->cold()) {
            double total = 0.0;
            for (double v : leaf.initial_dist) total += v;
            if (total <= 0.0) return ScoreVector(L, 1.0 / static_cast<double>(L));
            ScoreVector out(L);
            for (std::size_t c = 0; c < L; ++c) out[c] = leaf.initial_dist[c] / total;
            return out;
        }
        if (opts_.leaf_prediction == LeafPrediction::naive_bayes) return leaf.leaf->predict_scores(features);
        ScoreVector out(L);
        double total = 0.0;
        for (std::size_t c = 0; c < L; ++c) total += leaf.class_counts[c];
        for (std::size_t c = 0; c < L; ++c) out[c] = leaf.class_counts[c] / total;
        return out;
    }

  private:
    struct Node {
        // split
        std::size_t feature = 0;
        double threshold = 0.0;
        std::size_t left = 0;
        std::size_t right = 0;
        // leaf
        std::optional<NaiveBayes> leaf;
        std::vector<double> class_counts;
        std::vector<double> initial_dist;
        double weight_at_last_eval = 0.0;

        bool is_leaf() const { return leaf.has_value(); }
    };

    Node make_leaf(std::vector<double> initial) const {
        Node n;
        n.leaf.emplace(num_features(), num_classes());
        n.class_counts.assign(num_classes(), 0.0);
        n.initial_dist = initial.empty() ? std::vector<double>(num_classes(), 0.0) : std::move(initial);
        return n;
    }

    std::size_t find_leaf(std::span<const double> x) const {
        std::size_t i = 0;
        while (!nodes_[i].is_leaf()) i = x[nodes_[i].feature] <= nodes_[i].threshold ? nodes_[i].left : nodes_[i].right;
        return i;
    }

    // Estimated class mass at or below `t` for one class's Gaussian.
    static double mass_below(const GaussianEstimator& g, double t) {
        if (g.weight <= 0.0) return 0.0;
        if (t < g.min) return 0.0;
        if (t >= g.max) return g.weight;
        const double sd = std::sqrt(g.variance());
        if (sd <= 0.0) return t >= g.mean ? g.weight : 0.0;
        return g.weight * 0.5 * std::erfc(-(t - g.mean) / (sd * std::numbers::sqrt2));
    }

    std::optional<SplitSuggestion> best_split_for(const Node& leaf, std::size_t f) const {
        const auto L = num_classes();
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < L; ++c) {
            const auto& g = leaf.leaf->stat(f, c);
            if (g.weight > 0.0) {
                lo = std::min(lo, g.min);
                hi = std::max(hi, g.max);
            }
        }
        if (!(lo < hi)) return std::nullopt;

        const double parent_h = entropy(leaf.class_counts);
        double total = 0.0;
        for (double v : leaf.class_counts) total += v;

        std::optional<SplitSuggestion> best;
        std::vector<double> left(L), right(L);
        const std::size_t bins = opts_.split_candidates;
        for (std::size_t b = 1; b <= bins; ++b) {
            const double t = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins + 1);
            double wl = 0.0;
            for (std::size_t c = 0; c < L; ++c) {
                const auto& g = leaf.leaf->stat(f, c);
                left[c] = mass_below(g, t);
                right[c] = g.weight - left[c];
                wl += left[c];
            }
            const double wr = total - wl;
            if (wl < opts_.min_branch_fraction * total || wr < opts_.min_branch_fraction * total) continue;
            const double merit = parent_h - (wl * entropy(left) + wr * entropy(right)) / total;
            if (!best || merit > best->merit) best = SplitSuggestion{f, t, merit, left, right};
        }
        return best;
    }

    void attempt_split(std::size_t idx) {
        const Node& leaf = nodes_[idx];
        std::size_t observed = 0;
        for (double v : leaf.class_counts) observed += v > 0.0 ? 1 : 0;
        if (observed < 2) return;

        std::vector<SplitSuggestion> suggestions;
        for (std::size_t f = 0; f < num_features(); ++f)
            if (auto s = best_split_for(leaf, f)) suggestions.push_back(std::move(*s));
        if (suggestions.empty()) return;
        std::stable_sort(suggestions.begin(), suggestions.end(),
                         [](const auto& a, const auto& b) { return a.merit > b.merit; });

        const double best = suggestions[0].merit;
        // The null split (merit 0) always competes as the runner-up.
        const double second = suggestions.size() > 1 ? std::max(suggestions[1].merit, 0.0) : 0.0;
        if (best <= 0.0) return;
        const double range = std::log2(static_cast<double>(num_classes()));
        const double eps = hoeffding_bound(range, opts_.split_confidence, leaf.leaf->seen());
        if (!(best - second > eps || eps < opts_.tie_threshold)) return;

        SplitSuggestion s = std::move(suggestions[0]);
        Node left = make_leaf(std::move(s.left_dist));
        Node right = make_leaf(std::move(s.right_dist));
        const std::size_t li = nodes_.size();
        nodes_.push_back(std::move(left));
        nodes_.push_back(std::move(right));
        Node& parent = nodes_[idx];
        parent.feature = s.feature;
        parent.threshold = s.threshold;
        parent.left = li;
        parent.right = li + 1;
        parent.leaf.reset();
        parent.class_counts.clear();
        parent.initial_dist.clear();
    }

    HoeffdingTreeOptions opts_;
    std::vector<Node> nodes_;
};

} // namespace ccrp

#endif // CCRP_LEARNERS_HPP_
