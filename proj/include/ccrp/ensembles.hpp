#ifndef CCRP_ENSEMBLES_HPP_
#define CCRP_ENSEMBLES_HPP_

// Chunk-based weighted ensembles. Both kinds grow by one component per
// chunk and, once full, either replace their lowest-weight member or hand
// the decision to an installed prune hook.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ccrp/learners.hpp"
#include "ccrp/stream.hpp"

namespace ccrp {

class EnsembleError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class EnsembleKind { awe, goowe };

inline std::string_view to_string(EnsembleKind k) { return k == EnsembleKind::awe ? "awe" : "goowe"; }

/// C_k: a trained learner plus its identity within an ensemble's lifetime.
struct ClassifierComponent {
    ComponentId id = 0;
    std::size_t birth_chunk = 0;
    double weight = 0.0;
    std::unique_ptr<Classifier> model;
};

struct VoteResult {
    ScoreVector combined;
    std::size_t predicted_class = 0;
};

/// AWE weight of one component on a chunk: MSE_r - MSE_k.
///
/// MSE_k averages (1 - score of the true class)^2 over the chunk; MSE_r is
/// the error of a random classifier predicting the chunk's class priors.
inline double awe_weight(const Classifier& component, const Chunk& chunk) {
    if (chunk.empty()) throw EnsembleError("awe_weight: empty chunk");
    const std::size_t L = component.num_classes();
    std::vector<double> counts(L, 0.0);
    double mse_k = 0.0;
    for (const auto& inst : chunk.instances) {
        const auto s = component.predict_scores(inst.features);
        const double e = 1.0 - s[inst.label];
        mse_k += e * e;
        counts[inst.label] += 1.0;
    }
    const double n = static_cast<double>(chunk.size());
    mse_k /= n;
    double mse_r = 0.0;
    for (double c : counts) {
        const double p = c / n;
        mse_r += p * (1.0 - p) * (1.0 - p);
    }
    return mse_r - mse_k;
}

/// GOOWE weights: least-squares fit of the weighted score vectors to the
/// one-hot truths over a window.
///
/// `scores[i][j]` is component j's score vector on window instance i. Solves
/// A w = d with A[j][m] = sum_i <s_ij, s_im> and d[j] = sum_i <s_ij, y_i>.
/// When A is singular or ill-conditioned the system is ridge-regularized
/// with lambda = 1e-6 * trace(A) / q.
inline std::vector<double> goowe_weights(const std::vector<std::vector<ScoreVector>>& scores,
                                         std::span<const std::size_t> labels) {
    if (scores.empty() || scores.size() != labels.size()) throw EnsembleError("goowe_weights: window is empty or misaligned");
    const std::size_t q = scores.front().size();
    if (q == 0) throw EnsembleError("goowe_weights: no components");

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q));
    Eigen::VectorXd d = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(q));
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const auto& row = scores[i];
        if (row.size() != q) throw EnsembleError("goowe_weights: ragged window");
        for (std::size_t j = 0; j < q; ++j) {
            const auto& sj = row[j];
            d(static_cast<Eigen::Index>(j)) += sj[labels[i]];
            for (std::size_t m = j; m < q; ++m) {
                const auto& sm = row[m];
                double dot = 0.0;
                for (std::size_t l = 0; l < sj.size(); ++l) dot += sj[l] * sm[l];
                A(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(m)) += dot;
            }
        }
    }
    A = A.selfadjointView<Eigen::Upper>();

    constexpr double kMinRcond = 1e-12;
    Eigen::VectorXd w;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    if (lu.rcond() > kMinRcond) {
        w = lu.solve(d);
    } else {
        const double lambda = 1e-6 * A.trace() / static_cast<double>(q);
        Eigen::MatrixXd ridge = A + lambda * Eigen::MatrixXd::Identity(A.rows(), A.cols());
        w = ridge.ldlt().solve(d);
    }
    return {w.data(), w.data() + w.size()};
}

/// Weighted soft vote. Negative weights count as zero; if no weight is
/// positive the plain mean is used. Ties go to the lowest class index.
inline VoteResult combine_scores(std::span<const ScoreVector> scores, std::span<const double> weights) {
    if (scores.empty()) throw EnsembleError("cannot vote with an empty ensemble");
    const std::size_t L = scores.front().size();
    bool any_positive = std::any_of(weights.begin(), weights.end(), [](double w) { return w > 0.0; });
    ScoreVector combined(L, 0.0);
    for (std::size_t k = 0; k < scores.size(); ++k) {
        const double w = any_positive ? std::max(weights[k], 0.0) : 1.0;
        if (w == 0.0) continue;
        for (std::size_t l = 0; l < L; ++l) combined[l] += w * scores[k][l];
    }
    double sum = 0.0;
    for (double v : combined) sum += v;
    if (sum > 0.0)
        for (auto& v : combined) v /= sum;
    else
        std::fill(combined.begin(), combined.end(), 1.0 / static_cast<double>(L));
    return {combined, argmax(combined)};
}

using LearnerFactory = std::function<std::unique_ptr<Classifier>()>;

class Ensemble;

/// Called when a full ensemble must make room. Returns the ids to keep,
/// which must be a strict subset of the current members.
using PruneHook = std::function<std::vector<ComponentId>(const Ensemble&)>;

/// What happened at one chunk boundary.
struct ChunkOutcome {
    bool pruned = false;
    bool replaced = false;
    std::vector<ComponentId> removed;
    ComponentId added = 0;
    std::size_t bytes_before_removal = 0;
    std::size_t bytes_after_removal = 0;
};

class Ensemble {
  public:
    Ensemble(EnsembleKind kind, std::size_t max_size, StreamSchema schema, LearnerFactory factory)
        : kind_(kind), max_size_(max_size), schema_(std::move(schema)), factory_(std::move(factory)) {
        if (max_size_ < 1) throw EnsembleError("ensemble max size must be >= 1");
        if (!factory_) throw EnsembleError("ensemble needs a learner factory");
    }

    Ensemble(Ensemble&&) = default;
    Ensemble& operator=(Ensemble&&) = default;

    EnsembleKind kind() const { return kind_; }
    std::size_t max_size() const { return max_size_; }
    std::size_t size() const { return members_.size(); }
    bool empty() const { return members_.empty(); }
    const StreamSchema& schema() const { return schema_; }
    const std::vector<ClassifierComponent>& members() const { return members_; }

    const ClassifierComponent* find(ComponentId id) const {
        auto it = std::find_if(members_.begin(), members_.end(), [&](const auto& m) { return m.id == id; });
        return it == members_.end() ? nullptr : &*it;
    }

    std::vector<double> weights() const {
        std::vector<double> w;
        w.reserve(members_.size());
        for (const auto& m : members_) w.push_back(m.weight);
        return w;
    }

    /// Scores of every member on one instance, in member order.
    std::vector<ScoreVector> component_scores(std::span<const double> features) const {
        std::vector<ScoreVector> out;
        out.reserve(members_.size());
        for (const auto& m : members_) out.push_back(m.model->predict_scores(features));
        return out;
    }

    VoteResult combine(std::span<const ScoreVector> scores) const {
        const auto w = weights();
        return combine_scores(scores, w);
    }

    VoteResult predict(std::span<const double> features) const {
        if (empty()) throw EnsembleError("predict on an empty ensemble");
        const auto s = component_scores(features);
        return combine(s);
    }

    std::size_t estimate_size() const {
        std::size_t bytes = 0;
        for (const auto& m : members_) bytes += m.model->estimate_size();
        return bytes;
    }

    /// Drops every member whose id is not listed.
    void retain(std::span<const ComponentId> keep) {
        std::erase_if(members_, [&](const ClassifierComponent& m) {
            return std::find(keep.begin(), keep.end(), m.id) == keep.end();
        });
    }

    /// Appends an externally built member (weights are refreshed at the next
    /// chunk boundary).
    ComponentId add(std::unique_ptr<Classifier> model, std::size_t birth_chunk, double weight) {
        if (members_.size() >= max_size_) throw EnsembleError("ensemble is full");
        members_.push_back({next_id_, birth_chunk, weight, std::move(model)});
        return next_id_++;
    }

    /// One chunk boundary:
    ///   1. re-weight the current members on the chunk;
    ///   2. if full, call the prune hook (or drop the lowest-weight member);
    ///   3. train a fresh component on the chunk and append it;
    ///   4. refresh weights so the new member is voting-ready.
    ChunkOutcome process_chunk(const Chunk& chunk, const PruneHook& hook = {}) {
        if (chunk.empty()) throw EnsembleError("process_chunk: empty chunk");
        for (const auto& inst : chunk.instances) check_conforms(inst, schema_);

        ChunkOutcome out;
        reweight(chunk);

        if (members_.size() >= max_size_) {
            out.bytes_before_removal = estimate_size();
            std::vector<ComponentId> before;
            for (const auto& m : members_) before.push_back(m.id);
            if (hook) {
                const auto keep = hook(*this);
                for (auto id : keep)
                    if (!find(id)) throw EnsembleError("prune hook kept an unknown component");
                if (keep.size() >= members_.size()) throw EnsembleError("prune hook must remove at least one component");
                retain(keep);
                out.pruned = true;
            } else {
                // Lowest weight goes; among equal weights the oldest goes first.
                auto victim = std::min_element(members_.begin(), members_.end(),
                                               [](const auto& a, const auto& b) { return a.weight < b.weight; });
                members_.erase(victim);
                out.replaced = true;
            }
            for (auto id : before)
                if (!find(id)) out.removed.push_back(id);
            out.bytes_after_removal = estimate_size();
        }

        auto model = factory_();
        for (const auto& inst : chunk.instances) model->train(inst);
        out.added = add(std::move(model), chunk.index, 0.0);

        if (kind_ == EnsembleKind::awe)
            members_.back().weight = awe_weight(*members_.back().model, chunk);
        else
            reweight(chunk);
        return out;
    }

    void reweight(const Chunk& chunk) {
        if (members_.empty()) return;
        if (kind_ == EnsembleKind::awe) {
            for (auto& m : members_) m.weight = awe_weight(*m.model, chunk);
            return;
        }
        std::vector<std::vector<ScoreVector>> scores;
        std::vector<std::size_t> labels;
        scores.reserve(chunk.size());
        labels.reserve(chunk.size());
        for (const auto& inst : chunk.instances) {
            scores.push_back(component_scores(inst.features));
            labels.push_back(inst.label);
        }
        const auto w = goowe_weights(scores, labels);
        for (std::size_t k = 0; k < members_.size(); ++k) members_[k].weight = w[k];
    }

  private:
    EnsembleKind kind_;
    std::size_t max_size_;
    StreamSchema schema_;
    LearnerFactory factory_;
    std::vector<ClassifierComponent> members_;
    ComponentId next_id_ = 1;
};

} // namespace ccrp

#endif // CCRP_ENSEMBLES_HPP_
