#ifndef CCRP_PRUNER_HPP_
#define CCRP_PRUNER_HPP_

// Class-wise component ranking pruner.
//
// A RecordWindow keeps the latest N ground truths (one-hot) and every
// component's score vectors on them. At prune time each component gets a
// per-class squared-error loss, components are ranked per class, and the
// class rankings are fused with a Borda count in which a class winner earns
// K*L points instead of K. The top phi components survive.
//
// Because a class winner earns K*L points while a component without any
// class win can collect at most L*(K-1), every class winner outranks every
// non-winner; with phi >= L all class winners are kept.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ccrp/ensembles.hpp"
#include "ccrp/learners.hpp"

namespace ccrp {

class PruneError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class PruneScheme { ccrp, regular_borda, weight_based };
enum class RecordMode { soft, crisp };

inline std::string_view to_string(PruneScheme s) {
    switch (s) {
    case PruneScheme::ccrp: return "ccrp";
    case PruneScheme::regular_borda: return "regular-borda";
    case PruneScheme::weight_based: return "weight-based";
    }
    return "unknown";
}

inline std::optional<PruneScheme> prune_scheme_from_string(std::string_view s) {
    if (s == "ccrp") return PruneScheme::ccrp;
    if (s == "regular-borda") return PruneScheme::regular_borda;
    if (s == "weight-based") return PruneScheme::weight_based;
    return std::nullopt;
}

inline std::string_view to_string(RecordMode m) { return m == RecordMode::soft ? "soft" : "crisp"; }

struct PruneConfig {
    std::size_t size = 1;   // phi
    std::size_t window = 1; // N
    PruneScheme scheme = PruneScheme::ccrp;
    RecordMode records = RecordMode::soft;
};

/// One component's scores on one instance, as handed to RecordWindow.
struct ComponentScores {
    ComponentId id = 0;
    std::size_t birth_chunk = 0;
    ScoreVector scores;
};

class RecordWindow {
  public:
    RecordWindow(std::size_t capacity, std::size_t num_classes, RecordMode mode = RecordMode::soft)
        : capacity_(capacity), num_classes_(num_classes), mode_(mode) {
        if (capacity_ < 1) throw PruneError("record window capacity must be >= 1");
        if (num_classes_ < 1) throw PruneError("record window needs at least one class");
    }

    /// Appends one instance: truth as one-hot, plus every listed component's
    /// scores. Components already tracked must all be present; unseen ids
    /// start a fresh history aligned to the newest instance.
    void record(std::size_t truth, std::span<const ComponentScores> predictions) {
        if (truth >= num_classes_) throw PruneError("truth class out of range");
        for (const auto& p : predictions)
            if (p.scores.size() != num_classes_) throw PruneError("score vector length does not match class count");
        for (const auto& [id, track] : tracks_) {
            const bool present =
                std::any_of(predictions.begin(), predictions.end(), [id = id](const auto& p) { return p.id == id; });
            if (!present) throw PruneError("missing prediction for tracked component " + std::to_string(id));
        }

        ScoreVector one_hot(num_classes_, 0.0);
        one_hot[truth] = 1.0;
        truth_.push_back(std::move(one_hot));
        if (truth_.size() > capacity_) truth_.pop_front();

        for (const auto& p : predictions) {
            auto& track = tracks_[p.id];
            track.birth_chunk = p.birth_chunk;
            if (mode_ == RecordMode::crisp) {
                ScoreVector crisp(num_classes_, 0.0);
                crisp[argmax(p.scores)] = 1.0;
                track.scores.push_back(std::move(crisp));
            } else {
                track.scores.push_back(p.scores);
            }
            if (track.scores.size() > capacity_) track.scores.pop_front();
        }
    }

    /// Forgets every component not listed; survivors keep their records.
    void retain(std::span<const ComponentId> keep) {
        std::erase_if(tracks_, [&](const auto& kv) { return std::find(keep.begin(), keep.end(), kv.first) == keep.end(); });
    }

    void clear() {
        truth_.clear();
        tracks_.clear();
    }

    std::size_t capacity() const { return capacity_; }
    std::size_t num_classes() const { return num_classes_; }
    RecordMode mode() const { return mode_; }
    /// Instances currently held (length of the truth FIFO).
    std::size_t size() const { return truth_.size(); }
    bool empty() const { return truth_.empty(); }

    const std::deque<ScoreVector>& truth() const { return truth_; }
    bool tracks(ComponentId id) const { return tracks_.contains(id); }
    const std::deque<ScoreVector>& records(ComponentId id) const { return tracks_.at(id).scores; }
    std::size_t birth_chunk(ComponentId id) const { return tracks_.at(id).birth_chunk; }

    std::vector<ComponentId> component_ids() const {
        std::vector<ComponentId> ids;
        for (const auto& [id, _] : tracks_) ids.push_back(id);
        return ids;
    }

  private:
    struct Track {
        std::size_t birth_chunk = 0;
        std::deque<ScoreVector> scores;
    };

    std::size_t capacity_;
    std::size_t num_classes_;
    RecordMode mode_;
    std::deque<ScoreVector> truth_;
    std::map<ComponentId, Track> tracks_;
};

/// L_{k,l} for every tracked component k and class l.
struct ClasswiseLoss {
    std::vector<ComponentId> ids;
    std::vector<std::size_t> births;
    std::vector<std::vector<double>> losses; // [component][class]

    std::size_t num_components() const { return ids.size(); }
    std::size_t num_classes() const { return losses.empty() ? 0 : losses.front().size(); }

    double aggregate(std::size_t k) const { return std::accumulate(losses[k].begin(), losses[k].end(), 0.0); }

    std::size_t index_of(ComponentId id) const {
        auto it = std::find(ids.begin(), ids.end(), id);
        if (it == ids.end()) throw PruneError("unknown component id " + std::to_string(id));
        return static_cast<std::size_t>(it - ids.begin());
    }
};

/// Sum of squared differences between each component's class-l scores and
/// the class-l truth indicator over the window. A component holding n_k < n
/// records is summed over its own records and scaled by n / n_k.
inline ClasswiseLoss classwise_mse(const RecordWindow& window) {
    if (window.empty()) throw PruneError("classwise_mse: empty window");
    const std::size_t n = window.size();
    const std::size_t L = window.num_classes();
    const auto& truth = window.truth();

    ClasswiseLoss out;
    for (ComponentId id : window.component_ids()) {
        const auto& recs = window.records(id);
        if (recs.empty()) throw PruneError("classwise_mse: component " + std::to_string(id) + " has no records");
        const std::size_t nk = recs.size();
        const std::size_t offset = n - nk;
        std::vector<double> row(L, 0.0);
        for (std::size_t i = 0; i < nk; ++i) {
            const auto& s = recs[i];
            const auto& y = truth[offset + i];
            for (std::size_t l = 0; l < L; ++l) {
                const double e = s[l] - y[l];
                row[l] += e * e;
            }
        }
        if (nk != n) {
            const double scale = static_cast<double>(n) / static_cast<double>(nk);
            for (auto& v : row) v *= scale;
        }
        out.ids.push_back(id);
        out.births.push_back(window.birth_chunk(id));
        out.losses.push_back(std::move(row));
    }
    return out;
}

/// Per-class component orderings, best (lowest loss) first.
struct ClasswiseRanking {
    std::vector<std::vector<ComponentId>> per_class;
};

/// Ascending loss per class. Ties: younger component (higher birth chunk)
/// first, then lower id.
inline ClasswiseRanking classwise_rank(const ClasswiseLoss& losses) {
    const std::size_t K = losses.num_components();
    const std::size_t L = losses.num_classes();
    ClasswiseRanking out;
    out.per_class.resize(L);
    std::vector<std::size_t> order(K);
    for (std::size_t l = 0; l < L; ++l) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (losses.losses[a][l] != losses.losses[b][l]) return losses.losses[a][l] < losses.losses[b][l];
            if (losses.births[a] != losses.births[b]) return losses.births[a] > losses.births[b];
            return losses.ids[a] < losses.ids[b];
        });
        out.per_class[l].reserve(K);
        for (auto k : order) out.per_class[l].push_back(losses.ids[k]);
    }
    return out;
}

struct FusedEntry {
    ComponentId id = 0;
    std::int64_t points = 0;
};

/// Fused order, highest total first.
struct FusedRanking {
    std::vector<FusedEntry> order;

    std::vector<ComponentId> top(std::size_t n) const {
        std::vector<ComponentId> ids;
        for (std::size_t i = 0; i < n && i < order.size(); ++i) ids.push_back(order[i].id);
        return ids;
    }

    std::int64_t points_of(ComponentId id) const {
        for (const auto& e : order)
            if (e.id == id) return e.points;
        throw PruneError("unknown component id " + std::to_string(id));
    }
};

enum class BordaVariant { modified, regular };

namespace detail {

inline FusedRanking borda(const ClasswiseRanking& rankings, std::size_t K, std::size_t L, BordaVariant variant,
                          const ClasswiseLoss* tiebreak) {
    if (rankings.per_class.size() != L) throw PruneError("borda: expected one ranking per class");
    if (L == 0 || K == 0) throw PruneError("borda: empty ranking");
    std::vector<ComponentId> ids = rankings.per_class.front();
    if (ids.size() != K) throw PruneError("borda: ranking length differs from K");
    std::vector<ComponentId> sorted_ids = ids;
    std::sort(sorted_ids.begin(), sorted_ids.end());
    if (std::adjacent_find(sorted_ids.begin(), sorted_ids.end()) != sorted_ids.end())
        throw PruneError("borda: duplicate component in ranking");

    std::map<ComponentId, std::int64_t> points;
    for (auto id : sorted_ids) points[id] = 0;
    const auto k = static_cast<std::int64_t>(K);
    const auto top_points = variant == BordaVariant::modified ? k * static_cast<std::int64_t>(L) : k;
    for (const auto& ranking : rankings.per_class) {
        std::vector<ComponentId> check = ranking;
        std::sort(check.begin(), check.end());
        if (check != sorted_ids) throw PruneError("borda: rankings are over mismatched component sets");
        for (std::size_t r = 0; r < ranking.size(); ++r)
            points[ranking[r]] += r == 0 ? top_points : k - static_cast<std::int64_t>(r);
    }

    FusedRanking out;
    for (const auto& [id, p] : points) out.order.push_back({id, p});
    std::sort(out.order.begin(), out.order.end(), [&](const FusedEntry& a, const FusedEntry& b) {
        if (a.points != b.points) return a.points > b.points;
        if (tiebreak) {
            const auto ia = tiebreak->index_of(a.id);
            const auto ib = tiebreak->index_of(b.id);
            const double la = tiebreak->aggregate(ia);
            const double lb = tiebreak->aggregate(ib);
            if (la != lb) return la < lb;
            if (tiebreak->births[ia] != tiebreak->births[ib]) return tiebreak->births[ia] > tiebreak->births[ib];
        }
        return a.id > b.id;
    });
    return out;
}

} // namespace detail

/// Modified Borda Count: rank 1 earns K*L points, rank r >= 2 earns K-r+1.
///
/// Ties on points fall back to lower aggregate loss and then the younger
/// component when `tiebreak` is given; otherwise the higher id wins.
inline FusedRanking modified_borda(const ClasswiseRanking& rankings, std::size_t K, std::size_t L,
                                   const ClasswiseLoss* tiebreak = nullptr) {
    return detail::borda(rankings, K, L, BordaVariant::modified, tiebreak);
}

/// Plain Borda count: rank r earns K-r+1 points.
inline FusedRanking regular_borda(const ClasswiseRanking& rankings, std::size_t K, std::size_t L,
                                  const ClasswiseLoss* tiebreak = nullptr) {
    return detail::borda(rankings, K, L, BordaVariant::regular, tiebreak);
}

/// Everything a prune decision was based on, for diagnostics export.
struct PruneDecision {
    PruneScheme scheme = PruneScheme::ccrp;
    std::vector<ComponentId> keep;
    std::optional<ClasswiseLoss> losses;
    std::optional<ClasswiseRanking> ranking;
    std::optional<FusedRanking> fused;
    std::vector<std::pair<ComponentId, double>> weights;
};

/// Chooses the phi survivors of a full ensemble without modifying it.
inline PruneDecision select_survivors(const Ensemble& ensemble, const RecordWindow& window, const PruneConfig& config) {
    const std::size_t K = ensemble.size();
    if (config.size >= K)
        throw PruneError("prune size phi=" + std::to_string(config.size) + " must be below ensemble size " + std::to_string(K));
    if (config.size < 1) throw PruneError("prune size phi must be >= 1");

    PruneDecision d;
    d.scheme = config.scheme;
    for (const auto& m : ensemble.members()) d.weights.emplace_back(m.id, m.weight);

    if (config.scheme == PruneScheme::weight_based) {
        auto ranked = d.weights;
        // Highest weight first; equal weights keep the younger component.
        std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first > b.first;
        });
        for (std::size_t i = 0; i < config.size; ++i) d.keep.push_back(ranked[i].first);
        return d;
    }

    if (window.empty()) throw PruneError("prune: empty record window");
    for (const auto& m : ensemble.members())
        if (!window.tracks(m.id) || window.records(m.id).empty())
            throw PruneError("prune: component " + std::to_string(m.id) + " has no records in the window");

    // Only current members take part, even if the window still tracks others.
    ClasswiseLoss all = classwise_mse(window);
    ClasswiseLoss losses;
    for (const auto& m : ensemble.members()) {
        const auto i = all.index_of(m.id);
        losses.ids.push_back(all.ids[i]);
        losses.births.push_back(all.births[i]);
        losses.losses.push_back(all.losses[i]);
    }
    const std::size_t L = window.num_classes();
    ClasswiseRanking ranking = classwise_rank(losses);
    FusedRanking fused = config.scheme == PruneScheme::ccrp ? modified_borda(ranking, K, L, &losses)
                                                            : regular_borda(ranking, K, L, &losses);
    d.keep = fused.top(config.size);
    d.losses = std::move(losses);
    d.ranking = std::move(ranking);
    d.fused = std::move(fused);
    return d;
}

/// Reduces the ensemble to its phi best components and drops the removed
/// components' records. Returns the decision that was applied.
inline PruneDecision prune(Ensemble& ensemble, RecordWindow& window, const PruneConfig& config) {
    PruneDecision d = select_survivors(ensemble, window, config);
    ensemble.retain(d.keep);
    window.retain(d.keep);
    return d;
}

/// A PruneHook that runs select_survivors against `window` and forgets the
/// removed components' records. Each decision is appended to `log` if given.
inline PruneHook make_prune_hook(RecordWindow& window, PruneConfig config, std::vector<PruneDecision>* log = nullptr) {
    return [&window, config, log](const Ensemble& ensemble) {
        PruneDecision d = select_survivors(ensemble, window, config);
        window.retain(d.keep);
        auto keep = d.keep;
        if (log) log->push_back(std::move(d));
        return keep;
    };
}

/// Writes one row per component: id, per-class loss, per-class rank (1 =
/// best), fused points, and whether it was kept. `prefix` columns (e.g. a
/// chunk index) are prepended verbatim when non-empty.
inline void write_prune_diagnostics_header(std::ostream& out, std::size_t num_classes, std::string_view prefix = {}) {
    if (!prefix.empty()) out << prefix << ',';
    out << "component_id";
    for (std::size_t l = 0; l < num_classes; ++l) out << ",loss_c" << l;
    for (std::size_t l = 0; l < num_classes; ++l) out << ",rank_c" << l;
    out << ",points,weight,kept\n";
}

inline void write_prune_diagnostics(std::ostream& out, const PruneDecision& d, std::size_t num_classes,
                                    std::string_view prefix = {}) {
    char buf[64];
    for (const auto& [id, weight] : d.weights) {
        if (!prefix.empty()) out << prefix << ',';
        out << id;
        if (d.losses) {
            const auto k = d.losses->index_of(id);
            for (double v : d.losses->losses[k]) {
                std::snprintf(buf, sizeof buf, "%.17g", v);
                out << ',' << buf;
            }
            for (const auto& ranking : d.ranking->per_class)
                out << ',' << (std::find(ranking.begin(), ranking.end(), id) - ranking.begin() + 1);
            out << ',' << d.fused->points_of(id);
        } else {
            for (std::size_t l = 0; l < 2 * num_classes; ++l) out << ',';
            out << ',';
        }
        std::snprintf(buf, sizeof buf, "%.17g", weight);
        out << ',' << buf;
        out << ',' << (std::find(d.keep.begin(), d.keep.end(), id) != d.keep.end() ? 1 : 0) << '\n';
    }
}

} // namespace ccrp

#endif // CCRP_PRUNER_HPP_
