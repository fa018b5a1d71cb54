#ifndef CCRP_EVAL_HPP_
#define CCRP_EVAL_HPP_

// Prequential (test-then-train) evaluation, per-chunk metrics, memory
// consumption ratio, and report serialization.

#include <cstdio>
#include <deque>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "ccrp/ensembles.hpp"
#include "ccrp/pruner.hpp"
#include "ccrp/stream.hpp"

namespace ccrp {

inline constexpr int kReportFormatVersion = 1;

class EvalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Windowed and cumulative accuracy over a stream of correctness bits.
class PrequentialState {
  public:
    explicit PrequentialState(std::size_t window) : window_(window) {
        if (window_ < 1) throw EvalError("prequential window must be >= 1");
    }

    void add(bool correct) {
        outcomes_.push_back(correct);
        in_window_ += correct ? 1 : 0;
        if (outcomes_.size() > window_) {
            in_window_ -= outcomes_.front() ? 1 : 0;
            outcomes_.pop_front();
        }
        ++seen_;
        correct_total_ += correct ? 1 : 0;
    }

    double prequential_accuracy() const {
        return outcomes_.empty() ? 0.0 : static_cast<double>(in_window_) / static_cast<double>(outcomes_.size());
    }
    double overall_accuracy() const {
        return seen_ == 0 ? 0.0 : static_cast<double>(correct_total_) / static_cast<double>(seen_);
    }

    std::size_t window() const { return window_; }
    std::size_t seen() const { return seen_; }
    std::size_t correct_total() const { return correct_total_; }

  private:
    std::size_t window_;
    std::deque<bool> outcomes_;
    std::size_t in_window_ = 0;
    std::size_t seen_ = 0;
    std::size_t correct_total_ = 0;
};

enum class ChunkEvent { none, replace, prune };

inline std::string_view to_string(ChunkEvent e) {
    switch (e) {
    case ChunkEvent::none: return "none";
    case ChunkEvent::replace: return "replace";
    case ChunkEvent::prune: return "prune";
    }
    return "none";
}

inline ChunkEvent chunk_event_from_string(std::string_view s) {
    if (s == "prune") return ChunkEvent::prune;
    if (s == "replace") return ChunkEvent::replace;
    if (s == "none") return ChunkEvent::none;
    throw EvalError("unknown chunk event: " + std::string(s));
}

/// Metrics sampled at a chunk boundary, after all boundary actions.
struct ChunkMetricsRow {
    std::size_t chunk = 0;
    std::size_t instances_seen = 0;
    double prequential_accuracy = 0.0;
    double overall_accuracy = 0.0;
    std::size_t ensemble_size = 0;
    std::size_t ensemble_bytes = 0;
    // Only set when the boundary removed components.
    std::size_t bytes_before_removal = 0;
    std::size_t bytes_after_removal = 0;
    ChunkEvent event = ChunkEvent::none;

    bool operator==(const ChunkMetricsRow&) const = default;
};

struct PruneEventRecord {
    std::size_t chunk = 0;
    PruneDecision decision;
};

struct RunReport {
    std::vector<ChunkMetricsRow> rows;
    std::size_t instances = 0;
    std::size_t correct = 0;
    std::size_t num_classes = 0;
    nlohmann::json metadata = nlohmann::json::object();
    std::vector<PruneEventRecord> prune_events;

    double overall_accuracy() const {
        return instances == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(instances);
    }
    std::size_t prune_count() const {
        std::size_t n = 0;
        for (const auto& r : rows) n += r.event == ChunkEvent::prune ? 1 : 0;
        return n;
    }
};

/// Called for every test-then-train step with (instance, predicted class)
/// before the instance reaches any training.
using PredictionObserver = std::function<void(const LabeledInstance&, std::size_t)>;

struct PrequentialOptions {
    std::size_t chunk_size = 1000;
    std::size_t window = 1000; // W
    std::optional<PruneConfig> prune;
    nlohmann::json metadata = nlohmann::json::object();
    PredictionObserver observer;
};

/// Runs the test-then-train loop over whole chunks of `source`.
///
/// Each instance is first predicted by the current ensemble (an empty
/// ensemble predicts class 0), scored, and, with pruning enabled, recorded
/// in the window. At each chunk boundary the ensemble processes the chunk;
/// a full ensemble is pruned through the installed hook. A trailing partial
/// chunk is neither evaluated nor trained on.
inline RunReport run_prequential(StreamSource source, Ensemble& ensemble, const PrequentialOptions& opts) {
    if (source.schema().num_features != ensemble.schema().num_features ||
        source.schema().num_classes != ensemble.schema().num_classes)
        throw EvalError("stream schema does not match the ensemble schema");

    const std::size_t L = source.schema().num_classes;
    ChunkedStream chunks(std::move(source), opts.chunk_size);
    PrequentialState state(opts.window);

    std::optional<RecordWindow> window;
    std::vector<PruneDecision> decisions;
    PruneHook hook;
    if (opts.prune) {
        window.emplace(opts.prune->window, L, opts.prune->records);
        hook = make_prune_hook(*window, *opts.prune, &decisions);
    }

    RunReport report;
    report.num_classes = L;
    std::vector<ComponentScores> recorded;
    while (auto chunk = chunks.next()) {
        for (const auto& inst : chunk->instances) {
            std::size_t predicted = 0;
            if (!ensemble.empty()) {
                auto scores = ensemble.component_scores(inst.features);
                predicted = ensemble.combine(scores).predicted_class;
                if (window) {
                    recorded.clear();
                    const auto& members = ensemble.members();
                    for (std::size_t k = 0; k < members.size(); ++k)
                        recorded.push_back({members[k].id, members[k].birth_chunk, std::move(scores[k])});
                    window->record(inst.label, recorded);
                }
            }
            if (opts.observer) opts.observer(inst, predicted);
            state.add(predicted == inst.label);
        }

        const std::size_t before = decisions.size();
        const ChunkOutcome outcome = ensemble.process_chunk(*chunk, hook);

        ChunkMetricsRow row;
        row.chunk = chunk->index;
        row.instances_seen = state.seen();
        row.prequential_accuracy = state.prequential_accuracy();
        row.overall_accuracy = state.overall_accuracy();
        row.ensemble_size = ensemble.size();
        row.ensemble_bytes = ensemble.estimate_size();
        if (outcome.pruned || outcome.replaced) {
            row.bytes_before_removal = outcome.bytes_before_removal;
            row.bytes_after_removal = outcome.bytes_after_removal;
            row.event = outcome.pruned ? ChunkEvent::prune : ChunkEvent::replace;
        }
        report.rows.push_back(row);
        for (std::size_t i = before; i < decisions.size(); ++i) report.prune_events.push_back({chunk->index, decisions[i]});
    }
    if (report.rows.empty()) throw EvalError("stream produced no complete chunk");

    report.instances = state.seen();
    report.correct = state.correct_total();
    report.metadata = opts.metadata;
    report.metadata["chunk_size"] = opts.chunk_size;
    report.metadata["prequential_window"] = opts.window;
    report.metadata["ensemble_kind"] = std::string(to_string(ensemble.kind()));
    report.metadata["max_size"] = ensemble.max_size();
    if (opts.prune) {
        report.metadata["prune"] = {{"scheme", std::string(to_string(opts.prune->scheme))},
                                    {"size", opts.prune->size},
                                    {"window", opts.prune->window},
                                    {"records", std::string(to_string(opts.prune->records))}};
    } else {
        report.metadata["prune"] = nullptr;
    }
    report.metadata["reweight_before_prune"] = true;
    return report;
}

/// Sum of pruned-run ensemble bytes over sum of baseline bytes, both taken
/// at the same chunk boundaries.
inline double memory_ratio(const RunReport& pruned, const RunReport& baseline) {
    if (pruned.rows.size() != baseline.rows.size()) throw EvalError("memory_ratio: reports cover different chunks");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < pruned.rows.size(); ++i) {
        if (pruned.rows[i].chunk != baseline.rows[i].chunk) throw EvalError("memory_ratio: chunk index mismatch");
        num += static_cast<double>(pruned.rows[i].ensemble_bytes);
        den += static_cast<double>(baseline.rows[i].ensemble_bytes);
    }
    if (den <= 0.0) throw EvalError("memory_ratio: baseline has zero size");
    return num / den;
}

struct ComparisonTable {
    std::vector<std::string> labels;
    std::vector<double> accuracy;
    std::vector<std::optional<double>> mu;
    std::vector<bool> winner;
};

/// Aligns overall accuracy (and mu against `baseline`, when given) across
/// runs of the same stream. Every run with the best accuracy is flagged; a
/// single run gets no flag.
inline ComparisonTable compare_runs(const std::vector<std::pair<std::string, const RunReport*>>& runs,
                                    const RunReport* baseline = nullptr) {
    if (runs.empty()) throw EvalError("compare_runs: no reports");
    const auto stream_of = [](const RunReport& r) { return r.metadata.contains("stream") ? r.metadata["stream"] : nlohmann::json(); };
    const auto reference = stream_of(*runs.front().second);
    ComparisonTable t;
    double best = -1.0;
    for (const auto& [label, report] : runs) {
        if (stream_of(*report) != reference) throw EvalError("compare_runs: reports come from different streams");
        t.labels.push_back(label);
        t.accuracy.push_back(report->overall_accuracy());
        t.mu.push_back(baseline ? std::optional<double>(memory_ratio(*report, *baseline)) : std::nullopt);
        best = std::max(best, report->overall_accuracy());
    }
    for (double a : t.accuracy) t.winner.push_back(runs.size() > 1 && a == best);
    return t;
}

namespace detail {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

/// Comparison table with one column per run, rows `overall_accuracy`, `mu`,
/// `winner`.
inline void write_comparison_csv(std::ostream& out, const ComparisonTable& t) {
    out << "# format_version=" << kReportFormatVersion << "\nmetric";
    for (const auto& l : t.labels) out << ',' << l;
    out << "\noverall_accuracy";
    for (double a : t.accuracy) out << ',' << detail::fmt_double(a);
    out << "\nmu";
    for (const auto& m : t.mu) out << ',' << (m ? detail::fmt_double(*m) : std::string());
    out << "\nwinner";
    for (bool w : t.winner) out << ',' << (w ? 1 : 0);
    out << '\n';
}

inline constexpr const char* kReportCsvHeader =
    "chunk,instances_seen,prequential_accuracy,overall_accuracy,ensemble_size,ensemble_bytes,"
    "bytes_before_removal,bytes_after_removal,event";

inline void write_report_csv(std::ostream& out, const RunReport& r) {
    out << "# format_version=" << kReportFormatVersion << '\n' << kReportCsvHeader << '\n';
    for (const auto& row : r.rows) {
        out << row.chunk << ',' << row.instances_seen << ',' << detail::fmt_double(row.prequential_accuracy) << ','
            << detail::fmt_double(row.overall_accuracy) << ',' << row.ensemble_size << ',' << row.ensemble_bytes << ','
            << row.bytes_before_removal << ',' << row.bytes_after_removal << ',' << to_string(row.event) << '\n';
    }
}

inline std::vector<ChunkMetricsRow> read_report_csv(std::istream& in) {
    std::vector<ChunkMetricsRow> rows;
    std::string line;
    bool header_seen = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        if (!header_seen) {
            if (line != kReportCsvHeader) throw EvalError("report CSV: unexpected header");
            header_seen = true;
            continue;
        }
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 9) throw EvalError("report CSV: row " + std::to_string(line_no) + " has wrong width");
        try {
            ChunkMetricsRow r;
            r.chunk = std::stoull(cells[0]);
            r.instances_seen = std::stoull(cells[1]);
            r.prequential_accuracy = std::stod(cells[2]);
            r.overall_accuracy = std::stod(cells[3]);
            r.ensemble_size = std::stoull(cells[4]);
            r.ensemble_bytes = std::stoull(cells[5]);
            r.bytes_before_removal = std::stoull(cells[6]);
            r.bytes_after_removal = std::stoull(cells[7]);
            r.event = chunk_event_from_string(cells[8]);
            rows.push_back(r);
        } catch (const std::logic_error&) {
            throw EvalError("report CSV: row " + std::to_string(line_no) + " is malformed");
        }
    }
    if (!header_seen) throw EvalError("report CSV: missing header");
    return rows;
}

/// JSON summary: overall accuracy, counts, mu when paired, and the run's
/// reproduction metadata.
inline nlohmann::json summary_json(const RunReport& r, std::optional<double> mu = std::nullopt) {
    nlohmann::json j;
    j["format_version"] = kReportFormatVersion;
    j["overall_accuracy"] = r.overall_accuracy();
    j["instances"] = r.instances;
    j["correct"] = r.correct;
    j["chunks"] = r.rows.size();
    j["prune_events"] = r.prune_count();
    if (mu) j["mu"] = *mu;
    j["metadata"] = r.metadata;
    return j;
}

} // namespace ccrp

#endif // CCRP_EVAL_HPP_
