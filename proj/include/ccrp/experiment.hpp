#ifndef CCRP_EXPERIMENT_HPP_
#define CCRP_EXPERIMENT_HPP_

// Declarative experiment configs (JSON) and the runners behind the CLI.
// See docs/config.md for the schema.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <future>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "ccrp/ensembles.hpp"
#include "ccrp/eval.hpp"
#include "ccrp/learners.hpp"
#include "ccrp/pruner.hpp"
#include "ccrp/stream.hpp"

namespace ccrp {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class LearnerKind { hoeffding_tree, naive_bayes };

struct StreamSpec {
    Origin origin = Origin::moving_squares;
    std::string path;
    std::uint64_t seed = 1;
    std::optional<std::size_t> instances;
    double period = 50'000.0;
    double drift_speed = 1e-4;
    double sigma = 0.1;
    std::size_t segment_length = 1'000;
};

struct LearnerSpec {
    LearnerKind kind = LearnerKind::hoeffding_tree;
    HoeffdingTreeOptions tree;
    NaiveBayesOptions bayes;
};

struct EnsembleSpec {
    EnsembleKind kind = EnsembleKind::awe;
    std::size_t max_size = 20;
    std::size_t chunk_size = 1'000;
};

struct ExperimentConfig {
    std::string name = "experiment";
    StreamSpec stream;
    LearnerSpec learner;
    EnsembleSpec ensemble;
    std::optional<PruneConfig> prune;
    std::vector<std::string> compare_schemes; // "none" or a PruneScheme name
    std::size_t eval_window = 1'000;
    std::string out_dir = "out";
    std::vector<std::string> warnings;
};

namespace detail {

class ConfigReader {
  public:
    ConfigReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail("", "must be an object");
    }

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        throw ConfigError((key.empty() ? path_ : path_ + "." + key) + ": " + msg);
    }

    void allow_only(std::initializer_list<const char*> keys) const {
        for (const auto& [k, _] : j_.items()) {
            if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; })) fail(k, "unknown key");
        }
    }

    bool has(const char* key) const { return j_.contains(key); }
    const nlohmann::json& raw(const char* key) const { return j_.at(key); }

    std::string string(const char* key, std::optional<std::string> fallback = std::nullopt) const {
        if (!has(key)) {
            if (!fallback) fail(key, "is required");
            return *fallback;
        }
        if (!j_[key].is_string()) fail(key, "must be a string");
        return j_[key].get<std::string>();
    }

    std::uint64_t uint(const char* key, std::optional<std::uint64_t> fallback = std::nullopt) const {
        if (!has(key)) {
            if (!fallback) fail(key, "is required");
            return *fallback;
        }
        const auto& v = j_[key];
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
            fail(key, "must be a non-negative integer");
        return v.get<std::uint64_t>();
    }

    double number(const char* key, double fallback) const {
        if (!has(key)) return fallback;
        const auto& v = j_[key];
        if (!v.is_number()) fail(key, "must be a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) fail(key, "must be finite");
        return d;
    }

  private:
    const nlohmann::json& j_;
    std::string path_;
};

inline std::string scheme_label(const std::optional<PruneConfig>& p) {
    return p ? std::string(to_string(p->scheme)) : "none";
}

} // namespace detail

/// Parses and validates a config. Every invariant that can be checked
/// without reading data is checked here; open_stream() adds the schema
/// checks for CSV sources.
inline ExperimentConfig parse_config(const nlohmann::json& root) {
    using detail::ConfigReader;
    ConfigReader top(root, "config");
    top.allow_only({"name", "stream", "learner", "ensemble", "prune", "compare", "eval"});

    ExperimentConfig c;
    c.name = top.string("name", std::string("experiment"));
    if (c.name.empty() || c.name.find_first_of("/\\") != std::string::npos) top.fail("name", "must be a non-empty file stem");

    if (!top.has("stream")) top.fail("stream", "is required");
    {
        ConfigReader s(top.raw("stream"), "config.stream");
        const auto origin = origin_from_string(s.string("origin"));
        if (!origin) s.fail("origin", "unknown origin (csv-file, moving-squares, moving-rbf, transient-chessboard)");
        c.stream.origin = *origin;
        switch (*origin) {
        case Origin::csv_file:
            s.allow_only({"origin", "path", "instances"});
            c.stream.path = s.string("path");
            if (c.stream.path.empty()) s.fail("path", "must not be empty");
            if (s.has("instances")) c.stream.instances = s.uint("instances");
            break;
        case Origin::moving_squares:
            s.allow_only({"origin", "seed", "instances", "period"});
            c.stream.period = s.number("period", c.stream.period);
            if (!(c.stream.period > 0.0)) s.fail("period", "must be > 0");
            break;
        case Origin::moving_rbf:
            s.allow_only({"origin", "seed", "instances", "drift_speed", "sigma"});
            c.stream.drift_speed = s.number("drift_speed", c.stream.drift_speed);
            c.stream.sigma = s.number("sigma", c.stream.sigma);
            if (c.stream.drift_speed < 0.0) s.fail("drift_speed", "must be >= 0");
            if (!(c.stream.sigma > 0.0)) s.fail("sigma", "must be > 0");
            break;
        case Origin::transient_chessboard:
            s.allow_only({"origin", "seed", "instances", "segment_length"});
            c.stream.segment_length = s.uint("segment_length", c.stream.segment_length);
            if (c.stream.segment_length < 1) s.fail("segment_length", "must be >= 1");
            break;
        }
        if (*origin != Origin::csv_file) {
            c.stream.seed = s.uint("seed");
            c.stream.instances = s.uint("instances");
        }
        if (c.stream.instances && *c.stream.instances < 1) s.fail("instances", "must be >= 1");
    }

    if (top.has("learner")) {
        ConfigReader l(top.raw("learner"), "config.learner");
        const auto kind = l.string("kind", std::string("hoeffding-tree"));
        if (kind == "hoeffding-tree") {
            l.allow_only({"kind", "grace_period", "split_confidence", "tie_threshold", "leaf_prediction", "split_candidates"});
            auto& t = c.learner.tree;
            t.grace_period = l.uint("grace_period", t.grace_period);
            t.split_confidence = l.number("split_confidence", t.split_confidence);
            t.tie_threshold = l.number("tie_threshold", t.tie_threshold);
            t.split_candidates = l.uint("split_candidates", t.split_candidates);
            const auto leaf = l.string("leaf_prediction", std::string("naive-bayes"));
            if (leaf == "naive-bayes") t.leaf_prediction = LeafPrediction::naive_bayes;
            else if (leaf == "majority-class") t.leaf_prediction = LeafPrediction::majority_class;
            else l.fail("leaf_prediction", "must be naive-bayes or majority-class");
            if (t.grace_period < 1) l.fail("grace_period", "must be >= 1");
            if (!(t.split_confidence > 0.0 && t.split_confidence < 1.0)) l.fail("split_confidence", "must be in (0, 1)");
            if (t.tie_threshold < 0.0) l.fail("tie_threshold", "must be >= 0");
            if (t.split_candidates < 1) l.fail("split_candidates", "must be >= 1");
        } else if (kind == "naive-bayes") {
            l.allow_only({"kind", "prior_smoothing"});
            c.learner.kind = LearnerKind::naive_bayes;
            c.learner.bayes.prior_smoothing = l.number("prior_smoothing", c.learner.bayes.prior_smoothing);
            if (c.learner.bayes.prior_smoothing < 0.0) l.fail("prior_smoothing", "must be >= 0");
        } else {
            l.fail("kind", "must be hoeffding-tree or naive-bayes");
        }
    }

    if (!top.has("ensemble")) top.fail("ensemble", "is required");
    {
        ConfigReader e(top.raw("ensemble"), "config.ensemble");
        e.allow_only({"kind", "max_size", "chunk_size"});
        const auto kind = e.string("kind");
        if (kind == "awe") c.ensemble.kind = EnsembleKind::awe;
        else if (kind == "goowe") c.ensemble.kind = EnsembleKind::goowe;
        else e.fail("kind", "must be awe or goowe");
        c.ensemble.max_size = e.uint("max_size", c.ensemble.kind == EnsembleKind::awe ? 20 : 30);
        c.ensemble.chunk_size = e.uint("chunk_size", c.ensemble.chunk_size);
        if (c.ensemble.max_size < 2) e.fail("max_size", "must be >= 2");
        if (c.ensemble.chunk_size < 1) e.fail("chunk_size", "must be >= 1");
    }

    // The prune block also supplies phi and N for compare runs.
    std::optional<PruneConfig> prune_params;
    if (top.has("prune")) {
        const auto& pj = top.raw("prune");
        if (pj.is_string()) {
            if (pj.get<std::string>() != "none") top.fail("prune", "must be \"none\" or an object");
        } else {
            ConfigReader p(pj, "config.prune");
            p.allow_only({"scheme", "size", "window", "records"});
            PruneConfig pc;
            const auto scheme = prune_scheme_from_string(p.string("scheme", std::string("ccrp")));
            if (!scheme) p.fail("scheme", "must be ccrp, regular-borda or weight-based");
            pc.scheme = *scheme;
            pc.size = p.uint("size");
            pc.window = p.uint("window", c.ensemble.chunk_size);
            const auto records = p.string("records", std::string("soft"));
            if (records == "soft") pc.records = RecordMode::soft;
            else if (records == "crisp") pc.records = RecordMode::crisp;
            else p.fail("records", "must be soft or crisp");
            if (pc.size < 1) p.fail("size", "must be >= 1");
            if (pc.size >= c.ensemble.max_size)
                p.fail("size", "phi=" + std::to_string(pc.size) + " must be below max_size K=" + std::to_string(c.ensemble.max_size));
            if (pc.window < 1) p.fail("window", "must be >= 1");
            prune_params = pc;
        }
    }
    c.prune = prune_params;

    if (top.has("compare")) {
        ConfigReader cmp(top.raw("compare"), "config.compare");
        cmp.allow_only({"schemes"});
        if (!cmp.has("schemes") || !cmp.raw("schemes").is_array()) cmp.fail("schemes", "must be a list");
        for (const auto& s : cmp.raw("schemes")) {
            if (!s.is_string()) cmp.fail("schemes", "entries must be strings");
            const auto name = s.get<std::string>();
            if (name != "none" && !prune_scheme_from_string(name)) cmp.fail("schemes", "unknown scheme '" + name + "'");
            c.compare_schemes.push_back(name);
        }
        if (c.compare_schemes.size() < 2) cmp.fail("schemes", "needs at least two schemes");
        const bool needs_params = std::any_of(c.compare_schemes.begin(), c.compare_schemes.end(),
                                              [](const auto& s) { return s != "none"; });
        if (needs_params && !prune_params) top.fail("prune", "compare needs a prune block for size and window");
    }

    if (top.has("eval")) {
        ConfigReader ev(top.raw("eval"), "config.eval");
        ev.allow_only({"window", "out_dir"});
        c.eval_window = ev.uint("window", c.eval_window);
        c.out_dir = ev.string("out_dir", c.out_dir);
        if (c.eval_window < 1) ev.fail("window", "must be >= 1");
    }

    // Generators have a fixed class count, so phi >= L can be checked now.
    if (c.prune && c.prune->scheme == PruneScheme::ccrp && c.stream.origin != Origin::csv_file) {
        const std::size_t L = c.stream.origin == Origin::moving_squares ? 4 : c.stream.origin == Origin::moving_rbf ? 5 : 8;
        if (c.prune->size < L)
            c.warnings.push_back("prune size phi=" + std::to_string(c.prune->size) + " is below the class count L=" +
                                 std::to_string(L) + "; class winners may be pruned");
    }
    return c;
}

inline ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_config(j);
}

/// Canonical JSON form of a config; parse_config(to_json(c)) == c.
inline nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["name"] = c.name;
    auto& s = j["stream"];
    s["origin"] = std::string(to_string(c.stream.origin));
    switch (c.stream.origin) {
    case Origin::csv_file:
        s["path"] = c.stream.path;
        if (c.stream.instances) s["instances"] = *c.stream.instances;
        break;
    case Origin::moving_squares: s["period"] = c.stream.period; break;
    case Origin::moving_rbf:
        s["drift_speed"] = c.stream.drift_speed;
        s["sigma"] = c.stream.sigma;
        break;
    case Origin::transient_chessboard: s["segment_length"] = c.stream.segment_length; break;
    }
    if (c.stream.origin != Origin::csv_file) {
        s["seed"] = c.stream.seed;
        s["instances"] = *c.stream.instances;
    }
    auto& l = j["learner"];
    if (c.learner.kind == LearnerKind::hoeffding_tree) {
        l["kind"] = "hoeffding-tree";
        l["grace_period"] = c.learner.tree.grace_period;
        l["split_confidence"] = c.learner.tree.split_confidence;
        l["tie_threshold"] = c.learner.tree.tie_threshold;
        l["split_candidates"] = c.learner.tree.split_candidates;
        l["leaf_prediction"] = c.learner.tree.leaf_prediction == LeafPrediction::naive_bayes ? "naive-bayes" : "majority-class";
    } else {
        l["kind"] = "naive-bayes";
        l["prior_smoothing"] = c.learner.bayes.prior_smoothing;
    }
    j["ensemble"] = {{"kind", std::string(to_string(c.ensemble.kind))},
                     {"max_size", c.ensemble.max_size},
                     {"chunk_size", c.ensemble.chunk_size}};
    if (c.prune) {
        j["prune"] = {{"scheme", std::string(to_string(c.prune->scheme))},
                      {"size", c.prune->size},
                      {"window", c.prune->window},
                      {"records", std::string(to_string(c.prune->records))}};
    } else {
        j["prune"] = "none";
    }
    if (!c.compare_schemes.empty()) j["compare"] = {{"schemes", c.compare_schemes}};
    j["eval"] = {{"window", c.eval_window}, {"out_dir", c.out_dir}};
    return j;
}

/// Opens the configured source and checks it against the run invariants
/// (more than two classes, phi below K).
inline StreamSource open_stream(const ExperimentConfig& c) {
    StreamSource src = [&] {
        switch (c.stream.origin) {
        case Origin::csv_file: return load_csv(c.stream.path);
        case Origin::moving_squares: return gen_moving_squares(c.stream.seed, *c.stream.instances, c.stream.period);
        case Origin::moving_rbf:
            return gen_moving_rbf(c.stream.seed, *c.stream.instances, c.stream.drift_speed, c.stream.sigma);
        case Origin::transient_chessboard:
            return gen_transient_chessboard(c.stream.seed, *c.stream.instances, c.stream.segment_length);
        }
        throw ConfigError("unknown origin");
    }();
    try {
        src.schema().validate();
    } catch (const StreamError& e) {
        throw ConfigError(std::string("config.stream: ") + e.what());
    }
    return src;
}

inline LearnerFactory make_learner_factory(const LearnerSpec& spec, const StreamSchema& schema) {
    const auto F = schema.num_features;
    const auto L = schema.num_classes;
    if (spec.kind == LearnerKind::naive_bayes)
        return [F, L, o = spec.bayes] { return std::make_unique<NaiveBayes>(F, L, o); };
    return [F, L, o = spec.tree] { return std::make_unique<HoeffdingTree>(F, L, o); };
}

/// Runs one prequential pass with the given prune policy (none = the
/// ensemble's own lowest-weight replacement).
inline RunReport run_single(const ExperimentConfig& c, const std::optional<PruneConfig>& prune) {
    StreamSource src = open_stream(c);
    Ensemble ensemble(c.ensemble.kind, c.ensemble.max_size, src.schema(), make_learner_factory(c.learner, src.schema()));

    PrequentialOptions opts;
    opts.chunk_size = c.ensemble.chunk_size;
    opts.window = c.eval_window;
    opts.prune = prune;
    auto& meta = opts.metadata;
    meta["format_version"] = kReportFormatVersion;
    meta["config"] = to_json(c);
    // Where files land does not affect the run; keep it out so a replay from
    // any directory produces byte-identical metadata.
    meta["config"]["eval"].erase("out_dir");
    meta["stream"] = meta["config"]["stream"];
    meta["schema"] = {{"num_features", src.schema().num_features}, {"num_classes", src.schema().num_classes}};
    meta["normalization"] = "none";
    meta["policy"] = detail::scheme_label(prune);
    if (c.stream.origin == Origin::csv_file) meta["class_labels"] = src.class_labels();

    if (c.stream.origin == Origin::csv_file && c.stream.instances) src.set_limit(*c.stream.instances);
    return run_prequential(std::move(src), ensemble, opts);
}

struct ExperimentResult {
    RunReport report;
    std::optional<RunReport> baseline;
    std::optional<double> mu;
};

/// cmd_run: the configured run, plus an unpruned baseline on the same
/// stream when pruning is enabled (for mu).
inline ExperimentResult run_experiment(const ExperimentConfig& c) {
    ExperimentResult r;
    if (!c.prune) {
        r.report = run_single(c, std::nullopt);
        return r;
    }
    auto baseline = std::async(std::launch::async, [&] { return run_single(c, std::nullopt); });
    r.report = run_single(c, c.prune);
    r.baseline = baseline.get();
    r.mu = memory_ratio(r.report, *r.baseline);
    return r;
}

struct ComparisonResult {
    std::vector<std::string> schemes;
    std::vector<RunReport> reports;
    RunReport baseline;
    ComparisonTable table;
};

/// cmd_compare: one run per listed scheme (each used as the ensemble's
/// replacement policy), all on the same stream, plus an unpruned baseline.
inline ComparisonResult run_comparison(const ExperimentConfig& c) {
    if (c.compare_schemes.size() < 2) throw ConfigError("config.compare.schemes: needs at least two schemes");
    auto policy_for = [&](const std::string& s) -> std::optional<PruneConfig> {
        if (s == "none") return std::nullopt;
        PruneConfig p = *c.prune;
        p.scheme = *prune_scheme_from_string(s);
        return p;
    };
    std::vector<std::future<RunReport>> jobs;
    for (const auto& s : c.compare_schemes)
        jobs.push_back(std::async(std::launch::async, [&, p = policy_for(s)] { return run_single(c, p); }));
    auto baseline_job = std::async(std::launch::async, [&] { return run_single(c, std::nullopt); });

    // A scheme listed twice gets a numbered label so its files stay distinct.
    ComparisonResult out;
    for (const auto& s : c.compare_schemes) {
        const auto seen = std::count(c.compare_schemes.begin(), c.compare_schemes.begin() + static_cast<std::ptrdiff_t>(out.schemes.size()), s);
        out.schemes.push_back(seen == 0 ? s : s + "-" + std::to_string(seen + 1));
    }
    for (auto& j : jobs) out.reports.push_back(j.get());
    out.baseline = baseline_job.get();
    std::vector<std::pair<std::string, const RunReport*>> runs;
    for (std::size_t i = 0; i < out.reports.size(); ++i) runs.emplace_back(out.schemes[i], &out.reports[i]);
    out.table = compare_runs(runs, &out.baseline);
    return out;
}

} // namespace ccrp

#endif // CCRP_EXPERIMENT_HPP_
