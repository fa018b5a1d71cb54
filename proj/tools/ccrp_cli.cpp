// ccrp: experiment runner for streaming ensembles with class-wise
// component ranking pruning.
//
//   ccrp run --config exp.json [--out DIR] [--seed N] [--quiet]
//   ccrp compare --config exp.json [--out DIR] [--seed N] [--quiet]
//   ccrp gen moving-squares --seed 1 --count 200000 --output squares.csv
//   ccrp curves a.report.csv b.report.csv --output curves.csv
//
// Exit codes: 0 success, 1 configuration error, 2 runtime error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ccrp/eval.hpp"
#include "ccrp/experiment.hpp"
#include "ccrp/stream.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct GlobalOptions {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

std::mutex g_output_mutex;

std::ofstream open_output(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

void write_file(const fs::path& path, const auto& writer) {
    std::lock_guard lock(g_output_mutex);
    auto out = open_output(path);
    writer(out);
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

ccrp::ExperimentConfig load(const GlobalOptions& g) {
    if (g.config.empty()) throw ccrp::ConfigError("--config is required");
    std::ifstream in(g.config);
    if (!in) throw ccrp::ConfigError("cannot open config file: " + g.config);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ccrp::ConfigError(g.config + ": " + e.what());
    }
    if (g.seed && j.contains("stream") && j["stream"].is_object()) j["stream"]["seed"] = *g.seed;
    auto c = ccrp::parse_config(j);
    if (!g.out.empty()) c.out_dir = g.out;
    // Opening the stream validates the data-dependent invariants up front.
    (void)ccrp::open_stream(c);
    if (!g.quiet)
        for (const auto& w : c.warnings) std::cerr << "warning: " << w << '\n';
    return c;
}

void write_diagnostics(const fs::path& path, const ccrp::RunReport& r) {
    write_file(path, [&](std::ostream& out) {
        ccrp::write_prune_diagnostics_header(out, r.num_classes, "chunk");
        for (const auto& e : r.prune_events)
            ccrp::write_prune_diagnostics(out, e.decision, r.num_classes, std::to_string(e.chunk));
    });
}

int cmd_run(const GlobalOptions& g) {
    const auto c = load(g);
    const auto result = ccrp::run_experiment(c);
    const fs::path dir = c.out_dir;
    write_file(dir / (c.name + ".report.csv"), [&](std::ostream& o) { ccrp::write_report_csv(o, result.report); });
    auto summary = ccrp::summary_json(result.report, result.mu);
    if (result.baseline) {
        write_file(dir / (c.name + ".baseline.report.csv"), [&](std::ostream& o) { ccrp::write_report_csv(o, *result.baseline); });
        summary["baseline"] = ccrp::summary_json(*result.baseline);
        summary["baseline"].erase("metadata");
    }
    if (!result.report.prune_events.empty()) write_diagnostics(dir / (c.name + ".prune_diagnostics.csv"), result.report);
    write_file(dir / (c.name + ".summary.json"), [&](std::ostream& o) { o << summary.dump(2) << '\n'; });

    if (!g.quiet) {
        std::printf("overall accuracy: %.4f\n", result.report.overall_accuracy());
        if (result.baseline) std::printf("baseline accuracy: %.4f\n", result.baseline->overall_accuracy());
        if (result.mu) std::printf("mu: %.1f%%\n", *result.mu * 100.0);
    }
    return kExitOk;
}

int cmd_compare(const GlobalOptions& g) {
    const auto c = load(g);
    if (c.compare_schemes.size() < 2) throw ccrp::ConfigError("config.compare.schemes: needs at least two schemes");
    const auto result = ccrp::run_comparison(c);
    const fs::path dir = c.out_dir;
    for (std::size_t i = 0; i < result.reports.size(); ++i) {
        write_file(dir / (c.name + "." + result.schemes[i] + ".report.csv"),
                   [&](std::ostream& o) { ccrp::write_report_csv(o, result.reports[i]); });
    }
    write_file(dir / (c.name + ".baseline.report.csv"), [&](std::ostream& o) { ccrp::write_report_csv(o, result.baseline); });
    write_file(dir / (c.name + ".compare.csv"), [&](std::ostream& o) { ccrp::write_comparison_csv(o, result.table); });

    if (!g.quiet) {
        for (std::size_t i = 0; i < result.table.labels.size(); ++i) {
            std::printf("%-14s accuracy %.4f  mu %5.1f%%%s\n", result.table.labels[i].c_str(), result.table.accuracy[i],
                        result.table.mu[i].value_or(0.0) * 100.0, result.table.winner[i] ? "  *" : "");
        }
    }
    return kExitOk;
}

int cmd_gen(const GlobalOptions& g, const std::string& generator, std::size_t count, const std::string& output) {
    const auto origin = ccrp::origin_from_string(generator);
    if (!origin || *origin == ccrp::Origin::csv_file) throw ccrp::ConfigError("unknown generator: " + generator);
    const std::uint64_t seed = g.seed.value_or(1);
    const std::size_t n = std::max<std::size_t>(count, 1);
    auto src = [&] {
        switch (*origin) {
        case ccrp::Origin::moving_squares: return ccrp::gen_moving_squares(seed, n);
        case ccrp::Origin::moving_rbf: return ccrp::gen_moving_rbf(seed, n);
        default: return ccrp::gen_transient_chessboard(seed, n);
        }
    }();
    write_file(output, [&](std::ostream& o) { ccrp::write_csv(o, src, count); });
    if (!g.quiet) std::printf("wrote %zu rows to %s\n", count, output.c_str());
    return kExitOk;
}

std::string run_label(const fs::path& p) {
    std::string name = p.filename().string();
    for (const char* suffix : {".report.csv", ".csv"}) {
        const std::string s = suffix;
        if (name.size() > s.size() && name.ends_with(s)) return name.substr(0, name.size() - s.size());
    }
    return name;
}

int cmd_curves(const GlobalOptions& g, const std::vector<std::string>& reports, const std::string& output) {
    if (reports.empty()) throw ccrp::ConfigError("curves: at least one report is required");
    struct Row {
        std::size_t seen;
        std::size_t run;
        int kind; // 0 curve, 1 prune event
        double acc;
    };
    std::vector<std::string> labels;
    std::vector<Row> rows;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        std::ifstream in(reports[i]);
        if (!in) throw ccrp::ConfigError("curves: cannot open report " + reports[i]);
        labels.push_back(run_label(reports[i]));
        for (const auto& r : ccrp::read_report_csv(in)) {
            rows.push_back({r.instances_seen, i, 0, r.prequential_accuracy});
            if (r.event == ccrp::ChunkEvent::prune) rows.push_back({r.instances_seen, i, 1, r.prequential_accuracy});
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.seen != b.seen) return a.seen < b.seen;
        if (a.run != b.run) return a.run < b.run;
        return a.kind < b.kind;
    });
    write_file(output, [&](std::ostream& o) {
        o << "# format_version=" << ccrp::kReportFormatVersion << "\nrun,instances_seen,prequential_accuracy,event\n";
        for (const auto& r : rows) {
            o << labels[r.run] << ',' << r.seen << ',' << ccrp::detail::fmt_double(r.acc) << ',' << (r.kind ? "prune" : "")
              << '\n';
        }
    });
    if (!g.quiet) std::printf("wrote %zu rows to %s\n", rows.size(), output.c_str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Streaming ensemble experiments with class-wise component ranking pruning"};
    app.require_subcommand(1);

    GlobalOptions g;
    std::uint64_t seed = 0;
    auto add_globals = [&](CLI::App* cmd) {
        cmd->add_option("--config", g.config, "Experiment config (JSON)");
        cmd->add_option("--out", g.out, "Output directory (overrides eval.out_dir)");
        cmd->add_option("--seed", seed, "Stream seed override");
        cmd->add_flag("--quiet", g.quiet, "Suppress console output");
    };

    auto* run = app.add_subcommand("run", "Run one prequential experiment (paired with an unpruned baseline)");
    add_globals(run);
    auto* compare = app.add_subcommand("compare", "Run several pruning/replacement schemes on one stream");
    add_globals(compare);

    auto* gen = app.add_subcommand("gen", "Write a synthetic stream to CSV");
    add_globals(gen);
    std::string generator, gen_output;
    std::size_t count = 0;
    gen->add_option("generator", generator, "moving-squares | moving-rbf | transient-chessboard")->required();
    gen->add_option("--count", count, "Number of instances")->required();
    gen->add_option("--output,-o", gen_output, "Output CSV path")->required();

    auto* curves = app.add_subcommand("curves", "Merge report CSVs into plot-ready prequential curves");
    add_globals(curves);
    std::vector<std::string> report_paths;
    std::string curves_output;
    curves->add_option("reports", report_paths, "Report CSV files");
    curves->add_option("--output,-o", curves_output, "Output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    for (auto* cmd : {run, compare, gen, curves})
        if (cmd->parsed() && cmd->count("--seed") > 0) g.seed = seed;

    try {
        if (run->parsed()) return cmd_run(g);
        if (compare->parsed()) return cmd_compare(g);
        if (gen->parsed()) return cmd_gen(g, generator, count, gen_output);
        if (curves->parsed()) return cmd_curves(g, report_paths, curves_output);
    } catch (const ccrp::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}
