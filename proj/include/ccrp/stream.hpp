#ifndef CCRP_STREAM_HPP_
#define CCRP_STREAM_HPP_

// Stream data model: schema, labeled instances, CSV-backed and synthetic
// drift sources, and fixed-size chunking.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace ccrp {

class StreamError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct StreamSchema {
    std::size_t num_features = 0;
    std::size_t num_classes = 0;
    std::vector<std::string> feature_names;

    /// Checks the multi-class invariants a benchmark run relies on
    /// (at least one feature, more than two classes).
    void validate() const {
        if (num_features < 1) throw StreamError("schema: num_features must be >= 1");
        if (num_classes <= 2)
            throw StreamError("schema: num_classes must be > 2 (got " + std::to_string(num_classes) + ")");
    }

    bool operator==(const StreamSchema&) const = default;
};

struct LabeledInstance {
    std::vector<double> features;
    std::size_t label = 0;

    bool operator==(const LabeledInstance&) const = default;
};

inline void check_conforms(const LabeledInstance& inst, const StreamSchema& schema) {
    if (inst.features.size() != schema.num_features)
        throw StreamError("instance has " + std::to_string(inst.features.size()) + " features, schema expects " +
                          std::to_string(schema.num_features));
    if (inst.label >= schema.num_classes)
        throw StreamError("instance label " + std::to_string(inst.label) + " out of range for " +
                          std::to_string(schema.num_classes) + " classes");
}

enum class Origin { csv_file, moving_squares, moving_rbf, transient_chessboard };

inline std::string_view to_string(Origin o) {
    switch (o) {
    case Origin::csv_file: return "csv-file";
    case Origin::moving_squares: return "moving-squares";
    case Origin::moving_rbf: return "moving-rbf";
    case Origin::transient_chessboard: return "transient-chessboard";
    }
    return "unknown";
}

inline std::optional<Origin> origin_from_string(std::string_view s) {
    if (s == "csv-file" || s == "csv") return Origin::csv_file;
    if (s == "moving-squares") return Origin::moving_squares;
    if (s == "moving-rbf") return Origin::moving_rbf;
    if (s == "transient-chessboard") return Origin::transient_chessboard;
    return std::nullopt;
}

namespace detail {

// Platform-independent draws on top of mt19937_64: the standard
// distributions are implementation-defined, these are not.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    std::size_t index(std::size_t n) {
        auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
        return i < n ? i : n - 1;
    }

    double normal() {
        if (spare_) {
            double v = *spare_;
            spare_.reset();
            return v;
        }
        double u1 = 0.0;
        do { u1 = uniform(); } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        return r * std::cos(theta);
    }

  private:
    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

inline double wrap01(double x) { return x - std::floor(x); }

struct CsvState {
    std::shared_ptr<const std::vector<LabeledInstance>> rows;
    std::size_t cursor = 0;

    std::optional<LabeledInstance> next() {
        if (cursor >= rows->size()) return std::nullopt;
        return (*rows)[cursor++];
    }
    void restart() { cursor = 0; }
};

// Four squares of side 0.1 stacked vertically; all of them slide right at
// one board width per `period` instances and wrap around.
struct MovingSquares {
    static constexpr std::size_t kClasses = 4;
    static constexpr std::array<double, kClasses> kHeights{0.125, 0.375, 0.625, 0.875};
    static constexpr double kSide = 0.1;

    std::uint64_t seed;
    double period;
    Rng rng{seed};
    std::uint64_t t = 0;

    MovingSquares(std::uint64_t s, double p) : seed(s), period(p) {}

    LabeledInstance draw() {
        const std::size_t c = rng.index(kClasses);
        const double origin = wrap01(static_cast<double>(t) / period);
        const double x = wrap01(origin + kSide * rng.uniform());
        const double y = kHeights[c] - kSide / 2 + kSide * rng.uniform();
        ++t;
        return {{x, y}, c};
    }
    void restart() { *this = MovingSquares(seed, period); }
};

// Gaussian blobs around one centroid per class; centroids travel along
// fixed unit directions and reflect off the unit hypercube walls.
struct MovingRbf {
    static constexpr std::size_t kFeatures = 10;
    static constexpr std::size_t kClasses = 5;

    std::uint64_t seed;
    double sigma;
    double speed;
    Rng rng{seed};
    std::vector<std::vector<double>> centroids;
    std::vector<std::vector<double>> directions;

    MovingRbf(std::uint64_t s, double sig, double spd) : seed(s), sigma(sig), speed(spd) {
        centroids.assign(kClasses, std::vector<double>(kFeatures));
        directions.assign(kClasses, std::vector<double>(kFeatures));
        for (std::size_t c = 0; c < kClasses; ++c) {
            for (auto& v : centroids[c]) v = rng.uniform();
            double norm = 0.0;
            for (auto& v : directions[c]) {
                v = rng.normal();
                norm += v * v;
            }
            norm = std::sqrt(norm);
            for (auto& v : directions[c]) v /= norm;
        }
    }

    void advance() {
        for (std::size_t c = 0; c < kClasses; ++c) {
            for (std::size_t f = 0; f < kFeatures; ++f) {
                double& p = centroids[c][f];
                p += speed * directions[c][f];
                if (p < 0.0) {
                    p = -p;
                    directions[c][f] = -directions[c][f];
                } else if (p > 1.0) {
                    p = 2.0 - p;
                    directions[c][f] = -directions[c][f];
                }
            }
        }
    }

    LabeledInstance draw() {
        const std::size_t c = rng.index(kClasses);
        std::vector<double> x(kFeatures);
        for (std::size_t f = 0; f < kFeatures; ++f) x[f] = centroids[c][f] + sigma * rng.normal();
        advance();
        return {std::move(x), c};
    }
    void restart() { *this = MovingRbf(seed, sigma, speed); }
};

// 8x8 board, class of cell (row, col) is (row + col) mod 8. Even segments
// reveal a single group of four cells (groups cycle), odd segments sample
// the whole board.
struct TransientChessboard {
    static constexpr std::size_t kSide = 8;
    static constexpr std::size_t kClasses = 8;
    static constexpr std::size_t kGroupSize = 4;
    static constexpr std::size_t kGroups = kSide * kSide / kGroupSize;

    std::uint64_t seed;
    std::size_t segment_length;
    Rng rng{seed};
    std::vector<std::size_t> cell_order;
    std::uint64_t t = 0;

    TransientChessboard(std::uint64_t s, std::size_t seg) : seed(s), segment_length(seg) {
        cell_order.resize(kSide * kSide);
        for (std::size_t i = 0; i < cell_order.size(); ++i) cell_order[i] = i;
        for (std::size_t i = cell_order.size() - 1; i > 0; --i) std::swap(cell_order[i], cell_order[rng.index(i + 1)]);
    }

    static std::size_t class_of(double x, double y) {
        auto cell = [](double v) { return std::min<std::size_t>(static_cast<std::size_t>(v * kSide), kSide - 1); };
        return (cell(y) + cell(x)) % kClasses;
    }

    LabeledInstance draw() {
        const std::uint64_t segment = t / segment_length;
        std::size_t cell = 0;
        if (segment % 2 == 0) {
            const std::size_t group = (segment / 2) % kGroups;
            cell = cell_order[group * kGroupSize + rng.index(kGroupSize)];
        } else {
            cell = rng.index(kSide * kSide);
        }
        const std::size_t row = cell / kSide;
        const std::size_t col = cell % kSide;
        const double x = (static_cast<double>(col) + rng.uniform()) / kSide;
        const double y = (static_cast<double>(row) + rng.uniform()) / kSide;
        ++t;
        return {{x, y}, (row + col) % kClasses};
    }
    void restart() { *this = TransientChessboard(seed, segment_length); }
};

} // namespace detail

/// A time-ordered, replayable source of labeled instances.
///
/// Sources have value semantics: copying one yields an independent cursor
/// that replays the same sequence from the copy point.
class StreamSource {
  public:
    const StreamSchema& schema() const { return schema_; }
    Origin origin() const { return origin_; }
    std::uint64_t seed() const { return seed_; }
    std::optional<std::size_t> total_instances() const { return total_; }
    /// For CSV sources: original label tokens, indexed by dense class id.
    const std::vector<std::string>& class_labels() const { return class_labels_; }

    std::optional<LabeledInstance> next() {
        if (total_ && emitted_ >= *total_) return std::nullopt;
        auto inst = std::visit(
            [](auto& s) -> std::optional<LabeledInstance> {
                if constexpr (std::is_same_v<std::decay_t<decltype(s)>, detail::CsvState>)
                    return s.next();
                else
                    return s.draw();
            },
            state_);
        if (inst) ++emitted_;
        return inst;
    }

    /// Caps the number of instances this source emits.
    void set_limit(std::size_t n) { total_ = total_ ? std::min(*total_, n) : n; }

    void restart() {
        std::visit([](auto& s) { s.restart(); }, state_);
        emitted_ = 0;
    }

  private:
    using State = std::variant<detail::CsvState, detail::MovingSquares, detail::MovingRbf, detail::TransientChessboard>;

    StreamSource(StreamSchema schema, Origin origin, std::uint64_t seed, std::optional<std::size_t> total, State state)
        : schema_(std::move(schema)), origin_(origin), seed_(seed), total_(total), state_(std::move(state)) {}

    friend StreamSource load_csv(const std::string&, const std::optional<StreamSchema>&);
    friend StreamSource gen_moving_squares(std::uint64_t, std::size_t, double);
    friend StreamSource gen_moving_rbf(std::uint64_t, std::size_t, double, double);
    friend StreamSource gen_transient_chessboard(std::uint64_t, std::size_t, std::size_t);

    StreamSchema schema_;
    Origin origin_;
    std::uint64_t seed_ = 0;
    std::optional<std::size_t> total_;
    std::size_t emitted_ = 0;
    State state_;
    std::vector<std::string> class_labels_;
};

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        cells.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return cells;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

} // namespace detail

/// Loads a comma-separated file with the class label in the last column.
///
/// A first row containing any non-numeric cell is taken as a header. Labels
/// are densified to [0, L) in order of first appearance. When a schema hint
/// is given, the file must agree with its feature count, and its class count
/// is used as the lower bound for L.
inline StreamSource load_csv(const std::string& path, const std::optional<StreamSchema>& schema_hint = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw StreamError("cannot open CSV file: " + path);

    auto rows = std::make_shared<std::vector<LabeledInstance>>();
    std::vector<std::string> labels;
    std::unordered_map<std::string, std::size_t> label_index;
    std::vector<std::string> header;
    std::optional<std::size_t> width;

    std::string line;
    std::size_t line_no = 0;
    bool first_content_row = true;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = detail::trim(line);
        if (view.empty()) continue;
        auto cells = detail::split_commas(view);
        if (first_content_row) {
            first_content_row = false;
            bool numeric = true;
            for (auto c : cells) numeric = numeric && detail::parse_number(c).has_value();
            if (!numeric) {
                for (auto c : cells) header.emplace_back(detail::trim(c));
                width = cells.size();
                continue;
            }
        }
        if (cells.size() < 2) throw StreamError(path + ": row " + std::to_string(line_no) + ": needs at least one feature and a label");
        if (width && cells.size() != *width)
            throw StreamError(path + ": row " + std::to_string(line_no) + ": ragged row (" + std::to_string(cells.size()) +
                              " cells, expected " + std::to_string(*width) + ")");
        width = cells.size();

        LabeledInstance inst;
        inst.features.reserve(cells.size() - 1);
        for (std::size_t i = 0; i + 1 < cells.size(); ++i) {
            auto v = detail::parse_number(cells[i]);
            if (!v) {
                throw StreamError(path + ": row " + std::to_string(line_no) + ": non-numeric or missing feature in column " +
                                  std::to_string(i + 1));
            }
            inst.features.push_back(*v);
        }
        std::string label(detail::trim(cells.back()));
        if (label.empty()) throw StreamError(path + ": row " + std::to_string(line_no) + ": missing label");
        auto [it, inserted] = label_index.try_emplace(label, labels.size());
        if (inserted) labels.push_back(label);
        inst.label = it->second;
        rows->push_back(std::move(inst));
    }
    if (rows->empty()) throw StreamError(path + ": no data rows");

    StreamSchema schema;
    schema.num_features = *width - 1;
    schema.num_classes = labels.size();
    if (!header.empty()) schema.feature_names.assign(header.begin(), header.end() - 1);
    if (schema_hint) {
        if (schema_hint->num_features != schema.num_features)
            throw StreamError(path + ": file has " + std::to_string(schema.num_features) + " features, schema hint expects " +
                              std::to_string(schema_hint->num_features));
        if (schema_hint->num_classes < schema.num_classes)
            throw StreamError(path + ": file has " + std::to_string(schema.num_classes) + " classes, schema hint allows " +
                              std::to_string(schema_hint->num_classes));
        schema.num_classes = schema_hint->num_classes;
        if (!schema_hint->feature_names.empty()) schema.feature_names = schema_hint->feature_names;
    }

    const std::size_t count = rows->size();
    StreamSource src(std::move(schema), Origin::csv_file, 0, count, detail::CsvState{std::move(rows), 0});
    src.class_labels_ = std::move(labels);
    return src;
}

inline StreamSource gen_moving_squares(std::uint64_t seed, std::size_t total_instances, double period = 50'000.0) {
    if (total_instances < 1) throw StreamError("moving-squares: total_instances must be >= 1");
    if (!(period > 0.0)) throw StreamError("moving-squares: period must be > 0");
    StreamSchema schema{2, detail::MovingSquares::kClasses, {"x", "y"}};
    return {std::move(schema), Origin::moving_squares, seed, total_instances, detail::MovingSquares(seed, period)};
}

inline StreamSource gen_moving_rbf(std::uint64_t seed, std::size_t total_instances, double drift_speed = 1e-4,
                                   double sigma = 0.1) {
    if (total_instances < 1) throw StreamError("moving-rbf: total_instances must be >= 1");
    if (!(drift_speed >= 0.0) || !std::isfinite(drift_speed)) throw StreamError("moving-rbf: drift_speed must be >= 0");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw StreamError("moving-rbf: sigma must be > 0");
    StreamSchema schema{detail::MovingRbf::kFeatures, detail::MovingRbf::kClasses, {}};
    return {std::move(schema), Origin::moving_rbf, seed, total_instances, detail::MovingRbf(seed, sigma, drift_speed)};
}

inline StreamSource gen_transient_chessboard(std::uint64_t seed, std::size_t total_instances,
                                             std::size_t segment_length = 1'000) {
    if (total_instances < 1) throw StreamError("transient-chessboard: total_instances must be >= 1");
    if (segment_length < 1) throw StreamError("transient-chessboard: segment_length must be >= 1");
    StreamSchema schema{2, detail::TransientChessboard::kClasses, {"x", "y"}};
    return {std::move(schema), Origin::transient_chessboard, seed, total_instances,
            detail::TransientChessboard(seed, segment_length)};
}

struct Chunk {
    std::vector<LabeledInstance> instances;
    std::size_t index = 0;

    std::size_t size() const { return instances.size(); }
    bool empty() const { return instances.empty(); }
};

/// Splits a source into consecutive chunks; a trailing partial chunk is
/// dropped.
class ChunkedStream {
  public:
    ChunkedStream(StreamSource source, std::size_t chunk_size) : source_(std::move(source)), chunk_size_(chunk_size) {
        if (chunk_size_ < 1) throw StreamError("chunk_size must be >= 1");
    }

    std::optional<Chunk> next() {
        Chunk chunk;
        chunk.index = next_index_;
        chunk.instances.reserve(chunk_size_);
        while (chunk.instances.size() < chunk_size_) {
            auto inst = source_.next();
            if (!inst) return std::nullopt;
            chunk.instances.push_back(std::move(*inst));
        }
        ++next_index_;
        return chunk;
    }

    const StreamSchema& schema() const { return source_.schema(); }
    std::size_t chunk_size() const { return chunk_size_; }

  private:
    StreamSource source_;
    std::size_t chunk_size_;
    std::size_t next_index_ = 0;
};

inline ChunkedStream chunked(StreamSource source, std::size_t chunk_size) { return {std::move(source), chunk_size}; }

/// Writes a source to CSV (header `x0..x{F-1},class`, labels as dense ids).
inline void write_csv(std::ostream& out, StreamSource source, std::optional<std::size_t> limit = std::nullopt) {
    const auto& schema = source.schema();
    for (std::size_t f = 0; f < schema.num_features; ++f) out << 'x' << f << ',';
    out << "class\n";
    char buf[32];
    std::size_t written = 0;
    while (!limit || written < *limit) {
        auto inst = source.next();
        if (!inst) break;
        for (double v : inst->features) {
            auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
            out.write(buf, end - buf);
            out << ',';
        }
        out << inst->label << '\n';
        ++written;
    }
}

} // namespace ccrp

#endif // CCRP_STREAM_HPP_
