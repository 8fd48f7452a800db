#include "stylevar/report.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "stylevar/errors.hpp"
#include "stylevar/rng.hpp"

namespace stylevar::report {

using nlohmann::json;

namespace {

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) {
        throw Error("failed to format a metric value");
    }
    return std::string(buf, ptr);
}

double parse_double(std::string_view text, const std::string& context) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ValidationError(context + ": cannot parse number \"" + std::string(text) + "\"");
    }
    return v;
}

std::string now_iso8601() {
    const std::time_t now = std::time(nullptr);
    std::tm utc{};
    gmtime_r(&now, &utc);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
    return buf;
}

constexpr const char* kMetricNames[] = {"sml", "cms", "fid", "clips"};

std::optional<double> MetricCell::*metric_field(std::size_t i) {
    switch (i) {
        case 0: return &MetricCell::sml;
        case 1: return &MetricCell::cms;
        case 2: return &MetricCell::fid;
        default: return &MetricCell::clips;
    }
}

bool lower_is_better(std::size_t metric) {
    return metric == 0 || metric == 2;  // sml, fid
}

void check_csv_label(const std::string& label) {
    if (label.empty() || label.find_first_of(",:\"\n") != std::string::npos) {
        throw ValidationError("grid label \"" + label + "\" cannot be rendered as CSV");
    }
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

}  // namespace

const MetricCell& BenchGrid::at(const std::string& input, const std::string& target,
                                const std::string& method) const {
    const auto it = cells.find(CellKey{input, target, method});
    if (it == cells.end()) {
        throw ValidationError("grid has no cell (" + input + ", " + target + ", " + method + ")");
    }
    return it->second;
}

MetricCell& BenchGrid::slot(const std::string& input, const std::string& target,
                            const std::string& method) {
    return cells[CellKey{input, target, method}];
}

void BenchGrid::fill_dense() {
    for (const std::string& input : input_styles) {
        for (const std::string& target : target_styles) {
            for (const std::string& method : methods) {
                cells.try_emplace(CellKey{input, target, method});
            }
        }
    }
}

BenchGrid evaluate(const std::vector<pipeline::RunRecord>& runs, const io::TensorIndex& index,
                   const std::map<dataset::StyleId, std::vector<metrics::GramMatrix>>& style_corpus_grams,
                   const EvaluateOptions& options) {
    BenchGrid grid;
    grid.methods = {options.method};
    for (const pipeline::RunRecord& run : runs) {
        grid.input_styles.push_back(std::string(dataset::style_label(run.input_style)));
        grid.target_styles.push_back(std::string(dataset::style_label(run.target_style)));
    }
    const auto dedup = [](std::vector<std::string>& v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    dedup(grid.input_styles);
    dedup(grid.target_styles);
    grid.fill_dense();

    for (const std::string& input : grid.input_styles) {
        for (const std::string& target : grid.target_styles) {
            if (!options.mask.allows(dataset::parse_style(input), dataset::parse_style(target))) {
                grid.slot(input, target, options.method).excluded = true;
            }
        }
    }

    // Audit everything up front so one failure message covers the whole gap,
    // not just the first missing artifact.
    std::vector<std::string> missing;
    std::vector<const pipeline::RunRecord*> usable;
    std::vector<dataset::StyleId> needed_styles;
    for (const pipeline::RunRecord& run : runs) {
        if (run.status != "ok") {
            continue;
        }
        const std::string input(dataset::style_label(run.input_style));
        const std::string target(dataset::style_label(run.target_style));
        if (grid.at(input, target, options.method).excluded) {
            continue;
        }
        const std::string key = io::TensorIndex::run_key(run.record_id, run.target_style);
        const auto it = index.runs.find(key);
        if (it == index.runs.end()) {
            missing.push_back("run " + key + ": no tensor index entry");
            continue;
        }
        if (!it->second.result_features) {
            missing.push_back("run " + key + ": missing result_features");
        }
        if (!it->second.source_text_embedding) {
            missing.push_back("run " + key + ": missing source_text_embedding");
        }
        if (!it->second.result_text_embedding) {
            missing.push_back("run " + key + ": missing result_text_embedding");
        }
        if (!it->second.result_image_embedding) {
            missing.push_back("run " + key + ": missing result_image_embedding");
        }
        usable.push_back(&run);
        needed_styles.push_back(run.target_style);
    }
    std::sort(needed_styles.begin(), needed_styles.end());
    needed_styles.erase(std::unique(needed_styles.begin(), needed_styles.end()),
                        needed_styles.end());
    for (dataset::StyleId style : needed_styles) {
        const std::string label(dataset::style_label(style));
        const auto it = index.styles.find(style);
        if (it == index.styles.end() || !it->second.style_text_embedding) {
            missing.push_back("style " + label + ": missing style_text_embedding");
        }
        const auto grams = style_corpus_grams.find(style);
        if (grams == style_corpus_grams.end() || grams->second.empty()) {
            missing.push_back("style " + label + ": no corpus Gram matrices");
        }
    }
    if (!missing.empty()) {
        std::string message = "evaluation inputs incomplete:";
        for (const std::string& item : missing) {
            message += "\n  " + item;
        }
        throw ValidationError(message);
    }

    struct Accumulator {
        double sml = 0.0;
        double cms = 0.0;
        double clips = 0.0;
        int count = 0;
        std::vector<Eigen::VectorXd> image_embeddings;
    };
    std::map<CellKey, Accumulator> acc;
    std::map<dataset::StyleId, metrics::EmbeddingVec> style_text;
    for (dataset::StyleId style : needed_styles) {
        style_text[style] = metrics::EmbeddingVec{
            io::to_vector(io::read_tensor(*index.styles.at(style).style_text_embedding))};
    }

    for (const pipeline::RunRecord* run : usable) {
        const std::string key = io::TensorIndex::run_key(run->record_id, run->target_style);
        const io::RunTensorEntry& entry = index.runs.at(key);
        const metrics::GramMatrix result_gram = io::load_gram(*entry.result_features);
        const metrics::EmbeddingVec source_text{
            io::to_vector(io::read_tensor(*entry.source_text_embedding))};
        const metrics::EmbeddingVec result_text{
            io::to_vector(io::read_tensor(*entry.result_text_embedding))};
        const metrics::EmbeddingVec result_image{
            io::to_vector(io::read_tensor(*entry.result_image_embedding))};

        const CellKey cell{std::string(dataset::style_label(run->input_style)),
                           std::string(dataset::style_label(run->target_style)), options.method};
        Accumulator& a = acc[cell];
        a.sml += metrics::sml(result_gram, style_corpus_grams.at(run->target_style));
        a.cms += metrics::cms(source_text, result_text);
        a.clips += metrics::clips(result_image, style_text.at(run->target_style));
        a.image_embeddings.push_back(result_image.values);
        a.count += 1;
    }

    for (auto& [key, a] : acc) {
        MetricCell& cell = grid.cells.at(key);
        cell.sml = a.sml / a.count;
        cell.cms = a.cms / a.count;
        cell.clips = a.clips / a.count;

        const dataset::StyleId target = dataset::parse_style(key.target);
        const io::StyleTensorEntry& style_entry = index.styles.at(target);
        if (a.count >= 2 && style_entry.reference_embeddings) {
            const Eigen::MatrixXd reference =
                io::to_matrix(io::read_tensor(*style_entry.reference_embeddings));
            if (reference.rows() >= 2 &&
                reference.cols() == a.image_embeddings.front().size()) {
                Eigen::MatrixXd stacked(static_cast<Eigen::Index>(a.image_embeddings.size()),
                                        a.image_embeddings.front().size());
                for (std::size_t r = 0; r < a.image_embeddings.size(); ++r) {
                    stacked.row(static_cast<Eigen::Index>(r)) = a.image_embeddings[r];
                }
                cell.fid = metrics::fid(metrics::gaussian_stats({stacked}),
                                        metrics::gaussian_stats({reference}));
            }
        }
    }
    return grid;
}

namespace {

std::string render_csv(const BenchGrid& grid) {
    for (const auto& axis : {grid.input_styles, grid.target_styles, grid.methods}) {
        for (const std::string& label : axis) {
            check_csv_label(label);
        }
    }
    std::string out = "input_style,method";
    for (const std::string& target : grid.target_styles) {
        for (const char* metric : kMetricNames) {
            out += "," + target + ":" + metric;
        }
    }
    out += "\n";
    for (const std::string& input : grid.input_styles) {
        for (const std::string& method : grid.methods) {
            out += input + "," + method;
            for (const std::string& target : grid.target_styles) {
                const MetricCell& cell = grid.at(input, target, method);
                for (std::size_t m = 0; m < 4; ++m) {
                    const std::optional<double> value = cell.*metric_field(m);
                    out += ",";
                    if (cell.excluded) {
                        out += "-";
                    } else if (value) {
                        out += format_double(*value);
                    }
                }
            }
            out += "\n";
        }
    }
    return out;
}

BenchGrid parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) {
        throw ValidationError("grid CSV is empty");
    }
    const std::vector<std::string> header = split(line, ',');
    if (header.size() < 2 || header[0] != "input_style" || header[1] != "method" ||
        (header.size() - 2) % 4 != 0) {
        throw ValidationError("grid CSV header is malformed");
    }
    BenchGrid grid;
    for (std::size_t col = 2; col < header.size(); col += 4) {
        for (std::size_t m = 0; m < 4; ++m) {
            const std::string& name = header[col + m];
            const std::size_t sep = name.find(':');
            if (sep == std::string::npos ||
                name.substr(sep + 1) != kMetricNames[m]) {
                throw ValidationError("grid CSV header column \"" + name + "\" is malformed");
            }
            const std::string target = name.substr(0, sep);
            if (m == 0) {
                grid.target_styles.push_back(target);
            } else if (grid.target_styles.back() != target) {
                throw ValidationError("grid CSV header mixes targets within a block");
            }
        }
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const std::string context = "grid CSV line " + std::to_string(line_no);
        const std::vector<std::string> fields = split(line, ',');
        if (fields.size() != header.size()) {
            throw ValidationError(context + ": expected " + std::to_string(header.size()) +
                                  " fields, got " + std::to_string(fields.size()));
        }
        const std::string& input = fields[0];
        const std::string& method = fields[1];
        if (std::find(grid.input_styles.begin(), grid.input_styles.end(), input) ==
            grid.input_styles.end()) {
            grid.input_styles.push_back(input);
        }
        if (std::find(grid.methods.begin(), grid.methods.end(), method) == grid.methods.end()) {
            grid.methods.push_back(method);
        }
        for (std::size_t t = 0; t < grid.target_styles.size(); ++t) {
            MetricCell cell;
            bool any_dash = false;
            bool all_dash = true;
            for (std::size_t m = 0; m < 4; ++m) {
                const std::string& field = fields[2 + t * 4 + m];
                if (field == "-") {
                    any_dash = true;
                    continue;
                }
                all_dash = false;
                if (!field.empty()) {
                    cell.*metric_field(m) = parse_double(field, context);
                }
            }
            if (any_dash && !all_dash) {
                throw ValidationError(context + ": excluded cells must dash all four metrics");
            }
            cell.excluded = any_dash;
            grid.cells[CellKey{input, grid.target_styles[t], method}] = cell;
        }
    }
    return grid;
}

json cell_to_json(const CellKey& key, const MetricCell& cell) {
    json j{{"input", key.input},
           {"target", key.target},
           {"method", key.method},
           {"excluded", cell.excluded}};
    for (std::size_t m = 0; m < 4; ++m) {
        if (const std::optional<double> value = cell.*metric_field(m)) {
            j[kMetricNames[m]] = *value;
        }
    }
    return j;
}

json grid_to_json(const BenchGrid& grid) {
    json cells = json::array();
    for (const auto& [key, cell] : grid.cells) {
        cells.push_back(cell_to_json(key, cell));
    }
    return json{{"input_styles", grid.input_styles},
                {"target_styles", grid.target_styles},
                {"methods", grid.methods},
                {"cells", std::move(cells)}};
}

BenchGrid grid_from_json(const json& doc) {
    BenchGrid grid;
    try {
        grid.input_styles = doc.at("input_styles").get<std::vector<std::string>>();
        grid.target_styles = doc.at("target_styles").get<std::vector<std::string>>();
        grid.methods = doc.at("methods").get<std::vector<std::string>>();
        for (const json& item : doc.at("cells")) {
            const CellKey key{item.at("input").get<std::string>(),
                              item.at("target").get<std::string>(),
                              item.at("method").get<std::string>()};
            MetricCell cell;
            cell.excluded = item.at("excluded").get<bool>();
            for (std::size_t m = 0; m < 4; ++m) {
                if (item.contains(kMetricNames[m])) {
                    cell.*metric_field(m) = item[kMetricNames[m]].get<double>();
                }
            }
            grid.cells[key] = cell;
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("grid JSON field error: ") + e.what());
    }
    return grid;
}

}  // namespace

std::string render_grid(const BenchGrid& grid, GridFormat format) {
    if (format == GridFormat::csv) {
        return render_csv(grid);
    }
    return grid_to_json(grid).dump(2) + "\n";
}

BenchGrid parse_grid(const std::string& text, GridFormat format) {
    if (format == GridFormat::csv) {
        return parse_csv(text);
    }
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("grid JSON parse error: ") + e.what());
    }
    return grid_from_json(doc);
}

std::string render_grid_pretty(const BenchGrid& grid) {
    // Per (input, target) group and metric, find the best and second-best
    // distinct values so the marks survive ties.
    const auto marks_for = [&](const std::string& input, const std::string& target,
                               std::size_t metric) {
        std::vector<double> values;
        for (const std::string& method : grid.methods) {
            const MetricCell& cell = grid.at(input, target, method);
            if (cell.excluded) {
                continue;
            }
            if (const std::optional<double> v = cell.*metric_field(metric)) {
                values.push_back(*v);
            }
        }
        std::sort(values.begin(), values.end());
        if (!lower_is_better(metric)) {
            std::reverse(values.begin(), values.end());
        }
        values.erase(std::unique(values.begin(), values.end()), values.end());
        std::pair<std::optional<double>, std::optional<double>> best;
        if (!values.empty()) {
            best.first = values[0];
        }
        if (values.size() > 1) {
            best.second = values[1];
        }
        return best;
    };

    std::ostringstream out;
    out << std::left << std::setw(18) << "input" << std::setw(18) << "target" << std::setw(16)
        << "method";
    out << std::right;
    for (const char* metric : kMetricNames) {
        out << std::setw(11) << metric;
    }
    out << "\n";
    for (const std::string& input : grid.input_styles) {
        for (const std::string& target : grid.target_styles) {
            std::array<std::pair<std::optional<double>, std::optional<double>>, 4> marks;
            for (std::size_t m = 0; m < 4; ++m) {
                marks[m] = marks_for(input, target, m);
            }
            for (const std::string& method : grid.methods) {
                const MetricCell& cell = grid.at(input, target, method);
                out << std::left << std::setw(18) << input << std::setw(18) << target
                    << std::setw(16) << method << std::right;
                for (std::size_t m = 0; m < 4; ++m) {
                    std::string text;
                    if (cell.excluded) {
                        text = "-";
                    } else if (const std::optional<double> v = cell.*metric_field(m)) {
                        std::ostringstream num;
                        num << std::fixed << std::setprecision(3) << *v;
                        text = num.str();
                        if (marks[m].first && *v == *marks[m].first) {
                            text += "*";
                        } else if (marks[m].second && *v == *marks[m].second) {
                            text += "^";
                        }
                    }
                    out << std::setw(11) << text;
                }
                out << "\n";
            }
        }
    }
    return out.str();
}

MetricReport aggregate_report(const BenchGrid& grid, const std::string& manifest_fingerprint,
                              const std::string& config_fingerprint) {
    MetricReport report;
    report.methods = grid.methods;
    report.manifest_fingerprint = manifest_fingerprint;
    report.config_fingerprint = config_fingerprint;
    report.created_at = now_iso8601();
    for (const std::string& method : grid.methods) {
        std::array<double, 4> sums{};
        std::array<int, 4> counts{};
        for (const auto& [key, cell] : grid.cells) {
            if (key.method != method || cell.excluded) {
                continue;
            }
            for (std::size_t m = 0; m < 4; ++m) {
                if (const std::optional<double> v = cell.*metric_field(m)) {
                    sums[m] += *v;
                    counts[m] += 1;
                }
            }
        }
        MethodAggregates agg;
        if (counts[0] > 0) agg.sml = sums[0] / counts[0];
        if (counts[1] > 0) agg.cms = sums[1] / counts[1];
        if (counts[2] > 0) agg.fid = sums[2] / counts[2];
        if (counts[3] > 0) agg.clips = sums[3] / counts[3];
        report.aggregates[method] = agg;
    }
    return report;
}

std::string render_report(const BenchGrid& grid, const MetricReport& report) {
    json aggregates = json::object();
    for (const auto& [method, agg] : report.aggregates) {
        json j = json::object();
        if (agg.sml) j["sml"] = *agg.sml;
        if (agg.cms) j["cms"] = *agg.cms;
        if (agg.fid) j["fid"] = *agg.fid;
        if (agg.clips) j["clips"] = *agg.clips;
        aggregates[method] = std::move(j);
    }
    const json doc{{"grid", grid_to_json(grid)},
                   {"methods", report.methods},
                   {"aggregates", std::move(aggregates)},
                   {"provenance",
                    {{"manifest_fingerprint", report.manifest_fingerprint},
                     {"config_fingerprint", report.config_fingerprint},
                     {"created_at", report.created_at}}}};
    return doc.dump(2) + "\n";
}

MetricReport parse_report_aggregates(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("report parse error: ") + e.what());
    }
    MetricReport report;
    try {
        report.methods = doc.at("methods").get<std::vector<std::string>>();
        for (const auto& [method, j] : doc.at("aggregates").items()) {
            MethodAggregates agg;
            if (j.contains("sml")) agg.sml = j["sml"].get<double>();
            if (j.contains("cms")) agg.cms = j["cms"].get<double>();
            if (j.contains("fid")) agg.fid = j["fid"].get<double>();
            if (j.contains("clips")) agg.clips = j["clips"].get<double>();
            report.aggregates[method] = agg;
        }
        const json& prov = doc.at("provenance");
        report.manifest_fingerprint = prov.at("manifest_fingerprint").get<std::string>();
        report.config_fingerprint = prov.at("config_fingerprint").get<std::string>();
        report.created_at = prov.at("created_at").get<std::string>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("report field error: ") + e.what());
    }
    return report;
}

std::string file_fingerprint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open file for fingerprinting: " + path.string());
    }
    std::uint64_t state = rng::kFnvOffset;
    char buf[4096];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        state = rng::fnv1a64(std::string_view(buf, static_cast<std::size_t>(in.gcount())), state);
        if (in.eof()) {
            break;
        }
    }
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    std::uint64_t v = state;
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

}  // namespace stylevar::report
