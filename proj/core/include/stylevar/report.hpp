#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stylevar/manifest.hpp"
#include "stylevar/metrics.hpp"
#include "stylevar/pipeline.hpp"
#include "stylevar/tensor.hpp"

namespace stylevar::report {

/// One (input style, target style, method) slot of the benchmark grid.
/// Excluded cells carry no metric values and render as dashes.
struct MetricCell {
    std::optional<double> sml;
    std::optional<double> cms;
    std::optional<double> fid;
    std::optional<double> clips;
    bool excluded = false;

    bool operator==(const MetricCell&) const = default;
};

struct CellKey {
    std::string input;
    std::string target;
    std::string method;

    auto operator<=>(const CellKey&) const = default;
};

/// Dense grid over input_styles x target_styles x methods. Axis entries are
/// labels (usually style labels, but aggregate grids may use e.g. "all").
struct BenchGrid {
    std::vector<std::string> input_styles;
    std::vector<std::string> target_styles;
    std::vector<std::string> methods;
    std::map<CellKey, MetricCell> cells;

    const MetricCell& at(const std::string& input, const std::string& target,
                         const std::string& method) const;
    MetricCell& slot(const std::string& input, const std::string& target,
                     const std::string& method);

    /// Fills every axis combination with a default cell.
    void fill_dense();

    bool operator==(const BenchGrid&) const = default;
};

struct MethodAggregates {
    std::optional<double> sml;
    std::optional<double> cms;
    std::optional<double> fid;
    std::optional<double> clips;
};

/// Per-method means over non-excluded cells, plus provenance.
struct MetricReport {
    std::vector<std::string> methods;  // grid order
    std::map<std::string, MethodAggregates> aggregates;
    std::string manifest_fingerprint;
    std::string config_fingerprint;
    std::string created_at;
};

struct EvaluateOptions {
    std::string method = "ours";
    dataset::ExclusionMask mask;
};

/// Computes the metric grid for a set of finished runs. Every successful
/// run needs its tensor entries in the index and corpus Grams for its
/// target style; all missing entries are listed exhaustively in one
/// ValidationError before aborting. Cell values are means over the cell's
/// runs; FID is computed per cell from the stacked result-image embeddings
/// against the style's reference set (absent when either side is missing
/// or the cell has fewer than two runs).
BenchGrid evaluate(const std::vector<pipeline::RunRecord>& runs, const io::TensorIndex& index,
                   const std::map<dataset::StyleId, std::vector<metrics::GramMatrix>>& style_corpus_grams,
                   const EvaluateOptions& options = {});

enum class GridFormat { csv, json };

/// Deterministic serialization; parse_grid(render_grid(g)) == g for both
/// formats. Excluded cells render as "-".
std::string render_grid(const BenchGrid& grid, GridFormat format);
BenchGrid parse_grid(const std::string& text, GridFormat format);

/// Human-readable table. Per (input, target) group and metric, the best
/// method value is marked '*' and the second best '^' (ties marked
/// jointly); lower is better for sml/fid, higher for cms/clips.
std::string render_grid_pretty(const BenchGrid& grid);

MetricReport aggregate_report(const BenchGrid& grid, const std::string& manifest_fingerprint = "",
                              const std::string& config_fingerprint = "");

std::string render_report(const BenchGrid& grid, const MetricReport& report);  // JSON document
MetricReport parse_report_aggregates(const std::string& text);

/// Hex FNV-1a fingerprint of a file's bytes, for provenance fields.
std::string file_fingerprint(const std::filesystem::path& path);

}  // namespace stylevar::report
