#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "stylevar/styles.hpp"

namespace stylevar::dataset {

/// One benchmark entry. The image is referenced by path and never opened by
/// this module; decoding is the business of the backends.
struct ImageRecord {
    std::string id;
    std::string path;
    StyleId style = StyleId::photo;
    std::optional<std::string> subcategory;
    std::string annotation;
};

struct DatasetManifest {
    std::vector<ImageRecord> records;
    /// When present, validated against the actual per-style record counts.
    std::optional<std::map<StyleId, std::size_t>> declared_counts;
};

/// Pair filter for benchmark grids. Identity pairs (s, s) are always
/// excluded on top of whatever this mask lists.
struct ExclusionMask {
    std::set<StyleId> excluded_input_styles;
    std::set<StyleId> excluded_output_styles;
    std::set<std::pair<StyleId, StyleId>> excluded_pairs;

    bool allows(StyleId input, StyleId output) const;
};

/// Checks record invariants: non-empty unique ids, non-empty annotations,
/// declared counts (when present) matching the records.
/// Throws ValidationError on the first violation.
void validate_manifest(const DatasetManifest& manifest);

/// Loads and validates a manifest file (JSON, see README for the schema).
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Writes a manifest; load_manifest(save_manifest(m)) round-trips exactly.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Per-style record counts; values sum to records.size().
std::map<StyleId, std::size_t> style_stats(const DatasetManifest& manifest);

/// Cross product records x targets minus identity pairs and mask exclusions,
/// in (manifest order x target order).
std::vector<std::pair<ImageRecord, StyleId>> select_pairs(const DatasetManifest& manifest,
                                                          const std::vector<StyleId>& targets,
                                                          const ExclusionMask& mask);

}  // namespace stylevar::dataset
