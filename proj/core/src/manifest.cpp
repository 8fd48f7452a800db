#include "stylevar/manifest.hpp"

#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "stylevar/errors.hpp"

namespace stylevar::dataset {

using nlohmann::json;

bool ExclusionMask::allows(StyleId input, StyleId output) const {
    if (input == output) {
        return false;  // identity pairs are always excluded
    }
    if (excluded_input_styles.contains(input) || excluded_output_styles.contains(output)) {
        return false;
    }
    return !excluded_pairs.contains({input, output});
}

void validate_manifest(const DatasetManifest& manifest) {
    std::unordered_set<std::string> seen_ids;
    seen_ids.reserve(manifest.records.size());
    std::map<StyleId, std::size_t> counts;

    for (const ImageRecord& record : manifest.records) {
        if (record.id.empty()) {
            throw ValidationError("manifest record with empty id");
        }
        if (!seen_ids.insert(record.id).second) {
            throw ValidationError("duplicate record id: \"" + record.id + "\"");
        }
        if (record.annotation.empty()) {
            throw ValidationError("record \"" + record.id + "\" has an empty annotation");
        }
        ++counts[record.style];
    }

    if (manifest.declared_counts) {
        for (const auto& [style, declared] : *manifest.declared_counts) {
            const auto it = counts.find(style);
            const std::size_t actual = it == counts.end() ? 0 : it->second;
            if (actual != declared) {
                throw ValidationError("declared count mismatch for style \"" +
                                      std::string(style_label(style)) + "\": declared " +
                                      std::to_string(declared) + ", found " +
                                      std::to_string(actual));
            }
        }
        for (const auto& [style, actual] : counts) {
            if (!manifest.declared_counts->contains(style) && actual > 0) {
                throw ValidationError("style \"" + std::string(style_label(style)) +
                                      "\" has records but no declared count");
            }
        }
    }
}

namespace {

json manifest_to_json(const DatasetManifest& manifest) {
    json records = json::array();
    for (const ImageRecord& record : manifest.records) {
        json j{{"id", record.id},
               {"path", record.path},
               {"style", style_label(record.style)},
               {"annotation", record.annotation}};
        if (record.subcategory) {
            j["subcategory"] = *record.subcategory;
        }
        records.push_back(std::move(j));
    }
    json doc{{"records", std::move(records)}};
    if (manifest.declared_counts) {
        json counts = json::object();
        for (const auto& [style, count] : *manifest.declared_counts) {
            counts[std::string(style_label(style))] = count;
        }
        doc["declared_counts"] = std::move(counts);
    }
    return doc;
}

DatasetManifest manifest_from_json(const json& doc) {
    if (!doc.is_object() || !doc.contains("records") || !doc["records"].is_array()) {
        throw ValidationError("manifest must be an object with a \"records\" array");
    }
    DatasetManifest manifest;
    for (const json& j : doc["records"]) {
        if (!j.is_object()) {
            throw ValidationError("manifest record must be an object");
        }
        for (const char* field : {"id", "path", "style", "annotation"}) {
            if (!j.contains(field) || !j[field].is_string()) {
                throw ValidationError(std::string("manifest record missing string field \"") +
                                      field + "\"");
            }
        }
        ImageRecord record;
        record.id = j["id"].get<std::string>();
        record.path = j["path"].get<std::string>();
        record.style = parse_style(j["style"].get<std::string>());
        record.annotation = j["annotation"].get<std::string>();
        if (j.contains("subcategory")) {
            if (!j["subcategory"].is_string()) {
                throw ValidationError("record \"" + record.id + "\": subcategory must be a string");
            }
            record.subcategory = j["subcategory"].get<std::string>();
        }
        manifest.records.push_back(std::move(record));
    }
    if (doc.contains("declared_counts")) {
        if (!doc["declared_counts"].is_object()) {
            throw ValidationError("declared_counts must be an object");
        }
        std::map<StyleId, std::size_t> counts;
        for (const auto& [label, value] : doc["declared_counts"].items()) {
            if (!value.is_number_unsigned()) {
                throw ValidationError("declared count for \"" + label +
                                      "\" must be a non-negative integer");
            }
            counts[parse_style(label)] = value.get<std::size_t>();
        }
        manifest.declared_counts = std::move(counts);
    }
    return manifest;
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open manifest file: " + path.string());
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("manifest parse error in " + path.string() + ": " + e.what());
    }
    DatasetManifest manifest = manifest_from_json(doc);
    validate_manifest(manifest);
    return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
    validate_manifest(manifest);
    std::ofstream out(path);
    if (!out) {
        throw ValidationError("cannot write manifest file: " + path.string());
    }
    out << manifest_to_json(manifest).dump(2) << '\n';
}

std::map<StyleId, std::size_t> style_stats(const DatasetManifest& manifest) {
    std::map<StyleId, std::size_t> counts;
    for (const ImageRecord& record : manifest.records) {
        ++counts[record.style];
    }
    return counts;
}

std::vector<std::pair<ImageRecord, StyleId>> select_pairs(const DatasetManifest& manifest,
                                                          const std::vector<StyleId>& targets,
                                                          const ExclusionMask& mask) {
    std::vector<std::pair<ImageRecord, StyleId>> pairs;
    for (const ImageRecord& record : manifest.records) {
        for (StyleId target : targets) {
            if (mask.allows(record.style, target)) {
                pairs.emplace_back(record, target);
            }
        }
    }
    return pairs;
}

}  // namespace stylevar::dataset
