#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stylevar/backends.hpp"
#include "stylevar/conditioning.hpp"
#include "stylevar/manifest.hpp"

namespace stylevar::pipeline {

struct PipelineConfig {
    double verify_threshold = 0.6;  // tau: min per-object score to count as verified
    int max_caption_retries = 2;
    dataset::StyleId target_style = dataset::StyleId::anime;  // default target for single runs
    conditioning::SamplerConfig sampler;
    std::uint64_t seed = 0;
};

PipelineConfig load_config(const std::filesystem::path& path);
void save_config(const PipelineConfig& cfg, const std::filesystem::path& path);

/// Outcome of the image-to-text stage, including the verification loop.
struct ContentDescription {
    std::string caption;
    bool conditioned = false;  // kept caption came from a conditional re-caption
    std::vector<backends::ObjectLocation> objects;
    backends::ZeroShotScores verification;  // empty when no objects were found
    bool verified = false;
    int attempts = 0;
};

struct FusedPrompt {
    std::string text;
    std::string style_description;
    ContentDescription source;
};

struct StageError {
    std::string stage;  // "caption" | "vqa" | "verify" | "elaborate" | "fuse" | "generate"
    std::string message;
};

/// Full audit trace of one pipeline run. Wall-clock timestamps are kept for
/// interactive inspection but excluded from the canonical log serialization,
/// which must be byte-identical across reruns and parallelism levels.
struct RunRecord {
    std::string record_id;
    dataset::StyleId input_style = dataset::StyleId::photo;
    dataset::StyleId target_style = dataset::StyleId::anime;
    std::string status;  // "ok" | "failed"
    std::optional<ContentDescription> content;
    std::optional<FusedPrompt> prompt;
    std::optional<backends::GenerationRequest> request;
    std::optional<std::string> image_ref;
    std::vector<std::string> warnings;
    std::optional<StageError> error;
    std::string started_at;   // ISO-8601, informational only
    std::string finished_at;
};

/// Caption + object localization + zero-shot verification. If any object
/// score falls below cfg.verify_threshold, re-captions conditionally up to
/// cfg.max_caption_retries times and keeps the attempt with the highest
/// minimum score (ties keep the earliest attempt). Zero detected objects
/// verify vacuously with a warning.
ContentDescription extract_content(const backends::ServiceClient& client,
                                   const std::string& image_ref, const PipelineConfig& cfg,
                                   std::vector<std::string>* warnings = nullptr);

/// Elaborates the target style into a detailed description, then fuses it
/// with the extracted content into a single prompt sentence.
FusedPrompt tune_text(const backends::ServiceClient& client, const ContentDescription& content,
                      dataset::StyleId style, const backends::PromptTemplates& templates,
                      std::vector<std::string>* warnings = nullptr);

/// Deterministic per-run generation seed: FNV-1a over the batch seed, the
/// record id and the target style label.
std::uint64_t derive_run_seed(std::uint64_t batch_seed, const std::string& record_id,
                              dataset::StyleId target);

/// Runs extract -> tune -> generate for one record. The target must differ
/// from the record's own style. Stage failures yield status "failed" with
/// all earlier stage traces preserved.
RunRecord run_variation(const backends::ServiceClient& client, const dataset::ImageRecord& record,
                        dataset::StyleId target, const PipelineConfig& cfg);

/// One RunRecord per select_pairs output, executed on up to `parallelism`
/// worker threads. Individual failures are recorded and the batch continues.
/// Output is sorted by (record id, target style) and is a pure function of
/// the inputs and backend fixtures, independent of parallelism.
std::vector<RunRecord> run_batch(const backends::ServiceClient& client,
                                 const dataset::DatasetManifest& manifest,
                                 const std::vector<dataset::StyleId>& targets,
                                 const dataset::ExclusionMask& mask, const PipelineConfig& cfg,
                                 int parallelism);

/// Canonical single-line JSON form (timestamps omitted unless requested).
std::string serialize_run_record(const RunRecord& record, bool include_timing = false);
RunRecord parse_run_record(const std::string& line);

/// JSONL log, one canonical record per line, append order = input order.
void write_run_log(const std::vector<RunRecord>& records, const std::filesystem::path& path);
std::vector<RunRecord> read_run_log(const std::filesystem::path& path);

}  // namespace stylevar::pipeline
