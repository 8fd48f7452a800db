#include "stylevar/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ctime>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "stylevar/errors.hpp"
#include "stylevar/rng.hpp"

namespace stylevar::pipeline {

using nlohmann::json;

namespace {

std::string now_iso8601() {
    const std::time_t now = std::time(nullptr);
    std::tm utc{};
    gmtime_r(&now, &utc);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
    return buf;
}

/// Transport failure annotated with the pipeline stage it happened in, so a
/// failed run can say *where* the backend let it down.
struct StageFailure : TransportError {
    std::string stage;
    StageFailure(std::string stage_name, const std::string& message)
        : TransportError(message), stage(std::move(stage_name)) {}
};

template <typename F>
auto at_stage(const char* stage, F&& fn) {
    try {
        return fn();
    } catch (const StageFailure&) {
        throw;
    } catch (const Error& e) {
        throw StageFailure(stage, e.what());
    }
}

void validate_config(const PipelineConfig& cfg) {
    if (!(cfg.verify_threshold >= 0.0 && cfg.verify_threshold <= 1.0)) {
        throw ValidationError("verify_threshold must lie in [0, 1]");
    }
    if (cfg.max_caption_retries < 0) {
        throw ValidationError("max_caption_retries must be non-negative");
    }
    if (cfg.sampler.total_steps < 1) {
        throw ValidationError("sampler total_steps must be at least 1");
    }
    if (cfg.sampler.gate_step < 0 || cfg.sampler.gate_step > cfg.sampler.total_steps) {
        throw ValidationError("sampler gate_step must lie in [0, total_steps]");
    }
}

}  // namespace

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open config: " + path.string());
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("config parse error in " + path.string() + ": " + e.what());
    }
    PipelineConfig cfg;
    try {
        cfg.verify_threshold = doc.value("verify_threshold", cfg.verify_threshold);
        cfg.max_caption_retries = doc.value("max_caption_retries", cfg.max_caption_retries);
        if (doc.contains("target_style")) {
            cfg.target_style = dataset::parse_style(doc["target_style"].get<std::string>());
        }
        if (doc.contains("sampler")) {
            const json& s = doc["sampler"];
            cfg.sampler.total_steps = s.value("total_steps", cfg.sampler.total_steps);
            cfg.sampler.gate_step = s.value("gate_step", cfg.sampler.gate_step);
            cfg.sampler.alpha = s.value("alpha", cfg.sampler.alpha);
            cfg.sampler.beta = s.value("beta", cfg.sampler.beta);
        }
        cfg.seed = doc.value("seed", cfg.seed);
    } catch (const json::exception& e) {
        throw ValidationError("config field error in " + path.string() + ": " + e.what());
    }
    validate_config(cfg);
    return cfg;
}

void save_config(const PipelineConfig& cfg, const std::filesystem::path& path) {
    validate_config(cfg);
    const json doc{
        {"verify_threshold", cfg.verify_threshold},
        {"max_caption_retries", cfg.max_caption_retries},
        {"target_style", std::string(dataset::style_label(cfg.target_style))},
        {"sampler",
         {{"total_steps", cfg.sampler.total_steps},
          {"gate_step", cfg.sampler.gate_step},
          {"alpha", cfg.sampler.alpha},
          {"beta", cfg.sampler.beta}}},
        {"seed", cfg.seed},
    };
    std::ofstream out(path);
    if (!out) {
        throw ValidationError("cannot write config: " + path.string());
    }
    out << doc.dump(2) << '\n';
}

ContentDescription extract_content(const backends::ServiceClient& client,
                                   const std::string& image_ref, const PipelineConfig& cfg,
                                   std::vector<std::string>* warnings) {
    validate_config(cfg);
    const auto warn = [warnings](std::string message) {
        if (warnings != nullptr) {
            warnings->push_back(std::move(message));
        }
    };

    ContentDescription best;
    best.caption = at_stage("caption", [&] { return client.caption(image_ref); }).caption;
    best.attempts = 1;
    best.objects = at_stage("vqa", [&] { return client.locate_objects(image_ref); });

    if (best.objects.empty()) {
        best.verified = true;  // nothing to check against, vacuously fine
        warn("no objects detected in " + image_ref + "; verification skipped");
        return best;
    }

    std::vector<std::string> labels;
    for (const backends::ObjectLocation& obj : best.objects) {
        if (std::find(labels.begin(), labels.end(), obj.name) == labels.end()) {
            labels.push_back(obj.name);
        }
    }
    std::string condition = "focus on the objects: " + labels.front();
    for (std::size_t i = 1; i < labels.size(); ++i) {
        condition += ", " + labels[i];
    }

    const auto min_score = [](const backends::ZeroShotScores& s) {
        return *std::min_element(s.scores.begin(), s.scores.end());
    };

    best.verification =
        at_stage("verify", [&] { return client.zero_shot_verify(image_ref, labels); });
    double best_min = min_score(best.verification);
    int attempts = 1;

    // Re-caption with the object condition and re-verify until the weakest
    // object clears the threshold or the retry budget runs out; keep the
    // attempt whose weakest object scored best.
    while (best_min < cfg.verify_threshold && attempts <= cfg.max_caption_retries) {
        ++attempts;
        const backends::CaptionResult retry =
            at_stage("caption", [&] { return client.caption(image_ref, condition); });
        const backends::ZeroShotScores scores =
            at_stage("verify", [&] { return client.zero_shot_verify(image_ref, labels); });
        const double retry_min = min_score(scores);
        if (retry_min > best_min) {
            best.caption = retry.caption;
            best.conditioned = true;
            best.verification = scores;
            best_min = retry_min;
        }
    }
    best.attempts = attempts;
    best.verified = best_min >= cfg.verify_threshold;
    if (!best.verified) {
        warn("verification stayed below threshold after " + std::to_string(attempts) +
             " caption attempt(s) for " + image_ref);
    }
    return best;
}

FusedPrompt tune_text(const backends::ServiceClient& client, const ContentDescription& content,
                      dataset::StyleId style, const backends::PromptTemplates& templates,
                      std::vector<std::string>* warnings) {
    FusedPrompt prompt;
    prompt.source = content;
    prompt.style_description = at_stage("elaborate", [&] {
        return client.elaborate_style(std::string(dataset::style_keyword(style)),
                                      templates.elaborate);
    });
    prompt.text = at_stage("fuse", [&] {
        return client.fuse_prompt(content.caption, content.objects, prompt.style_description,
                                  templates.fuse, warnings);
    });
    return prompt;
}

std::uint64_t derive_run_seed(std::uint64_t batch_seed, const std::string& record_id,
                              dataset::StyleId target) {
    std::uint64_t state = rng::fnv1a64_u64(batch_seed);
    state = rng::fnv1a64(record_id, state);
    state = rng::fnv1a64(":", state);
    return rng::fnv1a64(dataset::style_label(target), state);
}

RunRecord run_variation(const backends::ServiceClient& client, const dataset::ImageRecord& record,
                        dataset::StyleId target, const PipelineConfig& cfg) {
    validate_config(cfg);
    if (target == record.style) {
        throw ValidationError("target style equals the input style for record " + record.id);
    }
    RunRecord run;
    run.record_id = record.id;
    run.input_style = record.style;
    run.target_style = target;
    run.started_at = now_iso8601();
    run.status = "ok";
    try {
        run.content = extract_content(client, record.path, cfg, &run.warnings);
        run.prompt =
            tune_text(client, *run.content, target, backends::default_templates(), &run.warnings);

        backends::GenerationRequest req;
        req.prompt = run.prompt->text;
        req.seed = derive_run_seed(cfg.seed, record.id, target);
        req.total_steps = cfg.sampler.total_steps;
        req.gate_step = cfg.sampler.gate_step;
        run.request = req;
        run.image_ref = at_stage("generate", [&] { return client.generate(req); });
    } catch (const StageFailure& e) {
        run.status = "failed";
        run.error = StageError{e.stage, e.what()};
    }
    run.finished_at = now_iso8601();
    return run;
}

std::vector<RunRecord> run_batch(const backends::ServiceClient& client,
                                 const dataset::DatasetManifest& manifest,
                                 const std::vector<dataset::StyleId>& targets,
                                 const dataset::ExclusionMask& mask, const PipelineConfig& cfg,
                                 int parallelism) {
    if (parallelism < 1) {
        throw ValidationError("parallelism must be at least 1");
    }
    validate_config(cfg);
    const auto pairs = dataset::select_pairs(manifest, targets, mask);
    std::vector<RunRecord> results(pairs.size());
    if (pairs.empty()) {
        return results;
    }

    std::atomic<std::size_t> next{0};
    std::mutex failure_mutex;
    std::exception_ptr failure;
    const auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= pairs.size()) {
                return;
            }
            try {
                results[i] = run_variation(client, pairs[i].first, pairs[i].second, cfg);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                return;
            }
        }
    };

    const std::size_t thread_count =
        std::min<std::size_t>(static_cast<std::size_t>(parallelism), pairs.size());
    std::vector<std::thread> threads;
    threads.reserve(thread_count);
    for (std::size_t t = 0; t < thread_count; ++t) {
        threads.emplace_back(worker);
    }
    for (std::thread& t : threads) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }

    std::sort(results.begin(), results.end(), [](const RunRecord& a, const RunRecord& b) {
        if (a.record_id != b.record_id) {
            return a.record_id < b.record_id;
        }
        return dataset::style_label(a.target_style) < dataset::style_label(b.target_style);
    });
    return results;
}

namespace {

json content_to_json(const ContentDescription& content) {
    json objects = json::array();
    for (const backends::ObjectLocation& obj : content.objects) {
        objects.push_back({{"name", obj.name}, {"position", obj.position}});
    }
    return json{{"attempts", content.attempts},
                {"caption", content.caption},
                {"conditioned", content.conditioned},
                {"objects", std::move(objects)},
                {"verification",
                 {{"labels", content.verification.labels},
                  {"scores", content.verification.scores}}},
                {"verified", content.verified}};
}

ContentDescription content_from_json(const json& j) {
    ContentDescription content;
    content.attempts = j.at("attempts").get<int>();
    content.caption = j.at("caption").get<std::string>();
    content.conditioned = j.at("conditioned").get<bool>();
    for (const json& obj : j.at("objects")) {
        content.objects.push_back(
            {obj.at("name").get<std::string>(), obj.at("position").get<std::string>()});
    }
    content.verification.labels = j.at("verification").at("labels").get<std::vector<std::string>>();
    content.verification.scores = j.at("verification").at("scores").get<std::vector<double>>();
    content.verified = j.at("verified").get<bool>();
    return content;
}

}  // namespace

std::string serialize_run_record(const RunRecord& record, bool include_timing) {
    json doc{{"record_id", record.record_id},
             {"input_style", std::string(dataset::style_label(record.input_style))},
             {"target_style", std::string(dataset::style_label(record.target_style))},
             {"status", record.status},
             {"warnings", record.warnings}};
    if (record.content) {
        doc["content"] = content_to_json(*record.content);
    }
    if (record.prompt) {
        doc["prompt"] = {{"style_description", record.prompt->style_description},
                         {"text", record.prompt->text}};
    }
    if (record.request) {
        json req{{"gate_step", record.request->gate_step},
                 {"prompt", record.request->prompt},
                 {"seed", record.request->seed},
                 {"total_steps", record.request->total_steps}};
        if (record.request->style_condition_ref) {
            req["style_condition_ref"] = *record.request->style_condition_ref;
        }
        doc["request"] = std::move(req);
    }
    if (record.image_ref) {
        doc["image_ref"] = *record.image_ref;
    }
    if (record.error) {
        doc["error"] = {{"message", record.error->message}, {"stage", record.error->stage}};
    }
    if (include_timing) {
        doc["started_at"] = record.started_at;
        doc["finished_at"] = record.finished_at;
    }
    return doc.dump();
}

RunRecord parse_run_record(const std::string& line) {
    json doc;
    try {
        doc = json::parse(line);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("run record parse error: ") + e.what());
    }
    RunRecord record;
    try {
        record.record_id = doc.at("record_id").get<std::string>();
        record.input_style = dataset::parse_style(doc.at("input_style").get<std::string>());
        record.target_style = dataset::parse_style(doc.at("target_style").get<std::string>());
        record.status = doc.at("status").get<std::string>();
        record.warnings = doc.at("warnings").get<std::vector<std::string>>();
        if (doc.contains("content")) {
            record.content = content_from_json(doc["content"]);
        }
        if (doc.contains("prompt")) {
            FusedPrompt prompt;
            prompt.style_description = doc["prompt"].at("style_description").get<std::string>();
            prompt.text = doc["prompt"].at("text").get<std::string>();
            if (record.content) {
                prompt.source = *record.content;
            }
            record.prompt = std::move(prompt);
        }
        if (doc.contains("request")) {
            const json& req = doc["request"];
            backends::GenerationRequest request;
            request.prompt = req.at("prompt").get<std::string>();
            request.seed = req.at("seed").get<std::uint64_t>();
            request.total_steps = req.at("total_steps").get<int>();
            request.gate_step = req.at("gate_step").get<int>();
            if (req.contains("style_condition_ref")) {
                request.style_condition_ref = req["style_condition_ref"].get<std::string>();
            }
            record.request = std::move(request);
        }
        if (doc.contains("image_ref")) {
            record.image_ref = doc["image_ref"].get<std::string>();
        }
        if (doc.contains("error")) {
            record.error = StageError{doc["error"].at("stage").get<std::string>(),
                                      doc["error"].at("message").get<std::string>()};
        }
        if (doc.contains("started_at")) {
            record.started_at = doc["started_at"].get<std::string>();
        }
        if (doc.contains("finished_at")) {
            record.finished_at = doc["finished_at"].get<std::string>();
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("run record field error: ") + e.what());
    }
    if (record.status != "ok" && record.status != "failed") {
        throw ValidationError("run record status must be \"ok\" or \"failed\", got \"" +
                              record.status + "\"");
    }
    return record;
}

void write_run_log(const std::vector<RunRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw ValidationError("cannot write run log: " + path.string());
    }
    for (const RunRecord& record : records) {
        out << serialize_run_record(record) << '\n';
    }
    if (!out) {
        throw Error("failed writing run log: " + path.string());
    }
}

std::vector<RunRecord> read_run_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open run log: " + path.string());
    }
    std::vector<RunRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        try {
            records.push_back(parse_run_record(line));
        } catch (const ValidationError& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

}  // namespace stylevar::pipeline
