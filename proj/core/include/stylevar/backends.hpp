#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace stylevar::backends {

struct BackendEndpoint {
    std::string base_url;
    std::chrono::milliseconds timeout{std::chrono::seconds(30)};
    int retries = 2;  // transport-level; total attempts = retries + 1
};

struct CaptionResult {
    std::string caption;
    bool conditioned = false;  // true iff a condition accompanied the request
};

struct ObjectLocation {
    std::string name;
    std::string position;  // free-form spatial phrase, e.g. "left", "center"
};

struct ZeroShotScores {
    std::vector<std::string> labels;
    std::vector<double> scores;  // per label, in [0, 1]
};

struct GenerationRequest {
    std::string prompt;
    std::uint64_t seed = 0;
    int total_steps = 50;
    int gate_step = 30;
    std::optional<std::string> style_condition_ref;
};

struct Exemplar {
    std::string input;
    std::string output;
};

/// Few-shot template: (input, expected output) pairs sent along with LLM
/// requests so the service can anchor its reply format.
struct PromptTemplate {
    std::vector<Exemplar> exemplars;
};

struct PromptTemplates {
    PromptTemplate elaborate;
    PromptTemplate fuse;
};

/// Built-in exemplars good enough for the mock and for seeding real LLMs.
PromptTemplates default_templates();

/// Blocking JSON-over-HTTP client for the five model services. Each call is
/// independent, validated against the wire schema before anything reaches
/// the caller, and retried at the transport level (connect failures,
/// timeouts, 5xx) up to endpoint.retries times. Instances are immutable and
/// safe to share across threads.
class ServiceClient {
public:
    explicit ServiceClient(BackendEndpoint endpoint);

    const BackendEndpoint& endpoint() const { return endpoint_; }

    CaptionResult caption(const std::string& image_ref,
                          const std::optional<std::string>& condition = std::nullopt) const;

    std::vector<ObjectLocation> locate_objects(const std::string& image_ref) const;

    ZeroShotScores zero_shot_verify(const std::string& image_ref,
                                    const std::vector<std::string>& labels) const;

    std::string elaborate_style(const std::string& style_keyword,
                                const PromptTemplate& tmpl) const;

    /// Fuses caption, object positions and style text into one sentence.
    /// Object names missing from the reply are reported through `warnings`
    /// (LLMs paraphrase, so coverage gaps warn instead of failing).
    std::string fuse_prompt(const std::string& caption, const std::vector<ObjectLocation>& objects,
                            const std::string& style_text, const PromptTemplate& tmpl,
                            std::vector<std::string>* warnings = nullptr) const;

    /// Returns the opaque image reference produced by the generator.
    std::string generate(const GenerationRequest& req) const;

private:
    BackendEndpoint endpoint_;
};

}  // namespace stylevar::backends
