#include "stylevar/backends.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <httplib.h>
#include <json.hpp>

#include "stylevar/errors.hpp"

namespace stylevar::backends {

using nlohmann::json;

PromptTemplates default_templates() {
    PromptTemplates t;
    t.elaborate.exemplars = {
        {"anime", "anime style, clean line art, cel shading, vivid flat colors"},
        {"Chinese ink painting",
         "Chinese ink painting, flowing brush strokes, ink wash gradients on rice paper"},
    };
    t.fuse.exemplars = {
        {"caption: a cat sits on a windowsill | objects: cat (center) | style: anime style, "
         "clean line art",
         "a cat sits on a windowsill, the cat at the center, in anime style with clean line art"},
        {"caption: boats drift in a harbor | objects: boat (left), boat (right) | style: "
         "impressionist oil painting, loose visible brushwork",
         "boats drift in a harbor, one boat at the left and one at the right, as an "
         "impressionist oil painting with loose visible brushwork"},
    };
    return t;
}

namespace {

std::string error_detail(const json& body) {
    if (body.is_object() && body.contains("code") && body.contains("message")) {
        return body["code"].dump() + ": " + body["message"].get<std::string>();
    }
    return body.dump();
}

/// POST one JSON document, retrying transport failures and 5xx replies.
/// 4xx and malformed 200 bodies are the server telling us something is
/// wrong with the request or fixture; retrying those would just loop.
json post_json(const BackendEndpoint& ep, const std::string& route, const json& request) {
    const std::string payload = request.dump();
    std::string last_failure;
    for (int attempt = 0; attempt <= ep.retries; ++attempt) {
        httplib::Client client(ep.base_url);
        client.set_connection_timeout(ep.timeout);
        client.set_read_timeout(ep.timeout);
        client.set_write_timeout(ep.timeout);
        auto res = client.Post(route, payload, "application/json");
        if (!res) {
            last_failure = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_failure = "status " + std::to_string(res->status);
            json body = json::parse(res->body, nullptr, false);
            if (!body.is_discarded()) {
                last_failure += " (" + error_detail(body) + ")";
            }
            continue;
        }
        if (res->status != 200) {
            json body = json::parse(res->body, nullptr, false);
            std::string detail = body.is_discarded() ? res->body : error_detail(body);
            throw TransportError("POST " + route + " returned status " +
                                 std::to_string(res->status) + ": " + detail);
        }
        json body = json::parse(res->body, nullptr, false);
        if (body.is_discarded()) {
            throw TransportError("POST " + route + " returned a non-JSON body");
        }
        return body;
    }
    throw TransportError("POST " + route + " failed after " + std::to_string(ep.retries + 1) +
                         " attempts; last failure: " + last_failure);
}

const json& require_field(const json& body, const char* field, const std::string& route) {
    if (!body.is_object() || !body.contains(field)) {
        throw TransportError("reply from " + route + " is missing \"" + field + "\"");
    }
    return body[field];
}

std::string require_string(const json& body, const char* field, const std::string& route) {
    const json& value = require_field(body, field, route);
    if (!value.is_string()) {
        throw TransportError("reply from " + route + " field \"" + field + "\" is not a string");
    }
    return value.get<std::string>();
}

json exemplars_to_json(const PromptTemplate& tmpl) {
    json arr = json::array();
    for (const Exemplar& e : tmpl.exemplars) {
        arr.push_back({{"input", e.input}, {"output", e.output}});
    }
    return arr;
}

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

ServiceClient::ServiceClient(BackendEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    if (endpoint_.base_url.empty()) {
        throw ValidationError("backend endpoint URL is empty");
    }
    if (endpoint_.retries < 0) {
        throw ValidationError("backend retry count is negative");
    }
}

CaptionResult ServiceClient::caption(const std::string& image_ref,
                                     const std::optional<std::string>& condition) const {
    json request{{"image_ref", image_ref}};
    if (condition) {
        request["condition"] = *condition;
    }
    const json reply = post_json(endpoint_, "/caption", request);
    CaptionResult result;
    result.caption = require_string(reply, "caption", "/caption");
    result.conditioned = condition.has_value();
    if (result.caption.empty()) {
        throw TransportError("reply from /caption has an empty caption");
    }
    return result;
}

std::vector<ObjectLocation> ServiceClient::locate_objects(const std::string& image_ref) const {
    const json reply = post_json(endpoint_, "/vqa", json{{"image_ref", image_ref}});
    const json& objects = require_field(reply, "objects", "/vqa");
    if (!objects.is_array()) {
        throw TransportError("reply from /vqa field \"objects\" is not an array");
    }
    std::vector<ObjectLocation> out;
    out.reserve(objects.size());
    for (const json& item : objects) {
        ObjectLocation loc;
        loc.name = require_string(item, "name", "/vqa");
        loc.position = require_string(item, "position", "/vqa");
        if (loc.name.empty()) {
            throw TransportError("reply from /vqa contains an object with an empty name");
        }
        out.push_back(std::move(loc));
    }
    return out;
}

ZeroShotScores ServiceClient::zero_shot_verify(const std::string& image_ref,
                                               const std::vector<std::string>& labels) const {
    if (labels.empty()) {
        throw ValidationError("zero-shot verification needs at least one label");
    }
    const json reply =
        post_json(endpoint_, "/zeroshot", json{{"image_ref", image_ref}, {"labels", labels}});
    const json& scores = require_field(reply, "scores", "/zeroshot");
    if (!scores.is_array() || scores.size() != labels.size()) {
        throw TransportError("reply from /zeroshot must carry one score per label");
    }
    ZeroShotScores out;
    out.labels = labels;
    out.scores.reserve(labels.size());
    for (const json& s : scores) {
        if (!s.is_number()) {
            throw TransportError("reply from /zeroshot contains a non-numeric score");
        }
        const double value = s.get<double>();
        if (!std::isfinite(value) || value < 0.0 || value > 1.0) {
            throw TransportError("reply from /zeroshot score " + s.dump() +
                                 " is outside [0, 1]");
        }
        out.scores.push_back(value);
    }
    return out;
}

std::string ServiceClient::elaborate_style(const std::string& style_keyword,
                                           const PromptTemplate& tmpl) const {
    const json reply = post_json(
        endpoint_, "/llm/elaborate",
        json{{"style", style_keyword}, {"exemplars", exemplars_to_json(tmpl)}});
    std::string text = require_string(reply, "text", "/llm/elaborate");
    if (text.empty()) {
        throw TransportError("reply from /llm/elaborate has empty text");
    }
    return text;
}

std::string ServiceClient::fuse_prompt(const std::string& caption,
                                       const std::vector<ObjectLocation>& objects,
                                       const std::string& style_text, const PromptTemplate& tmpl,
                                       std::vector<std::string>* warnings) const {
    json object_list = json::array();
    for (const ObjectLocation& o : objects) {
        object_list.push_back({{"name", o.name}, {"position", o.position}});
    }
    const json reply = post_json(endpoint_, "/llm/fuse",
                                 json{{"caption", caption},
                                      {"objects", std::move(object_list)},
                                      {"style_text", style_text},
                                      {"exemplars", exemplars_to_json(tmpl)}});
    std::string text = require_string(reply, "text", "/llm/fuse");
    if (text.empty()) {
        throw TransportError("reply from /llm/fuse has empty text");
    }
    if (warnings != nullptr) {
        const std::string haystack = lowercase(text);
        for (const ObjectLocation& o : objects) {
            if (haystack.find(lowercase(o.name)) == std::string::npos) {
                warnings->push_back("fused prompt dropped object \"" + o.name + "\"");
            }
        }
    }
    return text;
}

std::string ServiceClient::generate(const GenerationRequest& req) const {
    if (req.total_steps <= 0 || req.gate_step < 0 || req.gate_step > req.total_steps) {
        throw ValidationError("generation request has an invalid step schedule");
    }
    json request{{"prompt", req.prompt},
                 {"seed", req.seed},
                 {"total_steps", req.total_steps},
                 {"gate_step", req.gate_step}};
    if (req.style_condition_ref) {
        request["style_condition_ref"] = *req.style_condition_ref;
    }
    const json reply = post_json(endpoint_, "/generate", request);
    std::string image_ref = require_string(reply, "image_ref", "/generate");
    if (image_ref.empty()) {
        throw TransportError("reply from /generate has an empty image_ref");
    }
    return image_ref;
}

}  // namespace stylevar::backends
