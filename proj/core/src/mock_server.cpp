#include "stylevar/mock_server.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "stylevar/errors.hpp"
#include "stylevar/rng.hpp"

namespace stylevar::backends {

using nlohmann::json;

namespace {

constexpr const char* kRoutes[] = {"caption", "vqa", "zeroshot", "elaborate", "fuse", "generate"};

void reply_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& code,
                 const std::string& message) {
    reply_json(res, status, json{{"code", code}, {"message", message}});
}

/// Fixture entries that are an object with a "raw" key short-circuit the
/// route logic and reply that payload verbatim — the lever tests use to
/// inject malformed or schema-breaking bodies.
bool try_raw(const json& entry, httplib::Response& res) {
    if (entry.is_object() && entry.contains("raw")) {
        reply_json(res, 200, entry["raw"]);
        return true;
    }
    return false;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

}  // namespace

struct MockServer::Impl {
    json fixtures;
    httplib::Server server;
    std::thread worker;
    int port = 0;
    bool stopped = false;

    mutable std::mutex mutex;
    std::map<std::string, int, std::less<>> counts;
    std::map<std::string, std::size_t> zeroshot_cursor;  // per image_ref

    const json* fixture_entry(const char* table, const std::string& key) const {
        if (!fixtures.contains(table)) {
            return nullptr;
        }
        const json& t = fixtures[table];
        if (t.contains(key)) {
            return &t[key];
        }
        if (t.contains("default")) {
            return &t["default"];
        }
        return nullptr;
    }

    void handle_caption(const json& req, httplib::Response& res) {
        const std::string image_ref = req.value("image_ref", "");
        const json* entry = fixture_entry("captions", image_ref);
        if (entry == nullptr) {
            reply_error(res, 404, "not_found", "no caption fixture for " + image_ref);
            return;
        }
        if (try_raw(*entry, res)) {
            return;
        }
        const bool conditioned = req.contains("condition");
        std::string caption = entry->value("caption", "");
        if (conditioned && entry->contains("conditional_caption")) {
            caption = (*entry)["conditional_caption"].get<std::string>();
        }
        reply_json(res, 200, json{{"caption", caption}});
    }

    void handle_vqa(const json& req, httplib::Response& res) {
        const std::string image_ref = req.value("image_ref", "");
        const json* entry = fixture_entry("objects", image_ref);
        if (entry == nullptr) {
            reply_error(res, 404, "not_found", "no object fixture for " + image_ref);
            return;
        }
        if (try_raw(*entry, res)) {
            return;
        }
        reply_json(res, 200, json{{"objects", *entry}});
    }

    void handle_zeroshot(const json& req, httplib::Response& res) {
        const std::string image_ref = req.value("image_ref", "");
        const json* entry = fixture_entry("zeroshot", image_ref);
        if (entry == nullptr) {
            reply_error(res, 404, "not_found", "no zero-shot fixture for " + image_ref);
            return;
        }
        if (try_raw(*entry, res)) {
            return;
        }
        // Scripted entries step a per-image cursor so successive calls can
        // return different score tables; the last step repeats forever.
        const json* step = entry;
        if (entry->is_object() && entry->contains("script")) {
            const json& script = (*entry)["script"];
            if (!script.is_array() || script.empty()) {
                reply_error(res, 500, "bad_fixture", "zeroshot script must be a non-empty array");
                return;
            }
            std::size_t cursor;
            {
                std::lock_guard<std::mutex> lock(mutex);
                cursor = zeroshot_cursor[image_ref]++;
            }
            step = &script[std::min(cursor, script.size() - 1)];
        }
        if (try_raw(*step, res)) {
            return;
        }
        if (!step->is_object() || !step->contains("scores")) {
            reply_error(res, 500, "bad_fixture", "zeroshot fixture lacks a scores table");
            return;
        }
        const json& table = (*step)["scores"];
        const double fallback = step->value("fallback", 0.0);
        json scores = json::array();
        for (const json& label : req.value("labels", json::array())) {
            const std::string name = label.get<std::string>();
            scores.push_back(table.contains(name) ? table[name].get<double>() : fallback);
        }
        reply_json(res, 200, json{{"scores", std::move(scores)}});
    }

    void handle_elaborate(const json& req, httplib::Response& res) {
        const std::string style = req.value("style", "");
        if (fixtures.contains("style_descriptions") &&
            fixtures["style_descriptions"].contains(style)) {
            const json& entry = fixtures["style_descriptions"][style];
            if (try_raw(entry, res)) {
                return;
            }
            reply_json(res, 200, json{{"text", entry.get<std::string>()}});
            return;
        }
        if (fixtures.contains("style_description_default")) {
            std::string text = fixtures["style_description_default"].get<std::string>();
            const std::size_t pos = text.find("{style}");
            if (pos != std::string::npos) {
                text.replace(pos, 7, style);
            }
            reply_json(res, 200, json{{"text", std::move(text)}});
            return;
        }
        reply_error(res, 404, "not_found", "no style description fixture for " + style);
    }

    void handle_fuse(const json& req, httplib::Response& res) {
        if (!fixtures.contains("fuse") && fixtures.empty()) {
            reply_error(res, 404, "not_found", "no fuse fixture");
            return;
        }
        json cfg = fixtures.value("fuse", json::object());
        if (try_raw(cfg, res)) {
            return;
        }
        if (cfg.contains("text")) {
            reply_json(res, 200, json{{"text", cfg["text"].get<std::string>()}});
            return;
        }
        std::vector<std::string> dropped;
        if (cfg.contains("drop_objects")) {
            dropped = cfg["drop_objects"].get<std::vector<std::string>>();
        }
        std::string text = req.value("caption", "");
        std::string placements;
        for (const json& obj : req.value("objects", json::array())) {
            const std::string name = obj.value("name", "");
            if (std::find(dropped.begin(), dropped.end(), name) != dropped.end()) {
                continue;
            }
            if (!placements.empty()) {
                placements += " and ";
            }
            placements += "the " + name + " at the " + obj.value("position", "");
        }
        if (!placements.empty()) {
            text += ", " + placements;
        }
        text += ", in " + req.value("style_text", "");
        reply_json(res, 200, json{{"text", std::move(text)}});
    }

    void handle_generate(const json& req, httplib::Response& res) {
        if (fixtures.empty()) {
            reply_error(res, 404, "not_found", "no generate fixture");
            return;
        }
        json cfg = fixtures.value("generate", json::object());
        if (try_raw(cfg, res)) {
            return;
        }
        const std::string prefix = cfg.value("prefix", "img");
        // Hash the canonical request so identical requests — and only
        // identical requests — map to the same mock artifact name.
        const std::uint64_t fp = rng::fnv1a64(req.dump());
        reply_json(res, 200, json{{"image_ref", prefix + "-" + hex64(fp)}});
    }

    using Handler = void (Impl::*)(const json&, httplib::Response&);

    void dispatch(const std::string& key, Handler handler, const httplib::Request& req,
                  httplib::Response& res) {
        int seen;
        {
            std::lock_guard<std::mutex> lock(mutex);
            seen = ++counts[key];
        }
        int fail_first = 0;
        int latency_ms = 0;
        if (fixtures.contains("routes") && fixtures["routes"].contains(key)) {
            const json& cfg = fixtures["routes"][key];
            fail_first = cfg.value("fail_first", 0);
            latency_ms = cfg.value("latency_ms", 0);
        }
        if (latency_ms > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(latency_ms));
        }
        if (seen <= fail_first) {
            reply_error(res, 503, "unavailable", "scripted failure " + std::to_string(seen) +
                                                     "/" + std::to_string(fail_first));
            return;
        }
        const json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded()) {
            reply_error(res, 400, "bad_request", "request body is not JSON");
            return;
        }
        (this->*handler)(body, res);
    }

    void register_routes() {
        const std::pair<const char*, Handler> table[] = {
            {"/caption", &Impl::handle_caption},   {"/vqa", &Impl::handle_vqa},
            {"/zeroshot", &Impl::handle_zeroshot}, {"/llm/elaborate", &Impl::handle_elaborate},
            {"/llm/fuse", &Impl::handle_fuse},     {"/generate", &Impl::handle_generate},
        };
        const char* keys[] = {"caption", "vqa", "zeroshot", "elaborate", "fuse", "generate"};
        for (std::size_t i = 0; i < std::size(table); ++i) {
            const std::string key = keys[i];
            const Handler handler = table[i].second;
            server.Post(table[i].first,
                        [this, key, handler](const httplib::Request& req, httplib::Response& res) {
                            dispatch(key, handler, req, res);
                        });
        }
    }
};

MockServer::MockServer(const std::filesystem::path& fixtures, int port)
    : impl_(std::make_unique<Impl>()) {
    std::ifstream in(fixtures);
    if (!in) {
        throw ValidationError("cannot open mock fixtures: " + fixtures.string());
    }
    try {
        impl_->fixtures = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("mock fixture parse error in " + fixtures.string() + ": " +
                              e.what());
    }
    if (!impl_->fixtures.is_object()) {
        throw ValidationError("mock fixtures must be a JSON object: " + fixtures.string());
    }
    for (const char* route : kRoutes) {
        impl_->counts[route] = 0;
    }
    impl_->register_routes();

    if (port == 0) {
        impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
        if (impl_->port <= 0) {
            throw Error("mock server could not bind an ephemeral port");
        }
    } else {
        if (!impl_->server.bind_to_port("127.0.0.1", port)) {
            throw Error("mock server could not bind port " + std::to_string(port));
        }
        impl_->port = port;
    }
    impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

MockServer::~MockServer() {
    stop();
}

void MockServer::stop() {
    if (impl_ && !impl_->stopped) {
        impl_->server.stop();
        if (impl_->worker.joinable()) {
            impl_->worker.join();
        }
        impl_->stopped = true;
    }
}

int MockServer::port() const {
    return impl_->port;
}

std::string MockServer::base_url() const {
    return "http://127.0.0.1:" + std::to_string(impl_->port);
}

int MockServer::call_count(std::string_view route) const {
    std::lock_guard<std::mutex> lock(impl_->mutex);
    const auto it = impl_->counts.find(route);
    if (it == impl_->counts.end()) {
        throw ValidationError("unknown mock route: " + std::string(route));
    }
    return it->second;
}

}  // namespace stylevar::backends
