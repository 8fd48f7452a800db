#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

namespace stylevar::backends {

/// In-process fixture server for the five backend routes, bound to
/// 127.0.0.1. Replies come verbatim from a fixtures file (see README), so
/// tests can script retries, latency, failures and malformed payloads.
/// Route keys: caption, vqa, zeroshot, elaborate, fuse, generate.
class MockServer {
public:
    /// Starts serving immediately. port 0 picks a free ephemeral port.
    /// Throws ValidationError on fixture parse failure, Error on bind failure.
    explicit MockServer(const std::filesystem::path& fixtures, int port = 0);
    ~MockServer();

    MockServer(const MockServer&) = delete;
    MockServer& operator=(const MockServer&) = delete;

    void stop();

    int port() const;
    std::string base_url() const;  // "http://127.0.0.1:<port>"

    /// Number of requests seen so far on a route (for retry assertions).
    int call_count(std::string_view route) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace stylevar::backends
