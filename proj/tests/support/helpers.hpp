#pragma once

// Shared scaffolding for the test binaries: scratch directories and
// conversions between Eigen types and the oracle's nested vectors.

#include <unistd.h>

#include <Eigen/Dense>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "oracles.hpp"

namespace testsupport {

/// Self-deleting scratch directory under the system temp root.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        const int id = counter.fetch_add(1);
        path_ = std::filesystem::temp_directory_path() /
                ("stylevar-test-" + std::to_string(::getpid()) + "-" + std::to_string(id));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path file(const std::string& name) const { return path_ / name; }

    std::filesystem::path write(const std::string& name, const std::string& content) const {
        const auto p = path_ / name;
        std::filesystem::create_directories(p.parent_path());
        std::ofstream out(p, std::ios::binary);
        out << content;
        return p;
    }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline oracles::Mat to_oracle(const Eigen::MatrixXd& m) {
    oracles::Mat out(static_cast<std::size_t>(m.rows()),
                     oracles::Vec(static_cast<std::size_t>(m.cols())));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            out[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = m(r, c);
        }
    }
    return out;
}

inline oracles::Vec to_oracle(const Eigen::VectorXd& v) {
    return oracles::Vec(v.data(), v.data() + v.size());
}

inline Eigen::MatrixXd from_oracle(const oracles::Mat& m) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(m.size()),
                        static_cast<Eigen::Index>(m[0].size()));
    for (std::size_t r = 0; r < m.size(); ++r) {
        for (std::size_t c = 0; c < m[0].size(); ++c) {
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m[r][c];
        }
    }
    return out;
}

inline double max_abs_diff(const Eigen::MatrixXd& a, const oracles::Mat& b) {
    double worst = 0.0;
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        for (Eigen::Index c = 0; c < a.cols(); ++c) {
            worst = std::max(worst, std::abs(a(r, c) -
                                             b[static_cast<std::size_t>(r)]
                                              [static_cast<std::size_t>(c)]));
        }
    }
    return worst;
}

}  // namespace testsupport
