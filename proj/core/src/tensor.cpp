#include "stylevar/tensor.hpp"

#include <Eigen/Eigenvalues>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "stylevar/errors.hpp"

namespace stylevar::io {

using nlohmann::json;

std::size_t Tensor::element_count() const {
    std::size_t n = 1;
    for (std::uint32_t d : dims) {
        n *= d;
    }
    return dims.empty() ? 0 : n;
}

namespace {

std::uint32_t read_u32_le(std::istream& in, const std::filesystem::path& path) {
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
        throw ValidationError("truncated tensor file: " + path.string());
    }
    return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) |
           (static_cast<std::uint32_t>(bytes[3]) << 24);
}

void write_u32_le(std::ostream& out, std::uint32_t value) {
    const unsigned char bytes[4] = {
        static_cast<unsigned char>(value & 0xff),
        static_cast<unsigned char>((value >> 8) & 0xff),
        static_cast<unsigned char>((value >> 16) & 0xff),
        static_cast<unsigned char>((value >> 24) & 0xff),
    };
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

float f32_from_le(const unsigned char* bytes) {
    const std::uint32_t bits = static_cast<std::uint32_t>(bytes[0]) |
                               (static_cast<std::uint32_t>(bytes[1]) << 8) |
                               (static_cast<std::uint32_t>(bytes[2]) << 16) |
                               (static_cast<std::uint32_t>(bytes[3]) << 24);
    float value;
    std::memcpy(&value, &bits, sizeof value);
    return value;
}

void f32_to_le(float value, unsigned char* bytes) {
    std::uint32_t bits;
    std::memcpy(&bits, &value, sizeof bits);
    bytes[0] = static_cast<unsigned char>(bits & 0xff);
    bytes[1] = static_cast<unsigned char>((bits >> 8) & 0xff);
    bytes[2] = static_cast<unsigned char>((bits >> 16) & 0xff);
    bytes[3] = static_cast<unsigned char>((bits >> 24) & 0xff);
}

}  // namespace

Tensor read_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open tensor file: " + path.string());
    }
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kTensorMagic, 8) != 0) {
        throw ValidationError("bad tensor magic in " + path.string());
    }
    const std::uint32_t rank = read_u32_le(in, path);
    if (rank == 0 || rank > 8) {
        throw ValidationError("tensor rank " + std::to_string(rank) + " out of range in " +
                              path.string());
    }
    Tensor tensor;
    tensor.dims.resize(rank);
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        tensor.dims[i] = read_u32_le(in, path);
        if (tensor.dims[i] == 0) {
            throw ValidationError("tensor dimension of zero in " + path.string());
        }
        count *= tensor.dims[i];
        if (count > (1ull << 32)) {
            throw ValidationError("tensor too large in " + path.string());
        }
    }
    tensor.data.resize(count);
    std::vector<unsigned char> raw(count * 4);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
        throw ValidationError("truncated tensor payload in " + path.string());
    }
    for (std::uint64_t i = 0; i < count; ++i) {
        tensor.data[i] = f32_from_le(raw.data() + i * 4);
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw ValidationError("trailing bytes after tensor payload in " + path.string());
    }
    return tensor;
}

void write_tensor(const std::filesystem::path& path, const Tensor& tensor) {
    if (tensor.dims.empty()) {
        throw ValidationError("cannot write rank-0 tensor");
    }
    if (tensor.data.size() != tensor.element_count()) {
        throw ValidationError("tensor data size does not match its dims");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ValidationError("cannot write tensor file: " + path.string());
    }
    out.write(kTensorMagic, 8);
    write_u32_le(out, static_cast<std::uint32_t>(tensor.dims.size()));
    for (std::uint32_t d : tensor.dims) {
        write_u32_le(out, d);
    }
    std::vector<unsigned char> raw(tensor.data.size() * 4);
    for (std::size_t i = 0; i < tensor.data.size(); ++i) {
        f32_to_le(tensor.data[i], raw.data() + i * 4);
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) {
        throw Error("failed writing tensor file: " + path.string());
    }
}

metrics::FeatureMap to_feature_map(const Tensor& t) {
    if (t.dims.size() != 3) {
        throw ValidationError("feature map tensor must have rank 3, got rank " +
                              std::to_string(t.dims.size()));
    }
    std::vector<double> data(t.data.begin(), t.data.end());
    return metrics::FeatureMap::from_values(static_cast<int>(t.dims[0]),
                                            static_cast<int>(t.dims[1]),
                                            static_cast<int>(t.dims[2]), data);
}

Eigen::MatrixXd to_matrix(const Tensor& t) {
    if (t.dims.size() != 2) {
        throw ValidationError("matrix tensor must have rank 2, got rank " +
                              std::to_string(t.dims.size()));
    }
    Eigen::MatrixXd m(t.dims[0], t.dims[1]);
    for (std::uint32_t r = 0; r < t.dims[0]; ++r) {
        for (std::uint32_t c = 0; c < t.dims[1]; ++c) {
            m(r, c) = t.data[static_cast<std::size_t>(r) * t.dims[1] + c];
        }
    }
    return m;
}

Eigen::VectorXd to_vector(const Tensor& t) {
    if (t.dims.size() != 1) {
        throw ValidationError("vector tensor must have rank 1, got rank " +
                              std::to_string(t.dims.size()));
    }
    Eigen::VectorXd v(t.dims[0]);
    for (std::uint32_t i = 0; i < t.dims[0]; ++i) {
        v(i) = t.data[i];
    }
    return v;
}

Tensor from_feature_map(const metrics::FeatureMap& fm) {
    Tensor t;
    t.dims = {static_cast<std::uint32_t>(fm.channels), static_cast<std::uint32_t>(fm.height),
              static_cast<std::uint32_t>(fm.width)};
    t.data.reserve(fm.values.size());
    for (int c = 0; c < fm.channels; ++c) {
        for (Eigen::Index p = 0; p < fm.spatial_size(); ++p) {
            t.data.push_back(static_cast<float>(fm.values(c, p)));
        }
    }
    return t;
}

Tensor from_matrix(const Eigen::MatrixXd& m) {
    Tensor t;
    t.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
    t.data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            t.data.push_back(static_cast<float>(m(r, c)));
        }
    }
    return t;
}

Tensor from_vector(const Eigen::VectorXd& v) {
    Tensor t;
    t.dims = {static_cast<std::uint32_t>(v.size())};
    t.data.reserve(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        t.data.push_back(static_cast<float>(v(i)));
    }
    return t;
}

metrics::GramMatrix load_gram(const std::filesystem::path& path) {
    const Tensor t = read_tensor(path);
    if (t.dims.size() == 3) {
        return metrics::gram(to_feature_map(t));
    }
    if (t.dims.size() != 2) {
        throw ValidationError("Gram tensor must have rank 2 or 3: " + path.string());
    }
    Eigen::MatrixXd m = to_matrix(t);
    if (m.rows() != m.cols()) {
        throw ValidationError("Gram tensor is not square: " + path.string());
    }
    m = ((m + m.transpose()) / 2.0).eval();
    // f32 storage wiggles eigenvalues of a legit PSD matrix; project tiny
    // negatives back to zero, reject anything materially indefinite.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
    const double scale = std::max(1.0, solver.eigenvalues().cwiseAbs().maxCoeff());
    if (solver.eigenvalues().minCoeff() < -1e-6 * scale) {
        throw ValidationError("Gram tensor is not positive semidefinite: " + path.string());
    }
    const Eigen::VectorXd clamped = solver.eigenvalues().cwiseMax(0.0);
    Eigen::MatrixXd psd =
        solver.eigenvectors() * clamped.asDiagonal() * solver.eigenvectors().transpose();
    psd = ((psd + psd.transpose()) / 2.0).eval();
    return metrics::GramMatrix(std::move(psd));
}

std::string TensorIndex::run_key(const std::string& record_id, dataset::StyleId target) {
    return record_id + ":" + std::string(dataset::style_label(target));
}

namespace {

std::optional<std::filesystem::path> optional_path(const json& j, const char* field,
                                                   const std::filesystem::path& base) {
    if (!j.contains(field)) {
        return std::nullopt;
    }
    if (!j[field].is_string()) {
        throw ValidationError(std::string("tensor index field \"") + field +
                              "\" must be a string path");
    }
    return base / j[field].get<std::string>();
}

json relative_or_self(const std::filesystem::path& p, const std::filesystem::path& base) {
    std::error_code ec;
    const auto rel = std::filesystem::relative(p, base, ec);
    return ec ? p.string() : rel.string();
}

}  // namespace

TensorIndex TensorIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open tensor index: " + path.string());
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("tensor index parse error in " + path.string() + ": " + e.what());
    }
    const std::filesystem::path base = path.parent_path();

    TensorIndex index;
    if (doc.contains("runs")) {
        for (const auto& [key, entry] : doc["runs"].items()) {
            RunTensorEntry run;
            run.result_features = optional_path(entry, "result_features", base);
            run.source_text_embedding = optional_path(entry, "source_text_embedding", base);
            run.result_text_embedding = optional_path(entry, "result_text_embedding", base);
            run.result_image_embedding = optional_path(entry, "result_image_embedding", base);
            index.runs.emplace(key, std::move(run));
        }
    }
    if (doc.contains("styles")) {
        for (const auto& [label, entry] : doc["styles"].items()) {
            StyleTensorEntry style;
            style.style_text_embedding = optional_path(entry, "style_text_embedding", base);
            style.reference_embeddings = optional_path(entry, "reference_embeddings", base);
            if (entry.contains("corpus")) {
                if (!entry["corpus"].is_array()) {
                    throw ValidationError("tensor index corpus must be an array of paths");
                }
                for (const json& item : entry["corpus"]) {
                    style.corpus.push_back(base / item.get<std::string>());
                }
            }
            index.styles.emplace(dataset::parse_style(label), std::move(style));
        }
    }
    return index;
}

void TensorIndex::save(const std::filesystem::path& path) const {
    const std::filesystem::path base = path.parent_path();
    json doc{{"runs", json::object()}, {"styles", json::object()}};
    for (const auto& [key, run] : runs) {
        json entry = json::object();
        if (run.result_features) entry["result_features"] = relative_or_self(*run.result_features, base);
        if (run.source_text_embedding)
            entry["source_text_embedding"] = relative_or_self(*run.source_text_embedding, base);
        if (run.result_text_embedding)
            entry["result_text_embedding"] = relative_or_self(*run.result_text_embedding, base);
        if (run.result_image_embedding)
            entry["result_image_embedding"] = relative_or_self(*run.result_image_embedding, base);
        doc["runs"][key] = std::move(entry);
    }
    for (const auto& [style, entry] : styles) {
        json j = json::object();
        if (entry.style_text_embedding)
            j["style_text_embedding"] = relative_or_self(*entry.style_text_embedding, base);
        if (entry.reference_embeddings)
            j["reference_embeddings"] = relative_or_self(*entry.reference_embeddings, base);
        if (!entry.corpus.empty()) {
            json corpus = json::array();
            for (const auto& p : entry.corpus) {
                corpus.push_back(relative_or_self(p, base));
            }
            j["corpus"] = std::move(corpus);
        }
        doc["styles"][std::string(dataset::style_label(style))] = std::move(j);
    }
    std::ofstream out(path);
    if (!out) {
        throw ValidationError("cannot write tensor index: " + path.string());
    }
    out << doc.dump(2) << '\n';
}

}  // namespace stylevar::io
