#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stylevar/metrics.hpp"
#include "stylevar/styles.hpp"

namespace stylevar::io {

/// On-disk tensor container, one tensor per file:
///   bytes 0..7   magic "ZSTDTNS1"
///   u32 LE       rank (>= 1)
///   u32 LE x rank  dims
///   f32 LE x prod(dims)  payload, row-major
struct Tensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> data;  // row-major

    std::size_t element_count() const;
};

inline constexpr char kTensorMagic[8] = {'Z', 'S', 'T', 'D', 'T', 'N', 'S', '1'};

Tensor read_tensor(const std::filesystem::path& path);
void write_tensor(const std::filesystem::path& path, const Tensor& tensor);

// Conversions between the container and the numeric carriers. Ranks are
// checked; data is widened to double on load and narrowed to f32 on store.
metrics::FeatureMap to_feature_map(const Tensor& t);  // rank 3: C, H, W
Eigen::MatrixXd to_matrix(const Tensor& t);           // rank 2
Eigen::VectorXd to_vector(const Tensor& t);           // rank 1

Tensor from_feature_map(const metrics::FeatureMap& fm);
Tensor from_matrix(const Eigen::MatrixXd& m);
Tensor from_vector(const Eigen::VectorXd& v);

/// Loads a rank-2 tensor as a Gram matrix, or a rank-3 tensor as a feature
/// map whose Gram is computed on the fly. f32 storage perturbs eigenvalues
/// slightly, so tiny negative ones (within 1e-6 * scale) are clamped to
/// zero before the PSD invariant is enforced.
metrics::GramMatrix load_gram(const std::filesystem::path& path);

/// Sidecar index mapping run keys and styles to tensor files. Paths in the
/// file are resolved relative to the index file's directory on load.
struct RunTensorEntry {
    std::optional<std::filesystem::path> result_features;         // rank 3, or rank-2 Gram
    std::optional<std::filesystem::path> source_text_embedding;   // rank 1
    std::optional<std::filesystem::path> result_text_embedding;   // rank 1
    std::optional<std::filesystem::path> result_image_embedding;  // rank 1
};

struct StyleTensorEntry {
    std::optional<std::filesystem::path> style_text_embedding;    // rank 1
    std::optional<std::filesystem::path> reference_embeddings;    // rank 2, m x n
    std::vector<std::filesystem::path> corpus;                    // rank 2 Grams or rank-3 maps
};

struct TensorIndex {
    /// Key format: "<record id>:<target style label>".
    std::map<std::string, RunTensorEntry> runs;
    std::map<dataset::StyleId, StyleTensorEntry> styles;

    static std::string run_key(const std::string& record_id, dataset::StyleId target);

    static TensorIndex load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

}  // namespace stylevar::io
