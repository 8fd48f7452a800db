#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

namespace stylevar::metrics {

/// Dense C x H x W activation map, the raw material for Gram matrices.
/// Stored channel-major: values(c, y * width + x).
struct FeatureMap {
    int channels = 0;
    int height = 0;
    int width = 0;
    Eigen::MatrixXd values;  // channels rows, height*width cols

    /// Builds from a row-major C*H*W buffer; validates finiteness and dims.
    static FeatureMap from_values(int channels, int height, int width,
                                  std::span<const double> data);

    double at(int c, int y, int x) const { return values(c, static_cast<Eigen::Index>(y) * width + x); }
    Eigen::Index spatial_size() const { return static_cast<Eigen::Index>(height) * width; }
};

/// Channel x channel second-moment matrix. Construction enforces symmetry
/// (within 1e-9 per entry) and positive semidefiniteness (eigenvalues
/// >= -1e-9); both hold exactly for the output of gram().
class GramMatrix {
public:
    explicit GramMatrix(Eigen::MatrixXd values);

    const Eigen::MatrixXd& values() const { return values_; }
    int dim() const { return static_cast<int>(values_.rows()); }

    bool operator==(const GramMatrix& other) const { return values_ == other.values_; }

private:
    Eigen::MatrixXd values_;
};

struct EmbeddingVec {
    Eigen::VectorXd values;
};

/// m x n embedding cloud, one row per sample.
struct EmbeddingSet {
    Eigen::MatrixXd values;
};

struct GaussianStats {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
};

/// G = F F^T / (C*H*W) with F the C x (H*W) flattening of the map.
/// The division normalizes the second moment so results are comparable
/// across resolutions.
GramMatrix gram(const FeatureMap& fm);

/// Mean squared Frobenius distance between a result Gram and a corpus of
/// target Grams: (1/N) * sum_i ||G_res - G_target_i||_F^2.
double sml(const GramMatrix& result, const std::vector<GramMatrix>& targets);

/// Cosine similarity in [-1, 1]. Throws on zero-norm input or dim mismatch.
double cms(const EmbeddingVec& a, const EmbeddingVec& b);

/// Column mean and unbiased (m-1 divisor) sample covariance. Requires m >= 2.
GaussianStats gaussian_stats(const EmbeddingSet& set);

/// Principal square root of a symmetric PSD matrix via eigendecomposition,
/// with eigenvalues clamped at zero. Input must be symmetric within 1e-7
/// per entry with eigenvalues >= -1e-7; anything beyond tolerance throws.
Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& s);

/// Frechet distance between two Gaussians:
///   ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2})
/// computed through the symmetric form sqrt(sqrt(S_a) S_b sqrt(S_a)).
/// Tiny negative totals from rounding are clamped to zero.
double fid(const GaussianStats& a, const GaussianStats& b);

/// 100 * max(cos(image, text), 0), in [0, 100].
double clips(const EmbeddingVec& image_emb, const EmbeddingVec& text_emb);

}  // namespace stylevar::metrics
