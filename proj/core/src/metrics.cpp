#include "stylevar/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

#include "stylevar/errors.hpp"

namespace stylevar::metrics {

namespace {

void require_finite(const Eigen::MatrixXd& m, const char* what) {
    if (!m.allFinite()) {
        throw ValidationError(std::string(what) + " contains non-finite values");
    }
}

double max_asymmetry(const Eigen::MatrixXd& m) {
    return (m - m.transpose()).cwiseAbs().maxCoeff();
}

}  // namespace

FeatureMap FeatureMap::from_values(int channels, int height, int width,
                                   std::span<const double> data) {
    if (channels < 1 || height < 1 || width < 1) {
        throw ValidationError("feature map dimensions must all be >= 1");
    }
    const std::size_t expected =
        static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) * width;
    if (data.size() != expected) {
        throw ValidationError("feature map data size " + std::to_string(data.size()) +
                              " does not match C*H*W = " + std::to_string(expected));
    }
    FeatureMap fm;
    fm.channels = channels;
    fm.height = height;
    fm.width = width;
    fm.values.resize(channels, static_cast<Eigen::Index>(height) * width);
    for (int c = 0; c < channels; ++c) {
        for (Eigen::Index p = 0; p < fm.spatial_size(); ++p) {
            fm.values(c, p) = data[static_cast<std::size_t>(c) * fm.spatial_size() + p];
        }
    }
    require_finite(fm.values, "feature map");
    return fm;
}

GramMatrix::GramMatrix(Eigen::MatrixXd values) : values_(std::move(values)) {
    if (values_.rows() < 1 || values_.rows() != values_.cols()) {
        throw ValidationError("Gram matrix must be square and non-empty");
    }
    require_finite(values_, "Gram matrix");
    if (max_asymmetry(values_) > 1e-9) {
        throw ValidationError("Gram matrix is not symmetric within 1e-9");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(values_, Eigen::EigenvaluesOnly);
    if (solver.eigenvalues().minCoeff() < -1e-9) {
        throw ValidationError("Gram matrix is not positive semidefinite (min eigenvalue " +
                              std::to_string(solver.eigenvalues().minCoeff()) + ")");
    }
}

GramMatrix gram(const FeatureMap& fm) {
    require_finite(fm.values, "feature map");
    const double norm = static_cast<double>(fm.channels) * fm.height * fm.width;
    Eigen::MatrixXd g = (fm.values * fm.values.transpose()) / norm;
    // Products of a matrix with its own transpose can pick up asymmetric
    // rounding in the off-diagonal pairs; symmetrize before validating.
    g = ((g + g.transpose()) / 2.0).eval();
    return GramMatrix(std::move(g));
}

double sml(const GramMatrix& result, const std::vector<GramMatrix>& targets) {
    if (targets.empty()) {
        throw ValidationError("sml requires at least one target Gram matrix");
    }
    double total = 0.0;
    for (const GramMatrix& target : targets) {
        if (target.dim() != result.dim()) {
            throw ValidationError("sml dimension mismatch: result " +
                                  std::to_string(result.dim()) + " vs target " +
                                  std::to_string(target.dim()));
        }
        total += (result.values() - target.values()).squaredNorm();
    }
    return total / static_cast<double>(targets.size());
}

double cms(const EmbeddingVec& a, const EmbeddingVec& b) {
    if (a.values.size() != b.values.size()) {
        throw ValidationError("cms dimension mismatch");
    }
    if (a.values.size() == 0) {
        throw ValidationError("cms requires non-empty vectors");
    }
    if (!a.values.allFinite() || !b.values.allFinite()) {
        throw ValidationError("cms input contains non-finite values");
    }
    const double na = a.values.norm();
    const double nb = b.values.norm();
    if (na == 0.0 || nb == 0.0) {
        throw ValidationError("cms is undefined for zero-norm vectors");
    }
    return a.values.dot(b.values) / (na * nb);
}

GaussianStats gaussian_stats(const EmbeddingSet& set) {
    const Eigen::Index m = set.values.rows();
    if (m < 2) {
        throw ValidationError("gaussian_stats requires at least 2 samples, got " +
                              std::to_string(m));
    }
    require_finite(set.values, "embedding set");
    GaussianStats stats;
    stats.mean = set.values.colwise().mean();
    const Eigen::MatrixXd centered = set.values.rowwise() - stats.mean.transpose();
    Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(m - 1);
    stats.covariance = (cov + cov.transpose()) / 2.0;
    return stats;
}

Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& s) {
    if (s.rows() != s.cols() || s.rows() < 1) {
        throw ValidationError("matrix_sqrt_psd requires a square matrix");
    }
    require_finite(s, "matrix_sqrt_psd input");
    if (max_asymmetry(s) > 1e-7) {
        throw ValidationError("matrix_sqrt_psd input is not symmetric within 1e-7");
    }
    const Eigen::MatrixXd sym = (s + s.transpose()) / 2.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
    if (solver.info() != Eigen::Success) {
        throw Error("matrix_sqrt_psd eigendecomposition failed");
    }
    Eigen::VectorXd eigenvalues = solver.eigenvalues();
    if (eigenvalues.minCoeff() < -1e-7) {
        throw ValidationError("matrix_sqrt_psd input is indefinite (min eigenvalue " +
                              std::to_string(eigenvalues.minCoeff()) + ")");
    }
    const Eigen::VectorXd sqrt_vals = eigenvalues.cwiseMax(0.0).cwiseSqrt();
    Eigen::MatrixXd root =
        solver.eigenvectors() * sqrt_vals.asDiagonal() * solver.eigenvectors().transpose();
    return (root + root.transpose()) / 2.0;
}

double fid(const GaussianStats& a, const GaussianStats& b) {
    if (a.mean.size() != b.mean.size() || a.covariance.rows() != b.covariance.rows()) {
        throw ValidationError("fid dimension mismatch");
    }
    if (a.covariance.rows() != a.mean.size() || b.covariance.rows() != b.mean.size()) {
        throw ValidationError("fid stats have inconsistent mean/covariance dimensions");
    }
    const double mean_term = (a.mean - b.mean).squaredNorm();

    // Tr((S_a S_b)^{1/2}) computed through the congruent symmetric product
    // sqrt(S_a) S_b sqrt(S_a), which shares its eigenvalues and keeps the
    // whole computation in PSD territory.
    const Eigen::MatrixXd root_a = matrix_sqrt_psd(a.covariance);
    Eigen::MatrixXd inner = root_a * b.covariance * root_a;
    inner = ((inner + inner.transpose()) / 2.0).eval();
    const double trace_cross = matrix_sqrt_psd(inner).trace();

    const double raw =
        mean_term + a.covariance.trace() + b.covariance.trace() - 2.0 * trace_cross;
    // Rounding can push the total a hair below zero; clamp.
    return raw < 0.0 ? 0.0 : raw;
}

double clips(const EmbeddingVec& image_emb, const EmbeddingVec& text_emb) {
    const double cosine = cms(image_emb, text_emb);
    return 100.0 * (cosine > 0.0 ? cosine : 0.0);
}

}  // namespace stylevar::metrics
