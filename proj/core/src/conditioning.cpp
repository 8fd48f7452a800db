#include "stylevar/conditioning.hpp"

#include <cmath>
#include <string>

#include "stylevar/errors.hpp"
#include "stylevar/rng.hpp"

namespace stylevar::conditioning {

namespace {

void require_finite(const Eigen::MatrixXd& m, const char* what) {
    if (!m.allFinite()) {
        throw ValidationError(std::string(what) + " contains non-finite values");
    }
}

Eigen::MatrixXd seeded_matrix(int rows, int cols, rng::PortableRng& rng, double scale) {
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            m(r, c) = rng.symmetric() * scale;
        }
    }
    return m;
}

/// Row-wise stable softmax(scores / sqrt(d)) * values.
Eigen::MatrixXd scaled_attention(const Eigen::MatrixXd& q, const Eigen::MatrixXd& k,
                                 const Eigen::MatrixXd& v) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    Eigen::MatrixXd scores = (q * k.transpose()) * scale;
    require_finite(scores, "attention scores");
    for (Eigen::Index row = 0; row < scores.rows(); ++row) {
        const double row_max = scores.row(row).maxCoeff();
        Eigen::ArrayXd weights = (scores.row(row).array() - row_max).exp();
        scores.row(row) = weights / weights.sum();
    }
    Eigen::MatrixXd out = scores * v;
    require_finite(out, "attention output");
    return out;
}

}  // namespace

AttentionWeights AttentionWeights::seeded(int dim, std::uint64_t seed) {
    if (dim < 1) {
        throw ValidationError("attention weight dimension must be >= 1");
    }
    rng::PortableRng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    AttentionWeights weights;
    weights.wq = seeded_matrix(dim, dim, rng, scale);
    weights.wk = seeded_matrix(dim, dim, rng, scale);
    weights.wv = seeded_matrix(dim, dim, rng, scale);
    weights.seed = seed;
    return weights;
}

std::vector<TokenSequence> window_partition(const metrics::FeatureMap& fm,
                                            const WindowConfig& cfg) {
    const int w = cfg.window_size;
    if (w < 1) {
        throw ValidationError("window size must be >= 1");
    }
    if (fm.height % w != 0 || fm.width % w != 0) {
        throw ValidationError("window size " + std::to_string(w) + " does not divide " +
                              std::to_string(fm.height) + "x" + std::to_string(fm.width));
    }
    require_finite(fm.values, "feature map");

    const int rows = fm.height / w;
    const int cols = fm.width / w;
    std::vector<TokenSequence> windows;
    windows.reserve(static_cast<std::size_t>(rows) * cols);
    for (int wy = 0; wy < rows; ++wy) {
        for (int wx = 0; wx < cols; ++wx) {
            TokenSequence window;
            window.tokens.resize(static_cast<Eigen::Index>(w) * w, fm.channels);
            for (int dy = 0; dy < w; ++dy) {
                for (int dx = 0; dx < w; ++dx) {
                    const Eigen::Index pos =
                        static_cast<Eigen::Index>(wy * w + dy) * fm.width + (wx * w + dx);
                    window.tokens.row(static_cast<Eigen::Index>(dy) * w + dx) =
                        fm.values.col(pos).transpose();
                }
            }
            windows.push_back(std::move(window));
        }
    }
    return windows;
}

TokenSequence window_attention(const TokenSequence& tokens, const AttentionWeights& weights) {
    if (tokens.length() < 1 || tokens.dim() < 1) {
        throw ValidationError("window_attention requires a non-empty token sequence");
    }
    if (weights.wq.rows() != tokens.dim() || weights.wq.cols() != tokens.dim() ||
        weights.wk.rows() != tokens.dim() || weights.wv.rows() != tokens.dim()) {
        throw ValidationError("attention weight dimensions do not match token dim");
    }
    require_finite(tokens.tokens, "tokens");
    return TokenSequence{scaled_attention(tokens.tokens * weights.wq, tokens.tokens * weights.wk,
                                          tokens.tokens * weights.wv)};
}

TokenSequence style_encode(const metrics::FeatureMap& fm, const WindowConfig& cfg,
                           const AttentionWeights& weights) {
    const std::vector<TokenSequence> windows = window_partition(fm, cfg);
    TokenSequence out;
    out.tokens.resize(fm.spatial_size(), fm.channels);
    Eigen::Index offset = 0;
    for (const TokenSequence& window : windows) {
        const TokenSequence attended = window_attention(window, weights);
        out.tokens.middleRows(offset, attended.length()) = attended.tokens;
        offset += attended.length();
    }
    return out;
}

TokenSequence cross_attention(const TokenSequence& query, const TokenSequence& condition,
                              const AttentionWeights& weights) {
    if (query.length() < 1 || condition.length() < 1) {
        throw ValidationError("cross_attention requires non-empty sequences");
    }
    if (query.dim() != condition.dim()) {
        throw ValidationError("cross_attention dimension mismatch: query " +
                              std::to_string(query.dim()) + " vs condition " +
                              std::to_string(condition.dim()));
    }
    if (weights.wq.rows() != query.dim()) {
        throw ValidationError("attention weight dimensions do not match token dim");
    }
    require_finite(query.tokens, "query tokens");
    require_finite(condition.tokens, "condition tokens");
    return TokenSequence{scaled_attention(query.tokens * weights.wq,
                                          condition.tokens * weights.wk,
                                          condition.tokens * weights.wv)};
}

std::vector<LatentState> gated_sample(const TokenSequence& init, const TokenSequence& condition,
                                      const SamplerConfig& cfg, const AttentionWeights& weights) {
    if (cfg.total_steps < 1) {
        throw ValidationError("total_steps must be >= 1");
    }
    if (cfg.gate_step < 0 || cfg.gate_step > cfg.total_steps) {
        throw ValidationError("gate_step must lie in [0, total_steps]");
    }
    require_finite(init.tokens, "initial latent");

    std::vector<LatentState> trajectory;
    trajectory.reserve(static_cast<std::size_t>(cfg.total_steps) + 1);
    trajectory.push_back({0, init});
    for (int step = 1; step <= cfg.total_steps; ++step) {
        const TokenSequence& prev = trajectory.back().latent;
        TokenSequence next;
        if (step <= cfg.gate_step) {
            next.tokens = cfg.alpha * prev.tokens;
        } else {
            next.tokens = cfg.alpha * prev.tokens +
                          cfg.beta * cross_attention(prev, condition, weights).tokens;
        }
        if (!next.tokens.allFinite()) {
            throw Error("gated_sample trajectory diverged at step " + std::to_string(step));
        }
        trajectory.push_back({step, std::move(next)});
    }
    return trajectory;
}

TokenSequence seeded_tokens(int length, int dim, std::uint64_t seed) {
    if (length < 1 || dim < 1) {
        throw ValidationError("token sequence dimensions must be >= 1");
    }
    rng::PortableRng rng(seed);
    return TokenSequence{seeded_matrix(length, dim, rng, 1.0)};
}

metrics::FeatureMap seeded_feature_map(int channels, int height, int width, std::uint64_t seed) {
    rng::PortableRng rng(seed);
    std::vector<double> data(static_cast<std::size_t>(channels) * height * width);
    for (double& v : data) {
        v = rng.symmetric();
    }
    return metrics::FeatureMap::from_values(channels, height, width, data);
}

}  // namespace stylevar::conditioning
