#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "stylevar/metrics.hpp"

namespace stylevar::conditioning {

/// L tokens of dimension d, one row per token.
struct TokenSequence {
    Eigen::MatrixXd tokens;

    int length() const { return static_cast<int>(tokens.rows()); }
    int dim() const { return static_cast<int>(tokens.cols()); }
};

/// Toy projection weights for the attention simulator. Real deployments use
/// pretrained encoders; here the point is reproducible mechanics.
struct AttentionWeights {
    Eigen::MatrixXd wq, wk, wv;
    std::uint64_t seed = 0;

    /// Deterministic initialization: entries drawn from rng::PortableRng
    /// (mt19937_64) as uniform [-1, 1) scaled by 1/sqrt(dim), filled
    /// row-major into wq, then wk, then wv. Reproducible across platforms.
    static AttentionWeights seeded(int dim, std::uint64_t seed);
};

struct WindowConfig {
    int window_size = 1;  // must divide both H and W of the input map
};

/// Step-gated sampling schedule. The first gate_step steps run
/// unconditionally; the condition is injected only afterwards.
struct SamplerConfig {
    int total_steps = 50;
    int gate_step = 30;
    double alpha = 0.95;
    double beta = 0.05;
};

struct LatentState {
    int step = 0;
    TokenSequence latent;
};

/// Splits a C x H x W map into (H/w) * (W/w) non-overlapping windows in
/// row-major window order; each window is w*w tokens of dim C, tokens in
/// row-major spatial order. No shift, no mask. Concatenating the windows
/// visits every spatial position exactly once.
std::vector<TokenSequence> window_partition(const metrics::FeatureMap& fm,
                                            const WindowConfig& cfg);

/// Plain softmax(Q K^T / sqrt(d)) V within one window, Q = tokens * wq,
/// K = tokens * wk, V = tokens * wv.
TokenSequence window_attention(const TokenSequence& tokens, const AttentionWeights& weights);

/// window_attention applied independently per window, outputs concatenated
/// in window order. No cross-window interaction.
TokenSequence style_encode(const metrics::FeatureMap& fm, const WindowConfig& cfg,
                           const AttentionWeights& weights);

/// softmax((query*wq)(condition*wk)^T / sqrt(d)) * (condition*wv);
/// output length equals the query length.
TokenSequence cross_attention(const TokenSequence& query, const TokenSequence& condition,
                              const AttentionWeights& weights);

/// Deterministic trajectory of total_steps + 1 states. Step s in [1, T]
/// computes
///   x_s = alpha * x_{s-1}                                        (s <= G)
///   x_s = alpha * x_{s-1} + beta * cross_attention(x_{s-1}, c)   (s >  G)
/// so the condition cannot influence any state up to and including x_G.
/// Throws if the trajectory leaves the finite range (divergent alpha/beta).
std::vector<LatentState> gated_sample(const TokenSequence& init, const TokenSequence& condition,
                                      const SamplerConfig& cfg, const AttentionWeights& weights);

/// Seeded token sequence from the same portable generator as the weights.
TokenSequence seeded_tokens(int length, int dim, std::uint64_t seed);

/// Seeded feature map, convenient for demos and benchmarks.
metrics::FeatureMap seeded_feature_map(int channels, int height, int width, std::uint64_t seed);

}  // namespace stylevar::conditioning
