#pragma once

#include <cstdint>
#include <vector>

#include "hyperot/tensor.hpp"

namespace hyperot {

// Entropic-OT settings for the Sinkhorn attention path. Gradients flow
// through the unrolled iterations.
struct OtConfig {
    double epsilon = 0.05;
    int iterations = 10;
};

struct AttentionParams {
    Tensor w_q;      // [d_v x d_a]
    Tensor w_k;      // [d_t x d_a]
    Tensor w_v;      // [d_t x d_a]
    Tensor w_proj;   // [d_a x d_v]
    Tensor ln_gain;  // [d_v]
    Tensor ln_bias;  // [d_v]

    static AttentionParams init(std::size_t d_v, std::size_t d_t, std::size_t d_a,
                                std::uint64_t seed);
};

// Entropic transport plan between spatial positions (rows) and prompts
// (columns). Entries are nonnegative and total mass is 1; the residuals
// record how far each marginal is from its prescription after the final
// iteration.
struct TransportPlan {
    Tensor plan;  // [L x P]
    double epsilon = 0.0;
    int iterations = 0;
    double row_residual = 0.0;
    double col_residual = 0.0;
};

// Log-domain Sinkhorn on the kernel exp(scores / epsilon), alternating row
// and column scaling toward the given marginals (each must sum to 1).
TransportPlan sinkhorn_normalize(const Tensor& scores, double epsilon, int iterations,
                                 const std::vector<double>& row_marginal,
                                 const std::vector<double>& col_marginal);

struct AttentionOutput {
    Tensor fused;  // [L x d_a]
    Tensor map;    // [L x P], rows sum to 1
};

// Multi-prompt Sinkhorn attention: scores Q K^T / sqrt(d_a) are normalized by
// an optimal-transport plan under uniform marginals; the plan rescaled by L
// row-normalizes the attention map.
AttentionOutput mpsa_attention(const Tensor& f_v, const Tensor& f_t, const AttentionParams& params,
                               const OtConfig& ot);

// Ablation baseline: identical pipeline with a row softmax in place of the
// transport plan.
AttentionOutput softmax_cross_attention(const Tensor& f_v, const Tensor& f_t,
                                        const AttentionParams& params);

// layer_norm(attended * w_proj + f_v): the residual that keeps fused features
// anchored to the visual input. Output width d_v.
Tensor fuse_residual(const Tensor& attended, const Tensor& f_v, const AttentionParams& params);

// Feature-axis concatenation, global block first.
Tensor fuse_concat(const Tensor& f_c_global, const Tensor& f_c_local);

}  // namespace hyperot
