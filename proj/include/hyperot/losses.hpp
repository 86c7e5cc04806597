#pragma once

#include <vector>

#include "hyperot/tensor.hpp"

namespace hyperot {

struct LossWeights {
    double alpha = 2.0;
    double beta = 0.5;
};

// S[n][m] = <g_n, l_m> / (||g_n|| ||l_m||), norms guarded at 1e-12.
Tensor cosine_similarity_matrix(const Tensor& f_global, const Tensor& f_local);

// Entrywise logistic; maps cosine values into (0, 1).
Tensor sigmoid_normalize(const Tensor& similarities);

// Soft IoU of nonnegative maps: sum of elementwise minima over sum of
// elementwise maxima (denominator guarded at 1e-8). maps_global is [N x L],
// maps_local [P x L]; result [N x P].
Tensor iou_matrix(const Tensor& maps_global, const Tensor& maps_local);

// Mean over all pairs of (1 - S * O).
Tensor fcc_loss(const Tensor& similarity, const Tensor& overlap);

// Mean token-level cross entropy; thin wrapper over cross_entropy_rows.
Tensor task_loss_tokens(const Tensor& logits, const std::vector<int>& tokens);

// task + alpha * rank + beta * fcc.
Tensor total_loss(const Tensor& task, const Tensor& rank, const Tensor& fcc,
                  const LossWeights& weights);

}  // namespace hyperot
