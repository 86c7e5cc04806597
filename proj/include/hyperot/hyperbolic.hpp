#pragma once

#include <cstdint>

#include "hyperot/tensor.hpp"

namespace hyperot {

// Poincaré ball of curvature c > 0: the open ball of radius 1/sqrt(c).
// max_norm keeps points a safety margin inside; artanh_clamp bounds the
// distance argument so gradients stay finite near the boundary.
struct BallConfig {
    double curvature = 1.0;
    double max_norm = 0.0;
    double artanh_clamp = 1.0 - 1e-7;

    static BallConfig create(double curvature);
};

// Batch of points strictly inside the ball, one per row. The factory is the
// single place the containment invariant is enforced.
struct BallPoint {
    Tensor coords;  // [B x d]
    BallConfig config;

    static BallPoint wrap(Tensor coords, const BallConfig& config);
};

// Entrywise Möbius addition of two row batches; the result is re-projected in
// case rounding lands on the boundary.
Tensor mobius_add(const Tensor& x, const Tensor& y, const BallConfig& config);

// Geodesic distance per row pair: (2/sqrt(c)) * artanh(sqrt(c) * ||(-x) (+) y||).
Tensor geodesic_distance(const Tensor& x, const Tensor& y, const BallConfig& config);

// Rescales rows with norm >= max_norm down to max_norm; interior rows pass
// through unchanged bit-for-bit.
Tensor project_to_ball(const Tensor& v, const BallConfig& config);

// Exponential map at the origin: tanh(sqrt(c)||v||) * v / (sqrt(c)||v||),
// with v = 0 mapped to the origin.
Tensor expmap_origin(const Tensor& v, double curvature);

// Affine map + exponential map + safety projection: the embedding layer that
// carries entity logits into the ball.
struct HnnParams {
    Tensor weight;  // [d_in x d_h]
    Tensor bias;    // [d_h]
    BallConfig config;

    // weight ~ U[-1/sqrt(d_in), 1/sqrt(d_in)], bias zero.
    static HnnParams init(std::size_t d_in, std::size_t d_h, const BallConfig& config,
                          std::uint64_t seed);
};

// Pre-ball features: logits * weight + bias. Euclidean and cosine retrieval
// backends embed with this map alone.
Tensor hnn_affine(const Tensor& logits, const HnnParams& params);

BallPoint hnn_embed(const Tensor& logits, const HnnParams& params);

}  // namespace hyperot
