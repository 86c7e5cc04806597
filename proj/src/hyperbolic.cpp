#include "hyperot/hyperbolic.hpp"

#include <cmath>

#include "hyperot/errors.hpp"
#include "hyperot/rng.hpp"

namespace hyperot {

BallConfig BallConfig::create(double curvature) {
    if (!(curvature > 0.0)) {
        throw ValidationError("ball curvature must be positive, got " + std::to_string(curvature));
    }
    BallConfig cfg;
    cfg.curvature = curvature;
    cfg.max_norm = (1.0 - 1e-5) / std::sqrt(curvature);
    cfg.artanh_clamp = 1.0 - 1e-7;
    return cfg;
}

namespace {

void check_matrix(const Tensor& t, const char* what) {
    if (t.ndim() != 2) {
        throw DimensionError(std::string(what) + ": expected [B x d] batch, got " +
                             shape_str(t.shape()));
    }
}

void check_in_ball(const Tensor& points, const BallConfig& cfg, const char* what) {
    check_matrix(points, what);
    const double sqrt_c = std::sqrt(cfg.curvature);
    const std::size_t rows = points.rows(), d = points.cols();
    const auto& v = points.values();
    for (std::size_t r = 0; r < rows; ++r) {
        double sumsq = 0.0;
        for (std::size_t j = 0; j < d; ++j) sumsq += v[r * d + j] * v[r * d + j];
        const double scaled = sqrt_c * std::sqrt(sumsq);
        if (!(scaled < 1.0)) {
            throw DomainError(std::string(what) + ": row " + std::to_string(r) +
                              " has sqrt(c)*norm = " + std::to_string(scaled) +
                              ", outside the ball");
        }
    }
}

Tensor row_sumsq(const Tensor& x) { return ops::reduce_sum(ops::square(x), 1); }

Tensor row_dot(const Tensor& x, const Tensor& y) { return ops::reduce_sum(ops::mul(x, y), 1); }

}  // namespace

BallPoint BallPoint::wrap(Tensor coords, const BallConfig& config) {
    check_in_ball(coords, config, "BallPoint");
    return BallPoint{std::move(coords), config};
}

Tensor mobius_add(const Tensor& x, const Tensor& y, const BallConfig& config) {
    check_in_ball(x, config, "mobius_add x");
    check_in_ball(y, config, "mobius_add y");
    if (x.shape() != y.shape()) {
        throw DimensionError("mobius_add: shapes " + shape_str(x.shape()) + " and " +
                             shape_str(y.shape()) + " differ");
    }
    const double c = config.curvature;
    Tensor x2 = row_sumsq(x);
    Tensor y2 = row_sumsq(y);
    Tensor xy = row_dot(x, y);
    // (1 + 2c<x,y> + c|y|^2) x + (1 - c|x|^2) y over 1 + 2c<x,y> + c^2 |x|^2 |y|^2
    Tensor coef_x = ops::add(ops::add(ops::mul(xy, 2.0 * c), ops::mul(y2, c)), 1.0);
    Tensor coef_y = ops::sub(1.0, ops::mul(x2, c));
    Tensor numer = ops::add(ops::mul_colvec(x, coef_x), ops::mul_colvec(y, coef_y));
    Tensor denom = ops::add(ops::add(ops::mul(xy, 2.0 * c), ops::mul(ops::mul(x2, y2), c * c)), 1.0);
    Tensor result = ops::mul_colvec(numer, ops::div(1.0, denom));
    return project_to_ball(result, config);
}

Tensor geodesic_distance(const Tensor& x, const Tensor& y, const BallConfig& config) {
    const double sqrt_c = std::sqrt(config.curvature);
    Tensor diff = mobius_add(ops::neg(x), y, config);
    Tensor norm = ops::sqrt(row_sumsq(diff));
    Tensor arg = ops::emin(ops::mul(norm, sqrt_c), config.artanh_clamp);
    return ops::mul(ops::artanh(arg), 2.0 / sqrt_c);
}

Tensor project_to_ball(const Tensor& v, const BallConfig& config) {
    check_matrix(v, "project_to_ball");
    const std::size_t rows = v.rows(), d = v.cols();
    const auto& vals = v.values();
    std::vector<double> out(vals.size());
    std::vector<double> norms(rows);
    std::vector<char> clamped(rows, 0);
    for (std::size_t r = 0; r < rows; ++r) {
        double sumsq = 0.0;
        for (std::size_t j = 0; j < d; ++j) sumsq += vals[r * d + j] * vals[r * d + j];
        norms[r] = std::sqrt(sumsq);
        if (norms[r] >= config.max_norm) {
            clamped[r] = 1;
            const double scale = config.max_norm / norms[r];
            for (std::size_t j = 0; j < d; ++j) out[r * d + j] = vals[r * d + j] * scale;
        } else {
            for (std::size_t j = 0; j < d; ++j) out[r * d + j] = vals[r * d + j];
        }
    }
    Tensor y(v.shape(), std::move(out));
    Tape* tape = Tape::active();
    if (tape && v.requires_grad()) {
        y.set_requires_grad(true);
        auto gv = v.grad_ptr();
        auto go = y.grad_ptr();
        auto vd = v.data_ptr();
        auto nrm = std::make_shared<std::vector<double>>(std::move(norms));
        auto cl = std::make_shared<std::vector<char>>(std::move(clamped));
        const double max_norm = config.max_norm;
        tape->record([=]() {
            for (std::size_t r = 0; r < rows; ++r) {
                if (!(*cl)[r]) {
                    for (std::size_t j = 0; j < d; ++j) (*gv)[r * d + j] += (*go)[r * d + j];
                    continue;
                }
                // y = max_norm * v / |v|: dv = (max_norm/|v|) (g - (g.v̂) v̂)
                const double n = (*nrm)[r];
                double dot = 0.0;
                for (std::size_t j = 0; j < d; ++j) dot += (*go)[r * d + j] * (*vd)[r * d + j];
                dot /= (n * n);
                const double scale = max_norm / n;
                for (std::size_t j = 0; j < d; ++j) {
                    (*gv)[r * d + j] += scale * ((*go)[r * d + j] - dot * (*vd)[r * d + j]);
                }
            }
        });
    }
    return y;
}

Tensor expmap_origin(const Tensor& v, double curvature) {
    check_matrix(v, "expmap_origin");
    if (!(curvature > 0.0)) throw ValidationError("expmap_origin: curvature must be positive");
    const double sqrt_c = std::sqrt(curvature);
    const std::size_t rows = v.rows(), d = v.cols();
    const auto& vals = v.values();
    std::vector<double> out(vals.size());
    std::vector<double> norms(rows);
    std::vector<double> factors(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        double sumsq = 0.0;
        for (std::size_t j = 0; j < d; ++j) sumsq += vals[r * d + j] * vals[r * d + j];
        const double n = std::sqrt(sumsq);
        norms[r] = n;
        const double t = sqrt_c * n;
        factors[r] = n < 1e-15 ? 1.0 : std::tanh(t) / t;  // tanh(t)/t -> 1 as t -> 0
        for (std::size_t j = 0; j < d; ++j) out[r * d + j] = factors[r] * vals[r * d + j];
    }
    Tensor y(v.shape(), std::move(out));
    Tape* tape = Tape::active();
    if (tape && v.requires_grad()) {
        y.set_requires_grad(true);
        auto gv = v.grad_ptr();
        auto go = y.grad_ptr();
        auto vd = v.data_ptr();
        auto nrm = std::make_shared<std::vector<double>>(std::move(norms));
        auto fac = std::make_shared<std::vector<double>>(std::move(factors));
        tape->record([=]() {
            for (std::size_t r = 0; r < rows; ++r) {
                const double n = (*nrm)[r];
                const double a = (*fac)[r];
                if (n < 1e-15) {
                    // Jacobian tends to the identity at the origin.
                    for (std::size_t j = 0; j < d; ++j) (*gv)[r * d + j] += (*go)[r * d + j];
                    continue;
                }
                const double t = sqrt_c * n;
                const double th = std::tanh(t);
                const double sech2 = 1.0 - th * th;
                // da/dn with a(n) = tanh(sqrt(c) n) / (sqrt(c) n)
                const double da_dn = (sech2 * t - th) * sqrt_c / (t * t);
                double gdotv = 0.0;
                for (std::size_t j = 0; j < d; ++j) gdotv += (*go)[r * d + j] * (*vd)[r * d + j];
                const double radial = da_dn * gdotv / n;
                for (std::size_t j = 0; j < d; ++j) {
                    (*gv)[r * d + j] += a * (*go)[r * d + j] + radial * (*vd)[r * d + j];
                }
            }
        });
    }
    return y;
}

HnnParams HnnParams::init(std::size_t d_in, std::size_t d_h, const BallConfig& config,
                          std::uint64_t seed) {
    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
    HnnParams params;
    params.weight = Tensor(Shape{d_in, d_h}, rng.uniforms(d_in * d_h, -bound, bound), true);
    params.bias = Tensor::zeros(Shape{d_h}, true);
    params.config = config;
    return params;
}

Tensor hnn_affine(const Tensor& logits, const HnnParams& params) {
    if (logits.ndim() != 2 || logits.cols() != params.weight.rows()) {
        throw DimensionError("hnn: logits " + shape_str(logits.shape()) +
                             " incompatible with weight " + shape_str(params.weight.shape()));
    }
    return ops::add_rowvec(ops::matmul(logits, params.weight), params.bias);
}

BallPoint hnn_embed(const Tensor& logits, const HnnParams& params) {
    Tensor affine = hnn_affine(logits, params);
    Tensor ball = project_to_ball(expmap_origin(affine, params.config.curvature), params.config);
    return BallPoint{std::move(ball), params.config};
}

}  // namespace hyperot
