#include "hyperot/attention.hpp"

#include <cmath>

#include "hyperot/errors.hpp"
#include "hyperot/rng.hpp"

namespace hyperot {

AttentionParams AttentionParams::init(std::size_t d_v, std::size_t d_t, std::size_t d_a,
                                      std::uint64_t seed) {
    Rng rng(seed);
    auto fan_in = [&rng](std::size_t in, std::size_t out) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        return Tensor(Shape{in, out}, rng.uniforms(in * out, -bound, bound), true);
    };
    AttentionParams p;
    p.w_q = fan_in(d_v, d_a);
    p.w_k = fan_in(d_t, d_a);
    p.w_v = fan_in(d_t, d_a);
    p.w_proj = fan_in(d_a, d_v);
    p.ln_gain = Tensor::full(Shape{d_v}, 1.0, true);
    p.ln_bias = Tensor::zeros(Shape{d_v}, true);
    return p;
}

namespace {

std::vector<double> log_of(const std::vector<double>& v, const char* what) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] > 0.0)) {
            throw ValidationError(std::string(what) + ": marginal entries must be positive");
        }
        out[i] = std::log(v[i]);
    }
    return out;
}

void check_simplex(const std::vector<double>& m, const char* what) {
    double sum = 0.0;
    for (double v : m) sum += v;
    if (std::abs(sum - 1.0) > 1e-6) {
        throw ValidationError(std::string(what) + ": marginal sums to " + std::to_string(sum) +
                              ", expected 1");
    }
}

}  // namespace

TransportPlan sinkhorn_normalize(const Tensor& scores, double epsilon, int iterations,
                                 const std::vector<double>& row_marginal,
                                 const std::vector<double>& col_marginal) {
    if (!(epsilon > 0.0)) throw ValidationError("sinkhorn: epsilon must be positive");
    if (iterations < 1) throw ValidationError("sinkhorn: need at least one iteration");
    const std::size_t l = scores.rows(), p = scores.cols();
    if (row_marginal.size() != l || col_marginal.size() != p) {
        throw DimensionError("sinkhorn: marginals " + std::to_string(row_marginal.size()) + "/" +
                             std::to_string(col_marginal.size()) + " do not match scores " +
                             shape_str(scores.shape()));
    }
    for (double v : scores.values()) {
        if (!std::isfinite(v)) throw NumericError("sinkhorn: non-finite score entry");
    }
    check_simplex(row_marginal, "sinkhorn rows");
    check_simplex(col_marginal, "sinkhorn cols");

    Tensor log_r(Shape{l}, log_of(row_marginal, "sinkhorn rows"));
    Tensor log_c(Shape{p}, log_of(col_marginal, "sinkhorn cols"));

    Tensor kernel = ops::mul(scores, 1.0 / epsilon);
    Tensor phi = Tensor::zeros(Shape{l});
    Tensor psi = Tensor::zeros(Shape{p});
    for (int it = 0; it < iterations; ++it) {
        phi = ops::sub(log_r, ops::logsumexp(ops::add_rowvec(kernel, psi), 1));
        psi = ops::sub(log_c, ops::logsumexp(ops::add_colvec(kernel, phi), 0));
    }
    Tensor plan = ops::exp(ops::add_rowvec(ops::add_colvec(kernel, phi), psi));

    TransportPlan result;
    result.plan = plan;
    result.epsilon = epsilon;
    result.iterations = iterations;
    const auto& pv = plan.values();
    double row_res = 0.0, col_res = 0.0;
    for (std::size_t i = 0; i < l; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < p; ++j) s += pv[i * p + j];
        row_res = std::max(row_res, std::abs(s - row_marginal[i]));
    }
    for (std::size_t j = 0; j < p; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < l; ++i) s += pv[i * p + j];
        col_res = std::max(col_res, std::abs(s - col_marginal[j]));
    }
    result.row_residual = row_res;
    result.col_residual = col_res;
    return result;
}

namespace {

Tensor attention_scores(const Tensor& f_v, const Tensor& f_t, const AttentionParams& params) {
    if (f_v.ndim() != 2 || f_v.cols() != params.w_q.rows()) {
        throw DimensionError("attention: visual features " + shape_str(f_v.shape()) +
                             " incompatible with w_q " + shape_str(params.w_q.shape()));
    }
    if (f_t.ndim() != 2 || f_t.cols() != params.w_k.rows()) {
        throw DimensionError("attention: prompt features " + shape_str(f_t.shape()) +
                             " incompatible with w_k " + shape_str(params.w_k.shape()));
    }
    Tensor q = ops::matmul(f_v, params.w_q);
    Tensor k = ops::matmul(f_t, params.w_k);
    const double d_a = static_cast<double>(params.w_q.cols());
    return ops::mul(ops::matmul(q, ops::transpose(k)), 1.0 / std::sqrt(d_a));
}

}  // namespace

AttentionOutput mpsa_attention(const Tensor& f_v, const Tensor& f_t, const AttentionParams& params,
                               const OtConfig& ot) {
    Tensor scores = attention_scores(f_v, f_t, params);
    const std::size_t l = scores.rows(), p = scores.cols();
    const std::vector<double> row_marginal(l, 1.0 / static_cast<double>(l));
    const std::vector<double> col_marginal(p, 1.0 / static_cast<double>(p));
    TransportPlan plan = sinkhorn_normalize(scores, ot.epsilon, ot.iterations, row_marginal,
                                            col_marginal);
    // Uniform row marginal 1/L, so scaling by L makes each row a distribution
    // over prompts.
    AttentionOutput out;
    out.map = ops::mul(plan.plan, static_cast<double>(l));
    out.fused = ops::matmul(out.map, ops::matmul(f_t, params.w_v));
    return out;
}

AttentionOutput softmax_cross_attention(const Tensor& f_v, const Tensor& f_t,
                                        const AttentionParams& params) {
    Tensor scores = attention_scores(f_v, f_t, params);
    AttentionOutput out;
    out.map = ops::softmax_rows(scores);
    out.fused = ops::matmul(out.map, ops::matmul(f_t, params.w_v));
    return out;
}

Tensor fuse_residual(const Tensor& attended, const Tensor& f_v, const AttentionParams& params) {
    if (attended.ndim() != 2 || attended.cols() != params.w_proj.rows()) {
        throw DimensionError("fuse_residual: attended " + shape_str(attended.shape()) +
                             " incompatible with w_proj " + shape_str(params.w_proj.shape()));
    }
    Tensor projected = ops::matmul(attended, params.w_proj);
    if (projected.shape() != f_v.shape()) {
        throw DimensionError("fuse_residual: projected " + shape_str(projected.shape()) +
                             " vs visual " + shape_str(f_v.shape()));
    }
    return ops::layer_norm(ops::add(projected, f_v), params.ln_gain, params.ln_bias);
}

Tensor fuse_concat(const Tensor& f_c_global, const Tensor& f_c_local) {
    return ops::concat_cols(f_c_global, f_c_local);
}

}  // namespace hyperot
