#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hyperot {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

// Dense tensor of 64-bit reals with row-major logical layout. Copies are
// shallow: the data buffer is shared, so a Tensor behaves as an immutable
// value inside a graph. Gradient buffers are same-shape accumulators created
// on demand for tensors that participate in differentiation.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double v, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(data_); }
    const Shape& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t numel() const;
    bool is_scalar() const { return numel() == 1; }

    // 2-D accessors; throw DimensionError on rank mismatch.
    std::size_t rows() const;
    std::size_t cols() const;

    const std::vector<double>& values() const { return *data_; }
    // Intended for leaves only (initializers, optimizer updates); mutating a
    // tensor that is already referenced by a recorded graph is undefined.
    std::vector<double>& mutable_values() { return *data_; }

    double value() const;                       // single-element tensors
    double at(std::size_t i) const { return (*data_)[i]; }
    double at(std::size_t r, std::size_t c) const { return (*data_)[r * cols() + c]; }

    bool requires_grad() const { return requires_grad_; }
    Tensor& set_requires_grad(bool rg);

    bool has_grad() const { return static_cast<bool>(grad_); }
    const std::vector<double>& grad() const;
    void zero_grad();

    std::shared_ptr<std::vector<double>> data_ptr() const { return data_; }
    // Lazily allocates a zero-filled accumulator of the same length.
    std::shared_ptr<std::vector<double>> grad_ptr() const;

private:
    Shape shape_;
    std::shared_ptr<std::vector<double>> data_;
    mutable std::shared_ptr<std::vector<double>> grad_;
    bool requires_grad_ = false;
};

// Ordered record of every differentiable operation executed while a Scope is
// alive. The backward pass replays the list in exact reverse execution order;
// each entry adds its contribution into parent gradient buffers, so a leaf
// used on two paths receives the sum of both.
class Tape {
public:
    class Scope {
    public:
        explicit Scope(Tape& tape);
        ~Scope();
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        Tape* previous_;
    };

    static Tape* active();

    void record(std::function<void()> backward_fn) { nodes_.push_back(std::move(backward_fn)); }
    std::size_t size() const { return nodes_.size(); }

    // Seeds d(loss)/d(loss) = 1 and runs every recorded node in reverse.
    void backward(const Tensor& loss);

private:
    std::vector<std::function<void()>> nodes_;
};

namespace ops {

// --- elementwise (equal shapes, or scalar broadcast against a tensor) ---
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor emin(const Tensor& a, const Tensor& b);  // ties select the first operand
Tensor emax(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, double b);
Tensor sub(const Tensor& a, double b);
Tensor sub(double a, const Tensor& b);
Tensor mul(const Tensor& a, double b);
Tensor div(const Tensor& a, double b);
Tensor div(double a, const Tensor& b);
Tensor emin(const Tensor& a, double b);
Tensor emax(const Tensor& a, double b);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor artanh(const Tensor& x);  // domain (-1, 1), checked per element
Tensor square(const Tensor& x);
Tensor sqrt(const Tensor& x);  // domain x >= 0; zero upstream gradient short-circuits at x == 0
Tensor log(const Tensor& x);   // domain x > 0
Tensor exp(const Tensor& x);
Tensor neg(const Tensor& x);

// --- reductions ---
Tensor reduce_sum(const Tensor& x, std::optional<std::size_t> axis = std::nullopt);
Tensor reduce_mean(const Tensor& x, std::optional<std::size_t> axis = std::nullopt);
Tensor reduce_max(const Tensor& x, std::optional<std::size_t> axis = std::nullopt);

// --- linear algebra and structure ---
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape new_shape);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor repeat_rows(const Tensor& x, std::size_t times);      // [m x n] -> [(times*m) x n], whole-block tiling
Tensor repeat_each_row(const Tensor& x, std::size_t times);  // each row repeated `times` consecutive times

// --- row/column broadcasts over a matrix ---
Tensor add_rowvec(const Tensor& mat, const Tensor& vec);  // mat[i][j] + vec[j]
Tensor add_colvec(const Tensor& mat, const Tensor& vec);  // mat[i][j] + vec[i]
Tensor mul_rowvec(const Tensor& mat, const Tensor& vec);
Tensor mul_colvec(const Tensor& mat, const Tensor& vec);

// --- fused numerical kernels ---
Tensor softmax_rows(const Tensor& x);
Tensor logsumexp(const Tensor& x, std::size_t axis);  // axis 0 -> [cols], axis 1 -> [rows]
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// Mean over rows of -log softmax(logits)[target]. Positions where
// ignore_mask is nonzero are treated as -inf logits: excluded from the
// normalizer and never receiving gradient. targets[i] must index an
// unmasked column.
Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int>& targets,
                          const Tensor* ignore_mask = nullptr);

}  // namespace ops

}  // namespace hyperot
