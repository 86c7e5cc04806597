#include "hyperot/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hyperot/errors.hpp"

namespace hyperot {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << "x";
        os << s[i];
    }
    os << "]";
    return os.str();
}

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (auto e : s) n *= e;
    return n;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : shape_(std::move(shape)),
      data_(std::make_shared<std::vector<double>>(std::move(values))),
      requires_grad_(requires_grad) {
    if (shape_numel(shape_) != data_->size()) {
        throw DimensionError("tensor shape " + shape_str(shape_) + " does not match " +
                             std::to_string(data_->size()) + " values");
    }
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    std::vector<double> v(shape_numel(shape), 0.0);
    return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    std::vector<double> v(shape_numel(shape), value);
    return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return Tensor(Shape{1}, std::vector<double>{v}, requires_grad);
}

std::size_t Tensor::numel() const { return data_ ? data_->size() : 0; }

std::size_t Tensor::rows() const {
    if (ndim() != 2) throw DimensionError("expected a 2-D tensor, got " + shape_str(shape_));
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (ndim() != 2) throw DimensionError("expected a 2-D tensor, got " + shape_str(shape_));
    return shape_[1];
}

double Tensor::value() const {
    if (numel() != 1) {
        throw DimensionError("value() requires a single-element tensor, got " + shape_str(shape_));
    }
    return (*data_)[0];
}

Tensor& Tensor::set_requires_grad(bool rg) {
    requires_grad_ = rg;
    return *this;
}

const std::vector<double>& Tensor::grad() const {
    if (!grad_) throw ValidationError("tensor has no gradient accumulator");
    return *grad_;
}

void Tensor::zero_grad() {
    if (grad_) std::fill(grad_->begin(), grad_->end(), 0.0);
}

std::shared_ptr<std::vector<double>> Tensor::grad_ptr() const {
    if (!grad_) grad_ = std::make_shared<std::vector<double>>(data_->size(), 0.0);
    return grad_;
}

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape::Scope::Scope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
Tape::Scope::~Scope() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::backward(const Tensor& loss) {
    if (loss.numel() != 1) {
        throw DimensionError("backward() requires a scalar loss, got " + shape_str(loss.shape()));
    }
    if (!loss.requires_grad()) {
        throw ValidationError("backward() on a tensor that does not require grad");
    }
    (*loss.grad_ptr())[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

namespace ops {

namespace {

using Buf = std::shared_ptr<std::vector<double>>;

bool grad_wanted(const Tensor& t) { return t.requires_grad(); }

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(what) + ": shapes " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()) + " differ");
    }
}

void check_finite(double v, const char* what, std::size_t index) {
    if (!std::isfinite(v)) {
        throw NumericError(std::string(what) + ": non-finite value at index " + std::to_string(index));
    }
}

// Binary elementwise with scalar broadcast. FwdF(a,b)->y; DaF/DbF(a,b,y,g)->grad contribution.
template <class FwdF, class DaF, class DbF>
Tensor binary_ew(const Tensor& a, const Tensor& b, const char* name, FwdF fwd, DaF da, DbF db) {
    const bool a_scalar = a.numel() == 1;
    const bool b_scalar = b.numel() == 1;
    if (!a_scalar && !b_scalar) check_same_shape(a, b, name);
    const Tensor& lead = a_scalar ? b : a;
    const std::size_t n = lead.numel();

    std::vector<double> out(n);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = fwd(av[a_scalar ? 0 : i], bv[b_scalar ? 0 : i], i);
    }
    Tensor y(lead.shape(), std::move(out));

    Tape* tape = Tape::active();
    if (tape && (grad_wanted(a) || grad_wanted(b))) {
        y.set_requires_grad(true);
        Buf ga = grad_wanted(a) ? a.grad_ptr() : nullptr;
        Buf gb = grad_wanted(b) ? b.grad_ptr() : nullptr;
        Buf go = y.grad_ptr();
        Buf ad = a.data_ptr(), bd = b.data_ptr(), yd = y.data_ptr();
        tape->record([=]() {
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t ia = a_scalar ? 0 : i;
                const std::size_t ib = b_scalar ? 0 : i;
                const double g = (*go)[i];
                if (ga) (*ga)[ia] += da((*ad)[ia], (*bd)[ib], (*yd)[i], g);
                if (gb) (*gb)[ib] += db((*ad)[ia], (*bd)[ib], (*yd)[i], g);
            }
        });
    }
    return y;
}

template <class FwdF, class DxF>
Tensor unary_ew(const Tensor& x, const char* name, FwdF fwd, DxF dx) {
    const std::size_t n = x.numel();
    std::vector<double> out(n);
    const auto& xv = x.values();
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(xv[i], i);
    Tensor y(x.shape(), std::move(out));

    Tape* tape = Tape::active();
    if (tape && grad_wanted(x)) {
        y.set_requires_grad(true);
        Buf gx = x.grad_ptr();
        Buf go = y.grad_ptr();
        Buf xd = x.data_ptr(), yd = y.data_ptr();
        tape->record([=]() {
            for (std::size_t i = 0; i < n; ++i) {
                (*gx)[i] += dx((*xd)[i], (*yd)[i], (*go)[i]);
            }
        });
    }
    (void)name;
    return y;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_ew(
        a, b, "add", [](double x, double y, std::size_t) { return x + y; },
        [](double, double, double, double g) { return g; },
        [](double, double, double, double g) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_ew(
        a, b, "sub", [](double x, double y, std::size_t) { return x - y; },
        [](double, double, double, double g) { return g; },
        [](double, double, double, double g) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_ew(
        a, b, "mul", [](double x, double y, std::size_t) { return x * y; },
        [](double, double y, double, double g) { return g * y; },
        [](double x, double, double, double g) { return g * x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_ew(
        a, b, "div",
        [](double x, double y, std::size_t i) {
            if (y == 0.0) {
                throw DomainError("div: zero denominator at index " + std::to_string(i));
            }
            return x / y;
        },
        [](double, double y, double, double g) { return g / y; },
        [](double x, double y, double, double g) { return -g * x / (y * y); });
}

Tensor emin(const Tensor& a, const Tensor& b) {
    return binary_ew(
        a, b, "min", [](double x, double y, std::size_t) { return x <= y ? x : y; },
        [](double x, double y, double, double g) { return x <= y ? g : 0.0; },
        [](double x, double y, double, double g) { return x <= y ? 0.0 : g; });
}

Tensor emax(const Tensor& a, const Tensor& b) {
    return binary_ew(
        a, b, "max", [](double x, double y, std::size_t) { return x >= y ? x : y; },
        [](double x, double y, double, double g) { return x >= y ? g : 0.0; },
        [](double x, double y, double, double g) { return x >= y ? 0.0 : g; });
}

Tensor add(const Tensor& a, double b) { return add(a, Tensor::scalar(b)); }
Tensor sub(const Tensor& a, double b) { return sub(a, Tensor::scalar(b)); }
Tensor sub(double a, const Tensor& b) { return sub(Tensor::scalar(a), b); }
Tensor mul(const Tensor& a, double b) { return mul(a, Tensor::scalar(b)); }
Tensor div(const Tensor& a, double b) { return div(a, Tensor::scalar(b)); }
Tensor div(double a, const Tensor& b) { return div(Tensor::scalar(a), b); }
Tensor emin(const Tensor& a, double b) { return emin(a, Tensor::scalar(b)); }
Tensor emax(const Tensor& a, double b) { return emax(a, Tensor::scalar(b)); }

Tensor sigmoid(const Tensor& x) {
    return unary_ew(
        x, "sigmoid",
        [](double v, std::size_t) {
            // Evaluate through exp(-|v|) so neither branch overflows.
            if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double y, double g) { return g * y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
    return unary_ew(
        x, "tanh", [](double v, std::size_t) { return std::tanh(v); },
        [](double, double y, double g) { return g * (1.0 - y * y); });
}

Tensor artanh(const Tensor& x) {
    return unary_ew(
        x, "artanh",
        [](double v, std::size_t i) {
            if (!(v > -1.0 && v < 1.0)) {
                throw DomainError("artanh: input " + std::to_string(v) + " at index " +
                                  std::to_string(i) + " outside (-1, 1)");
            }
            return std::atanh(v);
        },
        [](double v, double, double g) { return g / (1.0 - v * v); });
}

Tensor square(const Tensor& x) {
    return unary_ew(
        x, "square", [](double v, std::size_t) { return v * v; },
        [](double v, double, double g) { return 2.0 * v * g; });
}

Tensor sqrt(const Tensor& x) {
    return unary_ew(
        x, "sqrt",
        [](double v, std::size_t i) {
            if (v < 0.0) {
                throw DomainError("sqrt: negative input " + std::to_string(v) + " at index " +
                                  std::to_string(i));
            }
            return std::sqrt(v);
        },
        // A zero upstream gradient contributes zero even where the local
        // derivative is unbounded (x == 0); masked graph paths rely on this.
        [](double, double y, double g) { return g == 0.0 ? 0.0 : g / (2.0 * y); });
}

Tensor log(const Tensor& x) {
    return unary_ew(
        x, "log",
        [](double v, std::size_t i) {
            if (v <= 0.0) {
                throw DomainError("log: non-positive input " + std::to_string(v) + " at index " +
                                  std::to_string(i));
            }
            return std::log(v);
        },
        [](double v, double, double g) { return g / v; });
}

Tensor exp(const Tensor& x) {
    return unary_ew(
        x, "exp", [](double v, std::size_t) { return std::exp(v); },
        [](double, double y, double g) { return g * y; });
}

Tensor neg(const Tensor& x) {
    return unary_ew(
        x, "neg", [](double v, std::size_t) { return -v; },
        [](double, double, double g) { return -g; });
}

namespace {

void check_axis(const Tensor& x, std::size_t axis) {
    if (axis >= x.ndim()) {
        throw DimensionError("reduce: axis " + std::to_string(axis) + " invalid for shape " +
                             shape_str(x.shape()));
    }
    if (x.ndim() != 2) {
        throw DimensionError("axis reductions support 2-D tensors, got " + shape_str(x.shape()));
    }
}

}  // namespace

Tensor reduce_sum(const Tensor& x, std::optional<std::size_t> axis) {
    const auto& xv = x.values();
    if (!axis) {
        double acc = 0.0;
        for (double v : xv) acc += v;  // fixed left-to-right order
        Tensor y = Tensor::scalar(acc);
        Tape* tape = Tape::active();
        if (tape && grad_wanted(x)) {
            y.set_requires_grad(true);
            Buf gx = x.grad_ptr();
            Buf go = y.grad_ptr();
            const std::size_t n = x.numel();
            tape->record([=]() {
                const double g = (*go)[0];
                for (std::size_t i = 0; i < n; ++i) (*gx)[i] += g;
            });
        }
        return y;
    }
    check_axis(x, *axis);
    const std::size_t m = x.rows(), n = x.cols();
    const bool over_cols = (*axis == 1);
    const std::size_t out_n = over_cols ? m : n;
    std::vector<double> out(out_n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out[over_cols ? i : j] += xv[i * n + j];
        }
    }
    Tensor y(Shape{out_n}, std::move(out));
    Tape* tape = Tape::active();
    if (tape && grad_wanted(x)) {
        y.set_requires_grad(true);
        Buf gx = x.grad_ptr();
        Buf go = y.grad_ptr();
        tape->record([=]() {
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    (*gx)[i * n + j] += (*go)[over_cols ? i : j];
                }
            }
        });
    }
    return y;
}

Tensor reduce_mean(const Tensor& x, std::optional<std::size_t> axis) {
    const std::size_t count = !axis ? x.numel() : (check_axis(x, *axis), *axis == 1 ? x.cols() : x.rows());
    return mul(reduce_sum(x, axis), 1.0 / static_cast<double>(count));
}

Tensor reduce_max(const Tensor& x, std::optional<std::size_t> axis) {
    const auto& xv = x.values();
    if (!axis) {
        std::size_t arg = 0;
        for (std::size_t i = 1; i < xv.size(); ++i) {
            if (xv[i] > xv[arg]) arg = i;  // ties keep the first argmax
        }
        Tensor y = Tensor::scalar(xv[arg]);
        Tape* tape = Tape::active();
        if (tape && grad_wanted(x)) {
            y.set_requires_grad(true);
            Buf gx = x.grad_ptr();
            Buf go = y.grad_ptr();
            tape->record([=]() { (*gx)[arg] += (*go)[0]; });
        }
        return y;
    }
    check_axis(x, *axis);
    const std::size_t m = x.rows(), n = x.cols();
    const bool over_cols = (*axis == 1);
    const std::size_t out_n = over_cols ? m : n;
    std::vector<double> out(out_n);
    std::vector<std::size_t> args(out_n);
    for (std::size_t k = 0; k < out_n; ++k) {
        const std::size_t extent = over_cols ? n : m;
        std::size_t arg = 0;
        double best = over_cols ? xv[k * n] : xv[k];
        for (std::size_t t = 1; t < extent; ++t) {
            const double v = over_cols ? xv[k * n + t] : xv[t * n + k];
            if (v > best) {
                best = v;
                arg = t;
            }
        }
        out[k] = best;
        args[k] = arg;
    }
    Tensor y(Shape{out_n}, std::move(out));
    Tape* tape = Tape::active();
    if (tape && grad_wanted(x)) {
        y.set_requires_grad(true);
        Buf gx = x.grad_ptr();
        Buf go = y.grad_ptr();
        tape->record([=]() {
            for (std::size_t k = 0; k < out_n; ++k) {
                const std::size_t idx = over_cols ? k * n + args[k] : args[k] * n + k;
                (*gx)[idx] += (*go)[k];
            }
        });
    }
    return y;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.rows()) {
        throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()));
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t t = 0; t < k; ++t) {
            const double aval = av[i * k + t];
            if (aval == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                out[i * n + j] += aval * bv[t * n + j];
            }
        }
    }
    Tensor y(Shape{m, n}, std::move(out));
    Tape* tape = Tape::active();
    if (tape && (grad_wanted(a) || grad_wanted(b))) {
        y.set_requires_grad(true);
        Buf ga = grad_wanted(a) ? a.grad_ptr() : nullptr;
        Buf gb = grad_wanted(b) ? b.grad_ptr() : nullptr;
        Buf go = y.grad_ptr();
        Buf ad = a.data_ptr(), bd = b.data_ptr();
        tape->record([=]() {
            if (ga) {
                // dA = G * B^T
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t t = 0; t < k; ++t) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < n; ++j) {
                            acc += (*go)[i * n + j] * (*bd)[t * n + j];
                        }
                        (*ga)[i * k + t] += acc;
                    }
                }
            }
            if (gb) {
                // dB = A^T * G
                for (std::size_t t = 0; t < k; ++t) {
                    for (std::size_t j = 0; j < n; ++j) {
                        double acc = 0.0;
                        for (std::size_t i = 0; i < m; ++i) {
                            acc += (*ad)[i * k + t] * (*go)[i * n + j];
                        }
                        (*gb)[t * n + j] += acc;
                    }
                }
            }
        });
    }
    return y;
}

Tensor transpose(const Tensor& x) {
    const std::size_t m = x.rows(), n = x.cols();
    const auto& xv = x.values();
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = xv[i * n + j];
    }
    Tensor y(Shape{n, m}, std::move(out));
    Tape* tape = Tape::active();
    if (tape && grad_wanted(x)) {
        y.set_requires_grad(true);
        Buf gx = x.grad_ptr();
        Buf go = y.grad_ptr();
        tape->record([=]() {
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) (*gx)[i * n + j] += (*go)[j * m + i];
            }
        });
    }
    return y;
}

Tensor reshape(const Tensor& x, Shape new_shape) {
    if (shape_numel(new_shape) != x.numel()) {
        throw DimensionError("reshape: " + shape_str(x.shape()) + " to " + shape_str(new_shape) +
                             " changes element count");
    }
    Tensor y(std::move(new_shape), x.values());
    Tape* tape = Tape::active();
    if (tape && grad_wanted(x)) {
        y.set_requires_grad(true);
        Buf gx = x.grad_ptr();
        Buf go = y.grad_ptr();
        const std::size_t n = x.numel();
        tape->record([=]() {
            for (std::size_t i = 0; i < n; ++i) (*gx)[i] += (*go)[i];
        });
    }
    return y;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.rows() != b.rows()) {
        throw DimensionError("concat_cols: row counts differ, " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
    const std::size_t m = a.rows(), na = a.cols(), nb = b.cols();
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(m * (na + nb));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < na; ++j) out[i * (na + nb) + j] = av[i * na + j];
        for (std::size_t j = 0; j < nb; ++j) out[i * (na + nb) + na + j] = bv[i * nb + j];
    }
    Tensor y(Shape{m, na + nb}, std::move(out));
    Tape* tape = Tape::active();
    if (tape && (grad_wanted(a) || grad_wanted(b))) {
        y.set_requires_grad(true);
        Buf ga = grad_wanted(a) ? a.grad_ptr() : nullptr;
        Buf gb = grad_wanted(b) ? b.grad_ptr() : nullptr;
        Buf go = y.grad_ptr();
        tape->record([=]() {
            for (std::size_t i = 0; i < m; ++i) {
                if (ga) {
                    for (std::size_t j = 0; j < na; ++j) {
                        (*ga)[i * na + j] += (*go)[i * (na + nb) + j];
                    }
                }
                if (gb) {
                    for (std::size_t j = 0; j < nb; ++j) {
                        (*gb)[i * nb + j] += (*go)[i * (na + nb) + na + j];
                    }
                }
            }
        });
    }
    return y;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ValidationError("concat_rows: empty input");
    std::size_t cols = 0, total_rows = 0;
    for (const auto& p : parts) {
        const std::size_t pc = p.ndim() == 1 ? p.numel() : p.cols();
        const std::size_t pr = p.ndim() == 1 ? 1 : p.rows();
        if (cols == 0) cols = pc;
        if (pc != cols) {
            throw DimensionError("concat_rows: column widths differ, " + std::to_string(cols) +
                                 " vs " + std::to_string(pc));
        }
        total_rows += pr;
    }
    std::vector<double> out;
    out.reserve(total_rows * cols);
    for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
    Tensor y(Shape{total_rows, cols}, std::move(out));

    Tape* tape = Tape::active();
    bool any = false;
    for (const auto& p : parts) any = any || grad_wanted(p);
    if (tape && any) {
        y.set_requires_grad(true);
        struct Slot {
            Buf grad;
            std::size_t offset;
            std::size_t count;
        };
        std::vector<Slot> slots;
        std::size_t offset = 0;
        for (const auto& p : parts) {
            if (grad_wanted(p)) slots.push_back({p.grad_ptr(), offset, p.numel()});
            offset += p.numel();
        }
        Buf go = y.grad_ptr();
        tape->record([=]() {
            for (const auto& s : slots) {
                for (std::size_t i = 0; i < s.count; ++i) (*s.grad)[i] += (*go)[s.offset + i];
            }
        });
    }
    return y;
}

Tensor repeat_rows(const Tensor& x, std::size_t times) {
    const std::size_t m = x.rows(), n = x.cols();
    const auto& xv = x.values();
    std::vector<double> out(times * m * n);
    for (std::size_t r = 0; r < times; ++r) {
        std::copy(xv.begin(), xv.end(), out.begin() + static_cast<std::ptrdiff_t>(r * m * n));
    }
    Tensor y(Shape{times * m, n}, std::move(out));
    Tape* tape = Tape::active();
    if (tape && grad_wanted(x)) {
        y.set_requires_grad(true);
        Buf gx = x.grad_ptr();
        Buf go = y.grad_ptr();
        tape->record([=]() {
            for (std::size_t r = 0; r < times; ++r) {
                for (std::size_t i = 0; i < m * n; ++i) (*gx)[i] += (*go)[r * m * n + i];
            }
        });
    }
    return y;
}

Tensor repeat_each_row(const Tensor& x, std::size_t times) {
    const std::size_t m = x.rows(), n = x.cols();
    const auto& xv = x.values();
    std::vector<double> out(times * m * n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t r = 0; r < times; ++r) {
            std::copy(xv.begin() + static_cast<std::ptrdiff_t>(i * n),
                      xv.begin() + static_cast<std::ptrdiff_t>((i + 1) * n),
                      out.begin() + static_cast<std::ptrdiff_t>((i * times + r) * n));
        }
    }
    Tensor y(Shape{times * m, n}, std::move(out));
    Tape* tape = Tape::active();
    if (tape && grad_wanted(x)) {
        y.set_requires_grad(true);
        Buf gx = x.grad_ptr();
        Buf go = y.grad_ptr();
        tape->record([=]() {
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t r = 0; r < times; ++r) {
                    for (std::size_t j = 0; j < n; ++j) {
                        (*gx)[i * n + j] += (*go)[(i * times + r) * n + j];
                    }
                }
            }
        });
    }
    return y;
}

namespace {

enum class Bcast { Row, Col };
enum class BcastOp { Add, Mul };

Tensor broadcast_op(const Tensor& mat, const Tensor& vec, Bcast dir, BcastOp op, const char* name) {
    const std::size_t m = mat.rows(), n = mat.cols();
    const std::size_t want = dir == Bcast::Row ? n : m;
    if (vec.ndim() != 1 || vec.numel() != want) {
        throw DimensionError(std::string(name) + ": vector " + shape_str(vec.shape()) +
                             " does not match matrix " + shape_str(mat.shape()));
    }
    const auto& mv = mat.values();
    const auto& vv = vec.values();
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double v = vv[dir == Bcast::Row ? j : i];
            out[i * n + j] = op == BcastOp::Add ? mv[i * n + j] + v : mv[i * n + j] * v;
        }
    }
    Tensor y(Shape{m, n}, std::move(out));
    Tape* tape = Tape::active();
    if (tape && (grad_wanted(mat) || grad_wanted(vec))) {
        y.set_requires_grad(true);
        Buf gm = grad_wanted(mat) ? mat.grad_ptr() : nullptr;
        Buf gv = grad_wanted(vec) ? vec.grad_ptr() : nullptr;
        Buf go = y.grad_ptr();
        Buf md = mat.data_ptr(), vd = vec.data_ptr();
        tape->record([=]() {
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    const std::size_t vi = dir == Bcast::Row ? j : i;
                    const double g = (*go)[i * n + j];
                    if (op == BcastOp::Add) {
                        if (gm) (*gm)[i * n + j] += g;
                        if (gv) (*gv)[vi] += g;
                    } else {
                        if (gm) (*gm)[i * n + j] += g * (*vd)[vi];
                        if (gv) (*gv)[vi] += g * (*md)[i * n + j];
                    }
                }
            }
        });
    }
    return y;
}

}  // namespace

Tensor add_rowvec(const Tensor& mat, const Tensor& vec) {
    return broadcast_op(mat, vec, Bcast::Row, BcastOp::Add, "add_rowvec");
}
Tensor add_colvec(const Tensor& mat, const Tensor& vec) {
    return broadcast_op(mat, vec, Bcast::Col, BcastOp::Add, "add_colvec");
}
Tensor mul_rowvec(const Tensor& mat, const Tensor& vec) {
    return broadcast_op(mat, vec, Bcast::Row, BcastOp::Mul, "mul_rowvec");
}
Tensor mul_colvec(const Tensor& mat, const Tensor& vec) {
    return broadcast_op(mat, vec, Bcast::Col, BcastOp::Mul, "mul_colvec");
}

Tensor softmax_rows(const Tensor& x) {
    const std::size_t m = x.rows(), n = x.cols();
    const auto& xv = x.values();
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i) {
        double mx = xv[i * n];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xv[i * n + j]);
        check_finite(mx, "softmax_rows", i * n);
        double denom = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            out[i * n + j] = std::exp(xv[i * n + j] - mx);
            denom += out[i * n + j];
        }
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= denom;
    }
    Tensor y(Shape{m, n}, std::move(out));
    Tape* tape = Tape::active();
    if (tape && grad_wanted(x)) {
        y.set_requires_grad(true);
        Buf gx = x.grad_ptr();
        Buf go = y.grad_ptr();
        Buf yd = y.data_ptr();
        tape->record([=]() {
            // dx = (g - <g, y>_row) * y
            for (std::size_t i = 0; i < m; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) dot += (*go)[i * n + j] * (*yd)[i * n + j];
                for (std::size_t j = 0; j < n; ++j) {
                    (*gx)[i * n + j] += ((*go)[i * n + j] - dot) * (*yd)[i * n + j];
                }
            }
        });
    }
    return y;
}

Tensor logsumexp(const Tensor& x, std::size_t axis) {
    check_axis(x, axis);
    const std::size_t m = x.rows(), n = x.cols();
    const bool over_cols = (axis == 1);
    const std::size_t out_n = over_cols ? m : n;
    const std::size_t extent = over_cols ? n : m;
    const auto& xv = x.values();
    auto at = [&](std::size_t k, std::size_t t) { return over_cols ? xv[k * n + t] : xv[t * n + k]; };
    std::vector<double> out(out_n);
    for (std::size_t k = 0; k < out_n; ++k) {
        double mx = at(k, 0);
        for (std::size_t t = 1; t < extent; ++t) mx = std::max(mx, at(k, t));
        double acc = 0.0;
        for (std::size_t t = 0; t < extent; ++t) acc += std::exp(at(k, t) - mx);
        out[k] = std::log(acc) + mx;
    }
    Tensor y(Shape{out_n}, std::move(out));
    Tape* tape = Tape::active();
    if (tape && grad_wanted(x)) {
        y.set_requires_grad(true);
        Buf gx = x.grad_ptr();
        Buf go = y.grad_ptr();
        Buf xd = x.data_ptr(), yd = y.data_ptr();
        tape->record([=]() {
            // d/dx_t LSE = softmax_t
            for (std::size_t k = 0; k < out_n; ++k) {
                const double g = (*go)[k];
                if (g == 0.0) continue;
                for (std::size_t t = 0; t < extent; ++t) {
                    const std::size_t idx = over_cols ? k * n + t : t * n + k;
                    (*gx)[idx] += g * std::exp((*xd)[idx] - (*yd)[k]);
                }
            }
        });
    }
    return y;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    if (x.ndim() < 1) throw DimensionError("layer_norm: rank-0 input");
    if (eps <= 0.0) throw ValidationError("layer_norm: eps must be positive");
    const std::size_t d = x.shape().back();
    if (gain.ndim() != 1 || gain.numel() != d || bias.ndim() != 1 || bias.numel() != d) {
        throw DimensionError("layer_norm: gain/bias width must equal last extent " +
                             std::to_string(d) + ", got " + shape_str(gain.shape()) + " and " +
                             shape_str(bias.shape()));
    }
    const std::size_t rows = x.numel() / d;
    const auto& xv = x.values();
    const auto& gv = gain.values();
    const auto& bv = bias.values();
    std::vector<double> out(x.numel());
    std::vector<double> xhat(x.numel());
    std::vector<double> inv_std(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += xv[r * d + j];
        mean /= static_cast<double>(d);
        double var = 0.0;  // population variance
        for (std::size_t j = 0; j < d; ++j) {
            const double c = xv[r * d + j] - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < d; ++j) {
            xhat[r * d + j] = (xv[r * d + j] - mean) * inv_std[r];
            out[r * d + j] = gv[j] * xhat[r * d + j] + bv[j];
        }
    }
    Tensor y(x.shape(), std::move(out));
    Tape* tape = Tape::active();
    if (tape && (grad_wanted(x) || grad_wanted(gain) || grad_wanted(bias))) {
        y.set_requires_grad(true);
        Buf gx = grad_wanted(x) ? x.grad_ptr() : nullptr;
        Buf gg = grad_wanted(gain) ? gain.grad_ptr() : nullptr;
        Buf gb = grad_wanted(bias) ? bias.grad_ptr() : nullptr;
        Buf go = y.grad_ptr();
        Buf gd = gain.data_ptr();
        auto xh = std::make_shared<std::vector<double>>(std::move(xhat));
        auto is = std::make_shared<std::vector<double>>(std::move(inv_std));
        tape->record([=]() {
            for (std::size_t r = 0; r < rows; ++r) {
                double mean_h = 0.0, mean_hx = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double h = (*go)[r * d + j] * (*gd)[j];
                    mean_h += h;
                    mean_hx += h * (*xh)[r * d + j];
                }
                mean_h /= static_cast<double>(d);
                mean_hx /= static_cast<double>(d);
                for (std::size_t j = 0; j < d; ++j) {
                    const double g = (*go)[r * d + j];
                    const double h = g * (*gd)[j];
                    if (gx) {
                        (*gx)[r * d + j] +=
                            (h - mean_h - (*xh)[r * d + j] * mean_hx) * (*is)[r];
                    }
                    if (gg) (*gg)[j] += g * (*xh)[r * d + j];
                    if (gb) (*gb)[j] += g;
                }
            }
        });
    }
    return y;
}

Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int>& targets,
                          const Tensor* ignore_mask) {
    const std::size_t m = logits.rows(), n = logits.cols();
    if (targets.size() != m) {
        throw DimensionError("cross_entropy_rows: " + std::to_string(targets.size()) +
                             " targets for " + std::to_string(m) + " rows");
    }
    if (ignore_mask) check_same_shape(logits, *ignore_mask, "cross_entropy_rows mask");
    const auto& lv = logits.values();
    const double* mask = ignore_mask ? ignore_mask->values().data() : nullptr;
    auto masked = [&](std::size_t i, std::size_t j) { return mask && mask[i * n + j] != 0.0; };

    double total = 0.0;
    std::vector<double> row_lse(m);
    for (std::size_t i = 0; i < m; ++i) {
        const int t = targets[i];
        if (t < 0 || static_cast<std::size_t>(t) >= n) {
            throw IndexError("cross_entropy_rows: target " + std::to_string(t) + " at row " +
                             std::to_string(i) + " outside [0, " + std::to_string(n) + ")");
        }
        if (masked(i, static_cast<std::size_t>(t))) {
            throw ValidationError("cross_entropy_rows: target column " + std::to_string(t) +
                                  " of row " + std::to_string(i) + " is masked");
        }
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (!masked(i, j)) mx = std::max(mx, lv[i * n + j]);
        }
        check_finite(mx, "cross_entropy_rows", i * n);
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (!masked(i, j)) acc += std::exp(lv[i * n + j] - mx);
        }
        row_lse[i] = std::log(acc) + mx;
        total += row_lse[i] - lv[i * n + static_cast<std::size_t>(t)];
    }
    Tensor y = Tensor::scalar(total / static_cast<double>(m));

    Tape* tape = Tape::active();
    if (tape && grad_wanted(logits)) {
        y.set_requires_grad(true);
        Buf gl = logits.grad_ptr();
        Buf go = y.grad_ptr();
        Buf ld = logits.data_ptr();
        Buf md = ignore_mask ? ignore_mask->data_ptr() : nullptr;
        auto lse = std::make_shared<std::vector<double>>(std::move(row_lse));
        auto tgt = std::make_shared<std::vector<int>>(targets);
        tape->record([=]() {
            const double g = (*go)[0] / static_cast<double>(m);
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    if (md && (*md)[i * n + j] != 0.0) continue;
                    const double p = std::exp((*ld)[i * n + j] - (*lse)[i]);
                    const double hit = (static_cast<std::size_t>((*tgt)[i]) == j) ? 1.0 : 0.0;
                    (*gl)[i * n + j] += g * (p - hit);
                }
            }
        });
    }
    return y;
}

}  // namespace ops

}  // namespace hyperot
