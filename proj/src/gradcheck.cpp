#include "hyperot/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "hyperot/errors.hpp"

namespace hyperot {

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point, double h) {
    // Analytic gradient via one taped forward/backward.
    Tensor x(point.shape(), point.values(), true);
    std::vector<double> analytic;
    {
        Tape tape;
        Tape::Scope scope(tape);
        Tensor loss = f(x);
        if (!std::isfinite(loss.value())) throw NumericError("grad_check: non-finite loss value");
        tape.backward(loss);
        analytic = x.grad();
    }

    // Numeric gradient, no tape active.
    const std::size_t n = point.numel();
    double worst = 0.0;
    std::vector<double> bumped = point.values();
    for (std::size_t i = 0; i < n; ++i) {
        const double saved = bumped[i];
        bumped[i] = saved + h;
        const double fp = f(Tensor(point.shape(), bumped)).value();
        bumped[i] = saved - h;
        const double fm = f(Tensor(point.shape(), bumped)).value();
        bumped[i] = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NumericError("grad_check: non-finite intermediate at coordinate " +
                               std::to_string(i));
        }
        const double numeric = (fp - fm) / (2.0 * h);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-12});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

}  // namespace hyperot
