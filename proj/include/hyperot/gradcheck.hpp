#pragma once

#include <functional>

#include "hyperot/tensor.hpp"

namespace hyperot {

// Compares the reverse-mode gradient of a scalar-valued function against
// central finite differences (f(x + h e_i) - f(x - h e_i)) / (2h), coordinate
// by coordinate. Returns the worst relative error, with denominator
// max(|analytic|, |numeric|, 1e-12). The caller keeps `point` away from
// non-smooth spots (min/max ties, ball boundary, artanh limits).
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point,
                  double h = 1e-6);

}  // namespace hyperot
