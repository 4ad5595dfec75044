#pragma once

#include <functional>

#include "aidp/tensor.hpp"

namespace aidp {

/// Central-difference gradient of a scalar-valued map, one coordinate at a
/// time: (f(x + h e_i) - f(x - h e_i)) / 2h. Independent of the tape; used
/// as the reference oracle for every differentiable primitive.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f,
                                  const Tensor& x, double h);

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). The floor turns the check
/// absolute for near-zero coordinates where relative error is meaningless.
double max_relative_error(const Tensor& a, const Tensor& b, double floor = 1e-4);

}  // namespace aidp
