#include "aidp/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace aidp {

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f,
                                  const Tensor& x, double h) {
    if (!(h > 0.0)) throw DomainError("finite_difference_gradient: h must be > 0");
    Tensor probe = x;
    Tensor g = Tensor::uninit(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double x0 = x[i];
        probe[i] = x0 + h;
        const double fp = f(probe);
        probe[i] = x0 - h;
        const double fm = f(probe);
        probe[i] = x0;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

double max_relative_error(const Tensor& a, const Tensor& b, double floor) {
    if (!a.same_shape(b))
        throw ShapeError("max_relative_error: shape mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

}  // namespace aidp
