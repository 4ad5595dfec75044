#include "aidp/optim.hpp"

namespace aidp {

void sgd_step(Tensor& param, const std::vector<double>& grad, const SgdConfig& cfg,
              std::vector<double>& velocity) {
    if (grad.size() != param.size())
        throw ShapeError("sgd_step: gradient size " + std::to_string(grad.size()) +
                         " != parameter size " + std::to_string(param.size()));
    if (velocity.empty()) velocity.assign(param.size(), 0.0);
    if (velocity.size() != param.size())
        throw ShapeError("sgd_step: velocity size mismatch");
    for (std::size_t i = 0; i < param.size(); ++i) {
        double g = grad[i] + cfg.weight_decay * param[i];
        velocity[i] = cfg.momentum * velocity[i] + g;
        param[i] -= cfg.lr * velocity[i];
    }
}

void sgd_step(const std::string& name, Tensor& param, const std::vector<double>& grad,
              const SgdConfig& cfg, SgdState& state) {
    sgd_step(param, grad, cfg, state.velocity[name]);
}

}  // namespace aidp
