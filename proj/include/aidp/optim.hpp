#pragma once

#include <map>
#include <string>
#include <vector>

#include "aidp/tensor.hpp"

namespace aidp {

struct SgdConfig {
    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 2e-4;
};

/// Per-parameter velocity buffers, keyed by parameter name, zero-initialized
/// on first use.
struct SgdState {
    std::map<std::string, std::vector<double>> velocity;
};

/// One SGD-with-momentum update on a single parameter:
///   g <- g + wd * theta;  v <- m * v + g;  theta <- theta - lr * v
void sgd_step(Tensor& param, const std::vector<double>& grad, const SgdConfig& cfg,
              std::vector<double>& velocity);

void sgd_step(const std::string& name, Tensor& param, const std::vector<double>& grad,
              const SgdConfig& cfg, SgdState& state);

}  // namespace aidp
