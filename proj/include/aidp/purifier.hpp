#pragma once

#include "aidp/attacks.hpp"
#include "aidp/models.hpp"

namespace aidp {

struct PurifyConfig {
    double epsilon = 8.0 / 255.0;  // purification radius around the input
    double alpha = 2.0 / 255.0;    // per-iteration step
    int iterations = 10;
    // Descend the pre-sigmoid logit instead of the probability. Off by
    // default: the iteration moves against the gradient of p_adv itself.
    bool use_logit_gradient = false;

    void validate() const;
};

/// Test/diagnostic hook. `step` is the exact movement applied before the
/// clips (each coordinate is -alpha, 0, or +alpha by construction);
/// pre_clip and post_clip are the iterate before and after them.
struct PurifyObserver {
    virtual ~PurifyObserver() = default;
    virtual void on_step(int iteration, const Tensor& step, const Tensor& pre_clip,
                         const Tensor& post_clip) = 0;
};

/// Iterative sign-gradient purification:
///   x_pur <- x_pur - alpha * sign(grad p_adv(x_pur))
///   x_pur <- clip(x_pur, x - eps, x + eps)
///   x_pur <- clip(x_pur, 0, 1)
/// applied identically to clean and adversarial inputs. Deterministic.
Tensor purify(const DiscLogitFn& disc_logit, const Tensor& x, const PurifyConfig& cfg,
              PurifyObserver* observer = nullptr);

Tensor purify(const ClassifierModel& clf, const DiscriminatorModel& disc, const Tensor& x,
              const PurifyConfig& cfg, PurifyObserver* observer = nullptr);

}  // namespace aidp
