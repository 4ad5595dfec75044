#include "aidp/purifier.hpp"

namespace aidp {

void PurifyConfig::validate() const {
    if (epsilon < 0.0) throw DomainError("purify: epsilon must be >= 0");
    if (alpha < 0.0) throw DomainError("purify: alpha must be >= 0");
    if (iterations < 0) throw DomainError("purify: iterations must be >= 0");
}

Tensor purify(const DiscLogitFn& disc_logit, const Tensor& x, const PurifyConfig& cfg,
              PurifyObserver* observer) {
    cfg.validate();
    Tensor cur = x;
    for (int it = 0; it < cfg.iterations; ++it) {
        Tape tape;
        Var xv = tape.leaf(cur, true);
        Var z = disc_logit(tape, xv);
        Var score = cfg.use_logit_gradient ? z : ops::sigmoid(z);
        tape.backward(ops::sum(score));
        const auto& g = xv.grad();

        Tensor step = Tensor::uninit(cur.shape());
        Tensor pre_clip = Tensor::uninit(cur.shape());
        for (std::size_t i = 0; i < cur.size(); ++i) {
            step[i] = -cfg.alpha * sign0(g[i]);
            pre_clip[i] = cur[i] + step[i];
        }
        // Ball clip first, unit clip second; the order is part of the contract.
        Tensor post = clip_unit(clip_to_ball(pre_clip, x, cfg.epsilon));
        if (observer) observer->on_step(it, step, pre_clip, post);
        cur = std::move(post);
    }
    return cur;
}

Tensor purify(const ClassifierModel& clf, const DiscriminatorModel& disc, const Tensor& x,
              const PurifyConfig& cfg, PurifyObserver* observer) {
    return purify(disc_logit_fn(clf, disc), x, cfg, observer);
}

}  // namespace aidp
