#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "aidp/models.hpp"
#include "aidp/tape.hpp"

namespace aidp {

enum class AttackKind : int { fgsm, pgd, mim, deepfool, cw_l2, aux_aware_pgd };

const char* attack_kind_name(AttackKind k);
AttackKind attack_kind_from_name(const std::string& s);

struct AttackConfig {
    AttackKind kind = AttackKind::pgd;
    double epsilon = 8.0 / 255.0;   // L-inf radius in pixel units
    double step_size = 1.0 / 255.0; // per-iteration L-inf step
    int iterations = 40;
    bool random_start = true;
    double mim_decay = 1.0;          // momentum factor mu
    double lambda = 1.0;             // aux_aware_pgd trade-off
    double cw_constant = 1.0;        // penalty weight c
    double cw_lr = 0.05;
    double cw_kappa = 0.0;           // confidence margin
    double deepfool_overshoot = 0.02;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Kind-appropriate defaults: 40 iterations for the sign-step family, 50 for
/// deepfool, 100 optimizer steps for cw_l2.
AttackConfig default_attack(AttackKind kind);

/// Differentiable logits builder: registers the input's compute graph on the
/// tape and returns the [N,K] logits node. Models and test stand-ins both
/// fit this shape, so attacks never depend on a concrete network type.
using LogitsFn = std::function<Var(Tape&, Var)>;

/// Pre-sigmoid per-example discriminator output [N] as a function of the
/// input batch.
using DiscLogitFn = std::function<Var(Tape&, Var)>;

struct AttackResult {
    Tensor x_adv;
    // Per-example failure flags; filled by cw_l2 (no misclassifying iterate
    // found) and deepfool (boundary never crossed), empty otherwise.
    std::vector<bool> failed;
};

/// Single sign step: clip01(x + eps * sign(grad_x CE)).
Tensor fgsm(const LogitsFn& logits, const Tensor& x, const std::vector<int>& y,
            double epsilon);

/// Projected sign-gradient ascent on the cross-entropy, optional uniform
/// random start, ball-then-unit clipping each iteration.
Tensor pgd(const LogitsFn& logits, const Tensor& x, const std::vector<int>& y,
           const AttackConfig& cfg);

/// Momentum iterative method: g <- mu*g + grad/||grad||_1, step by sign(g).
Tensor mim(const LogitsFn& logits, const Tensor& x, const std::vector<int>& y,
           const AttackConfig& cfg);

/// Iterative linearization toward the nearest boundary over the top-3
/// competing classes; final perturbation scaled by (1+overshoot), then
/// clipped into the epsilon ball and the unit box.
AttackResult deepfool(const LogitsFn& logits, const Tensor& x, const std::vector<int>& y,
                      const AttackConfig& cfg);

/// Fixed-constant penalty form of the L2 attack: gradient descent on
/// ||x'-x||^2 + c * max(z_y - max_{j!=y} z_j, -kappa) with box clamping.
/// Returns the best misclassifying iterate, else x with the failure flag.
AttackResult cw_l2(const LogitsFn& logits, const Tensor& x, const std::vector<int>& y,
                   const AttackConfig& cfg);

/// PGD on the combined objective L_C(x,y) - lambda * L_D(D(x), t=1).
Tensor aux_aware_pgd(const LogitsFn& logits, const DiscLogitFn& disc_logit, const Tensor& x,
                     const std::vector<int>& y, const AttackConfig& cfg);

/// Dispatch on cfg.kind. disc may be null except for aux_aware_pgd.
AttackResult run_attack(const ClassifierModel& clf, const DiscriminatorModel* disc,
                        const Tensor& x, const std::vector<int>& y, const AttackConfig& cfg);

/// Adapters binding frozen models to the functional attack interfaces. The
/// referenced models must outlive the returned callable.
LogitsFn classifier_logits_fn(const ClassifierModel& clf);
DiscLogitFn disc_logit_fn(const ClassifierModel& clf, const DiscriminatorModel& disc);

/// Elementwise median(v, center - radius, center + radius).
Tensor clip_to_ball(const Tensor& v, const Tensor& center, double radius);
/// Elementwise clamp into [0,1].
Tensor clip_unit(const Tensor& v);

/// On-disk adversarial batch: "AIDA" magic, u32 version, extents, labels,
/// raw f64 pixels, per-example failure flags.
struct AdversarialBatch {
    Tensor x_adv;
    std::vector<int> labels;
    std::vector<bool> failed;
};

void save_adversarial_batch(const AdversarialBatch& batch, const std::string& path);
AdversarialBatch load_adversarial_batch(const std::string& path);

}  // namespace aidp
