#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "aidp/attacks.hpp"
#include "aidp/data.hpp"
#include "aidp/models.hpp"
#include "aidp/optim.hpp"

namespace aidp {

struct TrainConfig {
    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 2e-4;
    int epochs = 1;
    std::size_t batch_size = 128;
    std::uint64_t seed = 1;
    bool shuffle = true;

    void validate() const;
};

enum class Augmentation : int { none, av, mixup, avmixup };
enum class TargetMode : int { clean_vs_adv, contrastive };

const char* augmentation_name(Augmentation a);
Augmentation augmentation_from_name(const std::string& s);
const char* target_mode_name(TargetMode t);
TargetMode target_mode_from_name(const std::string& s);

struct AVmixupConfig {
    double gamma = 2.0;
    AttackConfig train_attack;  // generator of the perturbation delta
    Augmentation augmentation = Augmentation::avmixup;
    TargetMode target_mode = TargetMode::clean_vs_adv;
    TapsMode taps_used = TapsMode::both;

    AVmixupConfig() {
        train_attack.iterations = 10;
        train_attack.step_size = 2.0 / 255.0;
    }
    void validate() const;
};

struct StepRecord {
    std::size_t step;
    double loss;
    double seconds;
};

struct TrainLog {
    std::vector<StepRecord> steps;

    double total_seconds() const;
    double final_loss() const { return steps.empty() ? 0.0 : steps.back().loss; }
    /// One csv line per step: step,loss,seconds.
    void save(const std::string& path) const;
    static TrainLog load(const std::string& path);
};

/// Shuffled mini-batch SGD on the softmax cross-entropy.
TrainLog train_natural(ClassifierModel& model, const Dataset& data, const TrainConfig& cfg);

/// Adversarial training: every SGD step consumes the PGD batch generated
/// against the current parameters.
TrainLog train_madry(ClassifierModel& model, const Dataset& data, const TrainConfig& cfg,
                     const AttackConfig& attack);

/// One interpolation draw:
///   x_av = x + gamma * delta,  x_hat = u*x + (1-u)*x_av,  t_hat = 1 - u.
/// x_hat is computed as x + (1-u)*gamma*delta, the algebraically identical
/// form whose only rounding is the final add, so x_hat - x reproduces the
/// step exactly and the u endpoints are exact. Not clipped to [0,1].
std::pair<Tensor, double> avmixup_sample(const Tensor& x, const Tensor& delta, double gamma,
                                         double u);

/// Discriminator training over a frozen classifier, with the configured
/// augmentation and target construction. Freezes the classifier on entry;
/// classifier parameters are never touched.
TrainLog train_discriminator(ClassifierModel& clf, DiscriminatorModel& disc,
                             const Dataset& data, const TrainConfig& cfg,
                             const AVmixupConfig& avcfg);

}  // namespace aidp
