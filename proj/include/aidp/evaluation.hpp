#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aidp/attacks.hpp"
#include "aidp/data.hpp"
#include "aidp/purifier.hpp"

namespace aidp {

inline constexpr const char* kToolVersion = "0.1.0";

struct AttackRow {
    std::string attack;
    AttackConfig config;
    double accuracy = 0.0;
    std::size_t n = 0;
};

struct TimingInfo {
    double purify_seconds_per_image = 0.0;
    double training_minutes = 0.0;
};

struct EvalReport {
    int version = 1;
    std::string tool_version = kToolVersion;
    std::string dataset;
    std::string classifier_id;
    std::string discriminator_id;  // empty when no purifier
    std::string surrogate_id;      // empty for white-box evaluation
    double clean_accuracy = 0.0;
    std::vector<AttackRow> attacks;
    double worst_accuracy = 0.0;
    std::optional<TimingInfo> timing;
    std::uint64_t seed = 0;
    // Fully resolved run configuration, sorted by key; provenance echo.
    std::vector<std::pair<std::string, std::string>> config_echo;
};

/// Evaluation-side wiring: a frozen classifier, plus optionally the
/// discriminator (enables purification and the auxiliary-aware attack).
struct EvalContext {
    const ClassifierModel* classifier = nullptr;
    const DiscriminatorModel* discriminator = nullptr;
    const PurifyConfig* purify = nullptr;  // purification on when non-null
    int workers = 1;
    std::size_t batch_size = 64;
};

/// Top-1 accuracy on unmodified inputs (purified first when enabled;
/// purification applies to any input, clean ones included).
double clean_accuracy(const EvalContext& ctx, const Dataset& data);

/// Generate adversarial examples per batch against the classifier, purify
/// when enabled, classify, score against labels. Per-batch attack seeds are
/// cfg.seed xor batch_index, so results are worker-count invariant.
double robust_accuracy(const EvalContext& ctx, const AttackConfig& attack,
                       const Dataset& data);

/// Transfer evaluation: adversarial examples generated against the surrogate
/// and evaluated on the target context.
double black_box_eval(const ClassifierModel& surrogate, const EvalContext& ctx,
                      const AttackConfig& attack, const Dataset& data);

/// Minimum accuracy over the attack rows; never includes the clean accuracy.
double worst_case_accuracy(const std::vector<double>& attack_accuracies);
double worst_case_accuracy(const std::vector<AttackRow>& rows);

/// Rank AUC of discriminator scores, adversarial as the positive class,
/// ties counted half.
double detector_auc(const DiscriminatorModel& disc, const ClassifierModel& clf,
                    const Tensor& clean_images, const Tensor& adv_images);
double auc_from_scores(const std::vector<double>& clean_scores,
                       const std::vector<double>& adv_scores);

/// Median wall-clock cost of single-image purification; warm-up runs are
/// excluded. Training minutes are summed from the training log when given.
TimingInfo measure_timing(const EvalContext& ctx, const Dataset& data, int repetitions,
                          int warmup, const std::string& training_log_path = "");

enum class ReportFormat { json, csv };

void write_report(const EvalReport& report, const std::string& path, ReportFormat format);
EvalReport read_report(const std::string& path);

}  // namespace aidp
