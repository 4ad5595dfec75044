#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aidp/evaluation.hpp"
#include "aidp/training.hpp"

namespace aidp {

/// Fully resolved run configuration. Every field is reachable through a
/// documented key; unknown keys are rejected. Epsilon-like values accept
/// both "8/255" fraction syntax and plain decimals.
struct RunConfig {
    std::string preset = "toy";
    std::uint64_t seed = 1;
    int workers = 1;

    std::string dataset_kind = "synth";  // synth | idx | cifar10
    std::string dataset_dir;
    std::size_t dataset_train_n = 4000;  // 0 = all (file datasets)
    std::size_t dataset_test_n = 1000;
    std::size_t dataset_size = 32;
    std::size_t dataset_classes = 4;
    std::uint64_t dataset_seed = 1;

    ClassifierSpec model;
    DiscriminatorSpec disc;
    int disc_epochs = 1;

    TrainConfig train;
    AttackConfig train_attack;
    AVmixupConfig avmixup;

    AttackConfig attack;        // template for the evaluation suite
    int cw_steps = 100;         // iteration counts per attack family
    int df_iters = 50;
    std::vector<std::string> eval_attacks = {"pgd", "mim", "fgsm"};
    std::size_t eval_n = 0;  // 0 = whole test split
    std::size_t eval_batch = 64;
    bool eval_timing = false;
    int timing_reps = 100;
    int timing_warmup = 10;

    PurifyConfig purify;
    bool purify_enabled = true;

    std::string in_classifier;
    std::string in_disc;
    std::string in_surrogate;
    std::string in_report;
    std::string out_model = "model.aidp";
    std::string out_report = "report.json";
    std::string out_csv;
    std::string out_log;
    std::string out_batch = "batch.aidb";

    RunConfig() {
        train_attack.iterations = 10;
        train_attack.step_size = 2.0 / 255.0;
    }

    /// Attack config for one evaluation-suite entry, with the family's
    /// iteration budget applied.
    AttackConfig suite_attack(const std::string& kind_name) const;

    /// AVmixup settings with the training attack folded in.
    AVmixupConfig avmixup_config() const {
        AVmixupConfig a = avmixup;
        a.train_attack = train_attack;
        return a;
    }

    /// All keys with their resolved values, sorted by key. Re-parsing the
    /// echo reproduces the config exactly.
    std::vector<std::pair<std::string, std::string>> echo() const;
};

/// Names of every legal configuration key.
std::vector<std::string> config_keys();

/// Parse config text (one key=value per line, '#' comments) and fold it into
/// cfg. Unknown keys, duplicate keys, and malformed values raise ParseError
/// with the offending line.
void apply_config_text(RunConfig& cfg, const std::string& text);

/// Apply one key=value assignment (used for flags; pos names the argv slot).
void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value,
                        int line);

void apply_preset(RunConfig& cfg, const std::string& name);

/// Full precedence chain: built-in defaults (AIDP_SEED env as the lowest
/// precedence seed source) -> preset -> file keys -> flag keys.
RunConfig resolve_config(const std::optional<std::string>& file_text,
                         const std::vector<std::pair<std::string, std::string>>& flags);

/// Derive dependent fields (model input dims, class count, discriminator tap
/// channels) from the dataset actually loaded; explicit settings win.
void finalize_for_dataset(RunConfig& cfg, const Dataset& train);

/// "8/255" -> 0.03137..., or plain decimal; ParseError on malformed input.
double parse_fraction(const std::string& text, int line);

}  // namespace aidp
