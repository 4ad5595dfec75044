#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "aidp/ops.hpp"
#include "aidp/tape.hpp"

namespace aidp {

/// Small stride-2 conv stack with two designated tap layers. Block i =
/// conv3x3(stride 2, pad 1) + ReLU; taps are the post-ReLU block outputs.
/// The head is GAP followed by one affine layer.
struct ClassifierSpec {
    std::size_t in_channels = 1;
    std::size_t in_h = 32;
    std::size_t in_w = 32;
    std::vector<std::size_t> widths = {16, 32, 64};  // channels per block
    std::size_t kernel = 3;
    std::size_t classes = 4;
    std::size_t tap_low = 0;
    std::size_t tap_high = 2;

    std::size_t blocks() const { return widths.size(); }
    void validate() const;
    /// Channel count of the designated tap outputs.
    std::size_t tap_low_channels() const { return widths.at(tap_low); }
    std::size_t tap_high_channels() const { return widths.at(tap_high); }
};

class ClassifierModel {
  public:
    ClassifierSpec spec;
    bool frozen = false;
    // (name, tensor) in fixed construction order; order defines file layout
    // and init-draw order.
    std::vector<std::pair<std::string, Tensor>> params;

    Tensor& param(const std::string& name);
    const Tensor& param(const std::string& name) const;
    std::size_t param_count() const;
};

ClassifierModel build_classifier(const ClassifierSpec& spec, std::uint64_t seed);

struct ClassifierOut {
    Var logits;  // [N,K]
    Var h_low;   // [N,c_low,h,w]
    Var h_high;  // [N,c_high,h,w]
};

/// Named parameter handles registered on a tape, for optimizer updates.
using ParamVars = std::vector<std::pair<std::string, Var>>;

/// Forward pass on the given tape. When param_grads is set the parameters
/// are registered as gradient-tracking leaves and reported via out_params.
ClassifierOut classifier_forward(const ClassifierModel& model, Tape& tape, Var x,
                                 bool param_grads = false, ParamVars* out_params = nullptr);

enum class TapsMode : std::uint8_t { both = 0, low_only = 1, high_only = 2 };

const char* taps_mode_name(TapsMode m);
TapsMode taps_mode_from_name(const std::string& s);

/// Two-branch GAP + fully-connected discriminator. Each branch is a ReLU MLP
/// over the pooled tap channels; branch outputs are concatenated and fed to a
/// ReLU trunk ending in a single sigmoid unit.
struct DiscriminatorSpec {
    std::size_t c_low = 16;
    std::size_t c_high = 64;
    std::vector<std::size_t> branch_widths = {64, 64};
    std::vector<std::size_t> trunk_widths = {64, 32};
    TapsMode taps = TapsMode::both;

    void validate() const;
    std::size_t trunk_input_width() const;
};

class DiscriminatorModel {
  public:
    DiscriminatorSpec spec;
    std::vector<std::pair<std::string, Tensor>> params;

    Tensor& param(const std::string& name);
    const Tensor& param(const std::string& name) const;
    std::size_t param_count() const;
};

DiscriminatorModel build_discriminator(const DiscriminatorSpec& spec, std::uint64_t seed);

/// Pre-sigmoid discriminator output, shape [N]. Differentiable through the
/// taps, hence through the classifier to the input.
Var discriminator_logit(const DiscriminatorModel& model, Tape& tape, Var h_low, Var h_high,
                        bool param_grads = false, ParamVars* out_params = nullptr);

/// p_adv in (0,1), shape [N].
Var discriminate(const DiscriminatorModel& model, Tape& tape, Var h_low, Var h_high);

/// Convenience: p_adv scores for a batch of inputs, no gradients.
Tensor discriminate_batch(const ClassifierModel& clf, const DiscriminatorModel& disc,
                          const Tensor& x);

/// Plain classification, no gradients. Returns argmax class per example.
std::vector<int> predict_batch(const ClassifierModel& clf, const Tensor& x);

// Model file container: "AIDP" magic, u32 version, u8 type tag, spec record,
// named little-endian f64 parameter payloads. Round trips are byte-exact.
void save_model(const ClassifierModel& model, const std::string& path);
void save_model(const DiscriminatorModel& model, const std::string& path);
ClassifierModel load_classifier(const std::string& path);
DiscriminatorModel load_discriminator(const std::string& path);

}  // namespace aidp
