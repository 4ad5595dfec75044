#pragma once

#include <vector>

#include "aidp/tape.hpp"

namespace aidp::ops {

// Differentiable primitive catalog. Every function builds one tape node with
// an exact reverse-mode rule. ReLU and clamp use subgradient 0 at their
// kinks; sigmoid output is nudged off exact 0/1 so probabilities stay in
// (0,1) for all finite logits.

/// 2-D convolution, NCHW. x:[N,Cin,H,W] w:[Cout,Cin,kh,kw] b:[Cout].
Var conv2d(Var x, Var w, Var b, int stride, int pad);

/// Fully connected layer. x:[N,In] w:[In,Out] b:[Out].
Var affine(Var x, Var w, Var b);

Var relu(Var x);
Var sigmoid(Var x);
/// Elementwise clamp; bounds may be infinite. Pass-through gradient strictly
/// inside (lo, hi), zero outside and at the bounds.
Var clamp(Var x, double lo, double hi);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double k);

/// Spatial mean per channel. x:[N,C,H,W] -> [N,C].
Var global_average_pool(Var x);

/// Concatenate along the feature axis. a:[N,F1] b:[N,F2] -> [N,F1+F2].
Var concat(Var a, Var b);

/// Sum over all non-batch axes. x:[N,...] -> [N].
Var per_example_sum(Var x);

Var sum(Var x);
Var mean(Var x);

/// Mean of -log softmax(logits)[label]; log-sum-exp stabilized.
/// logits:[N,K], labels in [0,K).
Var softmax_cross_entropy(Var logits, const std::vector<int>& labels);

/// Mean of -t*log sig(z) - (1-t)*log(1-sig(z)) in the stable form; targets
/// are soft labels in [0,1]. logit:[N], target:[N].
Var bce_with_logits(Var logit, Var target);

}  // namespace aidp::ops
