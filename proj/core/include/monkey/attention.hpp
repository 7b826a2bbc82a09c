// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "monkey/encoders.hpp"
#include "monkey/tensor.hpp"

namespace monkey {

/// Post-softmax attention probabilities captured at one layer, one step.
/// probs[h, s, :] sums to 1; T equals the conditioning sequence length.
struct AttentionRecord {
    std::string layer_id;
    int step_index = 0;  // 0-based
    Tensor probs;        // [heads, S, T]
    int spatial_h = 0;
    int spatial_w = 0;
};

/// How IP tokens participate in a cross-attention call. An absent mask means
/// no spatial restriction; ip_scale is a logit bias of ln(scale) on the IP
/// columns (0 removes them entirely, 1 is a strict no-op).
struct IpMaskDirective {
    std::optional<Tensor> mask_grid;  // binary [Hm,Wm]; 0 = background
    float ip_scale = 1.0f;
};

/// Append-only per-job collector of attention records. The owner sets `step`
/// before each denoising step; capture is skipped entirely when no sink is
/// attached.
struct CaptureSink {
    int step = 0;
    std::vector<AttentionRecord> records;
};

struct AttentionWeights {
    const Tensor* wq = nullptr;  // [d_l, d_l]
    const Tensor* wk = nullptr;  // [d_model, d_l]
    const Tensor* wv = nullptr;  // [d_model, d_l]
    const Tensor* wo = nullptr;  // [d_l, d_l]
    int heads = 1;
};

/// Forward intermediates kept for the hand-written backward pass.
struct AttentionTrace {
    Tensor q, k, v;   // [S,C], [T,C], [T,C]
    Tensor probs;     // [heads, S, T]
    Tensor merged;    // [S,C], heads merged, before the output projection
};

/// Concatenated text+IP cross-attention over flattened spatial features.
///
/// logits[h,s,t] = Q_h[s]·K_h[t]/sqrt(d_head), plus ln(ip_scale) on IP
/// columns, with IP columns forced to -inf (a -1e9 sentinel) at spatial
/// positions the mask marks as background. Softmax over tokens then
/// renormalizes the surviving columns, which is what routes background
/// attention mass onto the text tokens. Probabilities are captured
/// post-softmax (after scale and mask).
Tensor cross_attention(const Tensor& features, const ConditioningSequence& cond,
                       const AttentionWeights& weights, const IpMaskDirective& directive,
                       CaptureSink* sink, const std::string& layer_id, int spatial_h,
                       int spatial_w, AttentionTrace* trace = nullptr);

/// Head-averaged spatial attention map of one token inside `span`:
/// map[s] = mean_h probs[h, s, span.begin + token].
Tensor ip_attention_share(const AttentionRecord& record, Span span, int token);

/// Accumulates parameter/input gradients for a traced forward call.
/// dfeatures and dtokens are added to; the dw* tensors are added to as well
/// so one gradient store can serve many calls.
void cross_attention_backward(const AttentionTrace& trace, const Tensor& features,
                              const Tensor& cond_tokens, const AttentionWeights& weights,
                              const Tensor& dout, Tensor& dfeatures, Tensor& dtokens,
                              Tensor& dwq, Tensor& dwk, Tensor& dwv, Tensor& dwo);

inline constexpr float kNegInfLogit = -1e9f;

}  // namespace monkey
