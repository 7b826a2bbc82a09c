// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "monkey/attention.hpp"
#include "monkey/tensor.hpp"
#include "monkey/unet.hpp"

namespace monkey {

/// 1-based inclusive step range, the way the configs speak about steps
/// ("second and third" = {2, 3}). last < first means an empty window.
struct StepWindow {
    int first = 1;
    int last = 0;

    bool empty() const noexcept { return last < first; }
    int length() const noexcept { return empty() ? 0 : last - first + 1; }
    /// True when 1-based step `s` falls inside the window.
    bool contains(int s) const noexcept { return s >= first && s <= last; }
};

/// How a soft attention map becomes a binary mask.
struct MaskPolicy {
    enum class Mode { kFixed, kOtsu };

    Mode mode = Mode::kFixed;
    float threshold = 0.5f;  // kFixed only; ties classify as subject
    /// Binarize each step's map first, then majority-vote, instead of
    /// averaging soft maps and binarizing once.
    bool average_binarized = false;
    /// Derive the mask as the complement of the ip2/ip3 union (the
    /// background-attending tokens) instead of directly from one token.
    bool complement_background = false;
};

std::string mask_policy_name(const MaskPolicy& policy);

/// Where a mask came from: enough to audit or reproduce it.
struct MaskSource {
    std::string layer_id;
    std::vector<int> steps;  // 0-based step indices that entered the average
    int token = 0;           // IP token index; -1 for complement_background
    float threshold = 0.0f;  // the threshold value that was finally applied
    std::string policy;
};

/// Binary subject/background grid at capture-layer resolution.
struct SubjectMask {
    Tensor grid;  // [H,W], every element 0 or 1
    MaskSource source;
};

/// Min-max normalization to [0,1]; a zero-range (constant) map throws,
/// since it means the capture produced no usable signal.
Tensor normalize01(const Tensor& map);

/// Threshold a [0,1] map into a {0,1} mask per the policy. Otsu scans a
/// 64-bin histogram for the split maximizing between-class variance; the
/// chosen threshold is reported through `threshold_out` when non-null.
Tensor binarize(const Tensor& map, const MaskPolicy& policy, float* threshold_out = nullptr);

/// Selects the capture layer's records over a 1-based step window, averages
/// the requested IP token's head-averaged maps, normalizes, binarizes.
/// Records are matched by (layer_id, step_index); list order is irrelevant.
SubjectMask derive_mask(const std::vector<AttentionRecord>& records,
                        const std::string& capture_layer, StepWindow window, int token,
                        const MaskPolicy& policy);

/// Transports a mask to another site's resolution (nearest neighbour, so
/// the result stays binary).
Tensor mask_for_layer(const SubjectMask& mask, const std::string& layer_id,
                      const UNetConfig& cfg);

/// Human-readable provenance block, used for the PNG sidecar.
std::string mask_provenance_text(const SubjectMask& mask);

}  // namespace monkey
