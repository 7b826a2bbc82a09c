// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "monkey/attention.hpp"
#include "monkey/encoders.hpp"
#include "monkey/tensor.hpp"
#include "monkey/weights.hpp"

namespace monkey {

/// One named cross-attention site inside the UNet.
struct AttentionSite {
    std::string layer_id;
    int heads = 4;
};

/// Geometry of the tiny epsilon-predictor. The block layout itself is fixed
/// (conv-down, mid, conv-up with residual blocks); the config carries the
/// widths and the ordered attention-site list.
struct UNetConfig {
    int latent_channels = 4;
    int spatial = 16;        // latent is [latent_channels, spatial, spatial]
    int base_width = 32;     // width at full resolution
    int mid_width = 64;      // width at 8x8 and 4x4
    int temb_dim = 32;       // sinusoidal timestep embedding size
    int d_model = 64;        // conditioning token width
    std::vector<AttentionSite> sites = {
        {"down.attn", 4}, {"mid.attn", 4}, {"up1.attn1", 4}, {"up1.attn2", 4}, {"up2.attn1", 4},
    };
};

inline constexpr char kDefaultCaptureLayer[] = "up1.attn2";

/// Throws unless the site list is non-empty, unique, contains at least one
/// up-block site, and matches the fixed block layout.
void validate_unet_config(const UNetConfig& cfg);

/// Spatial resolution (H, W) of the features at a named attention site.
std::pair<int, int> layer_resolution(const std::string& layer_id, const UNetConfig& cfg);

/// Feature width d_l at a named attention site.
int layer_channels(const std::string& layer_id, const UNetConfig& cfg);

/// Sinusoidal embedding of an integer timestep: [1, dim], first half sines,
/// second half cosines, frequencies log-spaced from 1 down to 1e-4.
Tensor sinusoidal_time_embedding(int t, int dim);

/// [C,H,W] -> [H*W, C] with position index s = y*W + x.
Tensor flatten_spatial(const Tensor& x);
/// [H*W, C] -> [C,H,W], the inverse of flatten_spatial.
Tensor unflatten_spatial(const Tensor& x, int channels, int h, int w);

/// Masking/scale instructions for one predict_noise call. The scale always
/// applies at every site; the mask grid applies at every site unless
/// mask_only_sites narrows it down.
struct UNetDirective {
    IpMaskDirective attn;
    std::vector<std::string> mask_only_sites;
};

/// Forward intermediates of one residual block, kept for backward.
struct ResBlockTrace {
    Tensor x_in;
    Tensor gn1_out, silu1_in_conv;  // gn1 output; conv1 input is silu(gn1_out)
    Tensor biased;                  // conv1 output + per-channel timestep bias
    Tensor gn2_out, silu2_in_conv;  // gn2 output; conv2 input is silu(gn2_out)
};

/// Forward intermediates of one attention site, kept for backward.
struct AttnSiteTrace {
    Tensor x_in;    // [C,H,W] pre-norm input
    Tensor flat;    // [S,C] flattened group-norm output fed to attention
    AttentionTrace attn;
};

/// Everything backward needs to replay one predict_noise call.
struct UNetTrace {
    Tensor temb;  // [1, temb_dim]
    Tensor latent;
    ResBlockTrace d0, d1, m0, m1, u1, u2;
    AttnSiteTrace down_attn, mid_attn, up1_attn1, up1_attn2, up2_attn1;
    Tensor in_conv_out;
    Tensor down1_in, down2_in, up1_conv_in, up2_conv_in;  // conv inputs
    Tensor out_gn_in, out_gn_out;  // head: gn input and output
};

/// Predicts the noise component of `latent` at timestep `t` under the given
/// conditioning. Capture (when a sink is attached) emits one AttentionRecord
/// per site in block order.
Tensor predict_noise(const Tensor& latent, int t, const ConditioningSequence& cond,
                     const ModelWeights& weights, const UNetConfig& cfg,
                     const UNetDirective& directive, CaptureSink* sink = nullptr,
                     UNetTrace* trace = nullptr);

/// Accumulates parameter gradients for a traced predict_noise call into
/// `grads` (tensors created on first touch), plus the gradient w.r.t. the
/// conditioning tokens. `dlatent`, when given, receives the input gradient.
void unet_backward(const UNetTrace& trace, const ConditioningSequence& cond,
                   const ModelWeights& weights, const UNetConfig& cfg, const Tensor& deps,
                   ModelWeights& grads, Tensor& dtokens, Tensor* dlatent = nullptr);

/// Declarations of every UNet parameter for the given config, in block order.
std::vector<ParamSpec> unet_param_specs(const UNetConfig& cfg);

}  // namespace monkey
