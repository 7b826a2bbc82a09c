// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "monkey/error.hpp"
#include "monkey/mask.hpp"
#include "monkey/model.hpp"
#include "monkey/sampler.hpp"

namespace monkey {

/// Full recipe for one generation job. Step windows are 1-based inclusive,
/// the way the recipe is usually stated ("mask during the third to sixth
/// steps" = {3, 6}).
struct GenerationConfig {
    NoiseSeed seed;
    std::string prompt;
    std::string reference_path;  // informational echo; the API takes the tensor
    int pass1_steps = 4;
    StepWindow pass1_window{2, 3};
    int pass2_steps = 8;
    StepWindow pass2_mask_window{3, 6};
    float ip_scale = 1.0f;
    std::string capture_layer = kDefaultCaptureLayer;
    MaskPolicy policy;
    int mask_token = 0;
    bool mask_all_sites = true;  // false: apply the mask at capture_layer only
};

void validate_generation_config(const GenerationConfig& cfg, const UNetConfig& unet);

struct GenerationResult {
    Tensor final_latent;
    Tensor image;        // decoded final latent
    Tensor pass1_latent; // two-pass method only
    Tensor pass1_image;
    SubjectMask mask;
    std::vector<AttentionRecord> records;  // only kept when asked for
    GenerationConfig config;               // byte-identical echo of the input
};

/// Test/diagnostic instrumentation for the generation entry points.
struct PipelineHooks {
    const SubjectMask* mask_override = nullptr;  // skip derivation, use this
    bool retain_records = false;
    bool drop_ip_tokens = false;                  // condition on text only
    std::vector<Tensor>* step_latents = nullptr;  // latent after every step
};

/// Mask derivation failed after pass 1; carries the pass-1 image so the
/// failure can be inspected.
class MaskDerivationError : public Error {
public:
    MaskDerivationError(const std::string& message, Tensor pass1_image)
        : Error("pipeline", message), pass1_image_(std::move(pass1_image)) {}

    const Tensor& pass1_image() const noexcept { return pass1_image_; }

private:
    Tensor pass1_image_;
};

/// Single unmasked pass of pass2_steps steps (the adapter-as-usual path,
/// also what pass 1 of the two-pass method looks like at pass1_steps).
GenerationResult generate_baseline(const GenerationConfig& cfg, const Model& model,
                                   const Tensor& reference, const PipelineHooks& hooks = {});

/// The two-pass procedure: capture on a short pass, derive the subject
/// mask, then regenerate from the same initial noise with IP tokens masked
/// out at background positions during the configured window.
GenerationResult generate_monkey(const GenerationConfig& cfg, const Model& model,
                                 const Tensor& reference, const PipelineHooks& hooks = {});

/// Forward intermediates of decode_latent, for the decoder trainer.
struct DecoderTrace {
    Tensor latent, conv1_out, silu_out, raw;  // raw = pre-bias, pre-clamp
};

/// Toy two-layer transposed-conv decoder; output in [0,1], mid-gray biased.
Tensor decode_latent(const Tensor& latent, const ModelWeights& weights,
                     DecoderTrace* trace = nullptr);

}  // namespace monkey
