// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "monkey/encoders.hpp"
#include "monkey/unet.hpp"
#include "monkey/weights.hpp"

namespace monkey {

/// Everything needed to rebuild the full model deterministically.
struct ModelConfig {
    UNetConfig unet;
    ImageEncoderConfig imgenc;
    int n_text = 16;  // text tokens per prompt (pad/truncate to this)
    std::uint64_t init_seed = 1;
};

/// The complete artifact: denoiser + image encoder + toy decoder weights,
/// plus the closed-world vocabulary (whose embedding table is trainable).
struct Model {
    ModelConfig cfg;
    ModelWeights weights;
    Vocabulary vocab;
};

/// Declarations of the toy latent decoder's parameters ("dec." prefix,
/// transposed-conv layout [C_in, C_out, k, k]).
std::vector<ParamSpec> decoder_param_specs(int latent_channels);

/// Deterministic model init: He/Xavier draws in sorted parameter order from
/// a single stream, zeroed output heads (out.conv and every attention wo).
Model init_model(const ModelConfig& cfg);

/// Like init_model but with every weight randomized (output heads and
/// biases included) — used by gradient checks so no backward path is
/// trivially zero.
Model init_model_random(const ModelConfig& cfg);

/// All parameter names including "vocab.table", sorted.
std::vector<std::string> model_param_names(const Model& m);

/// Uniform access to any parameter, "vocab.table" included.
Tensor& model_param(Model& m, const std::string& name);
const Tensor& model_param(const Model& m, const std::string& name);

/// True for parameters the denoising trainer updates (everything except
/// the "dec." decoder, which trains in its own reconstruction phase).
bool denoiser_trainable(const std::string& name);

/// Forward intermediates of conditioning construction, for training.
struct ConditioningTrace {
    std::vector<int> token_ids;  // text rows -> vocabulary ids
    ImageEncoderTrace imgenc;
};

/// Prompt + reference image -> concatenated conditioning sequence.
ConditioningSequence make_conditioning(const Model& m, const std::string& prompt,
                                       const Tensor& reference, ConditioningTrace* trace = nullptr);

}  // namespace monkey
