// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "monkey/mask.hpp"
#include "monkey/model.hpp"
#include "monkey/rng.hpp"

namespace monkey {

/// One procedurally drawn subject-on-background training image.
struct SyntheticSample {
    Tensor image;       // [3,64,64], values in [0,1]
    std::string caption;  // "<color> <shape> on <background>"
    Tensor gt_mask;     // [16,16] binary ground-truth subject mask
    Tensor reference;   // [3,64,64] canonical render of the subject alone
    int color = 0, shape = 0, background = 0;  // indices into the word lists
};

/// Deterministic dataset; sample i depends only on (seed, i). The subject
/// always covers 10-50% of the image by construction.
std::vector<SyntheticSample> make_dataset(std::uint64_t seed, int n);

/// Fixed 4x average-pool "VAE": [3,64,64] in [0,1] -> [4,16,16] in [-1,1]
/// (channel 3 is zero).
Tensor encode_latent(const Tensor& image);

struct TrainConfig {
    float lr = 0.02f;
    float momentum = 0.9f;
    int batch_size = 4;
    int iterations = 1000;
    std::uint64_t seed = 7;
    int report_interval = 25;
};

void validate_train_config(const TrainConfig& cfg);

/// One denoising step: sample a timestep and noise per batch element,
/// corrupt the pooled latent, backprop the noise-prediction MSE, and apply
/// SGD with momentum to every trainable (non-decoder) parameter. Returns
/// the batch loss; throws if it goes non-finite.
float train_step(Model& model, const std::vector<const SyntheticSample*>& batch, float lr,
                 float momentum, ModelWeights& velocity, DetRng& rng);

/// Full loop over uniformly drawn batches. Returns (iteration, loss) at
/// every report interval (and the final iteration).
std::vector<std::pair<int, float>> run_training(Model& model,
                                                const std::vector<SyntheticSample>& dataset,
                                                const TrainConfig& cfg);

/// One reconstruction step for the toy decoder only (MSE of
/// decode(encode(image)) against the image).
float train_decoder_step(Model& model, const std::vector<const SyntheticSample*>& batch, float lr,
                         float momentum, ModelWeights& velocity, DetRng& rng);

std::vector<std::pair<int, float>> run_decoder_training(Model& model,
                                                        const std::vector<SyntheticSample>& dataset,
                                                        const TrainConfig& cfg);

/// Central finite differences (step h) against the analytic gradients on
/// n_checks randomly chosen trainable parameters; returns the max relative
/// error, with the denominator floored at `floor` so near-zero gradient
/// pairs are compared absolutely.
float check_gradients(Model& model, const SyntheticSample& sample, int n_checks = 50,
                      std::uint64_t seed = 1234, float h = 1e-3f, float floor = 1e-2f);

/// Same check on a standalone one-layer linear model, whose loss is exactly
/// quadratic (finite differences have zero truncation error).
float check_gradients_linear(std::uint64_t seed = 99, int n_checks = 50, float h = 1e-3f);

/// How strongly ip1 attends to the true subject region: for each sample the
/// ground-truth image is corrupted at the capture-window timesteps, the
/// capture layer's ip1 maps are averaged, and the mean attention inside the
/// ground-truth mask is compared against the mean outside.
struct ContrastResult {
    int n = 0;
    int n_inside_greater = 0;
    double mean_inside = 0.0;
    double mean_outside = 0.0;

    double fraction() const { return n > 0 ? static_cast<double>(n_inside_greater) / n : 0.0; }
};

ContrastResult subject_attention_contrast(const Model& model,
                                          const std::vector<SyntheticSample>& samples,
                                          const std::string& capture_layer, StepWindow window,
                                          int pass_steps, std::uint64_t seed);

}  // namespace monkey
