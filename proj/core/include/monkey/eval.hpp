// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "monkey/model.hpp"
#include "monkey/pipeline.hpp"
#include "monkey/tensor.hpp"
#include "monkey/trainer.hpp"

namespace monkey {

/// Cosine similarity with double accumulation. Identical vectors return
/// exactly 1.0; zero-norm or length-mismatched inputs throw.
double cosine_sim(const std::vector<double>& a, const std::vector<double>& b);

/// Pluggable image-embedding backend. The bundled ones are toy stand-ins
/// wired so real feature extractors can drop in behind the same interface.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::string name() const = 0;
    /// [3,H,W] image in [0,1] -> feature vector.
    virtual std::vector<double> embed(const Tensor& image) const = 0;
};

/// The model's own image encoder as a feature extractor: the 4 conditioning
/// tokens, flattened. Shares the conditioning embedding space, so it plays
/// the role of the image tower of a joint text-image embedder.
class ToyImageEmbedder : public Embedder {
public:
    explicit ToyImageEmbedder(const Model& model) : model_(&model) {}
    std::string name() const override { return "toy-image-encoder"; }
    std::vector<double> embed(const Tensor& image) const override;

private:
    const Model* model_;
};

/// Model-free embedder: images average-pooled to 8x8 per channel. An
/// independent feature space, standing in for a second backbone.
class PooledPixelEmbedder : public Embedder {
public:
    std::string name() const override { return "pooled-pixel"; }
    std::vector<double> embed(const Tensor& image) const override;
};

/// Mean embedding of the prompt's words (pad rows excluded), in the shared
/// conditioning space.
std::vector<double> text_embedding(const Model& model, const std::string& prompt);

/// Mean of the 4 image-encoder tokens, the image-side counterpart of
/// text_embedding.
std::vector<double> image_token_embedding(const Model& model, const Tensor& image);

enum class Method { kBaseline, kMonkey };

std::string method_name(Method method);

/// Which embedder scores what: `image` compares generated vs reference
/// globally, `identity` does the same in its independent feature space.
struct Embedders {
    const Embedder* image = nullptr;
    const Embedder* identity = nullptr;
};

/// Per-cell seeds are mix_seed(base, subject index, prompt index), so any
/// cell can be reproduced in isolation.
struct SeedPolicy {
    std::uint64_t base = 0;
};

struct EvalCell {
    int subject = 0;
    int prompt = 0;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    double text_sim = 0.0;
    double image_sim = 0.0;
    double identity_sim = 0.0;
};

struct EvalRun {
    std::string method;
    std::vector<EvalCell> cells;
    int n_failed = 0;
    double text_sim_mean = 0.0;
    double image_sim_mean = 0.0;
    double identity_sim_mean = 0.0;
};

/// Generates one image per (subject, prompt) cell — prompt text is
/// "<color> <shape> <prompt>" — and scores it three ways: prompt-vs-image
/// similarity in the shared token space, and generated-vs-reference
/// similarity under each embedder. Failed cells are recorded with their
/// error and excluded from the means.
EvalRun run_grid(const std::vector<SyntheticSample>& subjects,
                 const std::vector<std::string>& prompts, Method method, const Model& model,
                 const Embedders& embedders, const GenerationConfig& proto, SeedPolicy seeds);

struct ScatterRow {
    std::string method;
    double text_sim_mean = 0.0;
    double image_sim_mean = 0.0;
};

/// CSV of (method, text_sim_mean, image_sim_mean), one row per run, written
/// atomically with round-trip-exact float formatting.
void export_scatter(const std::vector<EvalRun>& runs, const std::string& path);

std::vector<ScatterRow> load_scatter(const std::string& path);

}  // namespace monkey
