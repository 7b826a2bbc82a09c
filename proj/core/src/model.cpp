// SPDX-License-Identifier: Apache-2.0
#include "monkey/model.hpp"

#include <algorithm>
#include <cmath>

#include "monkey/error.hpp"
#include "monkey/rng.hpp"

namespace monkey {

namespace {

// Seed stream labels for the independent init draws.
constexpr std::uint64_t kWeightStream = 1;
constexpr std::uint64_t kVocabStream = 2;

std::vector<ParamSpec> all_weight_specs(const ModelConfig& cfg) {
    std::vector<ParamSpec> specs = unet_param_specs(cfg.unet);
    for (auto& s : image_encoder_param_specs(cfg.imgenc)) specs.push_back(std::move(s));
    for (auto& s : decoder_param_specs(cfg.unet.latent_channels)) specs.push_back(std::move(s));
    std::sort(specs.begin(), specs.end(),
              [](const ParamSpec& a, const ParamSpec& b) { return a.name < b.name; });
    return specs;
}

double init_std(const ParamSpec& spec) {
    std::int64_t fan_in = 1;
    if (spec.shape.size() == 4) {
        // conv [O,C,k,k] -> C*k*k; the decoder's transposed layout lands close enough.
        fan_in = static_cast<std::int64_t>(spec.shape[1]) * spec.shape[2] * spec.shape[3];
        if (spec.init == ParamSpec::Init::kConvHe) return std::sqrt(2.0 / static_cast<double>(fan_in));
    } else if (spec.shape.size() == 2) {
        fan_in = spec.shape[0];
    }
    return std::sqrt(1.0 / static_cast<double>(fan_in));
}

Model init_model_impl(const ModelConfig& cfg, bool randomize_everything) {
    if (cfg.imgenc.d_model != cfg.unet.d_model) {
        throw ConfigError("image encoder d_model " + std::to_string(cfg.imgenc.d_model) +
                          " != unet d_model " + std::to_string(cfg.unet.d_model));
    }
    if (cfg.n_text < 1) throw ConfigError("n_text must be >= 1");

    Model m;
    m.cfg = cfg;
    m.vocab = make_default_vocabulary(cfg.unet.d_model, mix_seed(cfg.init_seed, kVocabStream));

    DetRng rng(mix_seed(cfg.init_seed, kWeightStream));
    for (const auto& spec : all_weight_specs(cfg)) {
        Tensor t(spec.shape);
        ParamSpec::Init init = spec.init;
        if (randomize_everything) {
            if (init == ParamSpec::Init::kZeros && spec.shape.size() >= 2) {
                init = spec.shape.size() == 4 ? ParamSpec::Init::kConvHe : ParamSpec::Init::kLinear;
            }
        }
        switch (init) {
            case ParamSpec::Init::kConvHe:
            case ParamSpec::Init::kLinear: {
                const double sd = init_std(spec);
                for (std::int64_t i = 0; i < t.size(); ++i) {
                    t.data()[i] = static_cast<float>(sd * rng.next_gauss());
                }
                break;
            }
            case ParamSpec::Init::kOnes:
                for (std::int64_t i = 0; i < t.size(); ++i) {
                    t.data()[i] = randomize_everything
                                      ? static_cast<float>(1.0 + 0.1 * rng.next_gauss())
                                      : 1.0f;
                }
                break;
            case ParamSpec::Init::kZeros:
                if (randomize_everything) {
                    for (std::int64_t i = 0; i < t.size(); ++i) {
                        t.data()[i] = static_cast<float>(0.1 * rng.next_gauss());
                    }
                }
                break;
        }
        m.weights.emplace(spec.name, std::move(t));
    }
    return m;
}

}  // namespace

std::vector<ParamSpec> decoder_param_specs(int latent_channels) {
    using Init = ParamSpec::Init;
    return {
        {"dec.conv1.w", {latent_channels, 8, 4, 4}, Init::kConvHe},
        {"dec.conv1.b", {8}, Init::kZeros},
        {"dec.conv2.w", {8, 3, 4, 4}, Init::kConvHe},
        {"dec.conv2.b", {3}, Init::kZeros},
    };
}

Model init_model(const ModelConfig& cfg) { return init_model_impl(cfg, false); }

Model init_model_random(const ModelConfig& cfg) { return init_model_impl(cfg, true); }

std::vector<std::string> model_param_names(const Model& m) {
    std::vector<std::string> names;
    names.reserve(m.weights.size() + 1);
    for (const auto& [name, t] : m.weights) names.push_back(name);
    names.push_back("vocab.table");
    std::sort(names.begin(), names.end());
    return names;
}

Tensor& model_param(Model& m, const std::string& name) {
    if (name == "vocab.table") return m.vocab.table;
    return param(m.weights, name);
}

const Tensor& model_param(const Model& m, const std::string& name) {
    if (name == "vocab.table") return m.vocab.table;
    return param(m.weights, name);
}

bool denoiser_trainable(const std::string& name) { return name.rfind("dec.", 0) != 0; }

ConditioningSequence make_conditioning(const Model& m, const std::string& prompt,
                                       const Tensor& reference, ConditioningTrace* trace) {
    Tensor text = encode_text(prompt, m.vocab, m.cfg.n_text);
    Tensor ip = encode_image(reference, m.weights, m.cfg.imgenc, trace ? &trace->imgenc : nullptr);
    if (trace) trace->token_ids = encode_token_ids(prompt, m.vocab, m.cfg.n_text);
    return build_conditioning(text, ip);
}

}  // namespace monkey
