// SPDX-License-Identifier: Apache-2.0
#include "monkey/pipeline.hpp"

#include <algorithm>

namespace monkey {

namespace {

ConditioningSequence conditioning_for(const Model& model, const GenerationConfig& cfg,
                                      const Tensor& reference, const PipelineHooks& hooks) {
    ConditioningSequence cond = make_conditioning(model, cfg.prompt, reference);
    if (!hooks.drop_ip_tokens) return cond;
    // Text-only oracle path: strip the trailing IP rows entirely.
    ConditioningSequence text_only;
    const int n_text = cond.text_span.length();
    text_only.d_model = cond.d_model;
    text_only.text_span = {0, n_text};
    text_only.ip_span = {n_text, n_text};
    text_only.tokens = Tensor({n_text, cond.d_model},
                              std::vector<float>(cond.tokens.data(),
                                                 cond.tokens.data() +
                                                     static_cast<size_t>(n_text) * cond.d_model));
    return text_only;
}

std::vector<int> latent_shape(const UNetConfig& u) {
    return {u.latent_channels, u.spatial, u.spatial};
}

bool mask_is_empty(const Tensor& grid) {
    return std::all_of(grid.values().begin(), grid.values().end(),
                       [](float v) { return v == 0.0f; });
}

void run_pass(Tensor& latent, const Schedule& schedule, const ConditioningSequence& cond,
              const Model& model, const GenerationConfig& cfg, const SubjectMask* mask,
              CaptureSink* sink, std::vector<Tensor>* step_latents) {
    for (int i = 0; i < schedule.num_steps; ++i) {
        UNetDirective directive;
        directive.attn.ip_scale = cfg.ip_scale;
        if (mask && cfg.pass2_mask_window.contains(i + 1)) {
            directive.attn.mask_grid = mask->grid;
            if (!cfg.mask_all_sites) directive.mask_only_sites = {cfg.capture_layer};
        }
        if (sink) sink->step = i;
        Tensor eps = predict_noise(latent, schedule.timesteps[static_cast<size_t>(i)], cond,
                                   model.weights, model.cfg.unet, directive, sink);
        latent = ddim_step(latent, eps, schedule, i);
        if (step_latents) step_latents->push_back(latent);
    }
}

}  // namespace

void validate_generation_config(const GenerationConfig& cfg, const UNetConfig& unet) {
    if (cfg.pass1_steps < 1 || cfg.pass2_steps < 1) {
        throw ConfigError("step counts must be >= 1");
    }
    if (cfg.ip_scale < 0.0f) throw ConfigError("ip_scale must be >= 0");
    if (cfg.pass1_window.empty() || cfg.pass1_window.first < 1 ||
        cfg.pass1_window.last > cfg.pass1_steps) {
        throw ConfigError("pass1 capture window [" + std::to_string(cfg.pass1_window.first) + "," +
                          std::to_string(cfg.pass1_window.last) + "] must lie within 1.." +
                          std::to_string(cfg.pass1_steps));
    }
    // The mask window may be empty (masking disabled) but must not overrun.
    if (!cfg.pass2_mask_window.empty() &&
        (cfg.pass2_mask_window.first < 1 || cfg.pass2_mask_window.last > cfg.pass2_steps)) {
        throw ConfigError("pass2 mask window [" + std::to_string(cfg.pass2_mask_window.first) +
                          "," + std::to_string(cfg.pass2_mask_window.last) +
                          "] must lie within 1.." + std::to_string(cfg.pass2_steps));
    }
    if (cfg.mask_token < 0 || cfg.mask_token >= kIpTokenCount) {
        throw ConfigError("mask token index must be in 0.." + std::to_string(kIpTokenCount - 1));
    }
    layer_resolution(cfg.capture_layer, unet);  // throws on unknown layer
}

GenerationResult generate_baseline(const GenerationConfig& cfg, const Model& model,
                                   const Tensor& reference, const PipelineHooks& hooks) {
    validate_generation_config(cfg, model.cfg.unet);
    const ConditioningSequence cond = conditioning_for(model, cfg, reference, hooks);
    const Schedule schedule = make_schedule(cfg.pass2_steps);
    Tensor latent = initial_noise(cfg.seed, latent_shape(model.cfg.unet));

    CaptureSink sink;
    run_pass(latent, schedule, cond, model, cfg, nullptr, hooks.retain_records ? &sink : nullptr,
             hooks.step_latents);

    GenerationResult result;
    result.final_latent = latent;
    result.image = decode_latent(latent, model.weights);
    result.records = std::move(sink.records);
    result.config = cfg;
    return result;
}

GenerationResult generate_monkey(const GenerationConfig& cfg, const Model& model,
                                 const Tensor& reference, const PipelineHooks& hooks) {
    validate_generation_config(cfg, model.cfg.unet);
    const ConditioningSequence cond = conditioning_for(model, cfg, reference, hooks);

    const Tensor noise = initial_noise(cfg.seed, latent_shape(model.cfg.unet));
    const Tensor noise_snapshot = noise;

    // Pass 1: short unmasked pass, attention captured everywhere.
    CaptureSink capture;
    Tensor latent1 = noise;
    run_pass(latent1, make_schedule(cfg.pass1_steps), cond, model, cfg, nullptr, &capture, nullptr);
    Tensor pass1_image = decode_latent(latent1, model.weights);

    // Derive (or inject) the subject mask.
    SubjectMask mask;
    if (hooks.mask_override) {
        mask = *hooks.mask_override;
    } else {
        try {
            mask = derive_mask(capture.records, cfg.capture_layer, cfg.pass1_window,
                               cfg.mask_token, cfg.policy);
        } catch (const MaskError& e) {
            throw MaskDerivationError(e.what(), std::move(pass1_image));
        }
    }
    if (mask_is_empty(mask.grid)) {
        throw MaskDerivationError("derived mask is empty (all background)",
                                  std::move(pass1_image));
    }

    // Pass 2 restarts from the very same initial noise tensor.
    if (!bitwise_equal(noise, noise_snapshot)) {
        throw Error("pipeline", "initial noise tensor was mutated between passes");
    }
    Tensor latent2 = noise;
    CaptureSink capture2;
    run_pass(latent2, make_schedule(cfg.pass2_steps), cond, model, cfg, &mask,
             hooks.retain_records ? &capture2 : nullptr, hooks.step_latents);

    GenerationResult result;
    result.final_latent = latent2;
    result.image = decode_latent(latent2, model.weights);
    result.pass1_latent = std::move(latent1);
    result.pass1_image = std::move(pass1_image);
    result.mask = std::move(mask);
    result.config = cfg;
    if (hooks.retain_records) {
        result.records = std::move(capture.records);
        for (auto& r : capture2.records) result.records.push_back(std::move(r));
    }
    return result;
}

Tensor decode_latent(const Tensor& latent, const ModelWeights& weights, DecoderTrace* trace) {
    const Tensor& b1 = param(weights, "dec.conv1.b");
    const Tensor& b2 = param(weights, "dec.conv2.b");
    Tensor h = conv2d_transpose(latent, param(weights, "dec.conv1.w"), &b1, 2, 1);
    Tensor s = silu(h);
    Tensor raw = conv2d_transpose(s, param(weights, "dec.conv2.w"), &b2, 2, 1);
    if (trace) {
        trace->latent = latent;
        trace->conv1_out = std::move(h);
        trace->silu_out = std::move(s);
        trace->raw = raw;
    }
    // Fixed mid-gray bias so an all-zero model decodes to neutral gray.
    Tensor img(raw.shape());
    for (std::int64_t i = 0; i < raw.size(); ++i) {
        img.data()[i] = std::clamp(raw.data()[i] + 0.5f, 0.0f, 1.0f);
    }
    return img;
}

}  // namespace monkey
