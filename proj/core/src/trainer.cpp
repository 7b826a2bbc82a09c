// SPDX-License-Identifier: Apache-2.0
#include "monkey/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "monkey/autograd.hpp"
#include "monkey/error.hpp"
#include "monkey/pipeline.hpp"
#include "monkey/prompts.hpp"
#include "monkey/sampler.hpp"

namespace monkey {

namespace {

constexpr int kImg = 64;
constexpr int kLat = 16;

struct Rgb {
    float r, g, b;
};

Rgb color_rgb(int idx) {
    static const Rgb table[] = {
        {0.85f, 0.10f, 0.10f},  // red
        {0.10f, 0.20f, 0.85f},  // blue
        {0.90f, 0.85f, 0.10f},  // yellow
        {0.60f, 0.15f, 0.70f},  // purple
        {0.95f, 0.55f, 0.10f},  // orange
        {0.95f, 0.95f, 0.95f},  // white
    };
    return table[idx];
}

Rgb background_rgb(int idx) {
    static const Rgb table[] = {
        {0.20f, 0.45f, 0.15f},  // grass
        {0.76f, 0.66f, 0.45f},  // sand
        {0.48f, 0.48f, 0.52f},  // stone
    };
    return table[idx];
}

struct ShapeParams {
    int kind = 0;  // 0 circle, 1 square, 2 triangle
    float cx = 32.0f, cy = 32.0f;
    float a = 0.0f, b = 0.0f;  // radius / half-side / (half-base, half-height)
};

bool inside_shape(const ShapeParams& s, float x, float y) {
    switch (s.kind) {
        case 0: {
            const float dx = x - s.cx, dy = y - s.cy;
            return dx * dx + dy * dy <= s.a * s.a;
        }
        case 1:
            return std::abs(x - s.cx) <= s.a && std::abs(y - s.cy) <= s.a;
        default: {
            // Up-pointing isoceles triangle: apex at cy - b, base at cy + b.
            const float dy = y - (s.cy - s.b);
            if (dy < 0.0f || dy > 2.0f * s.b) return false;
            const float halfwidth = s.a * dy / (2.0f * s.b);
            return std::abs(x - s.cx) <= halfwidth;
        }
    }
}

ShapeParams draw_shape_params(int kind, DetRng& rng) {
    ShapeParams s;
    s.kind = kind;
    switch (kind) {
        case 0: {  // circle: area pi*a^2 in ~[420, 1960] px
            s.a = static_cast<float>(rng.next_range(11.6, 25.0));
            break;
        }
        case 1: {  // square: area (2a)^2 in ~[420, 2030] px
            s.a = static_cast<float>(rng.next_range(10.2, 22.5));
            break;
        }
        default: {  // triangle: area 2*a*b, drawn to land in ~[450, 1800] px
            s.a = static_cast<float>(rng.next_range(16.0, 26.0));
            const double lo = std::max(450.0, 2.0 * s.a * 9.0);
            const double hi = std::min(1800.0, 2.0 * s.a * 27.0);
            const double area = rng.next_range(lo, hi);
            s.b = static_cast<float>(area / (2.0 * s.a));
            break;
        }
    }
    const float rx = s.a;
    const float ry = s.kind == 2 ? s.b : s.a;
    s.cx = static_cast<float>(rng.next_range(rx + 1.0, kImg - 1.0 - rx));
    s.cy = static_cast<float>(rng.next_range(ry + 1.0, kImg - 1.0 - ry));
    return s;
}

Tensor render(const ShapeParams& s, const Rgb& fg, const Rgb& bg, float fg_noise, float bg_noise,
              DetRng& rng, std::vector<char>* subject_out) {
    Tensor img({3, kImg, kImg});
    if (subject_out) subject_out->assign(kImg * kImg, 0);
    for (int y = 0; y < kImg; ++y) {
        for (int x = 0; x < kImg; ++x) {
            const bool in = inside_shape(s, static_cast<float>(x) + 0.5f,
                                         static_cast<float>(y) + 0.5f);
            const Rgb base = in ? fg : bg;
            const float amp = in ? fg_noise : bg_noise;
            const float rgb[3] = {base.r, base.g, base.b};
            for (int c = 0; c < 3; ++c) {
                const float n = static_cast<float>(rng.next_range(-amp, amp));
                img.at(c, y, x) = std::clamp(rgb[c] + n, 0.0f, 1.0f);
            }
            if (in && subject_out) (*subject_out)[static_cast<size_t>(y) * kImg + x] = 1;
        }
    }
    return img;
}

SyntheticSample make_sample(std::uint64_t seed, int index) {
    DetRng rng(mix_seed(seed, static_cast<std::uint64_t>(index)));
    SyntheticSample sample;
    sample.color = static_cast<int>(rng.next_below(dataset_colors().size()));
    sample.shape = static_cast<int>(rng.next_below(dataset_shapes().size()));
    sample.background = static_cast<int>(rng.next_below(dataset_backgrounds().size()));
    sample.caption = dataset_colors()[static_cast<size_t>(sample.color)] + " " +
                     dataset_shapes()[static_cast<size_t>(sample.shape)] + " on " +
                     dataset_backgrounds()[static_cast<size_t>(sample.background)];

    const Rgb fg = color_rgb(sample.color);
    const Rgb bg = background_rgb(sample.background);
    std::vector<char> subject;
    int area = 0;
    for (;;) {  // sizes are drawn inside safe bounds; redraw guards rasterization edges
        const ShapeParams s = draw_shape_params(sample.shape, rng);
        sample.image = render(s, fg, bg, 0.03f, 0.05f, rng, &subject);
        area = static_cast<int>(std::count(subject.begin(), subject.end(), 1));
        if (area >= kImg * kImg / 10 && area <= kImg * kImg / 2) break;
    }

    // 16x16 ground truth: majority vote over each 4x4 block.
    sample.gt_mask = Tensor({kLat, kLat});
    for (int by = 0; by < kLat; ++by) {
        for (int bx = 0; bx < kLat; ++bx) {
            int count = 0;
            for (int y = 0; y < 4; ++y) {
                for (int x = 0; x < 4; ++x) {
                    count += subject[static_cast<size_t>(by * 4 + y) * kImg + bx * 4 + x];
                }
            }
            sample.gt_mask.at(by, bx) = count >= 8 ? 1.0f : 0.0f;
        }
    }

    // Canonical subject render for conditioning: centered, fixed size,
    // neutral background — the "reference photo" of the subject.
    ShapeParams canon;
    canon.kind = sample.shape;
    canon.cx = canon.cy = kImg / 2.0f;
    canon.a = sample.shape == 0 ? 18.0f : (sample.shape == 1 ? 16.0f : 20.0f);
    canon.b = sample.shape == 2 ? 16.0f : canon.a;
    sample.reference = render(canon, fg, {0.5f, 0.5f, 0.5f}, 0.02f, 0.02f, rng, nullptr);
    return sample;
}

/// Shared forward+backward for one denoising example. Accumulates grads
/// scaled by `scale` and returns the unscaled per-sample loss.
double denoise_sample_backward(Model& model, const SyntheticSample& sample, int t,
                               const Tensor& eps, double scale, ModelWeights* grads) {
    const Tensor z = encode_latent(sample.image);
    const double ab = alpha_bar_at(t);
    const float sa = static_cast<float>(std::sqrt(ab));
    const float sn = static_cast<float>(std::sqrt(1.0 - ab));
    Tensor corrupted(z.shape());
    for (std::int64_t i = 0; i < z.size(); ++i) {
        corrupted.data()[i] = sa * z.data()[i] + sn * eps.data()[i];
    }

    ConditioningTrace ctr;
    UNetTrace utr;
    const ConditioningSequence cond =
        make_conditioning(model, sample.caption, sample.reference, grads ? &ctr : nullptr);
    Tensor pred = predict_noise(corrupted, t, cond, model.weights, model.cfg.unet, UNetDirective{},
                                nullptr, grads ? &utr : nullptr);

    const std::int64_t dim = pred.size();
    double loss = 0.0;
    for (std::int64_t i = 0; i < dim; ++i) {
        const double d = static_cast<double>(pred.data()[i]) - eps.data()[i];
        loss += d * d;
    }
    loss /= static_cast<double>(dim);
    if (!grads) return loss;

    Tensor deps(pred.shape());
    const float k = static_cast<float>(2.0 * scale / static_cast<double>(dim));
    for (std::int64_t i = 0; i < dim; ++i) {
        deps.data()[i] = k * (pred.data()[i] - eps.data()[i]);
    }

    Tensor dtokens(cond.tokens.shape());
    unet_backward(utr, cond, model.weights, model.cfg.unet, deps, *grads, dtokens, nullptr);

    // Text rows scatter into the embedding table by vocabulary id.
    auto it = grads->find("vocab.table");
    if (it == grads->end()) {
        it = grads->emplace("vocab.table", Tensor(model.vocab.table.shape())).first;
    }
    Tensor& dtable = it->second;
    const int d = cond.d_model;
    for (int i = cond.text_span.begin; i < cond.text_span.end; ++i) {
        const int id = ctr.token_ids[static_cast<size_t>(i)];
        for (int j = 0; j < d; ++j) dtable.at(id, j) += dtokens.at(i, j);
    }
    // IP rows flow back through the image encoder.
    Tensor dip({kIpTokenCount, d});
    for (int i = 0; i < kIpTokenCount; ++i) {
        for (int j = 0; j < d; ++j) dip.at(i, j) = dtokens.at(cond.ip_span.begin + i, j);
    }
    image_encoder_backward(ctr.imgenc, model.weights, model.cfg.imgenc, dip, *grads);
    return loss;
}

void apply_sgd(Model& model, const ModelWeights& grads, float lr, float momentum,
               ModelWeights& velocity, bool decoder_phase) {
    for (const auto& [name, g] : grads) {
        const bool is_decoder = name.rfind("dec.", 0) == 0;
        if (decoder_phase != is_decoder) continue;
        auto it = velocity.find(name);
        if (it == velocity.end()) it = velocity.emplace(name, Tensor(g.shape())).first;
        Tensor& v = it->second;
        Tensor& w = model_param(model, name);
        for (std::int64_t i = 0; i < g.size(); ++i) {
            v.data()[i] = momentum * v.data()[i] + g.data()[i];
            w.data()[i] -= lr * v.data()[i];
        }
    }
}

}  // namespace

std::vector<SyntheticSample> make_dataset(std::uint64_t seed, int n) {
    if (n < 1) throw Error("trainer", "dataset size must be >= 1");
    std::vector<SyntheticSample> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(make_sample(seed, i));
    return out;
}

Tensor encode_latent(const Tensor& image) {
    if (image.rank() != 3 || image.dim(0) != 3 || image.dim(1) != kImg || image.dim(2) != kImg) {
        throw ShapeError("trainer", "encode_latent expects [3,64,64], got " + image.shape_str());
    }
    Tensor z({4, kLat, kLat});
    for (int c = 0; c < 3; ++c) {
        for (int by = 0; by < kLat; ++by) {
            for (int bx = 0; bx < kLat; ++bx) {
                double acc = 0.0;
                for (int y = 0; y < 4; ++y) {
                    for (int x = 0; x < 4; ++x) acc += image.at(c, by * 4 + y, bx * 4 + x);
                }
                z.at(c, by, bx) = static_cast<float>(acc / 16.0 * 2.0 - 1.0);
            }
        }
    }
    return z;  // channel 3 stays zero
}

void validate_train_config(const TrainConfig& cfg) {
    if (cfg.lr <= 0.0f || cfg.momentum < 0.0f || cfg.momentum >= 1.0f) {
        throw ConfigError("learning rate must be positive and momentum in [0,1)");
    }
    if (cfg.batch_size < 1 || cfg.iterations < 1 || cfg.report_interval < 1) {
        throw ConfigError("batch size, iterations and report interval must be >= 1");
    }
}

float train_step(Model& model, const std::vector<const SyntheticSample*>& batch, float lr,
                 float momentum, ModelWeights& velocity, DetRng& rng) {
    if (batch.empty()) throw Error("trainer", "batch must not be empty");
    ModelWeights grads;
    double loss = 0.0;
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (const SyntheticSample* sample : batch) {
        const int t = static_cast<int>(rng.next_below(kTrainTimesteps));
        Tensor eps({4, kLat, kLat});
        for (std::int64_t i = 0; i < eps.size(); ++i) {
            eps.data()[i] = static_cast<float>(rng.next_gauss());
        }
        loss += denoise_sample_backward(model, *sample, t, eps, scale, &grads) * scale;
    }
    if (!std::isfinite(loss)) {
        throw Error("trainer", "non-finite batch loss " + std::to_string(loss) +
                                   " — lower the learning rate");
    }
    apply_sgd(model, grads, lr, momentum, velocity, false);
    return static_cast<float>(loss);
}

std::vector<std::pair<int, float>> run_training(Model& model,
                                                const std::vector<SyntheticSample>& dataset,
                                                const TrainConfig& cfg) {
    validate_train_config(cfg);
    if (dataset.empty()) throw Error("trainer", "dataset must not be empty");
    DetRng rng(cfg.seed);
    ModelWeights velocity;
    std::vector<std::pair<int, float>> history;
    for (int it = 1; it <= cfg.iterations; ++it) {
        std::vector<const SyntheticSample*> batch;
        for (int b = 0; b < cfg.batch_size; ++b) {
            batch.push_back(&dataset[rng.next_below(dataset.size())]);
        }
        const float loss = train_step(model, batch, cfg.lr, cfg.momentum, velocity, rng);
        if (it % cfg.report_interval == 0 || it == cfg.iterations) {
            history.emplace_back(it, loss);
        }
    }
    return history;
}

float train_decoder_step(Model& model, const std::vector<const SyntheticSample*>& batch, float lr,
                         float momentum, ModelWeights& velocity, DetRng& rng) {
    (void)rng;  // decoder reconstruction is deterministic per batch
    if (batch.empty()) throw Error("trainer", "batch must not be empty");
    ModelWeights grads;
    double loss = 0.0;
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (const SyntheticSample* sample : batch) {
        const Tensor z = encode_latent(sample->image);
        DecoderTrace tr;
        Tensor out = decode_latent(z, model.weights, &tr);
        const std::int64_t dim = out.size();
        Tensor dout(out.shape());
        double sample_loss = 0.0;
        for (std::int64_t i = 0; i < dim; ++i) {
            const double d = static_cast<double>(out.data()[i]) - sample->image.data()[i];
            sample_loss += d * d;
            // Clamp kills the gradient outside (0,1).
            const float pre = tr.raw.data()[i] + 0.5f;
            dout.data()[i] = (pre > 0.0f && pre < 1.0f)
                                 ? static_cast<float>(2.0 * scale * d / static_cast<double>(dim))
                                 : 0.0f;
        }
        loss += sample_loss / static_cast<double>(dim) * scale;

        auto slot = [&](const std::string& name) -> Tensor& {
            auto it = grads.find(name);
            if (it == grads.end()) {
                it = grads.emplace(name, Tensor(param(model.weights, name).shape())).first;
            }
            return it->second;
        };
        Tensor dsilu(tr.silu_out.shape());
        conv2d_transpose_backward(tr.silu_out, param(model.weights, "dec.conv2.w"), dout, 2, 1,
                                  &dsilu, &slot("dec.conv2.w"), &slot("dec.conv2.b"));
        Tensor dconv1 = silu_backward(tr.conv1_out, dsilu);
        conv2d_transpose_backward(tr.latent, param(model.weights, "dec.conv1.w"), dconv1, 2, 1,
                                  nullptr, &slot("dec.conv1.w"), &slot("dec.conv1.b"));
    }
    if (!std::isfinite(loss)) throw Error("trainer", "non-finite decoder loss");
    apply_sgd(model, grads, lr, momentum, velocity, true);
    return static_cast<float>(loss);
}

std::vector<std::pair<int, float>> run_decoder_training(Model& model,
                                                        const std::vector<SyntheticSample>& dataset,
                                                        const TrainConfig& cfg) {
    validate_train_config(cfg);
    if (dataset.empty()) throw Error("trainer", "dataset must not be empty");
    DetRng rng(mix_seed(cfg.seed, 0xDEC));
    ModelWeights velocity;
    std::vector<std::pair<int, float>> history;
    for (int it = 1; it <= cfg.iterations; ++it) {
        std::vector<const SyntheticSample*> batch;
        for (int b = 0; b < cfg.batch_size; ++b) {
            batch.push_back(&dataset[rng.next_below(dataset.size())]);
        }
        const float loss = train_decoder_step(model, batch, cfg.lr, cfg.momentum, velocity, rng);
        if (it % cfg.report_interval == 0 || it == cfg.iterations) {
            history.emplace_back(it, loss);
        }
    }
    return history;
}

float check_gradients(Model& model, const SyntheticSample& sample, int n_checks,
                      std::uint64_t seed, float h, float floor) {
    if (n_checks < 1) throw Error("trainer", "n_checks must be >= 1");
    DetRng draw(mix_seed(seed, 0));
    const int t = static_cast<int>(draw.next_below(kTrainTimesteps));
    Tensor eps({4, kLat, kLat});
    for (std::int64_t i = 0; i < eps.size(); ++i) {
        eps.data()[i] = static_cast<float>(draw.next_gauss());
    }

    ModelWeights grads;
    denoise_sample_backward(model, sample, t, eps, 1.0, &grads);
    auto loss_now = [&]() { return denoise_sample_backward(model, sample, t, eps, 1.0, nullptr); };

    std::vector<std::string> names;
    for (const auto& name : model_param_names(model)) {
        if (denoiser_trainable(name)) names.push_back(name);
    }

    DetRng pick(mix_seed(seed, 1));
    float worst = 0.0f;
    for (int k = 0; k < n_checks; ++k) {
        const std::string& name = names[pick.next_below(names.size())];
        Tensor& w = model_param(model, name);
        const std::int64_t idx =
            static_cast<std::int64_t>(pick.next_below(static_cast<std::uint64_t>(w.size())));
        const float orig = w.data()[idx];
        const float hi = orig + h, lo = orig - h;
        w.data()[idx] = hi;
        const double la = loss_now();
        w.data()[idx] = lo;
        const double lb = loss_now();
        w.data()[idx] = orig;
        const double fd = (la - lb) / (static_cast<double>(hi) - lo);
        double analytic = 0.0;
        if (auto it = grads.find(name); it != grads.end()) {
            analytic = it->second.data()[idx];
        }
        const double denom =
            std::max({std::abs(analytic), std::abs(fd), static_cast<double>(floor)});
        worst = std::max(worst, static_cast<float>(std::abs(analytic - fd) / denom));
    }
    return worst;
}

float check_gradients_linear(std::uint64_t seed, int n_checks, float h) {
    DetRng rng(seed);
    const int in = 8, out = 4;
    Tensor x({1, in}), w({in, out}), b({out}), target({1, out});
    for (auto& v : x.values()) v = static_cast<float>(1.5 * rng.next_gauss());
    for (auto& v : w.values()) v = static_cast<float>(0.5 * rng.next_gauss());
    for (auto& v : b.values()) v = static_cast<float>(0.5 * rng.next_gauss());
    for (auto& v : target.values()) v = static_cast<float>(2.0 * rng.next_gauss());

    auto loss_of = [&]() {
        Tensor y = linear(x, w, &b);
        double acc = 0.0;
        for (int j = 0; j < out; ++j) {
            const double d = static_cast<double>(y.at(0, j)) - target.at(0, j);
            acc += d * d;
        }
        return acc / out;
    };

    // Analytic gradients through linear_backward.
    Tensor y = linear(x, w, &b);
    Tensor dy({1, out});
    for (int j = 0; j < out; ++j) {
        dy.at(0, j) = static_cast<float>(2.0 * (y.at(0, j) - target.at(0, j)) / out);
    }
    Tensor dw({in, out}), db({out});
    linear_backward(x, w, dy, nullptr, &dw, &db);

    // Check every parameter (the model is tiny), up to n_checks of them.
    struct Slot {
        Tensor* t;
        Tensor* g;
    };
    const Slot slots[] = {{&w, &dw}, {&b, &db}};
    float worst = 0.0f;
    int done = 0;
    for (const auto& slot : slots) {
        for (std::int64_t i = 0; i < slot.t->size() && done < n_checks; ++i, ++done) {
            const float orig = slot.t->data()[i];
            const float hi2 = orig + h, lo2 = orig - h;
            slot.t->data()[i] = hi2;
            const double la = loss_of();
            slot.t->data()[i] = lo2;
            const double lb = loss_of();
            slot.t->data()[i] = orig;
            const double fd = (la - lb) / (static_cast<double>(hi2) - lo2);
            const double analytic = slot.g->data()[i];
            const double denom = std::max({std::abs(analytic), std::abs(fd), 1e-3});
            worst = std::max(worst, static_cast<float>(std::abs(analytic - fd) / denom));
        }
    }
    return worst;
}

ContrastResult subject_attention_contrast(const Model& model,
                                          const std::vector<SyntheticSample>& samples,
                                          const std::string& capture_layer, StepWindow window,
                                          int pass_steps, std::uint64_t seed) {
    if (window.empty() || window.first < 1 || window.last > pass_steps) {
        throw Error("trainer", "contrast window must fit the pass step count");
    }
    const Schedule schedule = make_schedule(pass_steps);
    ContrastResult result;
    for (size_t si = 0; si < samples.size(); ++si) {
        const SyntheticSample& sample = samples[si];
        const Tensor z = encode_latent(sample.image);
        const ConditioningSequence cond =
            make_conditioning(model, sample.caption, sample.reference);

        CaptureSink sink;
        for (int s1 = window.first; s1 <= window.last; ++s1) {
            const int t = schedule.timesteps[static_cast<size_t>(s1 - 1)];
            DetRng rng(mix_seed(seed, si, static_cast<std::uint64_t>(s1)));
            Tensor eps(z.shape());
            for (std::int64_t i = 0; i < eps.size(); ++i) {
                eps.data()[i] = static_cast<float>(rng.next_gauss());
            }
            const double ab = alpha_bar_at(t);
            Tensor corrupted(z.shape());
            for (std::int64_t i = 0; i < z.size(); ++i) {
                corrupted.data()[i] = static_cast<float>(std::sqrt(ab) * z.data()[i] +
                                                         std::sqrt(1.0 - ab) * eps.data()[i]);
            }
            sink.step = s1 - 1;
            predict_noise(corrupted, t, cond, model.weights, model.cfg.unet, UNetDirective{},
                          &sink);
        }

        // Average the ip1 map over the window, then compare against the
        // ground truth resized to the capture resolution.
        const AttentionRecord* first = nullptr;
        Tensor avg;
        int used = 0;
        for (const auto& rec : sink.records) {
            if (rec.layer_id != capture_layer) continue;
            const int T = rec.probs.dim(2);
            Tensor m = ip_attention_share(rec, Span{T - kIpTokenCount, T}, 0);
            if (!first) {
                first = &rec;
                avg = m;
            } else {
                for (std::int64_t i = 0; i < avg.size(); ++i) avg.data()[i] += m.data()[i];
            }
            ++used;
        }
        if (!first) throw Error("trainer", "capture layer '" + capture_layer + "' not recorded");
        for (auto& v : avg.values()) v /= static_cast<float>(used);

        const Tensor gt = resize_nearest(sample.gt_mask, first->spatial_h, first->spatial_w);
        double in_sum = 0.0, out_sum = 0.0;
        int in_n = 0, out_n = 0;
        for (std::int64_t i = 0; i < avg.size(); ++i) {
            if (gt.data()[i] != 0.0f) {
                in_sum += avg.data()[i];
                ++in_n;
            } else {
                out_sum += avg.data()[i];
                ++out_n;
            }
        }
        ++result.n;
        if (in_n > 0 && out_n > 0) {
            const double inside = in_sum / in_n, outside = out_sum / out_n;
            result.mean_inside += inside;
            result.mean_outside += outside;
            if (inside > outside) ++result.n_inside_greater;
        }
    }
    if (result.n > 0) {
        result.mean_inside /= result.n;
        result.mean_outside /= result.n;
    }
    return result;
}

}  // namespace monkey
