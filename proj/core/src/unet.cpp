// SPDX-License-Identifier: Apache-2.0
#include "monkey/unet.hpp"

#include <algorithm>
#include <cmath>

#include "monkey/autograd.hpp"
#include "monkey/error.hpp"
#include "monkey/sampler.hpp"

namespace monkey {

namespace {

constexpr int kGroups = 8;

const std::vector<std::string>& canonical_sites() {
    static const std::vector<std::string> ids = {"down.attn", "mid.attn", "up1.attn1", "up1.attn2",
                                                 "up2.attn1"};
    return ids;
}

struct SiteGeom {
    int h, w, channels;
};

SiteGeom site_geom(const std::string& id, const UNetConfig& cfg) {
    if (id == "down.attn") return {cfg.spatial / 2, cfg.spatial / 2, cfg.mid_width};
    if (id == "mid.attn") return {cfg.spatial / 4, cfg.spatial / 4, cfg.mid_width};
    if (id == "up1.attn1" || id == "up1.attn2") {
        return {cfg.spatial / 2, cfg.spatial / 2, cfg.mid_width};
    }
    if (id == "up2.attn1") return {cfg.spatial, cfg.spatial, cfg.base_width};
    throw Error("unet", "unknown attention site '" + id + "'");
}

const AttentionSite* find_site(const UNetConfig& cfg, const std::string& id) {
    for (const auto& s : cfg.sites) {
        if (s.layer_id == id) return &s;
    }
    return nullptr;
}

void expect_shape(const Tensor& x, int c, int h, int w, const char* where) {
    if (x.rank() != 3 || x.dim(0) != c || x.dim(1) != h || x.dim(2) != w) {
        throw ShapeError("unet", std::string("shape drift at ") + where + ": got " + x.shape_str());
    }
}

Tensor& grad_slot(ModelWeights& grads, const ModelWeights& weights, const std::string& name) {
    auto it = grads.find(name);
    if (it == grads.end()) it = grads.emplace(name, Tensor(param(weights, name).shape())).first;
    return it->second;
}

IpMaskDirective site_directive(const UNetDirective& d, const std::string& id) {
    IpMaskDirective out;
    out.ip_scale = d.attn.ip_scale;
    if (d.attn.mask_grid.has_value() &&
        (d.mask_only_sites.empty() ||
         std::find(d.mask_only_sites.begin(), d.mask_only_sites.end(), id) !=
             d.mask_only_sites.end())) {
        out.mask_grid = d.attn.mask_grid;
    }
    return out;
}

Tensor resblock_forward(const Tensor& x, const Tensor& temb, const ModelWeights& w,
                        const std::string& p, ResBlockTrace* tr) {
    Tensor gn1 = group_norm(x, kGroups, param(w, p + ".gn1.g"), param(w, p + ".gn1.b"));
    Tensor s1 = silu(gn1);
    const Tensor& c1b = param(w, p + ".conv1.b");
    Tensor c1 = conv2d(s1, param(w, p + ".conv1.w"), &c1b, 1, 1);
    const Tensor& tbb = param(w, p + ".temb.b");
    Tensor tb = linear(temb, param(w, p + ".temb.w"), &tbb);  // [1, C]
    const int C = c1.dim(0);
    const std::int64_t plane = static_cast<std::int64_t>(c1.dim(1)) * c1.dim(2);
    for (int c = 0; c < C; ++c) {
        const float b = tb.at(0, c);
        float* row = c1.data() + static_cast<std::int64_t>(c) * plane;
        for (std::int64_t i = 0; i < plane; ++i) row[i] += b;
    }
    Tensor gn2 = group_norm(c1, kGroups, param(w, p + ".gn2.g"), param(w, p + ".gn2.b"));
    Tensor s2 = silu(gn2);
    const Tensor& c2b = param(w, p + ".conv2.b");
    Tensor c2 = conv2d(s2, param(w, p + ".conv2.w"), &c2b, 1, 1);
    if (tr) {
        tr->x_in = x;
        tr->gn1_out = std::move(gn1);
        tr->silu1_in_conv = std::move(s1);
        tr->biased = c1;
        tr->gn2_out = std::move(gn2);
        tr->silu2_in_conv = std::move(s2);
    }
    return add(x, c2);
}

Tensor resblock_backward(const ResBlockTrace& tr, const Tensor& temb, const ModelWeights& w,
                         const std::string& p, const Tensor& dout, ModelWeights& grads) {
    Tensor dconv2_in(tr.silu2_in_conv.shape());
    conv2d_backward(tr.silu2_in_conv, param(w, p + ".conv2.w"), dout, 1, 1, &dconv2_in,
                    &grad_slot(grads, w, p + ".conv2.w"), &grad_slot(grads, w, p + ".conv2.b"));
    Tensor dgn2 = silu_backward(tr.gn2_out, dconv2_in);
    Tensor dbiased(tr.biased.shape());
    group_norm_backward(tr.biased, kGroups, param(w, p + ".gn2.g"), dgn2, &dbiased,
                        &grad_slot(grads, w, p + ".gn2.g"), &grad_slot(grads, w, p + ".gn2.b"));
    // The timestep bias touched every spatial position of its channel.
    const int C = dbiased.dim(0);
    const std::int64_t plane = static_cast<std::int64_t>(dbiased.dim(1)) * dbiased.dim(2);
    Tensor dtb({1, C});
    for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        const float* row = dbiased.data() + static_cast<std::int64_t>(c) * plane;
        for (std::int64_t i = 0; i < plane; ++i) acc += row[i];
        dtb.at(0, c) = static_cast<float>(acc);
    }
    linear_backward(temb, param(w, p + ".temb.w"), dtb, nullptr,
                    &grad_slot(grads, w, p + ".temb.w"), &grad_slot(grads, w, p + ".temb.b"));
    Tensor dconv1_in(tr.silu1_in_conv.shape());
    conv2d_backward(tr.silu1_in_conv, param(w, p + ".conv1.w"), dbiased, 1, 1, &dconv1_in,
                    &grad_slot(grads, w, p + ".conv1.w"), &grad_slot(grads, w, p + ".conv1.b"));
    Tensor dgn1 = silu_backward(tr.gn1_out, dconv1_in);
    Tensor dx(tr.x_in.shape());
    group_norm_backward(tr.x_in, kGroups, param(w, p + ".gn1.g"), dgn1, &dx,
                        &grad_slot(grads, w, p + ".gn1.g"), &grad_slot(grads, w, p + ".gn1.b"));
    return add(dx, dout);
}

AttentionWeights site_weights(const ModelWeights& w, const std::string& id, int heads) {
    return AttentionWeights{&param(w, id + ".wq"), &param(w, id + ".wk"), &param(w, id + ".wv"),
                            &param(w, id + ".wo"), heads};
}

Tensor attn_site_forward(const Tensor& x, const ConditioningSequence& cond, const ModelWeights& w,
                         const std::string& id, int heads, const UNetDirective& directive,
                         CaptureSink* sink, AttnSiteTrace* tr) {
    Tensor gn = group_norm(x, kGroups, param(w, id + ".gn.g"), param(w, id + ".gn.b"));
    Tensor flat = flatten_spatial(gn);
    const IpMaskDirective dir = site_directive(directive, id);
    Tensor a = cross_attention(flat, cond, site_weights(w, id, heads), dir, sink, id, x.dim(1),
                               x.dim(2), tr ? &tr->attn : nullptr);
    if (tr) {
        tr->x_in = x;
        tr->flat = std::move(flat);
    }
    return add(x, unflatten_spatial(a, x.dim(0), x.dim(1), x.dim(2)));
}

Tensor attn_site_backward(const AttnSiteTrace& tr, const ConditioningSequence& cond,
                          const ModelWeights& w, const std::string& id, int heads,
                          const Tensor& dout, ModelWeights& grads, Tensor& dtokens) {
    const int C = tr.x_in.dim(0), H = tr.x_in.dim(1), W = tr.x_in.dim(2);
    Tensor dattn = flatten_spatial(dout);
    Tensor dflat({H * W, C});
    cross_attention_backward(tr.attn, tr.flat, cond.tokens, site_weights(w, id, heads), dattn,
                             dflat, dtokens, grad_slot(grads, w, id + ".wq"),
                             grad_slot(grads, w, id + ".wk"), grad_slot(grads, w, id + ".wv"),
                             grad_slot(grads, w, id + ".wo"));
    Tensor dgn = unflatten_spatial(dflat, C, H, W);
    Tensor dx(tr.x_in.shape());
    group_norm_backward(tr.x_in, kGroups, param(w, id + ".gn.g"), dgn, &dx,
                        &grad_slot(grads, w, id + ".gn.g"), &grad_slot(grads, w, id + ".gn.b"));
    return add(dx, dout);
}

void add_resblock_specs(std::vector<ParamSpec>& v, const std::string& p, int ch, int temb_dim) {
    using Init = ParamSpec::Init;
    v.push_back({p + ".gn1.g", {ch}, Init::kOnes});
    v.push_back({p + ".gn1.b", {ch}, Init::kZeros});
    v.push_back({p + ".conv1.w", {ch, ch, 3, 3}, Init::kConvHe});
    v.push_back({p + ".conv1.b", {ch}, Init::kZeros});
    v.push_back({p + ".temb.w", {temb_dim, ch}, Init::kLinear});
    v.push_back({p + ".temb.b", {ch}, Init::kZeros});
    v.push_back({p + ".gn2.g", {ch}, Init::kOnes});
    v.push_back({p + ".gn2.b", {ch}, Init::kZeros});
    v.push_back({p + ".conv2.w", {ch, ch, 3, 3}, Init::kConvHe});
    v.push_back({p + ".conv2.b", {ch}, Init::kZeros});
}

void add_site_specs(std::vector<ParamSpec>& v, const std::string& id, int ch, int d_model) {
    using Init = ParamSpec::Init;
    v.push_back({id + ".gn.g", {ch}, Init::kOnes});
    v.push_back({id + ".gn.b", {ch}, Init::kZeros});
    v.push_back({id + ".wq", {ch, ch}, Init::kLinear});
    v.push_back({id + ".wk", {d_model, ch}, Init::kLinear});
    v.push_back({id + ".wv", {d_model, ch}, Init::kLinear});
    // Zero output projection: sites start as identity maps and training
    // opens them up, so an untrained model is a plain conv net.
    v.push_back({id + ".wo", {ch, ch}, Init::kZeros});
}

}  // namespace

void validate_unet_config(const UNetConfig& cfg) {
    if (cfg.latent_channels < 1) throw ConfigError("latent_channels must be >= 1");
    if (cfg.spatial < 4 || cfg.spatial % 4 != 0) {
        throw ConfigError("spatial size must be a positive multiple of 4, got " +
                          std::to_string(cfg.spatial));
    }
    if (cfg.base_width % kGroups != 0 || cfg.mid_width % kGroups != 0) {
        throw ConfigError("widths must be multiples of " + std::to_string(kGroups));
    }
    if (cfg.temb_dim < 2 || cfg.temb_dim % 2 != 0) {
        throw ConfigError("temb_dim must be even and >= 2");
    }
    if (cfg.sites.empty()) throw ConfigError("attention site list must not be empty");
    // Sites must be a subsequence of the fixed block layout, each id unique.
    size_t cursor = 0;
    bool has_up = false;
    const auto& canon = canonical_sites();
    for (const auto& s : cfg.sites) {
        const auto it = std::find(canon.begin() + static_cast<long>(cursor), canon.end(), s.layer_id);
        if (it == canon.end()) {
            if (std::find(canon.begin(), canon.end(), s.layer_id) != canon.end()) {
                throw ConfigError("attention sites out of block order or duplicated: '" +
                                  s.layer_id + "'");
            }
            throw ConfigError("unknown attention site '" + s.layer_id + "'");
        }
        cursor = static_cast<size_t>(it - canon.begin()) + 1;
        if (s.layer_id.rfind("up", 0) == 0) has_up = true;
        const int ch = site_geom(s.layer_id, cfg).channels;
        if (s.heads < 1 || ch % s.heads != 0) {
            throw ConfigError("heads " + std::to_string(s.heads) + " must divide width " +
                              std::to_string(ch) + " at site '" + s.layer_id + "'");
        }
    }
    if (!has_up) throw ConfigError("at least one up-block attention site is required");
}

std::pair<int, int> layer_resolution(const std::string& layer_id, const UNetConfig& cfg) {
    if (!find_site(cfg, layer_id)) {
        throw Error("unet", "unknown attention site '" + layer_id + "'");
    }
    const SiteGeom g = site_geom(layer_id, cfg);
    return {g.h, g.w};
}

int layer_channels(const std::string& layer_id, const UNetConfig& cfg) {
    if (!find_site(cfg, layer_id)) {
        throw Error("unet", "unknown attention site '" + layer_id + "'");
    }
    return site_geom(layer_id, cfg).channels;
}

Tensor sinusoidal_time_embedding(int t, int dim) {
    if (dim < 2 || dim % 2 != 0) throw Error("unet", "embedding dim must be even and >= 2");
    const int half = dim / 2;
    Tensor out({1, dim});
    for (int i = 0; i < half; ++i) {
        const double freq =
            half > 1 ? std::exp(-std::log(10000.0) * i / static_cast<double>(half - 1)) : 1.0;
        out.at(0, i) = static_cast<float>(std::sin(t * freq));
        out.at(0, half + i) = static_cast<float>(std::cos(t * freq));
    }
    return out;
}

Tensor flatten_spatial(const Tensor& x) {
    if (x.rank() != 3) throw ShapeError("unet", "flatten_spatial expects [C,H,W], got " + x.shape_str());
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    Tensor out({H * W, C});
    for (int c = 0; c < C; ++c) {
        for (int y = 0; y < H; ++y) {
            for (int xx = 0; xx < W; ++xx) out.at(y * W + xx, c) = x.at(c, y, xx);
        }
    }
    return out;
}

Tensor unflatten_spatial(const Tensor& x, int channels, int h, int w) {
    if (x.rank() != 2 || x.dim(0) != h * w || x.dim(1) != channels) {
        throw ShapeError("unet", "unflatten_spatial shape mismatch: " + x.shape_str());
    }
    Tensor out({channels, h, w});
    for (int c = 0; c < channels; ++c) {
        for (int y = 0; y < h; ++y) {
            for (int xx = 0; xx < w; ++xx) out.at(c, y, xx) = x.at(y * w + xx, c);
        }
    }
    return out;
}

Tensor predict_noise(const Tensor& latent, int t, const ConditioningSequence& cond,
                     const ModelWeights& weights, const UNetConfig& cfg,
                     const UNetDirective& directive, CaptureSink* sink, UNetTrace* trace) {
    validate_unet_config(cfg);
    expect_shape(latent, cfg.latent_channels, cfg.spatial, cfg.spatial, "input latent");
    if (t < 0 || t >= kTrainTimesteps) {
        throw Error("unet", "timestep " + std::to_string(t) + " outside [0, " +
                                std::to_string(kTrainTimesteps) + ")");
    }
    if (cond.d_model != cfg.d_model) {
        throw ShapeError("unet", "conditioning width " + std::to_string(cond.d_model) +
                                     " != configured d_model " + std::to_string(cfg.d_model));
    }

    const int sp = cfg.spatial;
    Tensor temb = sinusoidal_time_embedding(t, cfg.temb_dim);
    if (trace) {
        trace->temb = temb;
        trace->latent = latent;
    }

    const Tensor& icb = param(weights, "in.conv.b");
    Tensor x = conv2d(latent, param(weights, "in.conv.w"), &icb, 1, 1);
    if (trace) trace->in_conv_out = x;
    x = resblock_forward(x, temb, weights, "d0", trace ? &trace->d0 : nullptr);
    Tensor skip_b = x;
    if (trace) trace->down1_in = x;

    const Tensor& d1b = param(weights, "down1.conv.b");
    x = conv2d(x, param(weights, "down1.conv.w"), &d1b, 2, 1);
    expect_shape(x, cfg.mid_width, sp / 2, sp / 2, "down1");
    x = resblock_forward(x, temb, weights, "d1", trace ? &trace->d1 : nullptr);
    if (const AttentionSite* s = find_site(cfg, "down.attn")) {
        x = attn_site_forward(x, cond, weights, s->layer_id, s->heads, directive, sink,
                              trace ? &trace->down_attn : nullptr);
    }
    Tensor skip_a = x;
    if (trace) trace->down2_in = x;

    const Tensor& d2b = param(weights, "down2.conv.b");
    x = conv2d(x, param(weights, "down2.conv.w"), &d2b, 2, 1);
    expect_shape(x, cfg.mid_width, sp / 4, sp / 4, "down2");
    x = resblock_forward(x, temb, weights, "m0", trace ? &trace->m0 : nullptr);
    if (const AttentionSite* s = find_site(cfg, "mid.attn")) {
        x = attn_site_forward(x, cond, weights, s->layer_id, s->heads, directive, sink,
                              trace ? &trace->mid_attn : nullptr);
    }
    x = resblock_forward(x, temb, weights, "m1", trace ? &trace->m1 : nullptr);

    x = upsample2x(x);
    if (trace) trace->up1_conv_in = x;
    const Tensor& u1b = param(weights, "up1.conv.b");
    x = conv2d(x, param(weights, "up1.conv.w"), &u1b, 1, 1);
    expect_shape(x, cfg.mid_width, sp / 2, sp / 2, "up1");
    x = add(x, skip_a);
    x = resblock_forward(x, temb, weights, "u1", trace ? &trace->u1 : nullptr);
    if (const AttentionSite* s = find_site(cfg, "up1.attn1")) {
        x = attn_site_forward(x, cond, weights, s->layer_id, s->heads, directive, sink,
                              trace ? &trace->up1_attn1 : nullptr);
    }
    if (const AttentionSite* s = find_site(cfg, "up1.attn2")) {
        x = attn_site_forward(x, cond, weights, s->layer_id, s->heads, directive, sink,
                              trace ? &trace->up1_attn2 : nullptr);
    }

    x = upsample2x(x);
    if (trace) trace->up2_conv_in = x;
    const Tensor& u2b = param(weights, "up2.conv.b");
    x = conv2d(x, param(weights, "up2.conv.w"), &u2b, 1, 1);
    expect_shape(x, cfg.base_width, sp, sp, "up2");
    x = add(x, skip_b);
    x = resblock_forward(x, temb, weights, "u2", trace ? &trace->u2 : nullptr);
    if (const AttentionSite* s = find_site(cfg, "up2.attn1")) {
        x = attn_site_forward(x, cond, weights, s->layer_id, s->heads, directive, sink,
                              trace ? &trace->up2_attn1 : nullptr);
    }

    if (trace) trace->out_gn_in = x;
    Tensor gn = group_norm(x, kGroups, param(weights, "out.gn.g"), param(weights, "out.gn.b"));
    if (trace) trace->out_gn_out = gn;
    Tensor s = silu(gn);
    const Tensor& ocb = param(weights, "out.conv.b");
    Tensor eps = conv2d(s, param(weights, "out.conv.w"), &ocb, 1, 1);
    expect_shape(eps, cfg.latent_channels, sp, sp, "output");
    return eps;
}

void unet_backward(const UNetTrace& trace, const ConditioningSequence& cond,
                   const ModelWeights& weights, const UNetConfig& cfg, const Tensor& deps,
                   ModelWeights& grads, Tensor& dtokens, Tensor* dlatent) {
    validate_unet_config(cfg);
    expect_shape(deps, cfg.latent_channels, cfg.spatial, cfg.spatial, "output gradient");

    // Head: eps = conv(silu(gn(x))).
    Tensor head_silu = silu(trace.out_gn_out);
    Tensor dsilu(head_silu.shape());
    conv2d_backward(head_silu, param(weights, "out.conv.w"), deps, 1, 1, &dsilu,
                    &grad_slot(grads, weights, "out.conv.w"),
                    &grad_slot(grads, weights, "out.conv.b"));
    Tensor dgn = silu_backward(trace.out_gn_out, dsilu);
    Tensor dx(trace.out_gn_in.shape());
    group_norm_backward(trace.out_gn_in, kGroups, param(weights, "out.gn.g"), dgn, &dx,
                        &grad_slot(grads, weights, "out.gn.g"),
                        &grad_slot(grads, weights, "out.gn.b"));

    if (const AttentionSite* s = find_site(cfg, "up2.attn1")) {
        dx = attn_site_backward(trace.up2_attn1, cond, weights, s->layer_id, s->heads, dx, grads,
                                dtokens);
    }
    dx = resblock_backward(trace.u2, trace.temb, weights, "u2", dx, grads);
    Tensor dskip_b = dx;
    Tensor dup2_in(trace.up2_conv_in.shape());
    conv2d_backward(trace.up2_conv_in, param(weights, "up2.conv.w"), dx, 1, 1, &dup2_in,
                    &grad_slot(grads, weights, "up2.conv.w"),
                    &grad_slot(grads, weights, "up2.conv.b"));
    dx = upsample2x_backward(dup2_in);

    if (const AttentionSite* s = find_site(cfg, "up1.attn2")) {
        dx = attn_site_backward(trace.up1_attn2, cond, weights, s->layer_id, s->heads, dx, grads,
                                dtokens);
    }
    if (const AttentionSite* s = find_site(cfg, "up1.attn1")) {
        dx = attn_site_backward(trace.up1_attn1, cond, weights, s->layer_id, s->heads, dx, grads,
                                dtokens);
    }
    dx = resblock_backward(trace.u1, trace.temb, weights, "u1", dx, grads);
    Tensor dskip_a = dx;
    Tensor dup1_in(trace.up1_conv_in.shape());
    conv2d_backward(trace.up1_conv_in, param(weights, "up1.conv.w"), dx, 1, 1, &dup1_in,
                    &grad_slot(grads, weights, "up1.conv.w"),
                    &grad_slot(grads, weights, "up1.conv.b"));
    dx = upsample2x_backward(dup1_in);

    dx = resblock_backward(trace.m1, trace.temb, weights, "m1", dx, grads);
    if (const AttentionSite* s = find_site(cfg, "mid.attn")) {
        dx = attn_site_backward(trace.mid_attn, cond, weights, s->layer_id, s->heads, dx, grads,
                                dtokens);
    }
    dx = resblock_backward(trace.m0, trace.temb, weights, "m0", dx, grads);
    Tensor ddown2_in(trace.down2_in.shape());
    conv2d_backward(trace.down2_in, param(weights, "down2.conv.w"), dx, 2, 1, &ddown2_in,
                    &grad_slot(grads, weights, "down2.conv.w"),
                    &grad_slot(grads, weights, "down2.conv.b"));
    dx = add(ddown2_in, dskip_a);  // skip A rejoins where it split off

    if (const AttentionSite* s = find_site(cfg, "down.attn")) {
        dx = attn_site_backward(trace.down_attn, cond, weights, s->layer_id, s->heads, dx, grads,
                                dtokens);
    }
    dx = resblock_backward(trace.d1, trace.temb, weights, "d1", dx, grads);
    Tensor ddown1_in(trace.down1_in.shape());
    conv2d_backward(trace.down1_in, param(weights, "down1.conv.w"), dx, 2, 1, &ddown1_in,
                    &grad_slot(grads, weights, "down1.conv.w"),
                    &grad_slot(grads, weights, "down1.conv.b"));
    dx = add(ddown1_in, dskip_b);  // skip B rejoins

    dx = resblock_backward(trace.d0, trace.temb, weights, "d0", dx, grads);
    conv2d_backward(trace.latent, param(weights, "in.conv.w"), dx, 1, 1, dlatent,
                    &grad_slot(grads, weights, "in.conv.w"),
                    &grad_slot(grads, weights, "in.conv.b"));
}

std::vector<ParamSpec> unet_param_specs(const UNetConfig& cfg) {
    validate_unet_config(cfg);
    using Init = ParamSpec::Init;
    std::vector<ParamSpec> v;
    v.push_back({"in.conv.w", {cfg.base_width, cfg.latent_channels, 3, 3}, Init::kConvHe});
    v.push_back({"in.conv.b", {cfg.base_width}, Init::kZeros});
    add_resblock_specs(v, "d0", cfg.base_width, cfg.temb_dim);
    v.push_back({"down1.conv.w", {cfg.mid_width, cfg.base_width, 3, 3}, Init::kConvHe});
    v.push_back({"down1.conv.b", {cfg.mid_width}, Init::kZeros});
    add_resblock_specs(v, "d1", cfg.mid_width, cfg.temb_dim);
    if (find_site(cfg, "down.attn")) {
        add_site_specs(v, "down.attn", cfg.mid_width, cfg.d_model);
    }
    v.push_back({"down2.conv.w", {cfg.mid_width, cfg.mid_width, 3, 3}, Init::kConvHe});
    v.push_back({"down2.conv.b", {cfg.mid_width}, Init::kZeros});
    add_resblock_specs(v, "m0", cfg.mid_width, cfg.temb_dim);
    if (find_site(cfg, "mid.attn")) {
        add_site_specs(v, "mid.attn", cfg.mid_width, cfg.d_model);
    }
    add_resblock_specs(v, "m1", cfg.mid_width, cfg.temb_dim);
    v.push_back({"up1.conv.w", {cfg.mid_width, cfg.mid_width, 3, 3}, Init::kConvHe});
    v.push_back({"up1.conv.b", {cfg.mid_width}, Init::kZeros});
    add_resblock_specs(v, "u1", cfg.mid_width, cfg.temb_dim);
    if (find_site(cfg, "up1.attn1")) {
        add_site_specs(v, "up1.attn1", cfg.mid_width, cfg.d_model);
    }
    if (find_site(cfg, "up1.attn2")) {
        add_site_specs(v, "up1.attn2", cfg.mid_width, cfg.d_model);
    }
    v.push_back({"up2.conv.w", {cfg.base_width, cfg.mid_width, 3, 3}, Init::kConvHe});
    v.push_back({"up2.conv.b", {cfg.base_width}, Init::kZeros});
    add_resblock_specs(v, "u2", cfg.base_width, cfg.temb_dim);
    if (find_site(cfg, "up2.attn1")) {
        add_site_specs(v, "up2.attn1", cfg.base_width, cfg.d_model);
    }
    v.push_back({"out.gn.g", {cfg.base_width}, Init::kOnes});
    v.push_back({"out.gn.b", {cfg.base_width}, Init::kZeros});
    v.push_back({"out.conv.w", {cfg.latent_channels, cfg.base_width, 3, 3}, Init::kZeros});
    v.push_back({"out.conv.b", {cfg.latent_channels}, Init::kZeros});
    return v;
}

}  // namespace monkey
