// SPDX-License-Identifier: Apache-2.0
#include "monkey/mask.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "monkey/encoders.hpp"
#include "monkey/error.hpp"

namespace monkey {

namespace {

constexpr int kOtsuBins = 64;

float otsu_threshold(const Tensor& map) {
    // 64-bin histogram over [0,1].
    std::vector<std::int64_t> hist(kOtsuBins, 0);
    for (float v : map.values()) {
        int bin = static_cast<int>(v * kOtsuBins);
        bin = std::clamp(bin, 0, kOtsuBins - 1);
        ++hist[static_cast<size_t>(bin)];
    }
    const double total = static_cast<double>(map.size());
    double sum_all = 0.0;
    for (int i = 0; i < kOtsuBins; ++i) sum_all += i * static_cast<double>(hist[static_cast<size_t>(i)]);

    // Maximize between-class variance over the split "bins <= t vs > t".
    double best = -1.0;
    int best_lo = 0, best_hi = 0;
    double w0 = 0.0, sum0 = 0.0;
    for (int t = 0; t < kOtsuBins - 1; ++t) {
        w0 += static_cast<double>(hist[static_cast<size_t>(t)]);
        sum0 += t * static_cast<double>(hist[static_cast<size_t>(t)]);
        const double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double mu0 = sum0 / w0, mu1 = (sum_all - sum0) / w1;
        const double var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (var > best + 1e-12) {
            best = var;
            best_lo = best_hi = t;
        } else if (std::abs(var - best) <= 1e-12) {
            best_hi = t;  // ties: remember the whole plateau, use its middle
        }
    }
    const double t_mid = (best_lo + best_hi) / 2.0;
    return static_cast<float>((t_mid + 1.0) / kOtsuBins);
}

Tensor map_as_grid(const Tensor& flat, int h, int w) {
    if (flat.size() != static_cast<std::int64_t>(h) * w) {
        throw MaskError("attention map length " + std::to_string(flat.size()) +
                        " does not match spatial dims " + std::to_string(h) + "x" +
                        std::to_string(w));
    }
    return Tensor({h, w}, flat.values());
}

const AttentionRecord& find_record(const std::vector<AttentionRecord>& records,
                                   const std::string& layer, int step) {
    const AttentionRecord* found = nullptr;
    for (const auto& r : records) {
        if (r.layer_id == layer && r.step_index == step) {
            if (found) {
                throw MaskError("duplicate record for layer '" + layer + "' at step " +
                                std::to_string(step));
            }
            found = &r;
        }
    }
    if (!found) {
        throw MaskError("no record for layer '" + layer + "' at step " + std::to_string(step));
    }
    return *found;
}

/// Soft per-step map: the chosen token's share, or the ip2/ip3 union for
/// the background-complement policy.
Tensor step_map(const AttentionRecord& rec, int token, bool complement) {
    const int T = rec.probs.dim(2);
    const Span ip_span{T - kIpTokenCount, T};
    if (!complement) return ip_attention_share(rec, ip_span, token);
    Tensor a = ip_attention_share(rec, ip_span, 1);
    Tensor b = ip_attention_share(rec, ip_span, 2);
    for (std::int64_t i = 0; i < a.size(); ++i) a.data()[i] = std::max(a.data()[i], b.data()[i]);
    return a;
}

}  // namespace

std::string mask_policy_name(const MaskPolicy& policy) {
    std::ostringstream os;
    if (policy.mode == MaskPolicy::Mode::kFixed) {
        os << "fixed(" << policy.threshold << ")";
    } else {
        os << "otsu";
    }
    if (policy.average_binarized) os << "+avg-binarized";
    if (policy.complement_background) os << "+bg-complement";
    return os.str();
}

Tensor normalize01(const Tensor& map) {
    if (map.empty()) throw MaskError("cannot normalize an empty map");
    float lo = map.data()[0], hi = map.data()[0];
    for (float v : map.values()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi <= lo) {
        throw MaskError("attention map has zero range (constant map) — capture produced no signal");
    }
    const float inv = 1.0f / (hi - lo);
    Tensor out(map.shape());
    for (std::int64_t i = 0; i < map.size(); ++i) out.data()[i] = (map.data()[i] - lo) * inv;
    return out;
}

Tensor binarize(const Tensor& map, const MaskPolicy& policy, float* threshold_out) {
    if (map.empty()) throw MaskError("cannot binarize an empty map");
    for (float v : map.values()) {
        if (v < 0.0f || v > 1.0f) {
            throw MaskError("binarize input outside [0,1]; normalize first");
        }
    }
    const float theta =
        policy.mode == MaskPolicy::Mode::kFixed ? policy.threshold : otsu_threshold(map);
    if (threshold_out) *threshold_out = theta;
    Tensor out(map.shape());
    for (std::int64_t i = 0; i < map.size(); ++i) {
        out.data()[i] = map.data()[i] >= theta ? 1.0f : 0.0f;  // ties count as subject
    }
    return out;
}

SubjectMask derive_mask(const std::vector<AttentionRecord>& records,
                        const std::string& capture_layer, StepWindow window, int token,
                        const MaskPolicy& policy) {
    if (window.empty() || window.first < 1) {
        throw MaskError("step window [" + std::to_string(window.first) + "," +
                        std::to_string(window.last) + "] is empty or not 1-based");
    }
    if (!policy.complement_background && (token < 0 || token >= kIpTokenCount)) {
        throw MaskError("IP token index " + std::to_string(token) + " outside 0.." +
                        std::to_string(kIpTokenCount - 1));
    }

    SubjectMask mask;
    mask.source.layer_id = capture_layer;
    mask.source.token = policy.complement_background ? -1 : token;
    mask.source.policy = mask_policy_name(policy);

    int h = 0, w = 0;
    std::vector<Tensor> maps;
    for (int s1 = window.first; s1 <= window.last; ++s1) {
        const int step = s1 - 1;  // configs are 1-based, records 0-based
        const AttentionRecord& rec = find_record(records, capture_layer, step);
        if (maps.empty()) {
            h = rec.spatial_h;
            w = rec.spatial_w;
        } else if (rec.spatial_h != h || rec.spatial_w != w) {
            throw MaskError("capture records disagree on spatial dims at layer '" + capture_layer +
                            "'");
        }
        maps.push_back(step_map(rec, token, policy.complement_background));
        mask.source.steps.push_back(step);
    }

    auto finish_soft = [&](Tensor soft) {
        Tensor norm = normalize01(soft);
        if (policy.complement_background) {
            for (auto& v : norm.values()) v = 1.0f - v;
        }
        mask.grid = map_as_grid(binarize(norm, policy, &mask.source.threshold), h, w);
    };

    if (policy.average_binarized) {
        // Per-step masks, then majority vote (ties -> subject).
        Tensor votes(maps[0].shape());
        float theta_last = 0.0f;
        for (auto& m : maps) {
            Tensor norm = normalize01(m);
            if (policy.complement_background) {
                for (auto& v : norm.values()) v = 1.0f - v;
            }
            Tensor bin = binarize(norm, policy, &theta_last);
            for (std::int64_t i = 0; i < votes.size(); ++i) votes.data()[i] += bin.data()[i];
        }
        const float half = static_cast<float>(maps.size()) / 2.0f;
        Tensor out(votes.shape());
        for (std::int64_t i = 0; i < votes.size(); ++i) {
            out.data()[i] = votes.data()[i] >= half ? 1.0f : 0.0f;
        }
        mask.source.threshold = theta_last;
        mask.grid = map_as_grid(out, h, w);
        return mask;
    }

    Tensor avg(maps[0].shape());
    for (const auto& m : maps) {
        for (std::int64_t i = 0; i < avg.size(); ++i) avg.data()[i] += m.data()[i];
    }
    for (auto& v : avg.values()) v /= static_cast<float>(maps.size());
    finish_soft(std::move(avg));
    return mask;
}

Tensor mask_for_layer(const SubjectMask& mask, const std::string& layer_id,
                      const UNetConfig& cfg) {
    const auto [h, w] = layer_resolution(layer_id, cfg);
    if (mask.grid.rank() != 2) throw MaskError("mask grid must be rank 2");
    if (mask.grid.dim(0) == h && mask.grid.dim(1) == w) return mask.grid;
    return resize_nearest(mask.grid, h, w);
}

std::string mask_provenance_text(const SubjectMask& mask) {
    std::ostringstream os;
    os << "layer = " << mask.source.layer_id << "\n";
    os << "steps =";
    for (int s : mask.source.steps) os << " " << s;
    os << "\n";
    os << "token = " << mask.source.token << "\n";
    os << "policy = " << mask.source.policy << "\n";
    os << "threshold = " << mask.source.threshold << "\n";
    os << "subject_fraction = ";
    double frac = 0.0;
    for (float v : mask.grid.values()) frac += v;
    os << (mask.grid.size() > 0 ? frac / static_cast<double>(mask.grid.size()) : 0.0) << "\n";
    return os.str();
}

}  // namespace monkey
