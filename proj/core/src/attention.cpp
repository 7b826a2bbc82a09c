// SPDX-License-Identifier: Apache-2.0
#include "monkey/attention.hpp"

#include <cmath>

#include "monkey/error.hpp"

namespace monkey {

namespace {

void validate_weights(const AttentionWeights& w, int d_l, int d_model) {
    if (!w.wq || !w.wk || !w.wv || !w.wo) throw Error("attention", "missing projection weights");
    if (w.wq->rank() != 2 || w.wq->dim(0) != d_l || w.wq->dim(1) != d_l) {
        throw ShapeError("attention", "W_q must be [" + std::to_string(d_l) + "," +
                                          std::to_string(d_l) + "], got " + w.wq->shape_str());
    }
    if (w.wk->rank() != 2 || w.wk->dim(0) != d_model || w.wk->dim(1) != d_l) {
        throw ShapeError("attention", "W_k must be [" + std::to_string(d_model) + "," +
                                          std::to_string(d_l) + "], got " + w.wk->shape_str());
    }
    if (w.wv->rank() != 2 || w.wv->dim(0) != d_model || w.wv->dim(1) != d_l) {
        throw ShapeError("attention", "W_v must be [" + std::to_string(d_model) + "," +
                                          std::to_string(d_l) + "], got " + w.wv->shape_str());
    }
    if (w.wo->rank() != 2 || w.wo->dim(0) != d_l || w.wo->dim(1) != d_l) {
        throw ShapeError("attention", "W_out must be [" + std::to_string(d_l) + "," +
                                          std::to_string(d_l) + "], got " + w.wo->shape_str());
    }
    if (w.heads < 1 || d_l % w.heads != 0) {
        throw Error("attention", "heads " + std::to_string(w.heads) + " must divide width " +
                                     std::to_string(d_l));
    }
}

}  // namespace

Tensor cross_attention(const Tensor& features, const ConditioningSequence& cond,
                       const AttentionWeights& weights, const IpMaskDirective& directive,
                       CaptureSink* sink, const std::string& layer_id, int spatial_h,
                       int spatial_w, AttentionTrace* trace) {
    if (features.rank() != 2) {
        throw ShapeError("attention", "features must be [S, d_l], got " + features.shape_str());
    }
    const int S = features.dim(0), d_l = features.dim(1);
    const int T = cond.tokens.dim(0);
    if (S != spatial_h * spatial_w) {
        throw ShapeError("attention", "S = " + std::to_string(S) + " does not match spatial dims " +
                                          std::to_string(spatial_h) + "x" + std::to_string(spatial_w));
    }
    validate_weights(weights, d_l, cond.d_model);
    if (directive.ip_scale < 0.0f) throw Error("attention", "ip_scale must be >= 0");
    if (cond.ip_span.end > T || cond.ip_span.begin < 0) {
        throw Error("attention", "ip span out of range");
    }

    const int heads = weights.heads;
    const int dh = d_l / heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    Tensor q = matmul(features, *weights.wq);     // [S, d_l]
    Tensor k = matmul(cond.tokens, *weights.wk);  // [T, d_l]
    Tensor v = matmul(cond.tokens, *weights.wv);  // [T, d_l]

    // Raw scaled dot-product logits per head.
    Tensor logits({heads, S, T});
    for (int h = 0; h < heads; ++h) {
        const int off = h * dh;
        for (int s = 0; s < S; ++s) {
            const float* qrow = q.data() + static_cast<size_t>(s) * d_l + off;
            for (int t = 0; t < T; ++t) {
                const float* krow = k.data() + static_cast<size_t>(t) * d_l + off;
                double acc = 0.0;
                for (int j = 0; j < dh; ++j) acc += static_cast<double>(qrow[j]) * krow[j];
                logits.at(h, s, t) = static_cast<float>(acc * inv_sqrt_dh);
            }
        }
    }
    check_finite(logits, "attention logits");

    // IP scale as a logit bias; exact no-op at 1, exact removal at 0.
    if (directive.ip_scale != 1.0f && cond.ip_span.length() > 0) {
        const float bias = directive.ip_scale == 0.0f
                               ? 0.0f
                               : static_cast<float>(std::log(static_cast<double>(directive.ip_scale)));
        for (int h = 0; h < heads; ++h) {
            for (int s = 0; s < S; ++s) {
                for (int t = cond.ip_span.begin; t < cond.ip_span.end; ++t) {
                    logits.at(h, s, t) =
                        directive.ip_scale == 0.0f ? kNegInfLogit : logits.at(h, s, t) + bias;
                }
            }
        }
    }

    // Background positions lose their IP columns before the softmax.
    if (directive.mask_grid.has_value() && cond.ip_span.length() > 0) {
        const Tensor& grid = *directive.mask_grid;
        if (grid.rank() != 2) {
            throw ShapeError("attention", "mask grid must be [H,W], got " + grid.shape_str());
        }
        const Tensor resized = (grid.dim(0) == spatial_h && grid.dim(1) == spatial_w)
                                   ? grid
                                   : resize_nearest(grid, spatial_h, spatial_w);
        for (int s = 0; s < S; ++s) {
            if (resized.data()[s] != 0.0f) continue;
            for (int h = 0; h < heads; ++h) {
                for (int t = cond.ip_span.begin; t < cond.ip_span.end; ++t) {
                    logits.at(h, s, t) = kNegInfLogit;
                }
            }
        }
    }

    Tensor probs = softmax(logits, 2);

    if (sink) {
        AttentionRecord rec;
        rec.layer_id = layer_id;
        rec.step_index = sink->step;
        rec.probs = probs;
        rec.spatial_h = spatial_h;
        rec.spatial_w = spatial_w;
        sink->records.push_back(std::move(rec));
    }

    // Weighted values, heads merged back to [S, d_l].
    Tensor merged({S, d_l});
    for (int h = 0; h < heads; ++h) {
        const int off = h * dh;
        for (int s = 0; s < S; ++s) {
            for (int j = 0; j < dh; ++j) {
                double acc = 0.0;
                for (int t = 0; t < T; ++t) {
                    acc += static_cast<double>(probs.at(h, s, t)) *
                           static_cast<double>(v.data()[static_cast<size_t>(t) * d_l + off + j]);
                }
                merged.data()[static_cast<size_t>(s) * d_l + off + j] = static_cast<float>(acc);
            }
        }
    }
    Tensor out = matmul(merged, *weights.wo);

    if (trace) {
        trace->q = std::move(q);
        trace->k = std::move(k);
        trace->v = std::move(v);
        trace->probs = probs;
        trace->merged = std::move(merged);
    }
    return out;
}

Tensor ip_attention_share(const AttentionRecord& record, Span span, int token) {
    const int T = record.probs.dim(2);
    if (span.begin < 0 || span.end > T || span.begin > span.end) {
        throw Error("attention", "span [" + std::to_string(span.begin) + "," +
                                     std::to_string(span.end) + ") out of range for T = " +
                                     std::to_string(T));
    }
    if (token < 0 || token >= span.length()) {
        throw Error("attention", "token index " + std::to_string(token) + " outside span of length " +
                                     std::to_string(span.length()));
    }
    const int heads = record.probs.dim(0), S = record.probs.dim(1);
    const int col = span.begin + token;
    Tensor map({S});
    for (int s = 0; s < S; ++s) {
        double acc = 0.0;
        for (int h = 0; h < heads; ++h) acc += record.probs.at(h, s, col);
        map.at(s) = static_cast<float>(acc / heads);
    }
    return map;
}

void cross_attention_backward(const AttentionTrace& trace, const Tensor& features,
                              const Tensor& cond_tokens, const AttentionWeights& weights,
                              const Tensor& dout, Tensor& dfeatures, Tensor& dtokens, Tensor& dwq,
                              Tensor& dwk, Tensor& dwv, Tensor& dwo) {
    const int S = features.dim(0), d_l = features.dim(1);
    const int T = cond_tokens.dim(0);
    const int heads = weights.heads;
    const int dh = d_l / heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    // out = merged * Wo
    // dWo += merged^T * dout ; dmerged = dout * Wo^T
    for (int i = 0; i < d_l; ++i) {
        for (int j = 0; j < d_l; ++j) {
            double acc = 0.0;
            for (int s = 0; s < S; ++s) {
                acc += static_cast<double>(trace.merged.at(s, i)) * dout.at(s, j);
            }
            dwo.at(i, j) += static_cast<float>(acc);
        }
    }
    Tensor dmerged({S, d_l});
    for (int s = 0; s < S; ++s) {
        for (int i = 0; i < d_l; ++i) {
            double acc = 0.0;
            for (int j = 0; j < d_l; ++j) {
                acc += static_cast<double>(dout.at(s, j)) * weights.wo->at(i, j);
            }
            dmerged.at(s, i) = static_cast<float>(acc);
        }
    }

    Tensor dq({S, d_l});
    Tensor dk({T, d_l});
    Tensor dv({T, d_l});
    std::vector<double> dp(static_cast<size_t>(T));
    for (int h = 0; h < heads; ++h) {
        const int off = h * dh;
        for (int s = 0; s < S; ++s) {
            // dV_h += P^T dmerged_h ; dP = dmerged_h V_h^T
            for (int t = 0; t < T; ++t) {
                double acc = 0.0;
                for (int j = 0; j < dh; ++j) {
                    acc += static_cast<double>(dmerged.at(s, off + j)) *
                           static_cast<double>(trace.v.at(t, off + j));
                }
                dp[static_cast<size_t>(t)] = acc;
                const double p = trace.probs.at(h, s, t);
                for (int j = 0; j < dh; ++j) {
                    dv.at(t, off + j) += static_cast<float>(p * dmerged.at(s, off + j));
                }
            }
            // Softmax backward: dl = p .* (dp - sum(dp .* p)).
            double dot = 0.0;
            for (int t = 0; t < T; ++t) dot += dp[static_cast<size_t>(t)] * trace.probs.at(h, s, t);
            for (int t = 0; t < T; ++t) {
                const double p = trace.probs.at(h, s, t);
                const double dl = p * (dp[static_cast<size_t>(t)] - dot) * inv_sqrt_dh;
                if (dl == 0.0) continue;
                for (int j = 0; j < dh; ++j) {
                    dq.at(s, off + j) += static_cast<float>(dl * trace.k.at(t, off + j));
                    dk.at(t, off + j) += static_cast<float>(dl * trace.q.at(s, off + j));
                }
            }
        }
    }

    // Q = features Wq, K = tokens Wk, V = tokens Wv
    for (int i = 0; i < d_l; ++i) {
        for (int j = 0; j < d_l; ++j) {
            double acc = 0.0;
            for (int s = 0; s < S; ++s) {
                acc += static_cast<double>(features.at(s, i)) * dq.at(s, j);
            }
            dwq.at(i, j) += static_cast<float>(acc);
        }
    }
    const int d_model = cond_tokens.dim(1);
    for (int i = 0; i < d_model; ++i) {
        for (int j = 0; j < d_l; ++j) {
            double acck = 0.0, accv = 0.0;
            for (int t = 0; t < T; ++t) {
                acck += static_cast<double>(cond_tokens.at(t, i)) * dk.at(t, j);
                accv += static_cast<double>(cond_tokens.at(t, i)) * dv.at(t, j);
            }
            dwk.at(i, j) += static_cast<float>(acck);
            dwv.at(i, j) += static_cast<float>(accv);
        }
    }
    for (int s = 0; s < S; ++s) {
        for (int i = 0; i < d_l; ++i) {
            double acc = 0.0;
            for (int j = 0; j < d_l; ++j) {
                acc += static_cast<double>(dq.at(s, j)) * weights.wq->at(i, j);
            }
            dfeatures.at(s, i) += static_cast<float>(acc);
        }
    }
    for (int t = 0; t < T; ++t) {
        for (int i = 0; i < d_model; ++i) {
            double acc = 0.0;
            for (int j = 0; j < d_l; ++j) {
                acc += static_cast<double>(dk.at(t, j)) * weights.wk->at(i, j) +
                       static_cast<double>(dv.at(t, j)) * weights.wv->at(i, j);
            }
            dtokens.at(t, i) += static_cast<float>(acc);
        }
    }
}

}  // namespace monkey
