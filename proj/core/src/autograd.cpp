// SPDX-License-Identifier: Apache-2.0
#include "monkey/autograd.hpp"

#include <cmath>
#include <vector>

#include "monkey/error.hpp"

namespace monkey {

void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dout, int stride, int padding,
                     Tensor* dx, Tensor* dw, Tensor* db) {
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    const int O = w.dim(0), k = w.dim(2);
    const int OH = dout.dim(1), OW = dout.dim(2);
    if (dout.dim(0) != O) {
        throw ShapeError("autograd", "conv2d_backward dout channels " + dout.shape_str() +
                                         " vs kernel " + w.shape_str());
    }

    if (db) {
        for (int o = 0; o < O; ++o) {
            double acc = 0.0;
            for (int oy = 0; oy < OH; ++oy) {
                for (int ox = 0; ox < OW; ++ox) acc += dout.at(o, oy, ox);
            }
            db->at(o) += static_cast<float>(acc);
        }
    }
    // Both dw and dx use the tap-major form of conv2d: the (ky,kx) validity
    // window is hoisted so the pixel loops are branch-free and unit-stride.
    if (dw) {
        for (int o = 0; o < O; ++o) {
            const float* dc = dout.data() + static_cast<size_t>(o) * OH * OW;
            for (int c = 0; c < C; ++c) {
                const float* xc = x.data() + static_cast<size_t>(c) * H * W;
                for (int ky = 0; ky < k; ++ky) {
                    const int oy_lo = std::max(0, (padding - ky + stride - 1) / stride);
                    const int oy_hi = std::min(OH - 1, (H - 1 - ky + padding) / stride);
                    for (int kx = 0; kx < k; ++kx) {
                        const int ox_lo = std::max(0, (padding - kx + stride - 1) / stride);
                        const int ox_hi = std::min(OW - 1, (W - 1 - kx + padding) / stride);
                        const int n = ox_hi - ox_lo + 1;
                        if (n <= 0) continue;
                        double acc = 0.0;
                        for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                            const int y = oy * stride - padding + ky;
                            const float* xrow = xc + static_cast<size_t>(y) * W +
                                                (ox_lo * stride - padding + kx);
                            const float* drow = dc + static_cast<size_t>(oy) * OW + ox_lo;
                            if (stride == 1) {
                                for (int i = 0; i < n; ++i) {
                                    acc += static_cast<double>(drow[i]) * xrow[i];
                                }
                            } else {
                                for (int i = 0; i < n; ++i) {
                                    acc += static_cast<double>(drow[i]) * xrow[i * stride];
                                }
                            }
                        }
                        dw->at(o, c, ky, kx) += static_cast<float>(acc);
                    }
                }
            }
        }
    }
    if (dx) {
        std::vector<double> buf(static_cast<size_t>(C) * H * W, 0.0);
        for (int c = 0; c < C; ++c) {
            double* bc = buf.data() + static_cast<size_t>(c) * H * W;
            for (int o = 0; o < O; ++o) {
                const float* dc = dout.data() + static_cast<size_t>(o) * OH * OW;
                const float* wk = w.data() + (static_cast<size_t>(o) * C + c) * k * k;
                for (int ky = 0; ky < k; ++ky) {
                    const int oy_lo = std::max(0, (padding - ky + stride - 1) / stride);
                    const int oy_hi = std::min(OH - 1, (H - 1 - ky + padding) / stride);
                    for (int kx = 0; kx < k; ++kx) {
                        const double wv = wk[ky * k + kx];
                        const int ox_lo = std::max(0, (padding - kx + stride - 1) / stride);
                        const int ox_hi = std::min(OW - 1, (W - 1 - kx + padding) / stride);
                        const int n = ox_hi - ox_lo + 1;
                        if (n <= 0) continue;
                        for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                            const int y = oy * stride - padding + ky;
                            double* brow = bc + static_cast<size_t>(y) * W +
                                           (ox_lo * stride - padding + kx);
                            const float* drow = dc + static_cast<size_t>(oy) * OW + ox_lo;
                            if (stride == 1) {
                                for (int i = 0; i < n; ++i) brow[i] += wv * drow[i];
                            } else {
                                for (int i = 0; i < n; ++i) brow[i * stride] += wv * drow[i];
                            }
                        }
                    }
                }
            }
        }
        for (size_t i = 0; i < buf.size(); ++i) dx->data()[i] += static_cast<float>(buf[i]);
    }
}

void conv2d_transpose_backward(const Tensor& x, const Tensor& w, const Tensor& dout, int stride,
                               int padding, Tensor* dx, Tensor* dw, Tensor* db) {
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    const int O = w.dim(1), k = w.dim(2);
    const int OH = dout.dim(1), OW = dout.dim(2);
    if (dout.dim(0) != O) {
        throw ShapeError("autograd", "conv2d_transpose_backward dout channels " + dout.shape_str() +
                                         " vs kernel " + w.shape_str());
    }

    if (db) {
        for (int o = 0; o < O; ++o) {
            double acc = 0.0;
            for (int oy = 0; oy < OH; ++oy) {
                for (int ox = 0; ox < OW; ++ox) acc += dout.at(o, oy, ox);
            }
            db->at(o) += static_cast<float>(acc);
        }
    }
    // Forward scatters x[c,y,x] * w[c,o,ky,kx] into out[o, y*s-p+ky, x*s-p+kx];
    // both input and weight gradients gather over the same index map.
    if (dw) {
        for (int c = 0; c < C; ++c) {
            for (int o = 0; o < O; ++o) {
                for (int ky = 0; ky < k; ++ky) {
                    for (int kx = 0; kx < k; ++kx) {
                        double acc = 0.0;
                        for (int y = 0; y < H; ++y) {
                            const int oy = y * stride - padding + ky;
                            if (oy < 0 || oy >= OH) continue;
                            for (int xx = 0; xx < W; ++xx) {
                                const int ox = xx * stride - padding + kx;
                                if (ox < 0 || ox >= OW) continue;
                                acc += static_cast<double>(x.at(c, y, xx)) * dout.at(o, oy, ox);
                            }
                        }
                        dw->at(c, o, ky, kx) += static_cast<float>(acc);
                    }
                }
            }
        }
    }
    if (dx) {
        for (int c = 0; c < C; ++c) {
            for (int y = 0; y < H; ++y) {
                for (int xx = 0; xx < W; ++xx) {
                    double acc = 0.0;
                    for (int o = 0; o < O; ++o) {
                        for (int ky = 0; ky < k; ++ky) {
                            const int oy = y * stride - padding + ky;
                            if (oy < 0 || oy >= OH) continue;
                            for (int kx = 0; kx < k; ++kx) {
                                const int ox = xx * stride - padding + kx;
                                if (ox < 0 || ox >= OW) continue;
                                acc += static_cast<double>(w.at(c, o, ky, kx)) * dout.at(o, oy, ox);
                            }
                        }
                    }
                    dx->at(c, y, xx) += static_cast<float>(acc);
                }
            }
        }
    }
}

void group_norm_backward(const Tensor& x, int groups, const Tensor& gain, const Tensor& dout,
                         Tensor* dx, Tensor* dgain, Tensor* dbias, float eps) {
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    const int cpg = C / groups;
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    const std::int64_t n = static_cast<std::int64_t>(cpg) * plane;

    for (int g = 0; g < groups; ++g) {
        const std::int64_t base = static_cast<std::int64_t>(g) * cpg * plane;
        double mean = 0.0;
        for (std::int64_t i = 0; i < n; ++i) mean += x.data()[base + i];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
            const double d = x.data()[base + i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));

        // dxhat = dout * gain (per channel); two reductions feed the input grad:
        // dx = inv * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat)).
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int c = 0; c < cpg; ++c) {
            const int ch = g * cpg + c;
            const double gm = gain.at(ch);
            double dg = 0.0, dbv = 0.0;
            for (std::int64_t i = 0; i < plane; ++i) {
                const std::int64_t idx = base + static_cast<std::int64_t>(c) * plane + i;
                const double xhat = (x.data()[idx] - mean) * inv;
                const double go = dout.data()[idx];
                dg += go * xhat;
                dbv += go;
                const double dxhat = go * gm;
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * xhat;
            }
            if (dgain) dgain->at(ch) += static_cast<float>(dg);
            if (dbias) dbias->at(ch) += static_cast<float>(dbv);
        }
        if (dx) {
            const double mean_dxhat = sum_dxhat / static_cast<double>(n);
            const double mean_dxhat_xhat = sum_dxhat_xhat / static_cast<double>(n);
            for (int c = 0; c < cpg; ++c) {
                const int ch = g * cpg + c;
                const double gm = gain.at(ch);
                for (std::int64_t i = 0; i < plane; ++i) {
                    const std::int64_t idx = base + static_cast<std::int64_t>(c) * plane + i;
                    const double xhat = (x.data()[idx] - mean) * inv;
                    const double dxhat = dout.data()[idx] * gm;
                    dx->data()[idx] += static_cast<float>(
                        inv * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat));
                }
            }
        }
    }
}

Tensor silu_backward(const Tensor& x, const Tensor& dout) {
    if (!x.same_shape(dout)) {
        throw ShapeError("autograd", "silu_backward shape mismatch: " + x.shape_str() + " vs " +
                                         dout.shape_str());
    }
    Tensor dx(x.shape());
    for (std::int64_t i = 0; i < x.size(); ++i) {
        const double v = x.data()[i];
        const double s = 1.0 / (1.0 + std::exp(-v));
        dx.data()[i] = static_cast<float>(dout.data()[i] * (s + v * s * (1.0 - s)));
    }
    return dx;
}

void linear_backward(const Tensor& x, const Tensor& w, const Tensor& dout, Tensor* dx, Tensor* dw,
                     Tensor* db) {
    const int N = x.dim(0), in = x.dim(1), out_dim = w.dim(1);
    if (db) {
        for (int j = 0; j < out_dim; ++j) {
            double acc = 0.0;
            for (int i = 0; i < N; ++i) acc += dout.at(i, j);
            db->at(j) += static_cast<float>(acc);
        }
    }
    if (dw) {
        for (int kk = 0; kk < in; ++kk) {
            for (int j = 0; j < out_dim; ++j) {
                double acc = 0.0;
                for (int i = 0; i < N; ++i) {
                    acc += static_cast<double>(x.at(i, kk)) * dout.at(i, j);
                }
                dw->at(kk, j) += static_cast<float>(acc);
            }
        }
    }
    if (dx) {
        for (int i = 0; i < N; ++i) {
            for (int kk = 0; kk < in; ++kk) {
                double acc = 0.0;
                for (int j = 0; j < out_dim; ++j) {
                    acc += static_cast<double>(dout.at(i, j)) * w.at(kk, j);
                }
                dx->at(i, kk) += static_cast<float>(acc);
            }
        }
    }
}

Tensor upsample2x(const Tensor& x) {
    if (x.rank() != 3) {
        throw ShapeError("autograd", "upsample2x expects [C,H,W], got " + x.shape_str());
    }
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    Tensor out({C, 2 * H, 2 * W});
    for (int c = 0; c < C; ++c) {
        for (int y = 0; y < H; ++y) {
            for (int xx = 0; xx < W; ++xx) {
                const float v = x.at(c, y, xx);
                out.at(c, 2 * y, 2 * xx) = v;
                out.at(c, 2 * y, 2 * xx + 1) = v;
                out.at(c, 2 * y + 1, 2 * xx) = v;
                out.at(c, 2 * y + 1, 2 * xx + 1) = v;
            }
        }
    }
    return out;
}

Tensor upsample2x_backward(const Tensor& dout) {
    if (dout.rank() != 3 || dout.dim(1) % 2 != 0 || dout.dim(2) % 2 != 0) {
        throw ShapeError("autograd", "upsample2x_backward expects even [C,H,W], got " +
                                         dout.shape_str());
    }
    const int C = dout.dim(0), H = dout.dim(1) / 2, W = dout.dim(2) / 2;
    Tensor dx({C, H, W});
    for (int c = 0; c < C; ++c) {
        for (int y = 0; y < H; ++y) {
            for (int xx = 0; xx < W; ++xx) {
                dx.at(c, y, xx) = dout.at(c, 2 * y, 2 * xx) + dout.at(c, 2 * y, 2 * xx + 1) +
                                  dout.at(c, 2 * y + 1, 2 * xx) + dout.at(c, 2 * y + 1, 2 * xx + 1);
            }
        }
    }
    return dx;
}

}  // namespace monkey
