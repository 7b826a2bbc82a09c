// SPDX-License-Identifier: Apache-2.0
#include "monkey/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "monkey/error.hpp"

namespace monkey {

namespace {

std::int64_t shape_product(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw ShapeError("tensor", "non-positive dimension in shape " + shape_str(shape));
        n *= d;
    }
    return n;
}

}  // namespace

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(shape_product(shape_)), 0.0f);
}

Tensor::Tensor(std::vector<int> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_product(shape_) != static_cast<std::int64_t>(data_.size())) {
        throw ShapeError("tensor", "data length " + std::to_string(data_.size()) +
                                       " does not match shape " + monkey::shape_str(shape_));
    }
}

Tensor Tensor::full(std::vector<int> shape, float value) {
    Tensor t(std::move(shape));
    for (auto& v : t.data_) v = value;
    return t;
}

std::string Tensor::shape_str() const { return monkey::shape_str(shape_); }

void check_finite(const Tensor& t, const std::string& what) {
    for (float v : t.values()) {
        if (!std::isfinite(v)) {
            throw Error("tensor", "non-finite value in " + what);
        }
    }
}

namespace {

// [rows_a, inner] x [inner, cols_b] with double accumulation. Walks b by
// rows so every inner loop is unit-stride.
void matmul2d(const float* a, const float* b, float* out, int rows, int inner, int cols) {
    std::vector<double> acc(static_cast<size_t>(cols));
    for (int i = 0; i < rows; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        const float* arow = a + static_cast<size_t>(i) * inner;
        for (int k = 0; k < inner; ++k) {
            const double av = arow[k];
            const float* brow = b + static_cast<size_t>(k) * cols;
            for (int j = 0; j < cols; ++j) acc[static_cast<size_t>(j)] += av * brow[j];
        }
        float* orow = out + static_cast<size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) orow[j] = static_cast<float>(acc[static_cast<size_t>(j)]);
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    const int ra = a.rank(), rb = b.rank();
    if (ra < 2 || ra > 3 || rb < 2 || rb > 3) {
        throw ShapeError("tensor", "matmul expects rank-2..3 operands, got " + a.shape_str() +
                                       " x " + b.shape_str());
    }
    const int rows = a.dim(ra - 2), ka = a.dim(ra - 1);
    const int kb = b.dim(rb - 2), cols = b.dim(rb - 1);
    if (ka != kb) {
        throw ShapeError("tensor",
                         "matmul inner dimensions disagree: " + a.shape_str() + " x " + b.shape_str());
    }
    if (ra == 2 && rb == 2) {
        Tensor out({rows, cols});
        matmul2d(a.data(), b.data(), out.data(), rows, ka, cols);
        check_finite(out, "matmul output");
        return out;
    }
    const int batch_a = ra == 3 ? a.dim(0) : 1;
    const int batch_b = rb == 3 ? b.dim(0) : 1;
    if (batch_a != batch_b && batch_a != 1 && batch_b != 1) {
        throw ShapeError("tensor", "matmul batch dimensions disagree: " + a.shape_str() + " x " +
                                       b.shape_str());
    }
    const int batch = std::max(batch_a, batch_b);
    Tensor out({batch, rows, cols});
    const size_t astride = ra == 3 ? static_cast<size_t>(rows) * ka : 0;
    const size_t bstride = rb == 3 ? static_cast<size_t>(ka) * cols : 0;
    for (int n = 0; n < batch; ++n) {
        matmul2d(a.data() + (batch_a == 1 ? 0 : n * astride),
                 b.data() + (batch_b == 1 ? 0 : n * bstride),
                 out.data() + static_cast<size_t>(n) * rows * cols, rows, ka, cols);
    }
    check_finite(out, "matmul output");
    return out;
}

Tensor softmax(const Tensor& x, int axis) {
    if (axis < 0 || axis >= x.rank()) {
        throw Error("tensor", "softmax axis " + std::to_string(axis) + " invalid for shape " +
                                  x.shape_str());
    }
    const auto& shape = x.shape();
    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= shape[static_cast<size_t>(i)];
    for (int i = axis + 1; i < x.rank(); ++i) inner *= shape[static_cast<size_t>(i)];
    const int n = shape[static_cast<size_t>(axis)];

    Tensor out(shape);
    const float* src = x.data();
    float* dst = out.data();
    for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t in = 0; in < inner; ++in) {
            const std::int64_t base = o * n * inner + in;
            double mx = -1e300;
            for (int i = 0; i < n; ++i) mx = std::max(mx, static_cast<double>(src[base + i * inner]));
            double sum = 0.0;
            for (int i = 0; i < n; ++i) sum += std::exp(static_cast<double>(src[base + i * inner]) - mx);
            for (int i = 0; i < n; ++i) {
                dst[base + i * inner] =
                    static_cast<float>(std::exp(static_cast<double>(src[base + i * inner]) - mx) / sum);
            }
        }
    }
    check_finite(out, "softmax output");
    return out;
}

Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int padding) {
    return conv2d(x, w, nullptr, stride, padding);
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* bias, int stride, int padding) {
    if (x.rank() != 3 || w.rank() != 4) {
        throw ShapeError("tensor", "conv2d expects x [C,H,W], w [O,C,k,k]; got " + x.shape_str() +
                                       ", " + w.shape_str());
    }
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    const int O = w.dim(0), k = w.dim(2);
    if (w.dim(1) != C) {
        throw ShapeError("tensor", "conv2d channel mismatch: input " + x.shape_str() + " vs kernel " +
                                       w.shape_str());
    }
    if (w.dim(3) != k || k % 2 == 0) {
        throw Error("tensor", "conv2d kernel must be square with odd size, got " + w.shape_str());
    }
    if (stride < 1) throw Error("tensor", "conv2d stride must be >= 1");
    const int OH = (H + 2 * padding - k) / stride + 1;
    const int OW = (W + 2 * padding - k) / stride + 1;
    if (OH < 1 || OW < 1) throw ShapeError("tensor", "conv2d output would be empty");

    // Shift-accumulate form: for each weight tap, add the shifted input row
    // into a double plane. Tap validity is hoisted out of the pixel loops.
    Tensor out({O, OH, OW});
    std::vector<double> plane(static_cast<size_t>(OH) * OW);
    for (int o = 0; o < O; ++o) {
        const double b = bias ? static_cast<double>(bias->at(o)) : 0.0;
        std::fill(plane.begin(), plane.end(), b);
        for (int c = 0; c < C; ++c) {
            const float* xc = x.data() + static_cast<size_t>(c) * H * W;
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
                        const float* xrow = xc + static_cast<size_t>(y) * W +
                                            (ox_lo * stride - padding + kx);
                        double* prow = plane.data() + static_cast<size_t>(oy) * OW + ox_lo;
                        if (stride == 1) {
                            for (int i = 0; i < n; ++i) prow[i] += wv * xrow[i];
                        } else {
                            for (int i = 0; i < n; ++i) prow[i] += wv * xrow[i * stride];
                        }
                    }
                }
            }
        }
        float* orow = out.data() + static_cast<size_t>(o) * OH * OW;
        for (size_t i = 0; i < plane.size(); ++i) orow[i] = static_cast<float>(plane[i]);
    }
    check_finite(out, "conv2d output");
    return out;
}

Tensor conv2d_transpose(const Tensor& x, const Tensor& w, const Tensor* bias, int stride,
                        int padding) {
    if (x.rank() != 3 || w.rank() != 4) {
        throw ShapeError("tensor", "conv2d_transpose expects x [C,H,W], w [C,O,k,k]; got " +
                                       x.shape_str() + ", " + w.shape_str());
    }
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    const int O = w.dim(1), k = w.dim(2);
    if (w.dim(0) != C) {
        throw ShapeError("tensor", "conv2d_transpose channel mismatch: input " + x.shape_str() +
                                       " vs kernel " + w.shape_str());
    }
    const int OH = (H - 1) * stride - 2 * padding + k;
    const int OW = (W - 1) * stride - 2 * padding + k;
    if (OH < 1 || OW < 1) throw ShapeError("tensor", "conv2d_transpose output would be empty");

    // Accumulate in double, one plane at a time.
    std::vector<double> plane(static_cast<size_t>(OH) * OW);
    Tensor out({O, OH, OW});
    for (int o = 0; o < O; ++o) {
        const double b = bias ? static_cast<double>(bias->at(o)) : 0.0;
        std::fill(plane.begin(), plane.end(), b);
        for (int c = 0; c < C; ++c) {
            for (int y = 0; y < H; ++y) {
                for (int xx = 0; xx < W; ++xx) {
                    const double v = x.at(c, y, xx);
                    if (v == 0.0) continue;
                    for (int ky = 0; ky < k; ++ky) {
                        const int oy = y * stride - padding + ky;
                        if (oy < 0 || oy >= OH) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ox = xx * stride - padding + kx;
                            if (ox < 0 || ox >= OW) continue;
                            plane[static_cast<size_t>(oy) * OW + ox] +=
                                v * static_cast<double>(w.at(c, o, ky, kx));
                        }
                    }
                }
            }
        }
        for (int i = 0; i < OH * OW; ++i) {
            out.data()[static_cast<size_t>(o) * OH * OW + i] = static_cast<float>(plane[static_cast<size_t>(i)]);
        }
    }
    check_finite(out, "conv2d_transpose output");
    return out;
}

Tensor resize_nearest(const Tensor& x, int out_h, int out_w) {
    if (x.rank() != 2) {
        throw ShapeError("tensor", "resize_nearest expects a [H,W] grid, got " + x.shape_str());
    }
    if (out_h < 1 || out_w < 1) throw Error("tensor", "resize_nearest target dims must be >= 1");
    const int H = x.dim(0), W = x.dim(1);
    Tensor out({out_h, out_w});
    for (int i = 0; i < out_h; ++i) {
        const int si = static_cast<int>(static_cast<std::int64_t>(i) * H / out_h);
        for (int j = 0; j < out_w; ++j) {
            const int sj = static_cast<int>(static_cast<std::int64_t>(j) * W / out_w);
            out.at(i, j) = x.at(si, sj);
        }
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("tensor", "add shape mismatch: " + a.shape_str() + " vs " + b.shape_str());
    }
    Tensor out(a.shape());
    for (std::int64_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
    check_finite(out, "add output");
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("tensor", "mul shape mismatch: " + a.shape_str() + " vs " + b.shape_str());
    }
    Tensor out(a.shape());
    for (std::int64_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
    check_finite(out, "mul output");
    return out;
}

Tensor scale(const Tensor& a, float s) {
    Tensor out(a.shape());
    for (std::int64_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * s;
    check_finite(out, "scale output");
    return out;
}

Tensor group_norm(const Tensor& x, int groups, const Tensor& gain, const Tensor& bias, float eps) {
    if (x.rank() != 3) throw ShapeError("tensor", "group_norm expects [C,H,W], got " + x.shape_str());
    const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
    if (groups < 1 || C % groups != 0) {
        throw Error("tensor", "group_norm groups " + std::to_string(groups) +
                                  " must divide channels " + std::to_string(C));
    }
    if (gain.size() != C || bias.size() != C) {
        throw ShapeError("tensor", "group_norm gain/bias must have one entry per channel");
    }
    const int cpg = C / groups;
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    Tensor out(x.shape());
    for (int g = 0; g < groups; ++g) {
        const std::int64_t base = static_cast<std::int64_t>(g) * cpg * plane;
        const std::int64_t n = cpg * plane;
        double mean = 0.0;
        for (std::int64_t i = 0; i < n; ++i) mean += x.data()[base + i];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
            const double d = x.data()[base + i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(var + eps);
        for (int c = 0; c < cpg; ++c) {
            const int ch = g * cpg + c;
            const double gm = gain.at(ch), bt = bias.at(ch);
            for (std::int64_t i = 0; i < plane; ++i) {
                const std::int64_t idx = base + static_cast<std::int64_t>(c) * plane + i;
                out.data()[idx] = static_cast<float>((x.data()[idx] - mean) * inv * gm + bt);
            }
        }
    }
    check_finite(out, "group_norm output");
    return out;
}

Tensor silu(const Tensor& x) {
    Tensor out(x.shape());
    for (std::int64_t i = 0; i < x.size(); ++i) {
        const double v = x.data()[i];
        out.data()[i] = static_cast<float>(v / (1.0 + std::exp(-v)));
    }
    check_finite(out, "silu output");
    return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor* bias) {
    if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(0)) {
        throw ShapeError("tensor", "linear shape mismatch: " + x.shape_str() + " x " + w.shape_str());
    }
    const int N = x.dim(0), in = x.dim(1), out_dim = w.dim(1);
    if (bias && bias->size() != out_dim) {
        throw ShapeError("tensor", "linear bias size " + bias->shape_str() + " != out dim " +
                                       std::to_string(out_dim));
    }
    Tensor out({N, out_dim});
    for (int i = 0; i < N; ++i) {
        for (int j = 0; j < out_dim; ++j) {
            double acc = bias ? static_cast<double>(bias->at(j)) : 0.0;
            for (int k = 0; k < in; ++k) {
                acc += static_cast<double>(x.at(i, k)) * static_cast<double>(w.at(k, j));
            }
            out.at(i, j) = static_cast<float>(acc);
        }
    }
    check_finite(out, "linear output");
    return out;
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("tensor", "max_abs_diff shape mismatch: " + a.shape_str() + " vs " +
                                       b.shape_str());
    }
    float m = 0.0f;
    for (std::int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    return std::memcmp(a.data(), b.data(), static_cast<size_t>(a.size()) * sizeof(float)) == 0;
}

}  // namespace monkey
