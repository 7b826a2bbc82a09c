// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace monkey {

/// Dense n-dimensional float32 array, row-major. Values are immutable from
/// the caller's perspective once an operation has returned; every op below
/// is a pure function. Reductions accumulate in double.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<float> data);

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int> shape, float value);
    static Tensor ones(std::vector<int> shape) { return full(std::move(shape), 1.0f); }

    const std::vector<int>& shape() const noexcept { return shape_; }
    int rank() const noexcept { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
    std::int64_t size() const noexcept { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const noexcept { return data_.empty(); }

    float* data() noexcept { return data_.data(); }
    const float* data() const noexcept { return data_.data(); }
    std::vector<float>& values() noexcept { return data_; }
    const std::vector<float>& values() const noexcept { return data_; }

    float& at(int i) { return data_[static_cast<size_t>(i)]; }
    float at(int i) const { return data_[static_cast<size_t>(i)]; }
    float& at(int i, int j) { return data_[static_cast<size_t>(i) * shape_[1] + j]; }
    float at(int i, int j) const { return data_[static_cast<size_t>(i) * shape_[1] + j]; }
    float& at(int i, int j, int k) {
        return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k];
    }
    float at(int i, int j, int k) const {
        return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k];
    }
    float& at(int i, int j, int k, int l) {
        return data_[((static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }
    float at(int i, int j, int k, int l) const {
        return data_[((static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
    }

    bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
    std::string shape_str() const;

private:
    std::vector<int> shape_;
    std::vector<float> data_;
};

std::string shape_str(const std::vector<int>& shape);

/// Throws if any element is NaN or infinite.
void check_finite(const Tensor& t, const std::string& what);

/// Matrix product for rank-2 or rank-3 operands. A single leading batch axis
/// may be broadcast when one operand is rank-2 and the other rank-3.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Numerically stable softmax along `axis` (max-subtraction, double sums).
Tensor softmax(const Tensor& x, int axis);

/// Cross-correlation of x [C,H,W] with w [O,C,k,k]; odd k required.
/// Output spatial size is (H + 2*padding - k)/stride + 1.
Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int padding);
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* bias, int stride, int padding);

/// Transposed convolution of x [C,H,W] with w [C,O,k,k]; upsamples by `stride`.
/// Output spatial size is (H - 1)*stride - 2*padding + k.
Tensor conv2d_transpose(const Tensor& x, const Tensor& w, const Tensor* bias, int stride,
                        int padding);

/// Nearest-neighbour resize of a [H,W] grid; source index floor(i*H/H2).
Tensor resize_nearest(const Tensor& x, int out_h, int out_w);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);

/// Group normalization over x [C,H,W] with per-channel gain/bias [C].
Tensor group_norm(const Tensor& x, int groups, const Tensor& gain, const Tensor& bias,
                  float eps = 1e-5f);

Tensor silu(const Tensor& x);

/// x [N,in] * w [in,out] (+ bias [out]).
Tensor linear(const Tensor& x, const Tensor& w, const Tensor* bias);

float max_abs_diff(const Tensor& a, const Tensor& b);
bool bitwise_equal(const Tensor& a, const Tensor& b);

}  // namespace monkey
