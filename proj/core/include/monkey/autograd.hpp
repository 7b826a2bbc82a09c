// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "monkey/tensor.hpp"

namespace monkey {

// Hand-written backward passes for the tensor ops the models use. All
// gradient outputs ACCUMULATE (+=) into pre-shaped tensors so one gradient
// store can collect contributions from many calls; pass nullptr for an
// input gradient that is not needed.

/// Backward of conv2d(x, w, bias, stride, padding) given dout.
void conv2d_backward(const Tensor& x, const Tensor& w, const Tensor& dout, int stride, int padding,
                     Tensor* dx, Tensor* dw, Tensor* db);

/// Backward of conv2d_transpose(x, w, bias, stride, padding) given dout.
void conv2d_transpose_backward(const Tensor& x, const Tensor& w, const Tensor& dout, int stride,
                               int padding, Tensor* dx, Tensor* dw, Tensor* db);

/// Backward of group_norm(x, groups, gain, bias) given dout.
void group_norm_backward(const Tensor& x, int groups, const Tensor& gain, const Tensor& dout,
                         Tensor* dx, Tensor* dgain, Tensor* dbias, float eps = 1e-5f);

/// Backward of silu(x): returns dout * silu'(x) (does not accumulate).
Tensor silu_backward(const Tensor& x, const Tensor& dout);

/// Backward of linear(x, w, bias) given dout.
void linear_backward(const Tensor& x, const Tensor& w, const Tensor& dout, Tensor* dx, Tensor* dw,
                     Tensor* db);

/// Nearest-neighbour 2x upsample of a [C,H,W] tensor.
Tensor upsample2x(const Tensor& x);

/// Backward of upsample2x: sums each 2x2 output block (does not accumulate).
Tensor upsample2x_backward(const Tensor& dout);

}  // namespace monkey
