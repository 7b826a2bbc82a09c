// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "monkey/attention.hpp"
#include "monkey/tensor.hpp"

namespace monkey {

/// Token-attention contact sheet for one layer: rows = denoising steps (in
/// step order), columns = all text tokens summed into one map followed by
/// the 4 IP token maps. Each tile is min-max normalized on its own (a
/// constant tile renders black), nearest-upsampled 8x, with 2-px white
/// separators between tiles. Returns the [H,W] grayscale canvas in [0,1].
Tensor attention_grid_image(const std::vector<AttentionRecord>& records,
                            const std::string& layer_id);

/// attention_grid_image rendered to an 8-bit grayscale PNG.
void dump_attention_grid(const std::vector<AttentionRecord>& records, const std::string& layer_id,
                         const std::string& out_path);

inline constexpr int kGridUpsample = 8;
inline constexpr int kGridSeparator = 2;

}  // namespace monkey
