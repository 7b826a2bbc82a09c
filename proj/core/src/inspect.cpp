// SPDX-License-Identifier: Apache-2.0
#include "monkey/inspect.hpp"

#include <algorithm>

#include "monkey/error.hpp"
#include "monkey/png_io.hpp"

namespace monkey {

namespace {

/// Head-averaged map of one column (or of all text columns summed).
Tensor column_map(const AttentionRecord& rec, int col_begin, int col_end) {
    const int heads = rec.probs.dim(0), S = rec.probs.dim(1);
    Tensor map({S});
    for (int s = 0; s < S; ++s) {
        double acc = 0.0;
        for (int h = 0; h < heads; ++h) {
            for (int t = col_begin; t < col_end; ++t) acc += rec.probs.at(h, s, t);
        }
        map.at(s) = static_cast<float>(acc / heads);
    }
    return map;
}

/// Min-max per tile; constant tiles go black.
void blit_tile(Tensor& canvas, const Tensor& map, int h, int w, int y0, int x0) {
    float lo = map.at(0), hi = map.at(0);
    for (std::int64_t i = 0; i < map.size(); ++i) {
        lo = std::min(lo, map.data()[i]);
        hi = std::max(hi, map.data()[i]);
    }
    const float range = hi - lo;
    for (int y = 0; y < h * kGridUpsample; ++y) {
        for (int x = 0; x < w * kGridUpsample; ++x) {
            const float v = map.at((y / kGridUpsample) * w + x / kGridUpsample);
            canvas.at(y0 + y, x0 + x) = range > 0.0f ? (v - lo) / range : 0.0f;
        }
    }
}

}  // namespace

Tensor attention_grid_image(const std::vector<AttentionRecord>& records,
                            const std::string& layer_id) {
    std::vector<const AttentionRecord*> selected;
    for (const auto& rec : records) {
        if (rec.layer_id == layer_id) selected.push_back(&rec);
    }
    if (selected.empty()) {
        throw Error("io", "no attention records for layer '" + layer_id + "'");
    }
    std::stable_sort(selected.begin(), selected.end(),
                     [](const AttentionRecord* a, const AttentionRecord* b) {
                         return a->step_index < b->step_index;
                     });

    const int h = selected.front()->spatial_h, w = selected.front()->spatial_w;
    const int T = selected.front()->probs.dim(2);
    const int n_text = T - kIpTokenCount;
    const int rows = static_cast<int>(selected.size());
    const int cols = 1 + kIpTokenCount;  // text sum + each IP token
    const int tile_h = h * kGridUpsample, tile_w = w * kGridUpsample;
    Tensor canvas = Tensor::ones({rows * tile_h + (rows - 1) * kGridSeparator,
                                  cols * tile_w + (cols - 1) * kGridSeparator});

    for (int r = 0; r < rows; ++r) {
        const AttentionRecord& rec = *selected[static_cast<size_t>(r)];
        if (rec.spatial_h != h || rec.spatial_w != w || rec.probs.dim(2) != T) {
            throw Error("io", "inconsistent record shapes for layer '" + layer_id + "'");
        }
        const int y0 = r * (tile_h + kGridSeparator);
        blit_tile(canvas, column_map(rec, 0, n_text), h, w, y0, 0);
        for (int ip = 0; ip < kIpTokenCount; ++ip) {
            blit_tile(canvas, column_map(rec, n_text + ip, n_text + ip + 1), h, w, y0,
                      (1 + ip) * (tile_w + kGridSeparator));
        }
    }
    return canvas;
}

void dump_attention_grid(const std::vector<AttentionRecord>& records, const std::string& layer_id,
                         const std::string& out_path) {
    write_png_gray(out_path, attention_grid_image(records, layer_id));
}

}  // namespace monkey
