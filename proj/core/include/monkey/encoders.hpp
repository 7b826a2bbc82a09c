// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "monkey/tensor.hpp"
#include "monkey/weights.hpp"

namespace monkey {

/// Half-open row range inside a conditioning sequence.
struct Span {
    int begin = 0;
    int end = 0;
    int length() const noexcept { return end - begin; }
};

/// Concatenated text + image-prompt token embeddings. The 4 IP tokens always
/// occupy the trailing rows; masking code addresses them through ip_span only.
struct ConditioningSequence {
    Tensor tokens;  // [n_text + 4, d_model]
    Span text_span;
    Span ip_span;
    int d_model = 0;
};

inline constexpr int kIpTokenCount = 4;

/// Closed-world word table. Id 0 is the single reserved id used both for
/// unknown words and for padding, so an all-unknown prompt encodes to
/// max_len copies of the same reserved row.
struct Vocabulary {
    std::vector<std::string> words;       // id -> word; words[0] == "<unk>"
    std::map<std::string, int> index;     // word -> id
    Tensor table;                          // [V, d_model]

    int size() const noexcept { return static_cast<int>(words.size()); }
    int d_model() const { return table.dim(1); }
    int reserved_id() const noexcept { return 0; }
    int lookup(const std::string& word) const;
};

/// Builds a vocabulary from the given lines (lowercased, whitespace split,
/// deduplicated, sorted) with a deterministic embedding table.
Vocabulary make_vocabulary(const std::vector<std::string>& lines, int d_model, std::uint64_t seed);

/// The project's default closed-world vocabulary: the 20 bundled background
/// prompts plus the synthetic-corpus caption words.
Vocabulary make_default_vocabulary(int d_model, std::uint64_t seed);

std::vector<std::string> tokenize_prompt(const std::string& prompt);

/// Vocabulary ids of the prompt's words, padded with the reserved id to
/// exactly max_len entries (excess words are dropped).
std::vector<int> encode_token_ids(const std::string& prompt, const Vocabulary& vocab, int max_len);

/// Lowercased, whitespace-tokenized prompt embedded and padded to max_len.
Tensor encode_text(const std::string& prompt, const Vocabulary& vocab, int max_len);

/// Geometry of the toy image encoder (conv stack -> pooled vector -> 4 tokens).
struct ImageEncoderConfig {
    int image_size = 64;
    int c1 = 8, c2 = 16, c3 = 32;
    int d_model = 64;
};

/// Weight names used by encode_image, all under the "imgenc." prefix.
std::vector<std::string> image_encoder_param_names();

/// Declarations (name, shape, init) of the image-encoder parameters.
std::vector<ParamSpec> image_encoder_param_specs(const ImageEncoderConfig& cfg);

/// Forward intermediates kept for the hand-written backward pass.
struct ImageEncoderTrace {
    Tensor input;             // [3,S,S]
    Tensor conv1_out, silu1_out;
    Tensor conv2_out, silu2_out;
    Tensor conv3_out, silu3_out;
    Tensor pooled;            // [1,c3]
};

/// Reference image [3,S,S] -> exactly 4 IP tokens [4, d_model].
Tensor encode_image(const Tensor& image, const ModelWeights& weights,
                    const ImageEncoderConfig& cfg, ImageEncoderTrace* trace = nullptr);

/// Accumulates image-encoder parameter gradients for a traced encode_image
/// call, given the gradient w.r.t. the 4 IP token rows.
void image_encoder_backward(const ImageEncoderTrace& trace, const ModelWeights& weights,
                            const ImageEncoderConfig& cfg, const Tensor& dtokens,
                            ModelWeights& grads);

/// Rows = text then IP; spans recorded.
ConditioningSequence build_conditioning(const Tensor& text, const Tensor& ip);

}  // namespace monkey
