// SPDX-License-Identifier: Apache-2.0
#include "monkey/encoders.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "monkey/autograd.hpp"
#include "monkey/error.hpp"
#include "monkey/prompts.hpp"
#include "monkey/rng.hpp"

namespace monkey {

int Vocabulary::lookup(const std::string& word) const {
    auto it = index.find(word);
    return it == index.end() ? reserved_id() : it->second;
}

std::vector<std::string> tokenize_prompt(const std::string& prompt) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : prompt) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

Vocabulary make_vocabulary(const std::vector<std::string>& lines, int d_model, std::uint64_t seed) {
    std::set<std::string> unique;
    for (const auto& line : lines) {
        for (auto& w : tokenize_prompt(line)) unique.insert(w);
    }
    Vocabulary v;
    v.words.push_back("<unk>");
    for (const auto& w : unique) v.words.push_back(w);
    for (size_t i = 0; i < v.words.size(); ++i) v.index[v.words[i]] = static_cast<int>(i);

    DetRng rng(seed);
    v.table = Tensor({v.size(), d_model});
    for (std::int64_t i = 0; i < v.table.size(); ++i) {
        v.table.data()[i] = static_cast<float>(0.5 * rng.next_gauss());
    }
    return v;
}

Vocabulary make_default_vocabulary(int d_model, std::uint64_t seed) {
    std::vector<std::string> lines = bundled_background_prompts();
    for (const auto& w : dataset_caption_words()) lines.push_back(w);
    return make_vocabulary(lines, d_model, seed);
}

std::vector<int> encode_token_ids(const std::string& prompt, const Vocabulary& vocab,
                                  int max_len) {
    const auto words = tokenize_prompt(prompt);
    if (words.empty()) throw Error("encoders", "prompt is empty after whitespace normalization");
    if (max_len < 1) throw Error("encoders", "max_len must be >= 1");
    std::vector<int> ids(static_cast<size_t>(max_len), vocab.reserved_id());
    for (int i = 0; i < max_len && i < static_cast<int>(words.size()); ++i) {
        ids[static_cast<size_t>(i)] = vocab.lookup(words[static_cast<size_t>(i)]);
    }
    return ids;
}

Tensor encode_text(const std::string& prompt, const Vocabulary& vocab, int max_len) {
    const auto ids = encode_token_ids(prompt, vocab, max_len);
    const int d = vocab.d_model();
    Tensor out({max_len, d});
    for (int i = 0; i < max_len; ++i) {
        const float* row = vocab.table.data() + static_cast<size_t>(ids[static_cast<size_t>(i)]) * d;
        std::copy(row, row + d, out.data() + static_cast<size_t>(i) * d);
    }
    return out;
}

std::vector<std::string> image_encoder_param_names() {
    return {"imgenc.conv1.w", "imgenc.conv1.b", "imgenc.conv2.w", "imgenc.conv2.b",
            "imgenc.conv3.w", "imgenc.conv3.b", "imgenc.proj.w",  "imgenc.proj.b"};
}

std::vector<ParamSpec> image_encoder_param_specs(const ImageEncoderConfig& cfg) {
    using Init = ParamSpec::Init;
    return {
        {"imgenc.conv1.w", {cfg.c1, 3, 3, 3}, Init::kConvHe},
        {"imgenc.conv1.b", {cfg.c1}, Init::kZeros},
        {"imgenc.conv2.w", {cfg.c2, cfg.c1, 3, 3}, Init::kConvHe},
        {"imgenc.conv2.b", {cfg.c2}, Init::kZeros},
        {"imgenc.conv3.w", {cfg.c3, cfg.c2, 3, 3}, Init::kConvHe},
        {"imgenc.conv3.b", {cfg.c3}, Init::kZeros},
        {"imgenc.proj.w", {cfg.c3, kIpTokenCount * cfg.d_model}, Init::kLinear},
        {"imgenc.proj.b", {kIpTokenCount * cfg.d_model}, Init::kZeros},
    };
}

Tensor encode_image(const Tensor& image, const ModelWeights& weights, const ImageEncoderConfig& cfg,
                    ImageEncoderTrace* trace) {
    if (image.rank() != 3 || image.dim(0) != 3 || image.dim(1) != cfg.image_size ||
        image.dim(2) != cfg.image_size) {
        throw ShapeError("encoders", "encode_image expects [3," + std::to_string(cfg.image_size) +
                                         "," + std::to_string(cfg.image_size) + "], got " +
                                         image.shape_str());
    }
    const Tensor& c1w = param(weights, "imgenc.conv1.w");
    const Tensor& c1b = param(weights, "imgenc.conv1.b");
    const Tensor& c2w = param(weights, "imgenc.conv2.w");
    const Tensor& c2b = param(weights, "imgenc.conv2.b");
    const Tensor& c3w = param(weights, "imgenc.conv3.w");
    const Tensor& c3b = param(weights, "imgenc.conv3.b");
    const Tensor& pw = param(weights, "imgenc.proj.w");
    const Tensor& pb = param(weights, "imgenc.proj.b");

    Tensor h1 = conv2d(image, c1w, &c1b, 2, 1);
    Tensor s1 = silu(h1);
    Tensor h2 = conv2d(s1, c2w, &c2b, 2, 1);
    Tensor s2 = silu(h2);
    Tensor h3 = conv2d(s2, c3w, &c3b, 2, 1);
    Tensor s3 = silu(h3);

    // Global mean pool over the final feature map.
    const int C = s3.dim(0);
    const std::int64_t plane = static_cast<std::int64_t>(s3.dim(1)) * s3.dim(2);
    Tensor pooled({1, C});
    for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (std::int64_t i = 0; i < plane; ++i) acc += s3.data()[c * plane + i];
        pooled.at(0, c) = static_cast<float>(acc / static_cast<double>(plane));
    }

    Tensor proj = linear(pooled, pw, &pb);  // [1, 4*d_model]
    if (proj.dim(1) != kIpTokenCount * cfg.d_model) {
        throw ShapeError("encoders", "imgenc.proj.w produces " + std::to_string(proj.dim(1)) +
                                         " values, expected 4*d_model = " +
                                         std::to_string(kIpTokenCount * cfg.d_model));
    }
    Tensor tokens({kIpTokenCount, cfg.d_model}, std::vector<float>(
                                                    proj.data(), proj.data() + proj.size()));
    if (trace) {
        trace->input = image;
        trace->conv1_out = std::move(h1);
        trace->silu1_out = std::move(s1);
        trace->conv2_out = std::move(h2);
        trace->silu2_out = std::move(s2);
        trace->conv3_out = std::move(h3);
        trace->silu3_out = std::move(s3);
        trace->pooled = std::move(pooled);
    }
    return tokens;
}

void image_encoder_backward(const ImageEncoderTrace& trace, const ModelWeights& weights,
                            const ImageEncoderConfig& cfg, const Tensor& dtokens,
                            ModelWeights& grads) {
    if (dtokens.rank() != 2 || dtokens.dim(0) != kIpTokenCount || dtokens.dim(1) != cfg.d_model) {
        throw ShapeError("encoders", "image_encoder_backward expects token gradient [4," +
                                         std::to_string(cfg.d_model) + "], got " +
                                         dtokens.shape_str());
    }
    auto slot = [&](const std::string& name) -> Tensor& {
        auto it = grads.find(name);
        if (it == grads.end()) it = grads.emplace(name, Tensor(param(weights, name).shape())).first;
        return it->second;
    };

    // Tokens are a reshape of the projection output.
    Tensor dproj({1, kIpTokenCount * cfg.d_model},
                 std::vector<float>(dtokens.data(), dtokens.data() + dtokens.size()));
    Tensor dpooled({1, cfg.c3});
    linear_backward(trace.pooled, param(weights, "imgenc.proj.w"), dproj, &dpooled,
                    &slot("imgenc.proj.w"), &slot("imgenc.proj.b"));

    // Mean pool spreads the gradient uniformly over the final feature map.
    const int C = trace.silu3_out.dim(0);
    const std::int64_t plane =
        static_cast<std::int64_t>(trace.silu3_out.dim(1)) * trace.silu3_out.dim(2);
    Tensor dsilu3(trace.silu3_out.shape());
    for (int c = 0; c < C; ++c) {
        const float g = static_cast<float>(dpooled.at(0, c) / static_cast<double>(plane));
        float* row = dsilu3.data() + static_cast<std::int64_t>(c) * plane;
        for (std::int64_t i = 0; i < plane; ++i) row[i] = g;
    }

    Tensor dconv3 = silu_backward(trace.conv3_out, dsilu3);
    Tensor dsilu2(trace.silu2_out.shape());
    conv2d_backward(trace.silu2_out, param(weights, "imgenc.conv3.w"), dconv3, 2, 1, &dsilu2,
                    &slot("imgenc.conv3.w"), &slot("imgenc.conv3.b"));
    Tensor dconv2 = silu_backward(trace.conv2_out, dsilu2);
    Tensor dsilu1(trace.silu1_out.shape());
    conv2d_backward(trace.silu1_out, param(weights, "imgenc.conv2.w"), dconv2, 2, 1, &dsilu1,
                    &slot("imgenc.conv2.w"), &slot("imgenc.conv2.b"));
    Tensor dconv1 = silu_backward(trace.conv1_out, dsilu1);
    conv2d_backward(trace.input, param(weights, "imgenc.conv1.w"), dconv1, 2, 1, nullptr,
                    &slot("imgenc.conv1.w"), &slot("imgenc.conv1.b"));
}

ConditioningSequence build_conditioning(const Tensor& text, const Tensor& ip) {
    if (text.rank() != 2 || ip.rank() != 2) {
        throw ShapeError("encoders", "build_conditioning expects rank-2 inputs, got " +
                                         text.shape_str() + " and " + ip.shape_str());
    }
    if (ip.dim(0) != kIpTokenCount) {
        throw ShapeError("encoders", "expected exactly " + std::to_string(kIpTokenCount) +
                                         " IP token rows, got " + ip.shape_str());
    }
    if (text.dim(1) != ip.dim(1)) {
        throw ShapeError("encoders", "embedding width mismatch: text " + text.shape_str() +
                                         " vs ip " + ip.shape_str());
    }
    const int n_text = text.dim(0), d = text.dim(1);
    ConditioningSequence cs;
    cs.d_model = d;
    cs.text_span = {0, n_text};
    cs.ip_span = {n_text, n_text + kIpTokenCount};
    cs.tokens = Tensor({n_text + kIpTokenCount, d});
    std::copy(text.data(), text.data() + text.size(), cs.tokens.data());
    std::copy(ip.data(), ip.data() + ip.size(), cs.tokens.data() + text.size());
    return cs;
}

}  // namespace monkey
