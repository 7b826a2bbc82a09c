// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "monkey/error.hpp"
#include "monkey/mask.hpp"
#include "monkey/rng.hpp"

using namespace monkey;

namespace {

/// Single-head record whose ip1 column equals `map` at every position (the
/// rest of the mass parked on the first text column so rows stay stochastic).
AttentionRecord record_with_ip1_map(const std::vector<float>& map, int h, int w, int step,
                                    const std::string& layer = "up1.attn2") {
    const int S = h * w, T = 2 + kIpTokenCount;
    AttentionRecord rec;
    rec.layer_id = layer;
    rec.step_index = step;
    rec.spatial_h = h;
    rec.spatial_w = w;
    rec.probs = Tensor::zeros({1, S, T});
    for (int s = 0; s < S; ++s) {
        rec.probs.at(0, s, 2) = map[static_cast<size_t>(s)];  // ip1
        rec.probs.at(0, s, 0) = 1.0f - map[static_cast<size_t>(s)];
    }
    return rec;
}

/// Exhaustive 64-bin Otsu scan, written independently as the test oracle.
float otsu_oracle(const std::vector<float>& values) {
    const int bins = 64;
    std::vector<int> hist(bins, 0);
    for (float v : values) {
        int b = static_cast<int>(v * bins);
        b = std::clamp(b, 0, bins - 1);
        ++hist[static_cast<size_t>(b)];
    }
    double best = -1.0;
    int best_lo = 0, best_hi = 0;
    for (int t = 0; t < bins - 1; ++t) {
        double w0 = 0, w1 = 0, s0 = 0, s1 = 0;
        for (int b = 0; b <= t; ++b) {
            w0 += hist[static_cast<size_t>(b)];
            s0 += b * static_cast<double>(hist[static_cast<size_t>(b)]);
        }
        for (int b = t + 1; b < bins; ++b) {
            w1 += hist[static_cast<size_t>(b)];
            s1 += b * static_cast<double>(hist[static_cast<size_t>(b)]);
        }
        if (w0 == 0 || w1 == 0) continue;
        const double mu0 = s0 / w0, mu1 = s1 / w1;
        const double var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (var > best + 1e-12) {
            best = var;
            best_lo = best_hi = t;
        } else if (std::abs(var - best) <= 1e-12) {
            best_hi = t;
        }
    }
    return static_cast<float>(((best_lo + best_hi) / 2.0 + 1.0) / bins);
}

}  // namespace

TEST_CASE("normalize01 rescales by the observed range and rejects constants") {
    const Tensor map({4}, {0.2f, 0.4f, 0.6f, 1.0f});
    const Tensor norm = normalize01(map);
    CHECK(norm.at(0) == 0.0f);
    CHECK(norm.at(3) == 1.0f);
    CHECK(norm.at(1) == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(norm.at(2) == doctest::Approx(0.5).epsilon(1e-6));

    CHECK_THROWS_AS(normalize01(Tensor::full({4}, 0.7f)), MaskError);
    CHECK_THROWS_AS(normalize01(Tensor{}), MaskError);
}

TEST_CASE("fixed-threshold binarize with subject-favoring ties") {
    MaskPolicy policy;  // fixed(0.5)
    const Tensor ab({2}, {0.2f, 0.8f});
    const Tensor bin = binarize(ab, policy);
    CHECK(bin.at(0) == 0.0f);
    CHECK(bin.at(1) == 1.0f);

    CHECK(bitwise_equal(binarize(Tensor::ones({3}), policy), Tensor::ones({3})));

    // A value exactly at the threshold counts as subject.
    const Tensor tie({2}, {0.5f, 0.49f});
    const Tensor tb = binarize(tie, policy);
    CHECK(tb.at(0) == 1.0f);
    CHECK(tb.at(1) == 0.0f);

    CHECK_THROWS_AS(binarize(Tensor({1}, {1.5f}), policy), MaskError);
}

TEST_CASE("otsu separates a bimodal map exactly like the exhaustive oracle") {
    // 8 cells near 0.1 and 8 near 0.9.
    std::vector<float> values;
    for (int i = 0; i < 8; ++i) values.push_back(0.1f + 0.005f * static_cast<float>(i));
    for (int i = 0; i < 8; ++i) values.push_back(0.9f - 0.005f * static_cast<float>(i));
    const Tensor map({16}, std::vector<float>(values));

    MaskPolicy policy;
    policy.mode = MaskPolicy::Mode::kOtsu;
    float theta = 0.0f;
    const Tensor bin = binarize(map, policy, &theta);
    CHECK(theta == doctest::Approx(otsu_oracle(values)).epsilon(1e-6));
    for (int i = 0; i < 16; ++i) {
        CHECK(bin.at(i) == (values[static_cast<size_t>(i)] > 0.5f ? 1.0f : 0.0f));
    }

    // Random bimodal instances agree with the oracle too.
    std::mt19937 gen(9);
    std::uniform_real_distribution<float> lo(0.0f, 0.3f), hi(0.7f, 1.0f);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<float> v;
        for (int i = 0; i < 10; ++i) v.push_back(lo(gen));
        for (int i = 0; i < 6; ++i) v.push_back(hi(gen));
        const Tensor t({16}, std::vector<float>(v));
        float got = 0.0f;
        binarize(t, policy, &got);
        CHECK(got == doctest::Approx(otsu_oracle(v)).epsilon(1e-6));
    }
}

TEST_CASE("derive_mask reproduces the hand-computed example") {
    // Maps [[0.1,0.9],[0.2,0.8]] on a 1x2 grid at steps 2 and 3 (1-based):
    // average = [0.15, 0.85], normalized = [0, 1], fixed(0.5) -> [0, 1].
    std::vector<AttentionRecord> records;
    records.push_back(record_with_ip1_map({0.5f, 0.5f}, 1, 2, 0));  // outside the window
    records.push_back(record_with_ip1_map({0.1f, 0.9f}, 1, 2, 1));
    records.push_back(record_with_ip1_map({0.2f, 0.8f}, 1, 2, 2));
    records.push_back(record_with_ip1_map({0.5f, 0.5f}, 1, 2, 3));

    const SubjectMask mask = derive_mask(records, "up1.attn2", StepWindow{2, 3}, 0, MaskPolicy{});
    REQUIRE(mask.grid.shape() == std::vector<int>{1, 2});
    CHECK(mask.grid.at(0, 0) == 0.0f);
    CHECK(mask.grid.at(0, 1) == 1.0f);

    // Provenance is fully populated.
    CHECK(mask.source.layer_id == "up1.attn2");
    CHECK(mask.source.steps == std::vector<int>{1, 2});  // 0-based internally
    CHECK(mask.source.token == 0);
    CHECK(mask.source.policy == "fixed(0.5)");
    CHECK(mask.source.threshold == 0.5f);

    const std::string prov = mask_provenance_text(mask);
    CHECK(prov.find("up1.attn2") != std::string::npos);
    CHECK(prov.find("fixed(0.5)") != std::string::npos);
    CHECK(prov.find("subject_fraction") != std::string::npos);
}

TEST_CASE("derive_mask averages identical maps to the same mask") {
    std::vector<AttentionRecord> records;
    records.push_back(record_with_ip1_map({0.1f, 0.9f, 0.2f, 0.8f}, 2, 2, 1));
    records.push_back(record_with_ip1_map({0.1f, 0.9f, 0.2f, 0.8f}, 2, 2, 2));
    const SubjectMask two = derive_mask(records, "up1.attn2", StepWindow{2, 3}, 0, MaskPolicy{});
    const SubjectMask one = derive_mask(records, "up1.attn2", StepWindow{2, 2}, 0, MaskPolicy{});
    CHECK(bitwise_equal(two.grid, one.grid));
}

TEST_CASE("derive_mask ignores record ordering") {
    std::vector<AttentionRecord> records;
    records.push_back(record_with_ip1_map({0.3f, 0.7f, 0.6f, 0.2f}, 2, 2, 2));
    records.push_back(record_with_ip1_map({0.1f, 0.9f, 0.5f, 0.4f}, 2, 2, 1));
    const SubjectMask a = derive_mask(records, "up1.attn2", StepWindow{2, 3}, 0, MaskPolicy{});
    std::swap(records[0], records[1]);
    const SubjectMask b = derive_mask(records, "up1.attn2", StepWindow{2, 3}, 0, MaskPolicy{});
    CHECK(bitwise_equal(a.grid, b.grid));
    CHECK(a.source.steps == b.source.steps);
}

TEST_CASE("a single-step window equals binarize(normalize(that map))") {
    const std::vector<float> map = {0.15f, 0.35f, 0.75f, 0.95f, 0.05f, 0.55f};
    std::vector<AttentionRecord> records;
    records.push_back(record_with_ip1_map(map, 2, 3, 0));
    const SubjectMask mask = derive_mask(records, "up1.attn2", StepWindow{1, 1}, 0, MaskPolicy{});
    const Tensor want = binarize(normalize01(Tensor({6}, std::vector<float>(map))), MaskPolicy{});
    for (int i = 0; i < 6; ++i) CHECK(mask.grid.data()[i] == want.data()[i]);
}

TEST_CASE("every mask element is exactly binary") {
    DetRng rng(301);
    std::vector<AttentionRecord> records;
    for (int step = 0; step < 4; ++step) {
        std::vector<float> map(64);
        for (auto& v : map) v = static_cast<float>(rng.next_unit());
        records.push_back(record_with_ip1_map(map, 8, 8, step));
    }
    for (MaskPolicy::Mode mode : {MaskPolicy::Mode::kFixed, MaskPolicy::Mode::kOtsu}) {
        MaskPolicy policy;
        policy.mode = mode;
        const SubjectMask mask = derive_mask(records, "up1.attn2", StepWindow{2, 3}, 0, policy);
        for (float v : mask.grid.values()) CHECK((v == 0.0f || v == 1.0f));
    }
}

TEST_CASE("derive_mask reports missing layers and steps distinctly") {
    std::vector<AttentionRecord> records;
    records.push_back(record_with_ip1_map({0.1f, 0.9f}, 1, 2, 1));
    // Step 3 (0-based 2) missing from the window 2-3.
    CHECK_THROWS_AS(derive_mask(records, "up1.attn2", StepWindow{2, 3}, 0, MaskPolicy{}),
                    MaskError);
    // Unknown layer.
    CHECK_THROWS_AS(derive_mask(records, "mid.attn", StepWindow{2, 2}, 0, MaskPolicy{}),
                    MaskError);
    // Empty window and bad token index.
    CHECK_THROWS_AS(derive_mask(records, "up1.attn2", StepWindow{3, 2}, 0, MaskPolicy{}),
                    MaskError);
    CHECK_THROWS_AS(derive_mask(records, "up1.attn2", StepWindow{2, 2}, 7, MaskPolicy{}),
                    MaskError);
    // Constant map: fail loudly rather than guess a mask.
    std::vector<AttentionRecord> flat;
    flat.push_back(record_with_ip1_map({0.4f, 0.4f}, 1, 2, 1));
    CHECK_THROWS_AS(derive_mask(flat, "up1.attn2", StepWindow{2, 2}, 0, MaskPolicy{}), MaskError);
}

TEST_CASE("vote mode binarizes per step then takes the majority") {
    // Step maps normalize to [0,1] and [1,0]; a third map breaks the tie.
    std::vector<AttentionRecord> records;
    records.push_back(record_with_ip1_map({0.1f, 0.9f}, 1, 2, 0));
    records.push_back(record_with_ip1_map({0.9f, 0.1f}, 1, 2, 1));
    records.push_back(record_with_ip1_map({0.2f, 0.8f}, 1, 2, 2));

    MaskPolicy vote;
    vote.average_binarized = true;
    const SubjectMask mask = derive_mask(records, "up1.attn2", StepWindow{1, 3}, 0, vote);
    // Votes: position 0 gets 1 of 3, position 1 gets 2 of 3.
    CHECK(mask.grid.at(0, 0) == 0.0f);
    CHECK(mask.grid.at(0, 1) == 1.0f);

    // An even split counts as subject (ties favor the subject).
    const SubjectMask tie = derive_mask(records, "up1.attn2", StepWindow{1, 2}, 0, vote);
    CHECK(tie.grid.at(0, 0) == 1.0f);
    CHECK(tie.grid.at(0, 1) == 1.0f);
}

TEST_CASE("complement mode inverts the ip2/ip3 union map") {
    // ip2 and ip3 light up position 0; the subject is therefore position 1.
    const int S = 2, T = 2 + kIpTokenCount;
    AttentionRecord rec;
    rec.layer_id = "up1.attn2";
    rec.step_index = 0;
    rec.spatial_h = 1;
    rec.spatial_w = 2;
    rec.probs = Tensor::zeros({1, S, T});
    rec.probs.at(0, 0, 3) = 0.9f;  // ip2 at position 0
    rec.probs.at(0, 0, 0) = 0.1f;
    rec.probs.at(0, 1, 4) = 0.2f;  // ip3 weakly at position 1
    rec.probs.at(0, 1, 0) = 0.8f;

    MaskPolicy policy;
    policy.complement_background = true;
    const SubjectMask mask =
        derive_mask({rec}, "up1.attn2", StepWindow{1, 1}, 0, policy);
    CHECK(mask.grid.at(0, 0) == 0.0f);
    CHECK(mask.grid.at(0, 1) == 1.0f);
    CHECK(mask.source.token == -1);
}

TEST_CASE("mask_for_layer transports the grid by nearest neighbour") {
    UNetConfig cfg;
    SubjectMask mask;
    mask.grid = Tensor({2, 2}, {1, 0, 0, 1});

    // 2x2 checkerboard to 4x4 becomes 2x2 blocks (mid.attn is 4x4).
    const Tensor up = mask_for_layer(mask, "mid.attn", cfg);
    const Tensor want({4, 4}, {1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1});
    CHECK(bitwise_equal(up, want));

    // Constant masks stay constant at any resolution; binary stays binary.
    SubjectMask ones;
    ones.grid = Tensor::ones({8, 8});
    CHECK(bitwise_equal(mask_for_layer(ones, "up2.attn1", cfg), Tensor::ones({16, 16})));
    CHECK(bitwise_equal(mask_for_layer(ones, "down.attn", cfg), Tensor::ones({8, 8})));

    // Identity at the capture resolution.
    SubjectMask native;
    native.grid = Tensor({8, 8});
    DetRng rng(302);
    for (auto& v : native.grid.values()) v = rng.next_below(2) ? 1.0f : 0.0f;
    CHECK(bitwise_equal(mask_for_layer(native, "up1.attn2", cfg), native.grid));

    CHECK_THROWS_AS(mask_for_layer(native, "nowhere.attn", cfg), Error);
}

TEST_CASE("step windows answer membership the 1-based way") {
    const StepWindow w{3, 6};
    CHECK_FALSE(w.contains(2));
    CHECK(w.contains(3));
    CHECK(w.contains(6));
    CHECK_FALSE(w.contains(7));
    CHECK(w.length() == 4);
    CHECK_FALSE(w.empty());

    const StepWindow none{1, 0};
    CHECK(none.empty());
    CHECK(none.length() == 0);
    CHECK_FALSE(none.contains(1));
}
