// SPDX-License-Identifier: Apache-2.0
#include "monkey/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "monkey/error.hpp"
#include "monkey/rng.hpp"

namespace monkey {

double alpha_bar_at(int t) {
    constexpr double s = 0.008;
    const double f = std::cos((static_cast<double>(t) / kTrainTimesteps + s) / (1.0 + s) *
                              (3.14159265358979323846 / 2.0));
    return f * f;
}

Schedule make_schedule(int num_steps) {
    if (num_steps < 1) throw Error("sampler", "schedule needs at least one step");
    if (num_steps > kTrainTimesteps) {
        throw Error("sampler", "schedule cannot exceed the " + std::to_string(kTrainTimesteps) +
                                   "-step training range");
    }
    Schedule s;
    s.num_steps = num_steps;
    for (int i = num_steps; i >= 1; --i) {
        const int t = static_cast<int>(std::lround(static_cast<double>(kTrainTimesteps) * i /
                                                   num_steps)) - 1;
        s.timesteps.push_back(t);
        s.alpha_bar.push_back(static_cast<float>(alpha_bar_at(t)));
    }
    for (size_t i = 1; i < s.timesteps.size(); ++i) {
        if (s.timesteps[i] >= s.timesteps[i - 1]) {
            throw Error("sampler", "schedule timesteps not strictly descending");
        }
    }
    return s;
}

Tensor initial_noise(const NoiseSeed& seed, const std::vector<int>& shape) {
    if (seed.algorithm != kNoiseAlgorithm) {
        throw Error("sampler", "unknown noise generator '" + seed.algorithm + "' (supported: " +
                                   kNoiseAlgorithm + ")");
    }
    Tensor out(shape);
    const std::int64_t n = out.size();
    for (std::int64_t i = 0; i < n; i += 2) {
        const std::uint64_t counter = static_cast<std::uint64_t>(i / 2);
        const double u1 = u64_to_open_unit(splitmix64_at(seed.value, 2 * counter));
        const double u2 = (splitmix64_at(seed.value, 2 * counter + 1) >> 11) * 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        out.data()[i] = static_cast<float>(r * std::cos(theta));
        if (i + 1 < n) out.data()[i + 1] = static_cast<float>(r * std::sin(theta));
    }
    return out;
}

Tensor ddim_step(const Tensor& latent, const Tensor& eps_pred, const Schedule& schedule, int i) {
    if (i < 0 || i >= schedule.num_steps) {
        throw Error("sampler", "step index " + std::to_string(i) + " out of range for " +
                                   std::to_string(schedule.num_steps) + "-step schedule");
    }
    if (!latent.same_shape(eps_pred)) {
        throw ShapeError("sampler", "latent " + latent.shape_str() + " vs eps " + eps_pred.shape_str());
    }
    const double ab = schedule.alpha_bar[static_cast<size_t>(i)];
    const float inv_sqrt_ab = static_cast<float>(1.0 / std::sqrt(ab));
    const float sqrt_1mab = static_cast<float>(std::sqrt(1.0 - ab));

    Tensor x0(latent.shape());
    for (std::int64_t j = 0; j < latent.size(); ++j) {
        float v = (latent.data()[j] - sqrt_1mab * eps_pred.data()[j]) * inv_sqrt_ab;
        x0.data()[j] = std::clamp(v, -3.0f, 3.0f);
    }
    if (i == schedule.num_steps - 1) return x0;

    const double ab_next = schedule.alpha_bar[static_cast<size_t>(i) + 1];
    const float sqrt_ab_next = static_cast<float>(std::sqrt(ab_next));
    const float sqrt_1mab_next = static_cast<float>(std::sqrt(1.0 - ab_next));
    Tensor out(latent.shape());
    for (std::int64_t j = 0; j < latent.size(); ++j) {
        out.data()[j] = sqrt_ab_next * x0.data()[j] + sqrt_1mab_next * eps_pred.data()[j];
    }
    return out;
}

}  // namespace monkey
