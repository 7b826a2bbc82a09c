// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "monkey/tensor.hpp"

namespace monkey {

inline constexpr char kNoiseAlgorithm[] = "splitmix64-box-muller-v1";
inline constexpr int kTrainTimesteps = 1000;

/// Seed for the initial latent noise. The algorithm identifier is recorded
/// so checkpoints and reproducibility records stay honest about how the
/// bytes were produced.
struct NoiseSeed {
    std::uint64_t value = 0;
    std::string algorithm = kNoiseAlgorithm;
};

/// Few-step inference schedule: descending timesteps over the 1000-step
/// training range with the cosine cumulative signal rate at each.
struct Schedule {
    int num_steps = 0;
    std::vector<int> timesteps;       // descending
    std::vector<float> alpha_bar;     // alpha_bar[i] = signal rate at timesteps[i]
};

/// Cosine cumulative signal rate, strictly decreasing in t, in (0,1) for
/// t in [0, 999].
double alpha_bar_at(int t);

/// Evenly spaced descending timesteps anchored at the noisy end of the
/// training range: t_i = round(1000*i/k) - 1 for i = k..1. When the spacing
/// divides evenly, a shorter schedule's timesteps are a subset of a longer
/// one's.
Schedule make_schedule(int num_steps);

/// Standard normal tensor from the fixed counter-based stream; same seed,
/// same bytes, on any platform.
Tensor initial_noise(const NoiseSeed& seed, const std::vector<int>& shape);

/// Deterministic DDIM update (eta = 0): predict x0, clamp to [-3,3],
/// re-noise to the next signal rate; the final step returns the x0 estimate.
Tensor ddim_step(const Tensor& latent, const Tensor& eps_pred, const Schedule& schedule, int i);

}  // namespace monkey
