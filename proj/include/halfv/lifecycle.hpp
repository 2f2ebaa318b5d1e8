// Copyright (C) 2026 The HalfV Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "halfv/entropy.hpp"
#include "halfv/ssr.hpp"

namespace halfv {

class ToyDecoder;

/// Thresholds are fractions of the curve's range (max - min).
struct StageParams {
    std::size_t window = 2;  // w consecutive layers
    double delta = 0.05;     // total decline to open Stage II
    double tau = 0.02;       // per-layer change bound for Stage III
};

struct LifecycleReport {
    std::size_t stage2_onset = 0;
    std::size_t stage3_onset = 0;
    std::vector<double> entropy_curve;  // one value per trace layer
    std::vector<double> kl_curve;       // one value per decoder layer, when probed
    std::string method_notes;
};

/// Onsets name the first layer inside a stage. Stage II opens at the first
/// l >= 1 with e[l-1] > e[l] > ... > e[l+w-1] and a total drop of at least
/// delta * range. Stage III opens at the first later l where |e[j] - e[j-1]|
/// stays below tau * range for j = l .. l+w-1. Throws DetectionFailure
/// otherwise.
LifecycleReport detect_stages(std::span<const double> curve, const StageParams& params = {});

/// Uses the visual-group curve of the trajectory.
LifecycleReport detect_stages(const EntropyTrajectory& traj, const StageParams& params = {});

/// KL(p || q) in nats with 0 ln 0 = 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// For every decoder layer l: KL between the final next-token distribution of
/// the base schedule and the same schedule with visual updates frozen at l.
std::vector<double> layer_kl_probe(const ToyDecoder& decoder, const DenseMatrix& embeddings,
                                   const std::vector<Modality>& modality,
                                   std::span<const LayerUpdatePolicy> base_schedule = {});

struct MarginalUtility {
    double delta_perf = 0.0;  // < 0 is a drop
    double delta_cost = 0.0;
    double epsilon = 0.0;
    double value = 0.0;
};

/// (-delta_perf) / (delta_cost + epsilon); lower is better.
MarginalUtility marginal_utility(double delta_perf, double delta_cost, double epsilon = 1e-8);

}  // namespace halfv
