// Copyright (C) 2026 The HalfV Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "halfv/anchorcover.hpp"
#include "halfv/decoder.hpp"
#include "halfv/flops.hpp"
#include "halfv/trace_io.hpp"

namespace halfv {

struct HalfvRun {
    ForwardResult result;
    std::optional<PrunePlan> ivr_plan;
    std::vector<std::size_t> ssr_kept;  // original visual ids kept past l_ssr
    std::size_t v_prime = 0;
    std::size_t v_ssr = 0;
    ForwardCapture capture;
};

/// Two-step prefill: vanilla layers up to l_ivr, AnchorCover pruning entering
/// l_ivr (scores without rotary positions), then saturation handling entering
/// l_ssr per the profile's mode.
HalfvRun run_halfv(const ToyDecoder& decoder, const DenseMatrix& embeddings,
                   const std::vector<Modality>& modality, const ArchProfile& profile,
                   FrozenKvCache* cache = nullptr);

struct SimulationConfig {
    DecoderConfig decoder;
    ArchProfile profile;
    std::size_t visual_tokens = 16;
    std::size_t text_tokens = 4;
    std::uint64_t input_seed = 1;
    bool zero_visual = false;

    /// {"decoder": {...}, "profile": {...}, "input": {...}}; unknown keys rejected.
    static SimulationConfig from_json_text(const std::string& text);
    static SimulationConfig load(const std::filesystem::path& path);

    /// Replaces both seeds: the decoder takes `seed`, the input stream a value
    /// derived from it.
    void override_seed(std::uint64_t seed);
};

struct SimulationSummary {
    double kl_vanilla_halfv = 0.0;
    std::uint64_t counted_vanilla = 0;
    std::uint64_t counted_halfv = 0;
    double analytic_vanilla = 0.0;
    double analytic_halfv = 0.0;
    double analytic_speedup = 1.0;
    double counted_speedup = 1.0;
    std::size_t v_prime = 0;
    std::size_t v_ssr = 0;
};

struct SimulationOutputs {
    SimulationSummary summary;
    HalfvRun halfv;
    ForwardCapture vanilla_capture;
    ForwardResult vanilla;
    std::vector<double> layer_kl;
    FlopsBudget budget_vanilla;
    FlopsBudget budget_halfv;
};

SimulationOutputs run_simulation(const SimulationConfig& cfg);

/// Runs the simulation and writes simulate.csv, layers.csv, prune_plan.csv
/// (when pruning is enabled) and, on request, vanilla.hvtd / halfv.hvtd.
SimulationSummary simulate(const SimulationConfig& cfg, const std::filesystem::path& out_dir,
                           bool dump_traces, const ReportHeader& header);

Table prune_plan_table(const PrunePlan& plan);

}  // namespace halfv
