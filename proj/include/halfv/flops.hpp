// Copyright (C) 2026 The HalfV Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "halfv/trace_io.hpp"

namespace halfv {

/// One block processing n_active tokens whose attention spans n_context
/// tokens: 2 n_a (4h + 3m) h + 4 n_a n_c h. QKVO projections contribute
/// 8 n_a h^2, the gated FFN 6 n_a m h, scores plus weighting 4 n_a n_c h.
std::uint64_t stage_flops_exact(std::uint64_t n_active, std::uint64_t n_context, std::uint64_t h,
                                std::uint64_t m);
double stage_flops(double n_active, double n_context, double h, double m);

struct ModelDims {
    std::size_t text_tokens = 0;    // t
    std::size_t visual_tokens = 0;  // v
    std::size_t hidden = 0;         // h
    std::size_t ffn = 0;            // m
    std::size_t layers = 0;
};

/// Reference settings for the named backbones.
ModelDims model_preset(const std::string& name);

struct FlopsBudget {
    std::size_t t = 0, v = 0, v_prime = 0, v_ssr = 0;
    std::size_t h = 0, m = 0;
    std::size_t l1 = 0, l2 = 0, l3 = 0;
    SsrMode mode = SsrMode::LayerInactivity;
    bool ssr_enabled = false;
    double f1 = 0, f2 = 0, f3 = 0, total = 0;
};

/// Visual tokens kept by the pruning step: round(r * v), at least 1 when v > 0.
std::size_t ivr_keep_count(double r_ivr, std::size_t v);
/// Visual tokens kept by TokenSparsity: max(1, round(r * v)) capped at v_prime.
std::size_t ssr_keep_count(double r_ssr, std::size_t v, std::size_t v_prime);

FlopsBudget total_flops(const ArchProfile& profile, const ModelDims& dims);
FlopsBudget vanilla_flops(const ModelDims& dims);

/// vanilla.total / accelerated.total; both must share h, m and depth.
double speedup(const FlopsBudget& vanilla, const FlopsBudget& accelerated);

}  // namespace halfv
