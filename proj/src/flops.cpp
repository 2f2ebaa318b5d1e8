// Copyright (C) 2026 The HalfV Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "halfv/flops.hpp"

#include <algorithm>

#include "halfv/anchorcover.hpp"
#include "halfv/error.hpp"

namespace halfv {

std::uint64_t stage_flops_exact(std::uint64_t n_active, std::uint64_t n_context, std::uint64_t h,
                                std::uint64_t m) {
    return 2 * n_active * (4 * h + 3 * m) * h + 4 * n_active * n_context * h;
}

double stage_flops(double n_active, double n_context, double h, double m) {
    return 2.0 * n_active * (4.0 * h + 3.0 * m) * h + 4.0 * n_active * n_context * h;
}

ModelDims model_preset(const std::string& name) {
    if (name == "llava-1.5-7b") return {50, 576, 4096, 11008, 32};
    if (name == "llava-1.5-13b") return {50, 576, 5120, 13824, 40};
    if (name == "llava-next-7b") return {50, 2352, 4096, 14336, 32};
    if (name == "qwen2.5-vl-7b") return {50, 2352, 3584, 18944, 28};
    fail(ErrorKind::Config, "unknown model preset '" + name + "'");
}

std::size_t ivr_keep_count(double r_ivr, std::size_t v) {
    if (v == 0) return 0;
    return std::clamp<std::size_t>(round_half_up(r_ivr * static_cast<double>(v)), 1, v);
}

std::size_t ssr_keep_count(double r_ssr, std::size_t v, std::size_t v_prime) {
    if (v_prime == 0) return 0;
    return std::clamp<std::size_t>(round_half_up(r_ssr * static_cast<double>(v)), 1, v_prime);
}

FlopsBudget total_flops(const ArchProfile& profile, const ModelDims& d) {
    profile.validate_for_layers(d.layers);
    if (d.hidden == 0 || d.ffn == 0 || d.layers == 0) {
        fail(ErrorKind::Config, "hidden, ffn and layer counts must be positive");
    }
    FlopsBudget b;
    b.t = d.text_tokens;
    b.v = d.visual_tokens;
    b.h = d.hidden;
    b.m = d.ffn;
    b.mode = profile.ssr_mode;
    b.ssr_enabled = profile.l_ssr.has_value();

    const std::size_t ssr_start = profile.l_ssr.value_or(d.layers);
    const std::size_t ivr_start = profile.l_ivr.value_or(ssr_start);
    b.l1 = ivr_start;
    b.l2 = ssr_start - ivr_start;
    b.l3 = d.layers - ssr_start;
    b.v_prime = profile.l_ivr ? ivr_keep_count(profile.r_ivr.front(), b.v) : b.v;

    const double t = static_cast<double>(b.t);
    const double h = static_cast<double>(b.h);
    const double m = static_cast<double>(b.m);
    const double n1 = t + static_cast<double>(b.v);
    const double n2 = t + static_cast<double>(b.v_prime);
    b.f1 = stage_flops(n1, n1, h, m);
    b.f2 = stage_flops(n2, n2, h, m);
    if (b.ssr_enabled && profile.ssr_mode == SsrMode::TokenSparsity) {
        b.v_ssr = ssr_keep_count(*profile.sparse_retention(), b.v, b.v_prime);
        const double n3 = t + static_cast<double>(b.v_ssr);
        b.f3 = stage_flops(n3, n3, h, m);
    } else {
        b.v_ssr = b.v_prime;
        b.f3 = b.ssr_enabled ? stage_flops(t, n2, h, m) : b.f2;
    }
    b.total = static_cast<double>(b.l1) * b.f1 + static_cast<double>(b.l2) * b.f2 +
              static_cast<double>(b.l3) * b.f3;
    return b;
}

FlopsBudget vanilla_flops(const ModelDims& dims) { return total_flops(ArchProfile{}, dims); }

double speedup(const FlopsBudget& vanilla, const FlopsBudget& accelerated) {
    if (vanilla.h != accelerated.h || vanilla.m != accelerated.m ||
        vanilla.l1 + vanilla.l2 + vanilla.l3 != accelerated.l1 + accelerated.l2 + accelerated.l3) {
        fail(ErrorKind::Domain, "speedup needs budgets for the same model");
    }
    if (accelerated.total == 0.0) fail(ErrorKind::Domain, "accelerated budget is zero");
    return vanilla.total / accelerated.total;
}

}  // namespace halfv
