// Copyright (C) 2026 The HalfV Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "halfv/error.hpp"
#include "halfv/flops.hpp"

using halfv::ArchProfile;
using halfv::ModelDims;

namespace {

// Per-layer cost with every term written separately: QKVO, gated FFN,
// scores plus weighting.
double layer_cost(double na, double nc, double h, double m) {
    const double qkvo = 4.0 * (2.0 * na * h * h);
    const double ffn = 3.0 * (2.0 * na * h * m);
    const double attn = 2.0 * na * nc * h + 2.0 * na * nc * h;
    return qkvo + ffn + attn;
}

}  // namespace

TEST_CASE("stage flops plug-in values") {
    CHECK(halfv::stage_flops(626, 626, 4096, 11008) == layer_cost(626, 626, 4096, 11008));
    CHECK(halfv::stage_flops_exact(626, 626, 4096, 11008) == 259794206720ull);
    CHECK(std::abs(halfv::stage_flops(626, 626, 4096, 11008) / 2.597e11 - 1.0) < 1e-3);
    CHECK(halfv::stage_flops(0, 626, 4096, 11008) == 0.0);
    CHECK(halfv::stage_flops_exact(1, 1, 4, 8) == 336);

    const double t = 50, h = 4096, m = 11008;
    const double freeze = 2 * t * (4 * h + 3 * m) * h + 4 * t * 338 * h;
    CHECK(halfv::stage_flops(50, 338, h, m) == freeze);
    CHECK(freeze == 20514406400.0);
}

TEST_CASE("vanilla totals for the reference backbones") {
    const auto b7 = halfv::vanilla_flops(halfv::model_preset("llava-1.5-7b"));
    CHECK(b7.total == 32.0 * layer_cost(626, 626, 4096, 11008));
    CHECK(std::abs(b7.total - 8.31e12) / 8.31e12 < 0.005);
    CHECK(b7.l1 == 32);
    CHECK(b7.l2 == 0);
    CHECK(b7.l3 == 0);

    const auto b13 = halfv::vanilla_flops(halfv::model_preset("llava-1.5-13b"));
    CHECK(b13.total == 40.0 * layer_cost(626, 626, 5120, 13824));
    CHECK(std::abs(b13.total - 16.21e12) / 16.21e12 < 0.005);
}

TEST_CASE("no visual tokens reduces to a text-only transformer") {
    const ModelDims d{12, 0, 64, 128, 6};
    const auto b = halfv::total_flops(halfv::profile_preset("vanilla"), d);
    CHECK(b.total == 6.0 * layer_cost(12, 12, 64, 128));
    ArchProfile p;
    p.l_ivr = 1;
    p.r_ivr = {0.5};
    p.l_ssr = 3;
    const auto staged = halfv::total_flops(p, d);
    CHECK(staged.v_prime == 0);
    CHECK(staged.f1 == layer_cost(12, 12, 64, 128));
    CHECK(staged.f2 == staged.f1);
    CHECK(staged.f3 == staged.f1);
}

TEST_CASE("staged budget for the LLaVA-1.5-7B profile") {
    const auto d = halfv::model_preset("llava-1.5-7b");
    const auto b = halfv::total_flops(halfv::profile_preset("llava-1.5-7b"), d);
    CHECK(b.l1 == 3);
    CHECK(b.l2 == 12);
    CHECK(b.l3 == 17);
    CHECK(b.v_prime == 288);
    CHECK(b.f3 == layer_cost(50, 338, 4096, 11008));
    const double expected = 3 * layer_cost(626, 626, 4096, 11008) +
                            12 * layer_cost(338, 338, 4096, 11008) +
                            17 * layer_cost(50, 338, 4096, 11008);
    CHECK(b.total == expected);
    const double s = halfv::speedup(halfv::vanilla_flops(d), b);
    CHECK(s >= 2.5);
}

TEST_CASE("staged budget for the Qwen profile") {
    const auto d = halfv::model_preset("qwen2.5-vl-7b");
    const auto b = halfv::total_flops(halfv::profile_preset("qwen2.5-vl-7b"), d);
    CHECK(b.v_prime == 588);
    CHECK(b.v_ssr == 118);
    CHECK(b.l1 == 2);
    CHECK(b.l2 == 19);
    CHECK(b.l3 == 7);
    CHECK(b.f3 == layer_cost(168, 168, 3584, 18944));
    CHECK(halfv::speedup(halfv::vanilla_flops(d), b) >= 3.5);
}

TEST_CASE("keep counts") {
    CHECK(halfv::ivr_keep_count(0.5, 576) == 288);
    CHECK(halfv::ivr_keep_count(0.5, 5) == 3);
    CHECK(halfv::ivr_keep_count(0.01, 5) == 1);
    CHECK(halfv::ivr_keep_count(0.5, 0) == 0);
    CHECK(halfv::ssr_keep_count(0.05, 20, 20) == 1);
    CHECK(halfv::ssr_keep_count(0.05, 2352, 588) == 118);
    CHECK(halfv::ssr_keep_count(0.9, 100, 10) == 10);
}

TEST_CASE("speedup") {
    const auto d = halfv::model_preset("llava-1.5-7b");
    const auto v = halfv::vanilla_flops(d);
    CHECK(halfv::speedup(v, v) == 1.0);
    auto half = v;
    half.total = v.total / 2.0;
    CHECK(halfv::speedup(v, half) == 2.0);
    const auto other = halfv::vanilla_flops(halfv::model_preset("llava-1.5-13b"));
    CHECK_THROWS_AS(halfv::speedup(v, other), halfv::Error);
}

TEST_CASE("profile bounds are checked against depth") {
    ArchProfile p;
    p.l_ivr = 4;
    p.l_ssr = 9;
    CHECK_THROWS_AS(halfv::total_flops(p, {10, 20, 8, 16, 8}), halfv::Error);
    CHECK_NOTHROW(halfv::total_flops(p, {10, 20, 8, 16, 10}));
    CHECK_THROWS_AS(halfv::model_preset("gpt"), halfv::Error);
}
