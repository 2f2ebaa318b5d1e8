// Copyright (C) 2026 The HalfV Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <numeric>

#include "halfv/decoder.hpp"
#include "halfv/error.hpp"
#include "halfv/flops.hpp"
#include "halfv/pipeline.hpp"
#include "halfv/ssr.hpp"
#include "support/oracles.hpp"

using halfv::DenseMatrix;
using halfv::LayerUpdatePolicy;

namespace {

std::vector<std::size_t> iota_ids(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), 0);
    return v;
}

double rows_diff(const DenseMatrix& a, const DenseMatrix& b, std::size_t first, std::size_t last) {
    double m = 0.0;
    for (std::size_t r = first; r < last; ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) m = std::max(m, std::abs(a(r, c) - b(r, c)));
    return m;
}

}  // namespace

TEST_CASE("freeze keeps visual rows and matches vanilla text rows") {
    halfv::SplitMix64 rng(30);
    for (int t = 0; t < 10; ++t) {
        const halfv::DecoderConfig cfg{1, 16, 4, 24, 8, 1e4, 100 + std::uint64_t(t)};
        const auto dec = halfv::build_decoder(cfg);
        const std::size_t nv = 3 + rng.below(6), nt = 1 + rng.below(4);
        const auto x = oracle::random_matrix(nv + nt, 16, rng);
        const auto pos = iota_ids(nv + nt);
        halfv::FlopTally ta, tb;
        const auto frozen = halfv::freeze_layer_forward(x, pos, nv, dec.layer(0), cfg, ta);
        const auto vanilla = halfv::vanilla_layer_forward(x, pos, nv, dec.layer(0), cfg, tb);
        CHECK(rows_diff(frozen, x, 0, nv) == 0.0);
        CHECK(rows_diff(frozen, vanilla, nv, nv + nt) <= 1e-9);
        CHECK(ta.frozen_kv == 4ull * nv * 16 * 16);
        CHECK(ta.layer == halfv::stage_flops_exact(nt, nv + nt, 16, 24));
    }
}

TEST_CASE("frozen kv cache") {
    const halfv::DecoderConfig cfg{2, 8, 2, 16, 8, 1e4, 5};
    const auto dec = halfv::build_decoder(cfg);
    halfv::SplitMix64 rng(31);
    const auto x = oracle::random_matrix(6, 8, rng);
    const auto pos = iota_ids(6);
    halfv::FrozenKvCache cache;
    halfv::FlopTally t1, t2, t3;
    const auto a = halfv::freeze_layer_forward(x, pos, 4, dec.layer(1), cfg, t1, &cache, 1);
    const auto b = halfv::freeze_layer_forward(x, pos, 4, dec.layer(1), cfg, t2, &cache, 1);
    const auto c = halfv::freeze_layer_forward(x, pos, 4, dec.layer(1), cfg, t3);
    CHECK(cache.misses() == 1);
    CHECK(cache.hits() == 1);
    CHECK(a == b);
    CHECK(a == c);
    CHECK(t2.frozen_kv == 0);
    CHECK(t1.frozen_kv == t3.frozen_kv);

    auto moved = x;
    moved(0, 0) += 1.0;
    halfv::FlopTally t4;
    halfv::freeze_layer_forward(moved, pos, 4, dec.layer(1), cfg, t4, &cache, 1);
    CHECK(cache.misses() == 2);
    cache.clear();
    halfv::freeze_layer_forward(x, pos, 4, dec.layer(1), cfg, t4, &cache, 1);
    CHECK(cache.misses() == 3);
}

TEST_CASE("freeze needs a text row") {
    const halfv::DecoderConfig cfg{1, 8, 2, 16, 8, 1e4, 5};
    const auto dec = halfv::build_decoder(cfg);
    halfv::FlopTally t;
    CHECK_THROWS_AS(halfv::freeze_layer_forward(DenseMatrix(3, 8), iota_ids(3), 3, dec.layer(0), cfg, t),
                    halfv::Error);
}

TEST_CASE("sparse selection") {
    halfv::SplitMix64 rng(32);
    halfv::RelevanceContext ctx;
    ctx.visual_keys = oracle::random_matrix(20, 8, rng);
    for (int i = 0; i < 8; ++i) ctx.query.push_back(rng.uniform(-1, 1));
    ctx.scale = 0.5;
    ctx.head_dim = 4;
    ctx.query_position = 25;
    ctx.key_positions = iota_ids(20);

    CHECK(halfv::select_sparse_set(ctx, 1.0) == iota_ids(20));

    auto pe = ctx;
    pe.positional_encoding = halfv::PositionalEncoding::Enabled;
    const auto scores = halfv::relevance_scores(pe);
    const auto one = halfv::select_sparse_set(ctx, 0.05);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == std::size_t(std::max_element(scores.begin(), scores.end()) - scores.begin()));
    CHECK(halfv::select_sparse_set(ctx, 0.25) == oracle::sort_top_k(scores, 5));
    CHECK_THROWS_AS(halfv::select_sparse_set(ctx, 0.0), halfv::Error);
}

TEST_CASE("layer inactivity freezes every later layer") {
    const halfv::DecoderConfig cfg{6, 16, 2, 32, 16, 1e4, 9};
    const auto dec = halfv::build_decoder(cfg);
    const auto emb = halfv::synth_embeddings(8, 3, 16, 2);
    const auto mod = halfv::prefill_modality(8, 3);
    halfv::ArchProfile prof;
    prof.l_ssr = 3;
    const auto run = halfv::run_halfv(dec, emb, mod, prof);
    const auto& states = run.capture.states;
    REQUIRE(states.size() == 7);
    for (std::size_t l = 4; l < 7; ++l) CHECK(rows_diff(states[l], states[3], 0, 8) == 0.0);
    CHECK(rows_diff(states[3], states[2], 0, 8) > 0.0);
}

TEST_CASE("token sparsity with full retention is vanilla") {
    const halfv::DecoderConfig cfg{5, 16, 2, 32, 16, 1e4, 10};
    const auto dec = halfv::build_decoder(cfg);
    const auto emb = halfv::synth_embeddings(8, 3, 16, 3);
    const auto mod = halfv::prefill_modality(8, 3);
    halfv::ArchProfile prof;
    prof.ssr_mode = halfv::SsrMode::TokenSparsity;
    prof.l_ssr = 2;
    prof.r_ssr = 1.0;
    const auto run = halfv::run_halfv(dec, emb, mod, prof);
    const auto vanilla = halfv::forward(dec, emb, mod);
    CHECK(run.result.next_token_logits == vanilla.next_token_logits);
    CHECK(run.v_ssr == 8);
}

TEST_CASE("token sparsity equals a forward on the truncated sequence") {
    const halfv::DecoderConfig cfg{5, 16, 2, 32, 16, 1e4, 11};
    const auto dec = halfv::build_decoder(cfg);
    const auto emb = halfv::synth_embeddings(12, 3, 16, 4);
    const auto mod = halfv::prefill_modality(12, 3);
    halfv::ArchProfile prof;
    prof.ssr_mode = halfv::SsrMode::TokenSparsity;
    prof.l_ssr = 2;
    prof.r_ssr = 0.25;
    const auto run = halfv::run_halfv(dec, emb, mod, prof);
    REQUIRE(run.ssr_kept.size() == 3);

    // vanilla up to layer 2, then the kept rows only, with their positions
    const auto full = oracle::reference_forward(dec, emb, iota_ids(15), 12);
    std::vector<std::size_t> rows = run.ssr_kept;
    for (std::size_t i = 12; i < 15; ++i) rows.push_back(i);
    std::vector<std::vector<double>> cur;
    for (std::size_t r = 0; r < rows.size(); ++r) cur.push_back(full.states[2][rows[r]]);
    for (std::size_t l = 2; l < 5; ++l)
        cur = oracle::reference_layer(cur, rows, std::vector<bool>(rows.size(), false), dec.layer(l), cfg);
    const auto logits = oracle::vec_mat(oracle::rms(cur.back(), dec.final_norm()), dec.lm_head());
    CHECK(oracle::max_abs(logits, run.result.next_token_logits) <= 1e-9);

    // the kept set is the rotary top-k at layer 2
    auto state = halfv::begin_forward(dec, emb, mod);
    halfv::step_layer(dec, state, {});
    halfv::step_layer(dec, state, {});
    const auto ctx = halfv::relevance_context(dec, state, 2, halfv::PositionalEncoding::Enabled);
    CHECK(run.ssr_kept == oracle::sort_top_k(halfv::relevance_scores(ctx), 3));
}
