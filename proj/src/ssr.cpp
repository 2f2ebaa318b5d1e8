// Copyright (C) 2026 The HalfV Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "halfv/ssr.hpp"

#include <algorithm>
#include <numeric>

#include "halfv/decoder.hpp"
#include "halfv/error.hpp"
#include "halfv/flops.hpp"

namespace halfv {

const KeyValue& FrozenKvCache::get(std::size_t layer, const DenseMatrix& visual_rows,
                                   std::span<const std::size_t> positions, const LayerWeights& w,
                                   const DecoderConfig& cfg, FlopTally& tally) {
    auto it = m_entries.find(layer);
    if (it != m_entries.end() && it->second.visual_rows == visual_rows &&
        std::equal(positions.begin(), positions.end(), it->second.positions.begin(),
                   it->second.positions.end())) {
        ++m_hits;
        return it->second.kv;
    }
    ++m_misses;
    Entry e{visual_rows, {positions.begin(), positions.end()},
            project_kv(visual_rows, positions, w, cfg, tally.frozen_kv)};
    auto [pos, inserted] = m_entries.insert_or_assign(layer, std::move(e));
    return pos->second.kv;
}

DenseMatrix freeze_layer_forward(const DenseMatrix& hidden, std::span<const std::size_t> positions,
                                 std::size_t num_visual, const LayerWeights& w,
                                 const DecoderConfig& cfg, FlopTally& tally, FrozenKvCache* cache,
                                 std::size_t layer, const BlockOptions& options) {
    if (num_visual >= hidden.rows()) {
        fail(ErrorKind::Shape, "freezing needs at least one text row after the visual prefix");
    }
    if (positions.size() != hidden.rows()) fail(ErrorKind::Shape, "one position id per row required");
    const KeyValue* kv = nullptr;
    if (cache && num_visual > 0) {
        std::vector<std::size_t> idx(num_visual);
        std::iota(idx.begin(), idx.end(), 0);
        kv = &cache->get(layer, hidden.select_rows(idx), positions.subspan(0, num_visual), w, cfg,
                         tally);
    }
    return block_forward(hidden, positions, num_visual, num_visual, w, cfg, options, tally, kv);
}

std::vector<std::size_t> select_sparse_count(const RelevanceContext& ctx, std::size_t k) {
    RelevanceContext with_pe = ctx;
    with_pe.positional_encoding = PositionalEncoding::Enabled;
    return top_k_indices(relevance_scores(with_pe), k);
}

std::vector<std::size_t> select_sparse_set(const RelevanceContext& ctx, double r_ssr) {
    if (!(r_ssr > 0.0 && r_ssr <= 1.0)) fail(ErrorKind::Validation, "r_ssr must lie in (0,1]");
    const std::size_t v = ctx.visual_keys.rows();
    if (v == 0) fail(ErrorKind::Validation, "no visual tokens to sparsify");
    const std::size_t k =
        std::clamp<std::size_t>(round_half_up(r_ssr * static_cast<double>(v)), 1, v);
    return select_sparse_count(ctx, k);
}

std::vector<std::size_t> apply_ssr(const ToyDecoder& decoder, DecoderState& state,
                                   const ArchProfile& profile, std::size_t original_visual) {
    if (!profile.l_ssr) fail(ErrorKind::Config, "profile has no saturation stage");
    if (state.next_layer < *profile.l_ssr) {
        fail(ErrorKind::Config, "saturation handling requested before l_ssr");
    }
    if (profile.ssr_mode == SsrMode::LayerInactivity) {
        state.visual_frozen = true;
        return state.visual_ids();
    }

    const auto retention = profile.sparse_retention();
    if (!retention) fail(ErrorKind::Config, "TokenSparsity needs r_ssr or a two-value r_ivr");
    if (state.next_layer >= decoder.num_layers()) {
        fail(ErrorKind::Config, "no layer left to sparsify");
    }
    const std::size_t present = state.num_visual();
    if (present == 0) fail(ErrorKind::Validation, "no visual tokens to sparsify");

    const RelevanceContext ctx =
        relevance_context(decoder, state, state.next_layer, PositionalEncoding::Enabled);
    state.tally.selection += relevance_flops(ctx.query.size(), ctx.visual_keys.rows());
    const std::size_t k = ssr_keep_count(*retention, original_visual, present);
    const auto local = select_sparse_count(ctx, k);

    const auto ids = state.visual_ids();
    std::vector<std::size_t> keep;
    keep.reserve(local.size());
    for (std::size_t i : local) keep.push_back(ids[i]);
    retain_visual(state, keep);
    return keep;
}

}  // namespace halfv
