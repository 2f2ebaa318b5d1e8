// Copyright (C) 2026 The HalfV Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "halfv/linalg.hpp"
#include "halfv/trace_io.hpp"

namespace halfv {

enum class PositionalEncoding { Disabled, Enabled };

/// Last-text-token query against the visual keys of one layer.
struct RelevanceContext {
    std::vector<double> query;  // d_k
    DenseMatrix visual_keys;    // V x d_k
    double scale = 1.0;         // usually 1/sqrt(head dim)
    PositionalEncoding positional_encoding = PositionalEncoding::Disabled;

    // Only read when positional_encoding == Enabled.
    std::size_t query_position = 0;
    std::vector<std::size_t> key_positions;
    std::size_t head_dim = 0;  // 0 means one head spanning d_k
    double rope_base = 10000.0;
};

struct PrunePlan {
    std::vector<std::size_t> anchor_set;  // sorted
    std::vector<std::size_t> cover_set;   // sorted
    std::vector<std::size_t> selected;    // sorted union
    std::size_t budget_k = 0;
    std::vector<double> relevance_scores;
};

/// Raw scaled logits (q . k_v) * scale, one per visual token.
std::vector<double> relevance_scores(const RelevanceContext& ctx);

/// Indices of the k largest scores, ties to the lower index, sorted ascending.
std::vector<std::size_t> top_k_indices(std::span<const double> scores, std::size_t k);

std::vector<std::size_t> select_anchors(std::span<const double> scores, std::size_t k_anchor);

/// Farthest point sampling on l2-normalized rows, growing `seed_set` to
/// k_total members. Returns only the added indices, in selection order.
/// An empty seed starts from token 0, which is then part of the result.
std::vector<std::size_t> fps_expand(const DenseMatrix& states,
                                    std::span<const std::size_t> seed_set, std::size_t k_total);

/// k_anchor = round(r_anchor * budget_k); anchors by relevance, the rest by
/// FPS seeded with the anchors (or with the top-relevance token when there
/// are no anchors).
PrunePlan plan_prune(const DenseMatrix& visual_states, const RelevanceContext& ctx,
                     std::size_t budget_k, double r_anchor);

/// Scores straight from a stored trace: the last text token's hidden state is
/// the query and the visual hidden states are the keys (no projections).
RelevanceContext relevance_context_from_trace(const LayerTrace& trace, std::size_t layer);

/// Round half up, the convention for every fractional token count.
std::size_t round_half_up(double x);

}  // namespace halfv
