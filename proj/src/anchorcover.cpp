// Copyright (C) 2026 The HalfV Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "halfv/anchorcover.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "halfv/error.hpp"
#include "halfv/layer.hpp"

namespace halfv {

std::size_t round_half_up(double x) {
    if (!(x >= 0.0)) return 0;
    return static_cast<std::size_t>(std::floor(x + 0.5));
}

std::vector<double> relevance_scores(const RelevanceContext& ctx) {
    const std::size_t dk = ctx.visual_keys.cols();
    if (ctx.visual_keys.rows() == 0) fail(ErrorKind::Validation, "no visual keys to score");
    if (ctx.query.size() != dk) {
        fail(ErrorKind::Shape, "query length " + std::to_string(ctx.query.size()) +
                                   " does not match key width " + std::to_string(dk));
    }

    std::vector<double> scores(ctx.visual_keys.rows());
    if (ctx.positional_encoding == PositionalEncoding::Disabled) {
        for (std::size_t v = 0; v < scores.size(); ++v)
            scores[v] = dot(ctx.query, ctx.visual_keys.row(v)) * ctx.scale;
        return scores;
    }

    if (ctx.key_positions.size() != ctx.visual_keys.rows()) {
        fail(ErrorKind::Shape, "key_positions must match the number of visual keys");
    }
    const std::size_t head = ctx.head_dim == 0 ? dk : ctx.head_dim;
    if (dk % head != 0) fail(ErrorKind::Shape, "head_dim must divide the key width");
    std::vector<double> q = ctx.query;
    apply_rope(q, head, static_cast<double>(ctx.query_position), ctx.rope_base);
    std::vector<double> k(dk);
    for (std::size_t v = 0; v < scores.size(); ++v) {
        auto src = ctx.visual_keys.row(v);
        std::copy(src.begin(), src.end(), k.begin());
        apply_rope(k, head, static_cast<double>(ctx.key_positions[v]), ctx.rope_base);
        scores[v] = dot(q, k) * ctx.scale;
    }
    return scores;
}

std::vector<std::size_t> top_k_indices(std::span<const double> scores, std::size_t k) {
    if (k > scores.size()) {
        fail(ErrorKind::Validation, "cannot select " + std::to_string(k) + " of " +
                                        std::to_string(scores.size()) + " tokens");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

std::vector<std::size_t> select_anchors(std::span<const double> scores, std::size_t k_anchor) {
    return top_k_indices(scores, k_anchor);
}

std::vector<std::size_t> fps_expand(const DenseMatrix& states,
                                    std::span<const std::size_t> seed_set, std::size_t k_total) {
    const std::size_t v = states.rows();
    if (k_total > v) {
        fail(ErrorKind::Validation, "k_total " + std::to_string(k_total) + " exceeds " +
                                        std::to_string(v) + " tokens");
    }
    std::vector<char> selected(v, 0);
    std::size_t count = 0;
    for (std::size_t s : seed_set) {
        if (s >= v) fail(ErrorKind::Validation, "seed index out of range");
        if (!selected[s]) {
            selected[s] = 1;
            ++count;
        }
    }
    if (k_total < count) fail(ErrorKind::Validation, "k_total is smaller than the seed set");

    std::vector<std::size_t> added;
    if (k_total == count) return added;

    const DenseMatrix unit = l2_normalize_rows(states);
    auto dist = [&](std::size_t a, std::size_t b) {
        double s = 0.0;
        auto ra = unit.row(a);
        auto rb = unit.row(b);
        for (std::size_t j = 0; j < ra.size(); ++j) {
            const double d = ra[j] - rb[j];
            s += d * d;
        }
        return std::sqrt(s);
    };

    if (count == 0) {
        selected[0] = 1;
        ++count;
        added.push_back(0);
    }

    // min distance from every token to the current set
    std::vector<double> min_dist(v, std::numeric_limits<double>::infinity());
    for (std::size_t u = 0; u < v; ++u) {
        if (selected[u]) continue;
        for (std::size_t s = 0; s < v; ++s)
            if (selected[s]) min_dist[u] = std::min(min_dist[u], dist(u, s));
    }

    while (count < k_total) {
        std::size_t best = v;
        for (std::size_t u = 0; u < v; ++u) {
            if (selected[u]) continue;
            if (best == v || min_dist[u] > min_dist[best]) best = u;
        }
        selected[best] = 1;
        ++count;
        added.push_back(best);
        for (std::size_t u = 0; u < v; ++u)
            if (!selected[u]) min_dist[u] = std::min(min_dist[u], dist(u, best));
    }
    return added;
}

PrunePlan plan_prune(const DenseMatrix& visual_states, const RelevanceContext& ctx,
                     std::size_t budget_k, double r_anchor) {
    const std::size_t v = visual_states.rows();
    if (budget_k < 1 || budget_k > v) {
        fail(ErrorKind::Validation, "budget " + std::to_string(budget_k) + " outside [1, " +
                                        std::to_string(v) + "]");
    }
    if (ctx.visual_keys.rows() != v) {
        fail(ErrorKind::Shape, "relevance context and states disagree on the visual count");
    }
    if (!(r_anchor >= 0.0 && r_anchor <= 1.0)) {
        fail(ErrorKind::Validation, "r_anchor must lie in [0,1]");
    }

    PrunePlan plan;
    plan.budget_k = budget_k;
    plan.relevance_scores = relevance_scores(ctx);

    const std::size_t k_anchor =
        std::min(budget_k, round_half_up(r_anchor * static_cast<double>(budget_k)));
    plan.anchor_set = select_anchors(plan.relevance_scores, k_anchor);

    if (k_anchor > 0) {
        plan.cover_set = fps_expand(visual_states, plan.anchor_set, budget_k);
    } else {
        const std::size_t top = top_k_indices(plan.relevance_scores, 1).front();
        const std::size_t seed[] = {top};
        plan.cover_set = fps_expand(visual_states, seed, budget_k);
        plan.cover_set.push_back(top);
    }
    std::sort(plan.cover_set.begin(), plan.cover_set.end());

    std::merge(plan.anchor_set.begin(), plan.anchor_set.end(), plan.cover_set.begin(),
               plan.cover_set.end(), std::back_inserter(plan.selected));
    return plan;
}

RelevanceContext relevance_context_from_trace(const LayerTrace& trace, std::size_t layer) {
    trace.validate();
    if (layer >= trace.num_layers()) fail(ErrorKind::Validation, "layer out of range");
    const std::size_t nv = trace.num_visual();
    if (nv == 0) fail(ErrorKind::Validation, "trace has no visual tokens");
    const DenseMatrix& h = trace.states[layer];

    RelevanceContext ctx;
    auto last = h.row(h.rows() - 1);
    ctx.query.assign(last.begin(), last.end());
    std::vector<std::size_t> idx(nv);
    std::iota(idx.begin(), idx.end(), 0);
    ctx.visual_keys = h.select_rows(idx);
    ctx.scale = 1.0 / std::sqrt(static_cast<double>(h.cols()));
    ctx.positional_encoding = PositionalEncoding::Disabled;
    return ctx;
}

}  // namespace halfv
