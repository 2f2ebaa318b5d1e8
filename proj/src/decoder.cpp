// Copyright (C) 2026 The HalfV Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "halfv/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "halfv/error.hpp"
#include "halfv/flops.hpp"
#include "halfv/rng.hpp"

namespace halfv {

namespace {

DenseMatrix random_matrix(std::size_t rows, std::size_t cols, double bound, SplitMix64& rng) {
    std::vector<double> data(rows * cols);
    for (double& x : data) x = rng.uniform(-bound, bound);
    return DenseMatrix(rows, cols, std::move(data));
}

}  // namespace

ToyDecoder::ToyDecoder(DecoderConfig cfg) : m_cfg(cfg) {
    m_cfg.validate();
    const std::size_t h = m_cfg.hidden_dim;
    const std::size_t m = m_cfg.ffn_dim;
    const double bound = 1.0 / std::sqrt(static_cast<double>(h));
    SplitMix64 rng(m_cfg.seed);
    m_layers.reserve(m_cfg.num_layers);
    for (std::size_t l = 0; l < m_cfg.num_layers; ++l) {
        LayerWeights w;
        w.attn_norm.assign(h, 1.0);
        w.ffn_norm.assign(h, 1.0);
        w.wq = random_matrix(h, h, bound, rng);
        w.wk = random_matrix(h, h, bound, rng);
        w.wv = random_matrix(h, h, bound, rng);
        w.wo = random_matrix(h, h, bound, rng);
        w.w_gate = random_matrix(h, m, bound, rng);
        w.w_up = random_matrix(h, m, bound, rng);
        w.w_down = random_matrix(m, h, bound, rng);
        m_layers.push_back(std::move(w));
    }
    m_final_norm.assign(h, 1.0);
    m_lm_head = random_matrix(h, m_cfg.vocab, bound, rng);
}

ToyDecoder build_decoder(const DecoderConfig& cfg) { return ToyDecoder(cfg); }

// ---------------------------------------------------------------------------

LayerTrace ForwardCapture::to_trace(const std::vector<Modality>& modality) const {
    LayerTrace t;
    t.modality = modality;
    t.states = states;
    t.validate();
    return t;
}

std::size_t DecoderState::num_visual() const noexcept {
    return static_cast<std::size_t>(std::count(modality.begin(), modality.end(), Modality::Visual));
}

std::vector<std::size_t> DecoderState::visual_ids() const {
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < modality.size(); ++i)
        if (modality[i] == Modality::Visual) ids.push_back(position_ids[i]);
    return ids;
}

DecoderState begin_forward_at(const ToyDecoder& decoder, std::size_t start_layer,
                              const DenseMatrix& hidden, const std::vector<Modality>& modality,
                              std::vector<std::size_t> position_ids, std::size_t original_tokens) {
    if (hidden.cols() != decoder.config().hidden_dim) {
        fail(ErrorKind::Shape, "embedding width does not match hidden_dim");
    }
    if (hidden.rows() != modality.size() || position_ids.size() != modality.size()) {
        fail(ErrorKind::Shape, "one modality label and position id per row required");
    }
    if (start_layer > decoder.num_layers()) fail(ErrorKind::Validation, "start layer out of range");
    check_prefill_layout(modality);
    for (std::size_t i = 0; i < position_ids.size(); ++i) {
        if (position_ids[i] >= original_tokens || (i > 0 && position_ids[i] <= position_ids[i - 1])) {
            fail(ErrorKind::Validation, "position ids must be increasing and within the sequence");
        }
    }
    DecoderState s;
    s.hidden = hidden;
    s.modality = modality;
    s.position_ids = std::move(position_ids);
    s.original_tokens = original_tokens;
    s.next_layer = start_layer;
    return s;
}

DecoderState begin_forward(const ToyDecoder& decoder, const DenseMatrix& embeddings,
                           const std::vector<Modality>& modality) {
    std::vector<std::size_t> pos(modality.size());
    std::iota(pos.begin(), pos.end(), 0);
    return begin_forward_at(decoder, 0, embeddings, modality, std::move(pos), modality.size());
}

void retain_visual(DecoderState& state, std::span<const std::size_t> keep) {
    std::vector<std::size_t> sorted(keep.begin(), keep.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        fail(ErrorKind::Validation, "duplicate visual index in keep set");
    }
    if (sorted.empty() && state.num_visual() > 0) {
        fail(ErrorKind::Validation, "keep set must not be empty");
    }
    std::vector<std::size_t> rows;
    std::size_t matched = 0;
    for (std::size_t i = 0; i < state.modality.size(); ++i) {
        if (state.modality[i] == Modality::Text) {
            rows.push_back(i);
        } else if (std::binary_search(sorted.begin(), sorted.end(), state.position_ids[i])) {
            rows.push_back(i);
            ++matched;
        }
    }
    if (matched != sorted.size()) {
        fail(ErrorKind::Validation, "keep set names a visual token that is not present");
    }
    if (rows.size() == state.modality.size()) return;

    state.hidden = state.hidden.select_rows(rows);
    std::vector<Modality> mod;
    std::vector<std::size_t> pos;
    for (std::size_t r : rows) {
        mod.push_back(state.modality[r]);
        pos.push_back(state.position_ids[r]);
    }
    state.modality = std::move(mod);
    state.position_ids = std::move(pos);
}

namespace {

DenseMatrix scatter(const DecoderState& state, std::size_t dim) {
    DenseMatrix full(state.original_tokens, dim);
    for (std::size_t i = 0; i < state.position_ids.size(); ++i) {
        std::copy_n(state.hidden.row(i).begin(), dim, full.row(state.position_ids[i]).begin());
    }
    return full;
}

}  // namespace

void step_layer(const ToyDecoder& decoder, DecoderState& state, const LayerUpdatePolicy& policy,
                const StepOptions& options) {
    const std::size_t l = state.next_layer;
    if (l >= decoder.num_layers()) fail(ErrorKind::Validation, "no layer left to run");
    const auto& cfg = decoder.config();
    const auto& w = decoder.layer(l);

    if (options.capture && options.capture->states.empty()) {
        options.capture->states.push_back(scatter(state, cfg.hidden_dim));
    }

    if (policy.mode == UpdateMode::SparseVisual) {
        if (policy.active_visual.empty()) {
            fail(ErrorKind::Validation, "SparseVisual needs a non-empty active set");
        }
        retain_visual(state, policy.active_visual);
    }

    const std::uint64_t before = state.tally.layer;
    const std::size_t nv = state.num_visual();
    const BlockOptions block{policy.mask_text_to_visual};
    if (policy.mode == UpdateMode::FreezeVisual || state.visual_frozen) {
        state.hidden = freeze_layer_forward(state.hidden, state.position_ids, nv, w, cfg,
                                            state.tally, options.cache, l, block);
    } else {
        state.hidden =
            vanilla_layer_forward(state.hidden, state.position_ids, nv, w, cfg, state.tally, block);
    }
    state.next_layer = l + 1;

    if (options.capture) {
        options.capture->states.push_back(scatter(state, cfg.hidden_dim));
        options.capture->per_layer_flops.push_back(state.tally.layer - before);
        options.capture->tokens_per_layer.push_back(state.hidden.rows());
    }
}

ForwardResult finish_forward(const ToyDecoder& decoder, DecoderState& state,
                             ForwardCapture* capture) {
    const auto& cfg = decoder.config();
    ForwardResult r;
    r.final_hidden = state.hidden;
    const std::size_t last = state.hidden.rows() - 1;
    const std::size_t idx[] = {last};
    const DenseMatrix x = rms_norm(state.hidden.select_rows(idx), decoder.final_norm());
    const DenseMatrix logits = counted_matmul(x, decoder.lm_head(), state.tally.lm_head);
    r.next_token_logits.assign(logits.row(0).begin(), logits.row(0).end());
    const DenseMatrix p = softmax_rows(logits);
    r.next_token_distribution.assign(p.row(0).begin(), p.row(0).end());
    r.flops_counted = state.tally.layer;
    if (capture) {
        if (capture->states.empty()) capture->states.push_back(scatter(state, cfg.hidden_dim));
        capture->tally = state.tally;
    }
    return r;
}

ForwardResult forward(const ToyDecoder& decoder, const DenseMatrix& embeddings,
                      const std::vector<Modality>& modality,
                      std::span<const LayerUpdatePolicy> schedule, const StepOptions& options) {
    if (!schedule.empty() && schedule.size() != decoder.num_layers()) {
        fail(ErrorKind::Validation, "policy schedule length " + std::to_string(schedule.size()) +
                                        " does not match " +
                                        std::to_string(decoder.num_layers()) + " layers");
    }
    DecoderState state = begin_forward(decoder, embeddings, modality);
    for (std::size_t l = 0; l < decoder.num_layers(); ++l) {
        step_layer(decoder, state, schedule.empty() ? LayerUpdatePolicy{} : schedule[l], options);
    }
    return finish_forward(decoder, state, options.capture);
}

RelevanceContext relevance_context(const ToyDecoder& decoder, const DecoderState& state,
                                   std::size_t layer, PositionalEncoding pe) {
    if (layer >= decoder.num_layers()) fail(ErrorKind::Validation, "layer out of range");
    const auto& cfg = decoder.config();
    const auto& w = decoder.layer(layer);
    const std::size_t nv = state.num_visual();
    if (nv == 0) fail(ErrorKind::Validation, "no visual tokens to score");

    const DenseMatrix x = rms_norm(state.hidden, w.attn_norm);
    const std::size_t last = state.hidden.rows() - 1;
    const std::size_t qi[] = {last};
    std::vector<std::size_t> vis(nv);
    std::iota(vis.begin(), vis.end(), 0);

    RelevanceContext ctx;
    const DenseMatrix q = matmul(x.select_rows(qi), w.wq);
    ctx.query.assign(q.row(0).begin(), q.row(0).end());
    ctx.visual_keys = matmul(x.select_rows(vis), w.wk);
    ctx.scale = 1.0 / std::sqrt(static_cast<double>(cfg.head_dim()));
    ctx.positional_encoding = pe;
    ctx.query_position = state.position_ids[last];
    ctx.key_positions.assign(state.position_ids.begin(), state.position_ids.begin() + nv);
    ctx.head_dim = cfg.head_dim();
    ctx.rope_base = cfg.rope_base;
    return ctx;
}

std::uint64_t relevance_flops(std::uint64_t h, std::uint64_t v) {
    return 2 * h * h * (1 + v) + 2 * h * v;
}

FlopsAudit flops_counter_audit(const ToyDecoder& decoder, const DenseMatrix& embeddings,
                               const std::vector<Modality>& modality,
                               std::span<const LayerUpdatePolicy> schedule) {
    const auto& cfg = decoder.config();
    FlopsAudit audit;
    audit.counted = forward(decoder, embeddings, modality, schedule).flops_counted;

    // Closed form from token bookkeeping alone.
    std::size_t text = 0;
    for (auto m : modality) text += m == Modality::Text ? 1 : 0;
    std::size_t visual = modality.size() - text;
    for (std::size_t l = 0; l < decoder.num_layers(); ++l) {
        const LayerUpdatePolicy p = schedule.empty() ? LayerUpdatePolicy{} : schedule[l];
        if (p.mode == UpdateMode::SparseVisual) visual = std::min(visual, p.active_visual.size());
        const std::size_t n = text + visual;
        const std::size_t active = p.mode == UpdateMode::FreezeVisual ? text : n;
        audit.analytic += stage_flops_exact(active, n, cfg.hidden_dim, cfg.ffn_dim);
    }
    return audit;
}

DenseMatrix synth_embeddings(std::size_t num_visual, std::size_t num_text, std::size_t dim,
                             std::uint64_t seed) {
    SplitMix64 rng(seed);
    return random_matrix(num_visual + num_text, dim, 1.0, rng);
}

std::vector<Modality> prefill_modality(std::size_t num_visual, std::size_t num_text) {
    std::vector<Modality> m(num_visual, Modality::Visual);
    m.insert(m.end(), num_text, Modality::Text);
    return m;
}

}  // namespace halfv
