// Copyright (C) 2026 The HalfV Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "halfv/anchorcover.hpp"
#include "halfv/layer.hpp"
#include "halfv/ssr.hpp"
#include "halfv/trace_io.hpp"

namespace halfv {

/// Deterministic miniature multimodal decoder. Weight matrices are filled
/// row-major, layer by layer in the order wq, wk, wv, wo, w_gate, w_up,
/// w_down, then the output head, each entry uniform in [-1/sqrt(h), 1/sqrt(h))
/// from one SplitMix64 stream seeded with cfg.seed. Norm gains are 1.
class ToyDecoder {
public:
    explicit ToyDecoder(DecoderConfig cfg);

    const DecoderConfig& config() const noexcept { return m_cfg; }
    const LayerWeights& layer(std::size_t l) const { return m_layers.at(l); }
    std::size_t num_layers() const noexcept { return m_layers.size(); }
    const std::vector<double>& final_norm() const noexcept { return m_final_norm; }
    const DenseMatrix& lm_head() const noexcept { return m_lm_head; }  // h x vocab

    bool operator==(const ToyDecoder&) const = default;

private:
    DecoderConfig m_cfg;
    std::vector<LayerWeights> m_layers;
    std::vector<double> m_final_norm;
    DenseMatrix m_lm_head;
};

ToyDecoder build_decoder(const DecoderConfig& cfg);

struct ForwardResult {
    DenseMatrix final_hidden;  // rows of the surviving tokens
    std::vector<double> next_token_logits;
    std::vector<double> next_token_distribution;
    std::uint64_t flops_counted = 0;  // block work only; see FlopTally

    bool operator==(const ForwardResult&) const = default;
};

/// Everything a forward can optionally report besides the result.
struct ForwardCapture {
    /// states[0] = input, states[l+1] = output of layer l, scattered back to
    /// the original token slots with zero rows for removed tokens.
    std::vector<DenseMatrix> states;
    FlopTally tally;
    std::vector<std::uint64_t> per_layer_flops;
    std::vector<std::size_t> tokens_per_layer;

    LayerTrace to_trace(const std::vector<Modality>& modality) const;
};

/// Mutable prefill state while stepping layer by layer.
struct DecoderState {
    DenseMatrix hidden;                     // current rows
    std::vector<Modality> modality;         // current rows
    std::vector<std::size_t> position_ids;  // original sequence positions
    std::size_t original_tokens = 0;
    std::size_t next_layer = 0;
    bool visual_frozen = false;
    FlopTally tally;

    std::size_t num_visual() const noexcept;
    /// Original indices of the current visual rows.
    std::vector<std::size_t> visual_ids() const;
};

DecoderState begin_forward(const ToyDecoder& decoder, const DenseMatrix& embeddings,
                           const std::vector<Modality>& modality);

/// Starts mid-network from given rows; positions are the original ids.
DecoderState begin_forward_at(const ToyDecoder& decoder, std::size_t start_layer,
                              const DenseMatrix& hidden, const std::vector<Modality>& modality,
                              std::vector<std::size_t> position_ids, std::size_t original_tokens);

/// Keeps only the listed original visual indices (must currently be present).
void retain_visual(DecoderState& state, std::span<const std::size_t> keep);

struct StepOptions {
    FrozenKvCache* cache = nullptr;
    ForwardCapture* capture = nullptr;
};

void step_layer(const ToyDecoder& decoder, DecoderState& state, const LayerUpdatePolicy& policy,
                const StepOptions& options = {});

ForwardResult finish_forward(const ToyDecoder& decoder, DecoderState& state,
                             ForwardCapture* capture = nullptr);

/// Full prefill. An empty schedule means vanilla at every layer.
ForwardResult forward(const ToyDecoder& decoder, const DenseMatrix& embeddings,
                      const std::vector<Modality>& modality,
                      std::span<const LayerUpdatePolicy> schedule = {},
                      const StepOptions& options = {});

/// Last-text-token query and visual keys as decoder layer `layer` would see
/// them for the state's current rows.
RelevanceContext relevance_context(const ToyDecoder& decoder, const DecoderState& state,
                                   std::size_t layer, PositionalEncoding pe);

/// Cost of building a relevance context and scoring it: one query and v key
/// projections of width h, plus v dot products.
std::uint64_t relevance_flops(std::uint64_t h, std::uint64_t v);

struct FlopsAudit {
    std::uint64_t counted = 0;
    std::uint64_t analytic = 0;
};

/// Runs a forward under `schedule` and compares the instrumented count with
/// the closed-form per-layer cost derived from the token counts the schedule
/// implies.
FlopsAudit flops_counter_audit(const ToyDecoder& decoder, const DenseMatrix& embeddings,
                               const std::vector<Modality>& modality,
                               std::span<const LayerUpdatePolicy> schedule = {});

/// Seeded synthetic prefill input (uniform entries in [-1, 1)).
DenseMatrix synth_embeddings(std::size_t num_visual, std::size_t num_text, std::size_t dim,
                             std::uint64_t seed);
std::vector<Modality> prefill_modality(std::size_t num_visual, std::size_t num_text);

}  // namespace halfv
