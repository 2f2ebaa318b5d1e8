// Copyright (C) 2026 The HalfV Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "halfv/linalg.hpp"

namespace halfv {

struct DecoderConfig {
    std::size_t num_layers = 4;
    std::size_t hidden_dim = 32;
    std::size_t num_heads = 4;
    std::size_t ffn_dim = 64;
    std::size_t vocab = 64;
    double rope_base = 10000.0;
    std::uint64_t seed = 0;

    std::size_t head_dim() const noexcept { return hidden_dim / num_heads; }
    void validate() const;
    bool operator==(const DecoderConfig&) const = default;
};

/// One pre-norm decoder block. Projections act on row vectors: y = x * W.
struct LayerWeights {
    std::vector<double> attn_norm;  // RMS gains, h
    DenseMatrix wq, wk, wv, wo;     // h x h
    std::vector<double> ffn_norm;   // RMS gains, h
    DenseMatrix w_gate, w_up;       // h x m
    DenseMatrix w_down;             // m x h

    bool operator==(const LayerWeights&) const = default;
};

/// Multiply-accumulate x2 tallies. `layer` covers exactly the block work the
/// staged cost model charges; the other buckets are tracked separately.
struct FlopTally {
    std::uint64_t layer = 0;
    std::uint64_t frozen_kv = 0;  // K/V projections of frozen visual rows
    std::uint64_t selection = 0;  // relevance scoring for token selection
    std::uint64_t lm_head = 0;

    bool operator==(const FlopTally&) const = default;
};

inline constexpr double kRmsEps = 1e-6;

/// Row-wise RMS normalization with per-channel gains.
DenseMatrix rms_norm(const DenseMatrix& x, std::span<const double> gain);

/// Rotary embedding applied in place to one row split into heads of
/// `head_dim`; rotates pairs (2i, 2i+1) for the first even number of dims.
void apply_rope(std::span<double> row, std::size_t head_dim, double position, double base);

/// x * w with the FLOP count added to `counter`.
DenseMatrix counted_matmul(const DenseMatrix& x, const DenseMatrix& w, std::uint64_t& counter);

/// Keys and values for a block of rows (post-RoPE keys).
struct KeyValue {
    DenseMatrix keys;
    DenseMatrix values;
};

struct BlockOptions {
    bool mask_text_to_visual = false;
};

/// Runs one decoder block updating rows [first_active, n). Rows before
/// first_active keep their input values bit-for-bit but still provide keys and
/// values: either `inactive_kv` (precomputed for exactly those rows) or, when
/// null, recomputed here and charged to tally.frozen_kv.
DenseMatrix block_forward(const DenseMatrix& hidden, std::span<const std::size_t> positions,
                          std::size_t num_visual, std::size_t first_active,
                          const LayerWeights& w, const DecoderConfig& cfg,
                          const BlockOptions& options, FlopTally& tally,
                          const KeyValue* inactive_kv = nullptr);

/// K/V (post-RoPE) of `rows` as the block would compute them.
KeyValue project_kv(const DenseMatrix& rows, std::span<const std::size_t> positions,
                    const LayerWeights& w, const DecoderConfig& cfg, std::uint64_t& counter);

/// Full update of every row.
DenseMatrix vanilla_layer_forward(const DenseMatrix& hidden, std::span<const std::size_t> positions,
                                  std::size_t num_visual, const LayerWeights& w,
                                  const DecoderConfig& cfg, FlopTally& tally,
                                  const BlockOptions& options = {});

}  // namespace halfv
