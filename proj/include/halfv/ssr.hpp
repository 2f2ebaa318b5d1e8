// Copyright (C) 2026 The HalfV Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "halfv/anchorcover.hpp"
#include "halfv/layer.hpp"
#include "halfv/trace_io.hpp"

namespace halfv {

enum class UpdateMode {
    Vanilla,
    FreezeVisual,  // visual rows keep their input; text attends over all rows
    SparseVisual,  // drop visual tokens outside active_visual, then a full update
};

struct LayerUpdatePolicy {
    UpdateMode mode = UpdateMode::Vanilla;
    std::vector<std::size_t> active_visual;  // original visual indices, SparseVisual only
    bool mask_text_to_visual = false;        // probe option: text queries skip visual keys

    static LayerUpdatePolicy vanilla() { return {}; }
    static LayerUpdatePolicy freeze() { return {UpdateMode::FreezeVisual, {}, false}; }
    static LayerUpdatePolicy sparse(std::vector<std::size_t> keep) {
        return {UpdateMode::SparseVisual, std::move(keep), false};
    }
};

/// Per-layer keys/values of frozen visual rows. Entries are keyed by layer and
/// only reused when the visual rows and their positions match exactly.
class FrozenKvCache {
public:
    /// Returns the cached K/V, computing and storing it on a miss.
    const KeyValue& get(std::size_t layer, const DenseMatrix& visual_rows,
                        std::span<const std::size_t> positions, const LayerWeights& w,
                        const DecoderConfig& cfg, FlopTally& tally);

    std::size_t hits() const noexcept { return m_hits; }
    std::size_t misses() const noexcept { return m_misses; }
    void clear() { m_entries.clear(); }

private:
    struct Entry {
        DenseMatrix visual_rows;
        std::vector<std::size_t> positions;
        KeyValue kv;
    };
    std::map<std::size_t, Entry> m_entries;
    std::size_t m_hits = 0;
    std::size_t m_misses = 0;
};

/// One block with visual updates terminated: the first num_visual rows are
/// returned unchanged, text rows get attention over every row then the FFN.
DenseMatrix freeze_layer_forward(const DenseMatrix& hidden, std::span<const std::size_t> positions,
                                 std::size_t num_visual, const LayerWeights& w,
                                 const DecoderConfig& cfg, FlopTally& tally,
                                 FrozenKvCache* cache = nullptr, std::size_t layer = 0,
                                 const BlockOptions& options = {});

/// Top-K_SSR visual tokens by RoPE-enabled relevance, K_SSR = max(1, round(r_ssr * V)).
/// The context's positional setting is overridden to Enabled.
std::vector<std::size_t> select_sparse_set(const RelevanceContext& ctx, double r_ssr);

/// Same ranking with an explicit count.
std::vector<std::size_t> select_sparse_count(const RelevanceContext& ctx, std::size_t k);

class ToyDecoder;
struct DecoderState;

/// Saturation-stage handling at the state's current layer (>= l_ssr).
/// LayerInactivity marks visual rows frozen for every later layer;
/// TokenSparsity removes all visual tokens outside the sparse set. Returns the
/// kept original visual indices (every survivor for LayerInactivity).
std::vector<std::size_t> apply_ssr(const ToyDecoder& decoder, DecoderState& state,
                                   const ArchProfile& profile, std::size_t original_visual);

}  // namespace halfv
