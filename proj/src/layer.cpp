// Copyright (C) 2026 The HalfV Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "halfv/layer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "halfv/error.hpp"

namespace halfv {

void DecoderConfig::validate() const {
    if (num_layers < 1 || hidden_dim < 1 || num_heads < 1 || ffn_dim < 1 || vocab < 1) {
        fail(ErrorKind::Config, "decoder counts must all be at least 1");
    }
    if (hidden_dim % num_heads != 0) {
        fail(ErrorKind::Config, "num_heads must divide hidden_dim");
    }
    if (!(rope_base > 0.0) || !std::isfinite(rope_base)) {
        fail(ErrorKind::Config, "rope_base must be positive");
    }
}

DenseMatrix rms_norm(const DenseMatrix& x, std::span<const double> gain) {
    if (gain.size() != x.cols()) fail(ErrorKind::Shape, "rms_norm gain length mismatch");
    DenseMatrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto in = x.row(i);
        double ms = 0.0;
        for (double v : in) ms += v * v;
        ms /= static_cast<double>(in.size());
        const double inv = 1.0 / std::sqrt(ms + kRmsEps);
        auto o = out.row(i);
        for (std::size_t j = 0; j < in.size(); ++j) o[j] = in[j] * inv * gain[j];
    }
    return out;
}

void apply_rope(std::span<double> row, std::size_t head_dim, double position, double base) {
    if (head_dim == 0 || row.size() % head_dim != 0) {
        fail(ErrorKind::Shape, "row length is not a multiple of head_dim");
    }
    const std::size_t pairs = head_dim / 2;
    for (std::size_t off = 0; off < row.size(); off += head_dim) {
        for (std::size_t i = 0; i < pairs; ++i) {
            const double freq =
                std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(head_dim));
            const double angle = position * freq;
            const double c = std::cos(angle);
            const double s = std::sin(angle);
            double& x0 = row[off + 2 * i];
            double& x1 = row[off + 2 * i + 1];
            const double a = x0;
            const double b = x1;
            x0 = a * c - b * s;
            x1 = a * s + b * c;
        }
    }
}

DenseMatrix counted_matmul(const DenseMatrix& x, const DenseMatrix& w, std::uint64_t& counter) {
    counter += 2ULL * x.rows() * x.cols() * w.cols();
    return matmul(x, w);
}

namespace {

DenseMatrix slice_rows(const DenseMatrix& m, std::size_t first, std::size_t last) {
    DenseMatrix out(last - first, m.cols());
    for (std::size_t i = first; i < last; ++i) {
        std::copy_n(m.row(i).begin(), m.cols(), out.row(i - first).begin());
    }
    return out;
}

void rope_rows(DenseMatrix& m, std::span<const std::size_t> positions, const DecoderConfig& cfg) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        apply_rope(m.row(i), cfg.head_dim(), static_cast<double>(positions[i]), cfg.rope_base);
    }
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

}  // namespace

KeyValue project_kv(const DenseMatrix& rows, std::span<const std::size_t> positions,
                    const LayerWeights& w, const DecoderConfig& cfg, std::uint64_t& counter) {
    if (positions.size() != rows.rows()) fail(ErrorKind::Shape, "positions/rows mismatch");
    const DenseMatrix x = rms_norm(rows, w.attn_norm);
    KeyValue kv{counted_matmul(x, w.wk, counter), counted_matmul(x, w.wv, counter)};
    rope_rows(kv.keys, positions, cfg);
    return kv;
}

DenseMatrix block_forward(const DenseMatrix& hidden, std::span<const std::size_t> positions,
                          std::size_t num_visual, std::size_t first_active,
                          const LayerWeights& w, const DecoderConfig& cfg,
                          const BlockOptions& options, FlopTally& tally,
                          const KeyValue* inactive_kv) {
    const std::size_t n = hidden.rows();
    const std::size_t h = cfg.hidden_dim;
    if (hidden.cols() != h) fail(ErrorKind::Shape, "hidden width does not match the decoder");
    if (positions.size() != n) fail(ErrorKind::Shape, "one position id per row required");
    if (first_active > n || num_visual > n) fail(ErrorKind::Shape, "row split out of range");
    const std::size_t na = n - first_active;

    const DenseMatrix active = slice_rows(hidden, first_active, n);
    const auto active_pos = positions.subspan(first_active);
    const DenseMatrix x = rms_norm(active, w.attn_norm);
    DenseMatrix q = counted_matmul(x, w.wq, tally.layer);
    rope_rows(q, active_pos, cfg);
    KeyValue active_kv{counted_matmul(x, w.wk, tally.layer), counted_matmul(x, w.wv, tally.layer)};
    rope_rows(active_kv.keys, active_pos, cfg);

    KeyValue inactive;
    if (first_active > 0) {
        if (inactive_kv) {
            if (inactive_kv->keys.rows() != first_active || inactive_kv->keys.cols() != h ||
                inactive_kv->values.rows() != first_active || inactive_kv->values.cols() != h) {
                fail(ErrorKind::Shape, "precomputed keys/values do not match the frozen rows");
            }
            inactive = *inactive_kv;
        } else {
            inactive = project_kv(slice_rows(hidden, 0, first_active),
                                  positions.subspan(0, first_active), w, cfg, tally.frozen_kv);
        }
    }
    auto key_row = [&](std::size_t j) {
        return j < first_active ? inactive.keys.row(j) : active_kv.keys.row(j - first_active);
    };
    auto value_row = [&](std::size_t j) {
        return j < first_active ? inactive.values.row(j) : active_kv.values.row(j - first_active);
    };

    const std::size_t dh = cfg.head_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    DenseMatrix attn(na, h);
    std::vector<double> scores(n);
    std::vector<char> allowed(n);
    for (std::size_t a = 0; a < na; ++a) {
        const std::size_t i = first_active + a;
        const bool text_query = i >= num_visual;
        for (std::size_t j = 0; j < n; ++j) {
            allowed[j] = j <= i && !(options.mask_text_to_visual && text_query && j < num_visual);
        }
        for (std::size_t head = 0; head < cfg.num_heads; ++head) {
            const std::size_t off = head * dh;
            auto qi = q.row(a).subspan(off, dh);
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < n; ++j) {
                auto kj = key_row(j).subspan(off, dh);
                double s = 0.0;
                for (std::size_t d = 0; d < dh; ++d) s += qi[d] * kj[d];
                scores[j] = s * scale;
                if (allowed[j]) mx = std::max(mx, scores[j]);
            }
            double sum = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                scores[j] = allowed[j] ? std::exp(scores[j] - mx) : 0.0;
                sum += scores[j];
            }
            auto out = attn.row(a).subspan(off, dh);
            for (std::size_t j = 0; j < n; ++j) {
                const double p = scores[j] / sum;
                auto vj = value_row(j).subspan(off, dh);
                for (std::size_t d = 0; d < dh; ++d) out[d] += p * vj[d];
            }
        }
    }
    // scores and weighting: 2*na*n*h each
    tally.layer += 4ULL * na * n * h;

    const DenseMatrix attn_out = counted_matmul(attn, w.wo, tally.layer);
    DenseMatrix mid = active;
    for (std::size_t k = 0; k < mid.data().size(); ++k) mid.data()[k] += attn_out.data()[k];

    const DenseMatrix x2 = rms_norm(mid, w.ffn_norm);
    const DenseMatrix gate = counted_matmul(x2, w.w_gate, tally.layer);
    DenseMatrix up = counted_matmul(x2, w.w_up, tally.layer);
    for (std::size_t k = 0; k < up.data().size(); ++k) up.data()[k] *= silu(gate.data()[k]);
    const DenseMatrix ffn_out = counted_matmul(up, w.w_down, tally.layer);

    DenseMatrix out = hidden;
    for (std::size_t a = 0; a < na; ++a) {
        auto dst = out.row(first_active + a);
        auto m = mid.row(a);
        auto f = ffn_out.row(a);
        for (std::size_t j = 0; j < h; ++j) dst[j] = m[j] + f[j];
    }
    return out;
}

DenseMatrix vanilla_layer_forward(const DenseMatrix& hidden, std::span<const std::size_t> positions,
                                  std::size_t num_visual, const LayerWeights& w,
                                  const DecoderConfig& cfg, FlopTally& tally,
                                  const BlockOptions& options) {
    return block_forward(hidden, positions, num_visual, 0, w, cfg, options, tally);
}

}  // namespace halfv
