// Copyright (C) 2026 The HalfV Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "halfv/linalg.hpp"

namespace halfv {

enum class Modality : std::uint8_t { Visual = 0, Text = 1 };

/// Layer-indexed hidden states. states[0] holds the embedding output and
/// states[l] the output of the l-th decoder layer, which is also the input of
/// the decoder layer with zero-based index l. Visual tokens form a contiguous
/// prefix ahead of all text tokens.
struct LayerTrace {
    std::vector<Modality> modality;
    std::vector<DenseMatrix> states;

    std::size_t num_layers() const noexcept { return states.size(); }
    std::size_t num_tokens() const noexcept { return modality.size(); }
    std::size_t dim() const noexcept { return states.empty() ? 0 : states.front().cols(); }
    std::size_t num_visual() const noexcept;

    /// Throws Validation for broken invariants.
    void validate() const;
};

/// Counts visual tokens and checks the visual-prefix layout and that at
/// least one text token exists.
std::size_t check_prefill_layout(const std::vector<Modality>& modality);

LayerTrace read_trace(const std::filesystem::path& path);
void write_trace(const LayerTrace& trace, const std::filesystem::path& path);

// HVTD encoding on byte buffers; read_trace/write_trace wrap these.
std::vector<std::uint8_t> encode_trace(const LayerTrace& trace);
LayerTrace decode_trace(const std::vector<std::uint8_t>& bytes);

enum class SsrMode { LayerInactivity, TokenSparsity };

const char* to_string(SsrMode mode);

/// Architecture-aware acceleration settings. An absent l_ivr disables the
/// pruning step; an absent l_ssr disables the saturation step.
struct ArchProfile {
    SsrMode ssr_mode = SsrMode::LayerInactivity;
    std::optional<std::size_t> l_ivr;
    std::vector<double> r_ivr{1.0};  // one value, or (stage II, stage III) retention
    double r_anchor = 0.2;
    std::optional<std::size_t> l_ssr;
    std::optional<double> r_ssr;
    double lambda = 1.0;
    double epsilon = 1e-8;

    /// Checks ranges and ordering independent of model depth.
    void validate() const;
    /// Additionally checks stage boundaries against a decoder depth.
    void validate_for_layers(std::size_t num_layers) const;

    /// Retention used by TokenSparsity: r_ssr, or the second r_ivr entry.
    std::optional<double> sparse_retention() const;

    static ArchProfile from_json_text(const std::string& text);
    static ArchProfile load(const std::filesystem::path& path);
    std::string to_json_text() const;
};

/// Named profiles for the reference backbones.
ArchProfile profile_preset(const std::string& name);

// ---------------------------------------------------------------------------
// CSV reports

using Cell = std::variant<std::int64_t, double, std::string>;

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row) { rows.push_back(std::move(row)); }
};

/// Emitted as '#'-prefixed lines ahead of the CSV header row.
struct ReportHeader {
    std::string tool_version;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string subcommand;
    std::vector<std::string> notes;
};

std::string format_real(double value);
std::string render_csv(const Table& table, const ReportHeader* header = nullptr);

/// Writes RFC-4180 style CSV. A path of "-" writes to stdout.
void write_report(const Table& table, const std::filesystem::path& path,
                  const ReportHeader* header = nullptr);

std::uint64_t fnv1a64(const void* data, std::size_t size);
std::string hex64(std::uint64_t value);
/// FNV-1a over the file bytes, hex encoded; "none" for an empty path.
std::string hash_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace halfv
