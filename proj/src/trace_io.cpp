// Copyright (C) 2026 The HalfV Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "halfv/trace_io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <iterator>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "halfv/error.hpp"

namespace halfv {

namespace {

constexpr char kMagic[4] = {'H', 'V', 'T', 'D'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 20;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
    if (v > std::numeric_limits<std::uint32_t>::max()) {
        fail(ErrorKind::Validation, std::string(what) + " does not fit the HVTD header");
    }
    return static_cast<std::uint32_t>(v);
}

bool mul_overflows(std::size_t a, std::size_t b, std::size_t& out) {
    if (a != 0 && b > std::numeric_limits<std::size_t>::max() / a) return true;
    out = a * b;
    return false;
}

}  // namespace

std::size_t check_prefill_layout(const std::vector<Modality>& modality) {
    std::size_t visual = 0;
    while (visual < modality.size() && modality[visual] == Modality::Visual) ++visual;
    for (std::size_t i = visual; i < modality.size(); ++i) {
        if (modality[i] != Modality::Text) {
            fail(ErrorKind::Validation, "visual tokens must form a contiguous prefix");
        }
    }
    if (visual == modality.size()) {
        fail(ErrorKind::Validation, "sequence has no text token");
    }
    return visual;
}

std::size_t LayerTrace::num_visual() const noexcept {
    std::size_t n = 0;
    for (auto m : modality) n += m == Modality::Visual ? 1 : 0;
    return n;
}

void LayerTrace::validate() const {
    check_prefill_layout(modality);
    if (states.empty()) fail(ErrorKind::Validation, "trace has no layers");
    const std::size_t d = states.front().cols();
    if (d == 0) fail(ErrorKind::Validation, "trace has zero hidden dimension");
    for (std::size_t l = 0; l < states.size(); ++l) {
        if (states[l].rows() != modality.size() || states[l].cols() != d) {
            fail(ErrorKind::Validation, "layer " + std::to_string(l) + " has shape " +
                                            std::to_string(states[l].rows()) + "x" +
                                            std::to_string(states[l].cols()));
        }
    }
}

std::vector<std::uint8_t> encode_trace(const LayerTrace& trace) {
    trace.validate();
    std::vector<std::uint8_t> out;
    const std::size_t n = trace.num_tokens();
    const std::size_t d = trace.dim();
    out.reserve(kHeaderBytes + n + trace.num_layers() * n * d * 4);
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    put_u32(out, kVersion);
    put_u32(out, checked_u32(trace.num_layers(), "num_layers"));
    put_u32(out, checked_u32(n, "num_tokens"));
    put_u32(out, checked_u32(d, "dim"));
    for (auto m : trace.modality) out.push_back(static_cast<std::uint8_t>(m));
    for (const auto& layer : trace.states) {
        for (double v : layer.data()) {
            put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        }
    }
    return out;
}

LayerTrace decode_trace(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        fail(ErrorKind::Format, "missing HVTD magic");
    }
    if (bytes.size() < 8) fail(ErrorKind::CorruptFile, "truncated HVTD header");
    const std::uint32_t version = get_u32(bytes.data() + 4);
    if (version != kVersion) {
        fail(ErrorKind::Format, "unsupported HVTD version " + std::to_string(version));
    }
    if (bytes.size() < kHeaderBytes) fail(ErrorKind::CorruptFile, "truncated HVTD header");

    const std::size_t layers = get_u32(bytes.data() + 8);
    const std::size_t tokens = get_u32(bytes.data() + 12);
    const std::size_t dim = get_u32(bytes.data() + 16);

    std::size_t per_layer = 0, values = 0, payload = 0;
    if (mul_overflows(tokens, dim, per_layer) || mul_overflows(per_layer, layers, values) ||
        mul_overflows(values, 4, payload) || payload > bytes.size()) {
        fail(ErrorKind::CorruptFile, "declared dimensions exceed the file size");
    }
    const std::size_t expected = kHeaderBytes + tokens + payload;
    if (bytes.size() != expected) {
        fail(ErrorKind::CorruptFile, "payload length " + std::to_string(bytes.size()) +
                                         " differs from declared " + std::to_string(expected));
    }

    LayerTrace trace;
    trace.modality.reserve(tokens);
    const std::uint8_t* p = bytes.data() + kHeaderBytes;
    for (std::size_t i = 0; i < tokens; ++i) {
        if (p[i] > 1) fail(ErrorKind::CorruptFile, "modality byte out of range");
        trace.modality.push_back(static_cast<Modality>(p[i]));
    }
    p += tokens;
    trace.states.reserve(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        std::vector<double> data(per_layer);
        for (std::size_t i = 0; i < per_layer; ++i, p += 4) {
            const float f = std::bit_cast<float>(get_u32(p));
            if (!std::isfinite(f)) fail(ErrorKind::Validation, "trace holds a non-finite value");
            data[i] = static_cast<double>(f);
        }
        trace.states.emplace_back(tokens, dim, std::move(data));
    }
    trace.validate();
    return trace;
}

LayerTrace read_trace(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open trace " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) fail(ErrorKind::Io, "failed reading " + path.string());
    return decode_trace(bytes);
}

void write_trace(const LayerTrace& trace, const std::filesystem::path& path) {
    if (path.empty()) fail(ErrorKind::Io, "empty output path");
    const auto bytes = encode_trace(trace);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::Io, "failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// ArchProfile

const char* to_string(SsrMode mode) {
    return mode == SsrMode::LayerInactivity ? "LayerInactivity" : "TokenSparsity";
}

namespace {

bool in_unit_interval(double r) { return r > 0.0 && r <= 1.0; }

}  // namespace

void ArchProfile::validate() const {
    if (r_ivr.empty() || r_ivr.size() > 2) {
        fail(ErrorKind::Config, "r_ivr must hold one or two retention fractions");
    }
    for (double r : r_ivr)
        if (!in_unit_interval(r)) fail(ErrorKind::Config, "r_ivr fractions must lie in (0,1]");
    if (!(r_anchor >= 0.0 && r_anchor <= 1.0)) fail(ErrorKind::Config, "r_anchor must lie in [0,1]");
    if (r_ssr && !in_unit_interval(*r_ssr)) fail(ErrorKind::Config, "r_ssr must lie in (0,1]");
    if (!(lambda >= 0.0)) fail(ErrorKind::Config, "lambda must be non-negative");
    if (!(epsilon >= 0.0)) fail(ErrorKind::Config, "epsilon must be non-negative");
    if (r_ivr.size() == 2) {
        if (ssr_mode != SsrMode::TokenSparsity) {
            fail(ErrorKind::Config, "a two-value r_ivr schedule requires TokenSparsity");
        }
        if (r_ssr && *r_ssr != r_ivr[1]) {
            fail(ErrorKind::Config, "r_ssr conflicts with the second r_ivr entry");
        }
    }
    if (l_ivr && *l_ivr == 0) fail(ErrorKind::Config, "l_ivr must be at least 1");
    if (l_ssr && *l_ssr == 0) fail(ErrorKind::Config, "l_ssr must be at least 1");
    if (l_ivr && l_ssr && *l_ivr >= *l_ssr) fail(ErrorKind::Config, "l_ivr must precede l_ssr");
    if (l_ssr && ssr_mode == SsrMode::TokenSparsity && !sparse_retention()) {
        fail(ErrorKind::Config, "TokenSparsity needs r_ssr or a two-value r_ivr");
    }
}

void ArchProfile::validate_for_layers(std::size_t num_layers) const {
    validate();
    if (l_ivr && *l_ivr >= num_layers) fail(ErrorKind::Config, "l_ivr beyond model depth");
    if (l_ssr && *l_ssr >= num_layers) fail(ErrorKind::Config, "l_ssr beyond model depth");
}

std::optional<double> ArchProfile::sparse_retention() const {
    if (r_ssr) return r_ssr;
    if (r_ivr.size() == 2) return r_ivr[1];
    return std::nullopt;
}

namespace {

using nlohmann::json;

std::optional<std::size_t> layer_field(const json& j, const char* key) {
    if (j[key].is_null()) return std::nullopt;
    if (!j[key].is_number_integer() || j[key].get<long long>() < 0) {
        fail(ErrorKind::Config, std::string(key) + " must be a non-negative integer or null");
    }
    return j[key].get<std::size_t>();
}

double real_field(const json& j, const char* key) {
    if (!j[key].is_number()) fail(ErrorKind::Config, std::string(key) + " must be a number");
    return j[key].get<double>();
}

}  // namespace

ArchProfile ArchProfile::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorKind::Config, std::string("profile is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) fail(ErrorKind::Config, "profile must be a JSON object");

    ArchProfile p;
    for (const auto& [key, value] : j.items()) {
        if (key == "ssr_mode") {
            const auto mode = value.is_string() ? value.get<std::string>() : std::string();
            if (mode == "LayerInactivity") p.ssr_mode = SsrMode::LayerInactivity;
            else if (mode == "TokenSparsity") p.ssr_mode = SsrMode::TokenSparsity;
            else fail(ErrorKind::Config, "ssr_mode must be LayerInactivity or TokenSparsity");
        } else if (key == "l_ivr") {
            p.l_ivr = layer_field(j, "l_ivr");
        } else if (key == "l_ssr") {
            p.l_ssr = layer_field(j, "l_ssr");
        } else if (key == "r_ivr") {
            p.r_ivr.clear();
            if (value.is_number()) {
                p.r_ivr.push_back(value.get<double>());
            } else if (value.is_array()) {
                for (const auto& v : value) {
                    if (!v.is_number()) fail(ErrorKind::Config, "r_ivr entries must be numbers");
                    p.r_ivr.push_back(v.get<double>());
                }
            } else {
                fail(ErrorKind::Config, "r_ivr must be a number or an array");
            }
        } else if (key == "r_anchor") {
            p.r_anchor = real_field(j, "r_anchor");
        } else if (key == "r_ssr") {
            if (value.is_null()) p.r_ssr.reset();
            else p.r_ssr = real_field(j, "r_ssr");
        } else if (key == "lambda") {
            p.lambda = real_field(j, "lambda");
        } else if (key == "epsilon") {
            p.epsilon = real_field(j, "epsilon");
        } else {
            fail(ErrorKind::Config, "unknown profile key '" + key + "'");
        }
    }
    p.validate();
    return p;
}

ArchProfile ArchProfile::load(const std::filesystem::path& path) {
    return from_json_text(read_text_file(path));
}

std::string ArchProfile::to_json_text() const {
    json j;
    j["ssr_mode"] = to_string(ssr_mode);
    j["l_ivr"] = l_ivr ? json(*l_ivr) : json(nullptr);
    j["r_ivr"] = r_ivr;
    j["r_anchor"] = r_anchor;
    j["l_ssr"] = l_ssr ? json(*l_ssr) : json(nullptr);
    j["r_ssr"] = r_ssr ? json(*r_ssr) : json(nullptr);
    j["lambda"] = lambda;
    j["epsilon"] = epsilon;
    return j.dump();
}

ArchProfile profile_preset(const std::string& name) {
    ArchProfile p;
    if (name == "llava-1.5-7b" || name == "llava-1.5-13b") {
        p.l_ivr = 3;
        p.r_ivr = {0.5};
        p.r_anchor = 0.2;
        p.l_ssr = 15;
    } else if (name == "llava-next-7b") {
        p.l_ivr = 2;
        p.r_ivr = {0.5};
        p.r_anchor = 0.1;
        p.l_ssr = 16;
    } else if (name == "qwen2.5-vl-7b") {
        p.ssr_mode = SsrMode::TokenSparsity;
        p.l_ivr = 2;
        p.r_ivr = {0.25, 0.05};
        p.r_anchor = 0.1;
        p.l_ssr = 21;
    } else if (name == "vanilla") {
        // both steps disabled
    } else {
        fail(ErrorKind::Config, "unknown profile preset '" + name + "'");
    }
    p.validate();
    return p;
}

// ---------------------------------------------------------------------------
// CSV

std::string format_real(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%#.9g", value);
    return buf;
}

namespace {

std::string quote_csv(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string render_cell(const Cell& cell) {
    if (const auto* i = std::get_if<std::int64_t>(&cell)) return std::to_string(*i);
    if (const auto* d = std::get_if<double>(&cell)) return format_real(*d);
    return quote_csv(std::get<std::string>(cell));
}

}  // namespace

std::string render_csv(const Table& table, const ReportHeader* header) {
    std::ostringstream out;
    if (header) {
        out << "# tool=" << header->tool_version << '\n';
        if (!header->subcommand.empty()) out << "# subcommand=" << header->subcommand << '\n';
        out << "# seed=" << header->seed << '\n';
        out << "# config_hash=" << header->config_hash << '\n';
        for (const auto& note : header->notes) out << "# " << note << '\n';
    }
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        out << (i ? "," : "") << quote_csv(table.header[i]);
    }
    out << '\n';
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size()) {
            fail(ErrorKind::Validation, "report row has " + std::to_string(row.size()) +
                                            " cells, header has " +
                                            std::to_string(table.header.size()));
        }
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << render_cell(row[i]);
        out << '\n';
    }
    return out.str();
}

void write_report(const Table& table, const std::filesystem::path& path,
                  const ReportHeader* header) {
    const std::string text = render_csv(table, header);
    if (path == "-") {
        std::cout << text << std::flush;
        return;
    }
    if (path.empty()) fail(ErrorKind::Io, "empty output path");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
    out << text;
    if (!out) fail(ErrorKind::Io, "failed writing " + path.string());
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::string hash_file(const std::filesystem::path& path) {
    if (path.empty()) return "none";
    const std::string text = read_text_file(path);
    return hex64(fnv1a64(text.data(), text.size()));
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) fail(ErrorKind::Io, "failed reading " + path.string());
    return ss.str();
}

}  // namespace halfv
