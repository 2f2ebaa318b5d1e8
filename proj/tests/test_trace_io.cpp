// Copyright (C) 2026 The HalfV Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "halfv/error.hpp"
#include "halfv/trace_io.hpp"
#include "support/oracles.hpp"

using halfv::DenseMatrix;
using halfv::ErrorKind;
using halfv::LayerTrace;
using halfv::Modality;

namespace fs = std::filesystem;

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
}

ErrorKind decode_error(const std::vector<std::uint8_t>& bytes) {
    try {
        halfv::decode_trace(bytes);
    } catch (const halfv::Error& e) {
        return e.kind();
    }
    FAIL("decode accepted malformed bytes");
    return ErrorKind::Refused;
}

std::vector<std::uint8_t> file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// 2 layers, 2 visual + 1 text token, dim 4; values are small dyadic numbers.
std::vector<std::uint8_t> fixture_bytes() {
    std::vector<std::uint8_t> b = {'H', 'V', 'T', 'D'};
    put_u32(b, 1);
    put_u32(b, 2);
    put_u32(b, 3);
    put_u32(b, 4);
    b.push_back(0);
    b.push_back(0);
    b.push_back(1);
    for (int i = 0; i < 24; ++i) put_f32(b, 0.25f * static_cast<float>(i) - 2.0f);
    return b;
}

LayerTrace random_trace(std::uint64_t seed) {
    halfv::SplitMix64 rng(seed);
    LayerTrace t;
    t.modality = {Modality::Visual, Modality::Visual, Modality::Visual, Modality::Text};
    for (int l = 0; l < 3; ++l) {
        DenseMatrix m(4, 5);
        for (auto& x : m.data()) x = static_cast<float>(rng.uniform(-3, 3));
        t.states.push_back(m);
    }
    return t;
}

}  // namespace

TEST_CASE("hand-assembled fixture decodes to known matrices") {
    const LayerTrace t = halfv::decode_trace(fixture_bytes());
    REQUIRE(t.num_layers() == 2);
    REQUIRE(t.num_tokens() == 3);
    REQUIRE(t.dim() == 4);
    CHECK(t.num_visual() == 2);
    CHECK(t.modality[2] == Modality::Text);
    CHECK(t.states[0](0, 0) == -2.0);
    CHECK(t.states[0](0, 1) == -1.75);
    CHECK(t.states[0](2, 3) == 0.75);
    CHECK(t.states[1](0, 0) == 1.0);
    CHECK(t.states[1](2, 3) == 3.75);
    CHECK(halfv::encode_trace(t) == fixture_bytes());
}

TEST_CASE("malformed files") {
    auto bad_magic = fixture_bytes();
    std::memcpy(bad_magic.data(), "XXXX", 4);
    CHECK(decode_error(bad_magic) == ErrorKind::Format);

    auto bad_version = fixture_bytes();
    bad_version[4] = 2;
    CHECK(decode_error(bad_version) == ErrorKind::Format);

    auto truncated = fixture_bytes();
    truncated.pop_back();
    CHECK(decode_error(truncated) == ErrorKind::CorruptFile);

    auto trailing = fixture_bytes();
    trailing.push_back(0);
    CHECK(decode_error(trailing) == ErrorKind::CorruptFile);

    auto bad_label = fixture_bytes();
    bad_label[20] = 7;
    CHECK(decode_error(bad_label) != ErrorKind::Refused);

    CHECK(decode_error({'H', 'V'}) != ErrorKind::Refused);
}

TEST_CASE("file round trip is bit exact and deterministic") {
    const fs::path dir = fs::temp_directory_path() / "halfv_trace_io_test";
    fs::create_directories(dir);
    const LayerTrace t = random_trace(9);
    halfv::write_trace(t, dir / "a.hvtd");
    const LayerTrace back = halfv::read_trace(dir / "a.hvtd");
    CHECK(back.modality == t.modality);
    REQUIRE(back.states.size() == t.states.size());
    for (std::size_t l = 0; l < t.states.size(); ++l) CHECK(back.states[l] == t.states[l]);

    halfv::write_trace(back, dir / "b.hvtd");
    CHECK(file_bytes(dir / "a.hvtd") == file_bytes(dir / "b.hvtd"));
    fs::remove_all(dir);
}

TEST_CASE("io errors") {
    const LayerTrace t = random_trace(1);
    try {
        halfv::write_trace(t, "");
        FAIL("empty path accepted");
    } catch (const halfv::Error& e) {
        CHECK(e.kind() == ErrorKind::Io);
    }
    try {
        halfv::read_trace("/nonexistent/dir/trace.hvtd");
        FAIL("missing file accepted");
    } catch (const halfv::Error& e) {
        CHECK(e.kind() == ErrorKind::Io);
    }
}

TEST_CASE("prefill layout") {
    using M = Modality;
    CHECK(halfv::check_prefill_layout({M::Visual, M::Visual, M::Text}) == 2);
    CHECK(halfv::check_prefill_layout({M::Text}) == 0);
    CHECK_THROWS_AS(halfv::check_prefill_layout({M::Text, M::Visual}), halfv::Error);
    CHECK_THROWS_AS(halfv::check_prefill_layout({M::Visual}), halfv::Error);
}

TEST_CASE("csv rendering") {
    halfv::Table table{{"layer", "entropy"}, {}};
    CHECK(halfv::render_csv(table) == "layer,entropy\n");
    table.add({std::int64_t{0}, 1.5});
    CHECK(halfv::render_csv(table) == "layer,entropy\n0,1.50000000\n");

    halfv::Table big{{"i"}, {}};
    for (int i = 0; i < 1000; ++i) big.add({std::int64_t{i}});
    const auto text = halfv::render_csv(big);
    CHECK(std::count(text.begin(), text.end(), '\n') == 1001);

    halfv::Table quoted{{"a"}, {{std::string("x,y")}}};
    CHECK(halfv::render_csv(quoted) == "a\n\"x,y\"\n");

    halfv::ReportHeader h{"halfv test", 42, "none", "probe", {"note"}};
    CHECK(halfv::render_csv(table, &h) ==
          "# tool=halfv test\n# subcommand=probe\n# seed=42\n# config_hash=none\n# note\n"
          "layer,entropy\n0,1.50000000\n");

    halfv::Table ragged{{"a", "b"}, {{std::int64_t{1}}}};
    CHECK_THROWS_AS(halfv::render_csv(ragged), halfv::Error);
}

TEST_CASE("fnv1a64 reference vectors") {
    CHECK(halfv::hex64(halfv::fnv1a64("", 0)) == "cbf29ce484222325");
    CHECK(halfv::hex64(halfv::fnv1a64("a", 1)) == "af63dc4c8601ec8c");
    CHECK(halfv::hash_file("") == "none");
}

TEST_CASE("profile json") {
    const auto p = halfv::ArchProfile::from_json_text(
        R"({"ssr_mode":"TokenSparsity","l_ivr":2,"r_ivr":[0.25,0.05],"r_anchor":0.1,"l_ssr":21})");
    CHECK(p.ssr_mode == halfv::SsrMode::TokenSparsity);
    CHECK(p.l_ivr == std::optional<std::size_t>(2));
    CHECK(p.l_ssr == std::optional<std::size_t>(21));
    CHECK(p.sparse_retention() == std::optional<double>(0.05));

    const auto back = halfv::ArchProfile::from_json_text(p.to_json_text());
    CHECK(back.to_json_text() == p.to_json_text());

    auto config_error = [](const char* text) {
        try {
            halfv::ArchProfile::from_json_text(text);
        } catch (const halfv::Error& e) {
            return e.kind() == ErrorKind::Config || e.kind() == ErrorKind::Validation;
        }
        return false;
    };
    CHECK(config_error(R"({"bogus":1})"));
    CHECK(config_error(R"({"l_ivr":5,"l_ssr":3})"));
    CHECK(config_error(R"({"r_ivr":[0.0]})"));
    CHECK(config_error(R"({"r_ivr":[0.5,0.1]})"));
    CHECK(config_error(R"({"r_anchor":1.5})"));
    CHECK(config_error("not json"));

    CHECK_NOTHROW(halfv::ArchProfile::from_json_text(R"({"l_ivr":null,"l_ssr":null})"));
    CHECK_THROWS(halfv::profile_preset("llava-1.5-7b").validate_for_layers(8));
    CHECK_NOTHROW(halfv::profile_preset("llava-1.5-7b").validate_for_layers(32));
    CHECK_THROWS(halfv::profile_preset("unknown"));
}
