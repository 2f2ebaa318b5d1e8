// Copyright (C) 2026 The HalfV Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "halfv/trace_io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "halfv_cli_test";

int run(const std::string& args, const fs::path& capture = kWork / "stdout.txt") {
    const std::string cmd = std::string(HALFV_CLI_PATH) + " " + args + " > " + capture.string() +
                            " 2> " + (kWork / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t data_lines(const std::string& csv) {
    std::size_t n = 0;
    std::istringstream in(csv);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#') ++n;
    return n;
}

const std::string kConfig = std::string(HALFV_CONFIG_DIR) + "/sim_llava_style.json";

struct Fixture {
    Fixture() {
        fs::remove_all(kWork);
        fs::create_directories(kWork);
    }
};

}  // namespace

TEST_CASE_FIXTURE(Fixture, "usage errors exit 64") {
    CHECK(run("") == 64);
    CHECK(run("bogus") == 64);
    CHECK(run("mu --dm 1") == 64);
    CHECK(run("probe --trace x --nope") == 64);
    CHECK(run("--help") == 0);
    CHECK(run("probe --trace x --groups visual,sky") == 64);
}

TEST_CASE_FIXTURE(Fixture, "mu prints the marginal utility") {
    CHECK(run("mu --dm -2 --dc 10") == 0);
    CHECK(slurp(kWork / "stdout.txt") == "0.2\n");
    CHECK(run("mu --dm 0 --dc 10") == 0);
    CHECK(slurp(kWork / "stdout.txt") == "0\n");
    CHECK(run("mu --dm 1 --dc -5 --eps 0") == 2);
}

TEST_CASE_FIXTURE(Fixture, "flops prints the reference vanilla total") {
    CHECK(run("flops --text-tokens 50 --visual-tokens 576 --hidden 4096 --ffn 11008 --layers 32") == 0);
    const auto out = slurp(kWork / "stdout.txt");
    CHECK(out.find("vanilla,50,576,576,576,32,0,0,") != std::string::npos);
    CHECK(out.find("8.31341462e+12") != std::string::npos);

    CHECK(run("flops --preset llava-1.5-7b --sweep --out " + (kWork / "sweep.csv").string()) == 0);
    CHECK(data_lines(slurp(kWork / "sweep.csv")) == 1 + 465 * 3);
    CHECK(run("flops --preset nope") == 2);
    CHECK(run("flops --config /no/such.json --preset llava-1.5-7b") == 3);
}

TEST_CASE_FIXTURE(Fixture, "simulate, probe, detect-stages and prune") {
    const auto out = kWork / "sim";
    CHECK(run("simulate --config " + kConfig + " --out " + out.string() + " --dump-traces") == 0);
    CHECK(fs::exists(out / "simulate.csv"));
    CHECK(fs::exists(out / "halfv.hvtd"));
    const auto trace = (out / "vanilla.hvtd").string();

    CHECK(run("probe --trace " + trace + " --groups visual,text,all --out " +
              (kWork / "p.csv").string()) == 0);
    CHECK(data_lines(slurp(kWork / "p.csv")) == 1 + 9 * 3);
    CHECK(run("probe --trace " + (kWork / "missing.hvtd").string()) == 3);

    CHECK(run("detect-stages --trace " + trace + " --l-ivr 2 --l-ssr 5") == 0);
    CHECK(slurp(kWork / "stdout.txt").find("# stage2_onset=2") != std::string::npos);
    CHECK(run("detect-stages --trace " + trace + " --l-ivr 2") == 64);

    CHECK(run("prune --trace " + trace + " --preset llava-1.5-7b --layer 2 --budget 6") == 0);
    CHECK(data_lines(slurp(kWork / "stdout.txt")) == 7);
    CHECK(run("prune --trace " + trace + " --preset llava-1.5-7b --layer 2 --budget 25") == 2);
    CHECK(run("prune --trace " + trace + " --layer 2") == 64);

    std::ofstream(kWork / "bad.json") << R"({"decoder":{"num_layers":"four"}})";
    CHECK(run("simulate --config " + (kWork / "bad.json").string() + " --out " + out.string()) == 2);
    std::ofstream(kWork / "garbage.hvtd") << "XXXXnot a trace";
    CHECK(run("probe --trace " + (kWork / "garbage.hvtd").string()) == 2);
}

TEST_CASE_FIXTURE(Fixture, "probe on a trace without visual tokens") {
    halfv::LayerTrace t;
    t.modality = {halfv::Modality::Text, halfv::Modality::Text};
    t.states = {halfv::DenseMatrix(2, 3, {1, 0, 0, 0, 1, 0})};
    halfv::write_trace(t, kWork / "text_only.hvtd");
    CHECK(run("probe --trace " + (kWork / "text_only.hvtd").string() + " --groups visual") == 2);
    CHECK(run("probe --trace " + (kWork / "text_only.hvtd").string() + " --groups text") == 0);
    CHECK(data_lines(slurp(kWork / "stdout.txt")) == 2);
}

TEST_CASE_FIXTURE(Fixture, "simulate is reproducible and honors --seed") {
    CHECK(run("simulate --config " + kConfig + " --out " + (kWork / "a").string()) == 0);
    CHECK(run("simulate --config " + kConfig + " --out " + (kWork / "b").string()) == 0);
    CHECK(run("simulate --config " + kConfig + " --seed 5 --out " + (kWork / "c").string()) == 0);
    const auto a = slurp(kWork / "a" / "simulate.csv");
    CHECK(a == slurp(kWork / "b" / "simulate.csv"));
    CHECK(slurp(kWork / "a" / "layers.csv") == slurp(kWork / "b" / "layers.csv"));
    const auto c = slurp(kWork / "c" / "simulate.csv");
    CHECK(c != a);
    CHECK(c.find("# seed=5") != std::string::npos);
}
