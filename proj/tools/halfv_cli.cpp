// Copyright (C) 2026 The HalfV Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "halfv/halfv.h"

namespace {

constexpr int kUsage = 64;

int report(halfv_status status) {
    if (status != HALFV_OK) {
        std::fprintf(stderr, "halfv: %s\n", halfv_last_error());
    }
    return halfv_status_exit_code(status);
}

struct ProfileHandle {
    halfv_profile* p = nullptr;
    ~ProfileHandle() { halfv_profile_free(p); }
};

struct TraceHandle {
    halfv_trace* t = nullptr;
    ~TraceHandle() { halfv_trace_free(t); }
};

std::optional<unsigned> parse_groups(const std::string& text) {
    unsigned mask = 0;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "visual") {
            mask |= HALFV_GROUP_VISUAL;
        } else if (item == "text") {
            mask |= HALFV_GROUP_TEXT;
        } else if (item == "all") {
            mask |= HALFV_GROUP_ALL;
        } else {
            return std::nullopt;
        }
    }
    if (mask == 0) return std::nullopt;
    return mask;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"HalfV redundancy-lifecycle toolkit"};
    app.set_version_flag("--version", std::string(halfv_version()));
    app.require_subcommand(1);

    std::string trace_path;
    std::string config_path;
    std::string out_path = "-";
    std::uint64_t seed = 0;
    std::string preset;

    // probe
    auto* probe = app.add_subcommand("probe", "Truncated matrix entropy per layer and group");
    std::string groups = "visual,text";
    probe->add_option("--trace", trace_path, "HVTD trace")->required();
    probe->add_option("--groups", groups, "Comma list of visual, text, all");
    probe->add_option("--out", out_path, "CSV output, - for stdout");
    probe->add_option("--seed", seed, "Seed recorded in the report header");

    // detect-stages
    auto* detect = app.add_subcommand("detect-stages", "Three-stage lifecycle boundaries");
    std::size_t window = 2;
    double delta = 0.05, tau = 0.02;
    int l_ivr = -1, l_ssr = -1;
    detect->add_option("--trace", trace_path, "HVTD trace")->required();
    detect->add_option("--window", window, "Consecutive layers per test")->check(CLI::Range(1, 1 << 20));
    detect->add_option("--delta", delta, "Stage II decline, fraction of the range");
    detect->add_option("--tau", tau, "Stage III plateau bound, fraction of the range");
    detect->add_option("--l-ivr", l_ivr, "Explicit Stage II onset");
    detect->add_option("--l-ssr", l_ssr, "Explicit Stage III onset");
    detect->add_option("--out", out_path, "CSV output, - for stdout");
    detect->add_option("--seed", seed, "Seed recorded in the report header");

    // prune
    auto* prune = app.add_subcommand("prune", "AnchorCover keep set for one layer of a trace");
    int layer = -1, budget = -1;
    prune->add_option("--trace", trace_path, "HVTD trace")->required();
    prune->add_option("--config", config_path, "Profile JSON");
    prune->add_option("--preset", preset, "Named profile when no config is given");
    prune->add_option("--layer", layer, "Trace layer, defaults to l_ivr");
    prune->add_option("--budget", budget, "Visual tokens to keep, defaults to round(r_ivr * V)");
    prune->add_option("--out", out_path, "CSV output, - for stdout");
    prune->add_option("--seed", seed, "Seed recorded in the report header");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Vanilla vs HalfV on the toy decoder");
    std::optional<std::uint64_t> sim_seed;
    std::string out_dir = ".";
    bool dump = false;
    sim->add_option("--config", config_path, "Simulation JSON")->required();
    sim->add_option("--out", out_dir, "Output directory");
    sim->add_option("--seed", sim_seed, "Replaces the decoder and input seeds");
    sim->add_flag("--dump-traces", dump, "Also write vanilla.hvtd and halfv.hvtd");

    // flops
    auto* flops = app.add_subcommand("flops", "Analytic staged prefill FLOPs");
    halfv_model_dims dims{};
    std::optional<std::uint64_t> text_tokens, visual_tokens, hidden, ffn, layers;
    bool sweep = false;
    std::string sweep_r_ivr, sweep_r_ssr;
    flops->add_option("--config", config_path, "Profile JSON");
    flops->add_option("--preset", preset, "Backbone name for dims and, without --config, profile");
    flops->add_option("--text-tokens", text_tokens);
    flops->add_option("--visual-tokens", visual_tokens);
    flops->add_option("--hidden", hidden);
    flops->add_option("--ffn", ffn);
    flops->add_option("--layers", layers);
    flops->add_flag("--sweep", sweep, "Grid over l_ivr, r_ivr, l_ssr, r_ssr");
    flops->add_option("--sweep-r-ivr", sweep_r_ivr, "Comma list for the r_ivr axis");
    flops->add_option("--sweep-r-ssr", sweep_r_ssr, "Comma list for the r_ssr axis");
    flops->add_option("--out", out_path, "CSV output, - for stdout");
    flops->add_option("--seed", seed, "Seed recorded in the report header");

    // mu
    auto* mu = app.add_subcommand("mu", "Marginal utility -dM / (dC + eps)");
    double dm = 0.0, dc = 0.0, eps = 1e-8;
    mu->add_option("--dm", dm, "Performance change, negative is a drop")->required();
    mu->add_option("--dc", dc, "Cost change")->required();
    mu->add_option("--eps", eps, "Stabilizer");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    const std::string sub = app.get_subcommands().front()->get_name();
    const halfv_manifest manifest{sub.c_str(), seed, config_path.c_str()};
    const char* out = out_path.c_str();

    if (sub == "probe") {
        const auto mask = parse_groups(groups);
        if (!mask) {
            std::fprintf(stderr, "halfv: --groups takes a comma list of visual, text, all\n");
            return kUsage;
        }
        TraceHandle t;
        if (auto s = halfv_trace_read(trace_path.c_str(), &t.t); s != HALFV_OK) return report(s);
        return report(halfv_probe(t.t, *mask, out, &manifest));
    }

    if (sub == "detect-stages") {
        if ((l_ivr >= 0) != (l_ssr >= 0)) {
            std::fprintf(stderr, "halfv: --l-ivr and --l-ssr go together\n");
            return kUsage;
        }
        TraceHandle t;
        if (auto s = halfv_trace_read(trace_path.c_str(), &t.t); s != HALFV_OK) return report(s);
        halfv_stage_params params;
        halfv_stage_params_default(&params);
        params.window = static_cast<uint32_t>(window);
        params.delta = delta;
        params.tau = tau;
        params.l_ivr_override = l_ivr;
        params.l_ssr_override = l_ssr;
        return report(halfv_detect_stages(t.t, &params, out, &manifest, nullptr, nullptr));
    }

    if (sub == "prune") {
        ProfileHandle p;
        halfv_status s = HALFV_OK;
        if (!config_path.empty()) {
            s = halfv_profile_load(config_path.c_str(), &p.p);
        } else if (!preset.empty()) {
            s = halfv_profile_preset(preset.c_str(), &p.p);
        } else {
            std::fprintf(stderr, "halfv: prune needs --config or --preset\n");
            return kUsage;
        }
        if (s != HALFV_OK) return report(s);
        TraceHandle t;
        if (s = halfv_trace_read(trace_path.c_str(), &t.t); s != HALFV_OK) return report(s);
        return report(halfv_prune(t.t, p.p, layer, budget, out, &manifest));
    }

    if (sub == "simulate") {
        halfv_simulation_summary summary{};
        const auto s = halfv_simulate(config_path.c_str(), out_dir.c_str(), sim_seed.has_value(),
                                      sim_seed.value_or(0), dump ? 1 : 0, &summary);
        if (s == HALFV_OK) {
            std::printf("kl_vanilla_halfv=%.9g counted_speedup=%.9g analytic_speedup=%.9g\n",
                        summary.kl_vanilla_halfv, summary.counted_speedup,
                        summary.analytic_speedup);
        }
        return report(s);
    }

    if (sub == "flops") {
        ProfileHandle p;
        halfv_status s = HALFV_OK;
        if (!preset.empty()) {
            if (s = halfv_model_preset(preset.c_str(), &dims); s != HALFV_OK) return report(s);
        }
        if (!config_path.empty()) {
            s = halfv_profile_load(config_path.c_str(), &p.p);
        } else if (!preset.empty()) {
            s = halfv_profile_preset(preset.c_str(), &p.p);
        }
        if (s != HALFV_OK) return report(s);
        if (text_tokens) dims.text_tokens = *text_tokens;
        if (visual_tokens) dims.visual_tokens = *visual_tokens;
        if (hidden) dims.hidden = *hidden;
        if (ffn) dims.ffn = *ffn;
        if (layers) dims.layers = *layers;
        if (sweep) {
            std::vector<double> ri, rs;
            try {
                if (!sweep_r_ivr.empty()) ri = parse_list(sweep_r_ivr);
                if (!sweep_r_ssr.empty()) rs = parse_list(sweep_r_ssr);
            } catch (const std::exception&) {
                std::fprintf(stderr, "halfv: sweep axes take comma lists of numbers\n");
                return kUsage;
            }
            const halfv_sweep_grid grid{ri.data(), ri.size(), rs.data(), rs.size()};
            return report(halfv_flops_sweep(p.p, &dims, &grid, out, &manifest));
        }
        return report(halfv_flops_report(p.p, &dims, out, &manifest));
    }

    if (sub == "mu") {
        double value = 0.0;
        const auto s = halfv_marginal_utility(dm, dc, eps, &value);
        if (s == HALFV_OK) std::printf("%.9g\n", value);
        return report(s);
    }

    return kUsage;
}
