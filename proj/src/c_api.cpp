// Copyright (C) 2026 The HalfV Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "halfv/halfv.h"

#include <cmath>
#include <exception>
#include <new>
#include <string>
#include <vector>

#include "halfv/anchorcover.hpp"
#include "halfv/entropy.hpp"
#include "halfv/error.hpp"
#include "halfv/flops.hpp"
#include "halfv/lifecycle.hpp"
#include "halfv/pipeline.hpp"
#include "halfv/trace_io.hpp"
#include "halfv/version.hpp"

struct halfv_trace {
    halfv::LayerTrace trace;
};

struct halfv_profile {
    halfv::ArchProfile profile;
};

namespace {

thread_local std::string g_last_error;

halfv_status status_for(halfv::ErrorKind kind) {
    using halfv::ErrorKind;
    switch (kind) {
        case ErrorKind::Shape: return HALFV_ERR_SHAPE;
        case ErrorKind::Domain: return HALFV_ERR_DOMAIN;
        case ErrorKind::Validation: return HALFV_ERR_VALIDATION;
        case ErrorKind::Format: return HALFV_ERR_FORMAT;
        case ErrorKind::CorruptFile: return HALFV_ERR_CORRUPT;
        case ErrorKind::Io: return HALFV_ERR_IO;
        case ErrorKind::Config: return HALFV_ERR_CONFIG;
        case ErrorKind::DetectionFailure: return HALFV_ERR_DETECTION;
        case ErrorKind::DegenerateSpectrum: return HALFV_ERR_DEGENERATE;
        case ErrorKind::Refused: return HALFV_ERR_REFUSED;
    }
    return HALFV_ERR_INTERNAL;
}

template <class Fn>
halfv_status guarded(Fn&& fn) {
    try {
        fn();
        return HALFV_OK;
    } catch (const halfv::Error& e) {
        g_last_error = std::string(halfv::to_string(e.kind())) + ": " + e.what();
        return status_for(e.kind());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return HALFV_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = std::string("internal error: ") + e.what();
        return HALFV_ERR_INTERNAL;
    }
}

halfv_status null_argument(const char* what) {
    g_last_error = std::string("null argument: ") + what;
    return HALFV_ERR_ARGUMENT;
}

halfv::ReportHeader make_header(const halfv_manifest* manifest) {
    halfv::ReportHeader h;
    h.tool_version = std::string("halfv ") + halfv::kVersion;
    if (manifest) {
        h.subcommand = manifest->subcommand ? manifest->subcommand : "";
        h.seed = manifest->seed;
        h.config_hash = halfv::hash_file(manifest->config_path ? manifest->config_path : "");
    } else {
        h.config_hash = "none";
    }
    return h;
}

std::string out_or_stdout(const char* path) { return path ? path : "-"; }

halfv::ModelDims to_dims(const halfv_model_dims& d) {
    return {d.text_tokens, d.visual_tokens, d.hidden, d.ffn, d.layers};
}

halfv_flops_budget to_c(const halfv::FlopsBudget& b) {
    return {b.l1, b.l2, b.l3, b.v_prime, b.v_ssr, b.f1, b.f2, b.f3, b.total};
}

halfv::FlopsBudget from_c(const halfv_flops_budget& c, const halfv_model_dims* dims) {
    halfv::FlopsBudget b;
    b.l1 = c.l1;
    b.l2 = c.l2;
    b.l3 = c.l3;
    b.v_prime = c.v_prime;
    b.v_ssr = c.v_ssr;
    b.f1 = c.f1;
    b.f2 = c.f2;
    b.f3 = c.f3;
    b.total = c.total;
    if (dims) {
        b.h = dims->hidden;
        b.m = dims->ffn;
    }
    return b;
}

}  // namespace

extern "C" {

const char* halfv_version(void) { return halfv::kVersion; }

const char* halfv_last_error(void) { return g_last_error.c_str(); }

const char* halfv_status_name(halfv_status status) {
    switch (status) {
        case HALFV_OK: return "ok";
        case HALFV_ERR_SHAPE: return "shape";
        case HALFV_ERR_DOMAIN: return "domain";
        case HALFV_ERR_VALIDATION: return "validation";
        case HALFV_ERR_FORMAT: return "format";
        case HALFV_ERR_CORRUPT: return "corrupt";
        case HALFV_ERR_IO: return "io";
        case HALFV_ERR_CONFIG: return "config";
        case HALFV_ERR_DETECTION: return "detection";
        case HALFV_ERR_DEGENERATE: return "degenerate";
        case HALFV_ERR_REFUSED: return "refused";
        case HALFV_ERR_ARGUMENT: return "argument";
        case HALFV_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

int halfv_status_exit_code(halfv_status status) {
    switch (status) {
        case HALFV_OK: return 0;
        case HALFV_ERR_IO: return 3;
        default: return 2;
    }
}

halfv_status halfv_trace_read(const char* path, halfv_trace** out) {
    if (!path) return null_argument("path");
    if (!out) return null_argument("out");
    *out = nullptr;
    return guarded([&] { *out = new halfv_trace{halfv::read_trace(path)}; });
}

halfv_status halfv_trace_write(const halfv_trace* trace, const char* path) {
    if (!trace) return null_argument("trace");
    if (!path) return null_argument("path");
    return guarded([&] { halfv::write_trace(trace->trace, path); });
}

void halfv_trace_free(halfv_trace* trace) { delete trace; }

halfv_status halfv_trace_dims(const halfv_trace* trace, uint32_t* num_layers,
                              uint32_t* num_tokens, uint32_t* dim, uint32_t* num_visual) {
    if (!trace) return null_argument("trace");
    const auto& t = trace->trace;
    if (num_layers) *num_layers = static_cast<uint32_t>(t.num_layers());
    if (num_tokens) *num_tokens = static_cast<uint32_t>(t.num_tokens());
    if (dim) *dim = static_cast<uint32_t>(t.dim());
    if (num_visual) *num_visual = static_cast<uint32_t>(t.num_visual());
    return HALFV_OK;
}

halfv_status halfv_profile_load(const char* path, halfv_profile** out) {
    if (!path) return null_argument("path");
    if (!out) return null_argument("out");
    *out = nullptr;
    return guarded([&] { *out = new halfv_profile{halfv::ArchProfile::load(path)}; });
}

halfv_status halfv_profile_preset(const char* name, halfv_profile** out) {
    if (!name) return null_argument("name");
    if (!out) return null_argument("out");
    *out = nullptr;
    return guarded([&] { *out = new halfv_profile{halfv::profile_preset(name)}; });
}

void halfv_profile_free(halfv_profile* profile) { delete profile; }

halfv_status halfv_probe(const halfv_trace* trace, unsigned groups, const char* out_path,
                         const halfv_manifest* manifest) {
    if (!trace) return null_argument("trace");
    return guarded([&] {
        std::vector<halfv::TokenGroup> selected;
        if (groups & HALFV_GROUP_VISUAL) selected.push_back(halfv::TokenGroup::Visual);
        if (groups & HALFV_GROUP_TEXT) selected.push_back(halfv::TokenGroup::Text);
        if (groups & HALFV_GROUP_ALL) selected.push_back(halfv::TokenGroup::All);
        const auto traj = halfv::probe_trace(trace->trace, selected);

        halfv::Table table{{"layer", "group", "elbow_k", "entropy"}, {}};
        for (const auto& r : traj.records) {
            table.add({static_cast<std::int64_t>(r.layer), std::string(halfv::to_string(r.group)),
                       static_cast<std::int64_t>(r.spectrum.elbow_k),
                       r.spectrum.truncated_entropy});
        }
        const auto header = make_header(manifest);
        halfv::write_report(table, out_or_stdout(out_path), &header);
    });
}

void halfv_stage_params_default(halfv_stage_params* params) {
    if (!params) return;
    const halfv::StageParams d;
    params->window = static_cast<uint32_t>(d.window);
    params->delta = d.delta;
    params->tau = d.tau;
    params->l_ivr_override = -1;
    params->l_ssr_override = -1;
}

halfv_status halfv_detect_stages(const halfv_trace* trace, const halfv_stage_params* params,
                                 const char* out_path, const halfv_manifest* manifest,
                                 uint32_t* stage2, uint32_t* stage3) {
    if (!trace) return null_argument("trace");
    halfv_stage_params p;
    halfv_stage_params_default(&p);
    if (params) p = *params;
    return guarded([&] {
        const halfv::TokenGroup visual[] = {halfv::TokenGroup::Visual};
        const auto traj = halfv::probe_trace(trace->trace, visual);
        const auto curve = traj.curve(halfv::TokenGroup::Visual);
        const std::size_t layers = curve.size();

        const bool overridden = p.l_ivr_override >= 0 && p.l_ssr_override >= 0;
        std::size_t s2 = 0, s3 = 0;
        std::string notes;
        if (overridden) {
            s2 = static_cast<std::size_t>(p.l_ivr_override);
            s3 = static_cast<std::size_t>(p.l_ssr_override);
            if (!(0 < s2 && s2 < s3 && s3 < layers)) {
                halfv::fail(halfv::ErrorKind::Config, "overrides need 0 < l_ivr < l_ssr < layers");
            }
            notes = "onsets from explicit overrides";
        } else {
            if (p.l_ivr_override >= 0 || p.l_ssr_override >= 0) {
                halfv::fail(halfv::ErrorKind::Config, "give both l_ivr and l_ssr overrides");
            }
            const halfv::StageParams sp{p.window, p.delta, p.tau};
            const auto report = halfv::detect_stages(traj, sp);
            s2 = report.stage2_onset;
            s3 = report.stage3_onset;
            notes = report.method_notes;
        }

        halfv::Table table{{"layer", "visual_entropy", "elbow_k", "stage"}, {}};
        for (std::size_t l = 0; l < layers; ++l) {
            const std::int64_t stage = l < s2 ? 1 : (l < s3 ? 2 : 3);
            table.add({static_cast<std::int64_t>(l), curve[l],
                       static_cast<std::int64_t>(traj.records[l].spectrum.elbow_k), stage});
        }
        auto header = make_header(manifest);
        header.notes.push_back("stage2_onset=" + std::to_string(s2));
        header.notes.push_back("stage3_onset=" + std::to_string(s3));
        header.notes.push_back(notes);
        halfv::write_report(table, out_or_stdout(out_path), &header);
        if (stage2) *stage2 = static_cast<uint32_t>(s2);
        if (stage3) *stage3 = static_cast<uint32_t>(s3);
    });
}

halfv_status halfv_marginal_utility(double delta_perf, double delta_cost, double epsilon,
                                    double* out_value) {
    if (!out_value) return null_argument("out_value");
    return guarded(
        [&] { *out_value = halfv::marginal_utility(delta_perf, delta_cost, epsilon).value; });
}

halfv_status halfv_prune(const halfv_trace* trace, const halfv_profile* profile, int32_t layer,
                         int32_t budget, const char* out_path, const halfv_manifest* manifest) {
    if (!trace) return null_argument("trace");
    if (!profile) return null_argument("profile");
    return guarded([&] {
        const auto& t = trace->trace;
        const auto& prof = profile->profile;
        std::size_t at = 0;
        if (layer >= 0) {
            at = static_cast<std::size_t>(layer);
        } else if (prof.l_ivr) {
            at = *prof.l_ivr;
        } else {
            halfv::fail(halfv::ErrorKind::Config, "no pruning layer: set l_ivr or pass a layer");
        }
        const auto ctx = halfv::relevance_context_from_trace(t, at);
        const std::size_t v = ctx.visual_keys.rows();
        const std::size_t k = budget >= 0 ? static_cast<std::size_t>(budget)
                                          : halfv::ivr_keep_count(prof.r_ivr.front(), v);
        const auto plan = halfv::plan_prune(ctx.visual_keys, ctx, k, prof.r_anchor);

        auto header = make_header(manifest);
        header.notes.push_back("layer=" + std::to_string(at) + " budget=" + std::to_string(k) +
                               " anchors=" + std::to_string(plan.anchor_set.size()));
        halfv::write_report(halfv::prune_plan_table(plan), out_or_stdout(out_path), &header);
    });
}

halfv_status halfv_model_preset(const char* name, halfv_model_dims* out) {
    if (!name) return null_argument("name");
    if (!out) return null_argument("out");
    return guarded([&] {
        const auto d = halfv::model_preset(name);
        *out = {d.text_tokens, d.visual_tokens, d.hidden, d.ffn, d.layers};
    });
}

halfv_status halfv_flops(const halfv_profile* profile, const halfv_model_dims* dims,
                         halfv_flops_budget* out) {
    if (!dims) return null_argument("dims");
    if (!out) return null_argument("out");
    return guarded([&] {
        const auto b = profile ? halfv::total_flops(profile->profile, to_dims(*dims))
                               : halfv::vanilla_flops(to_dims(*dims));
        *out = to_c(b);
    });
}

halfv_status halfv_flops_speedup(const halfv_flops_budget* vanilla,
                                 const halfv_flops_budget* accelerated, double* out) {
    if (!vanilla || !accelerated) return null_argument("budget");
    if (!out) return null_argument("out");
    return guarded([&] {
        *out = halfv::speedup(from_c(*vanilla, nullptr), from_c(*accelerated, nullptr));
    });
}

namespace {

std::vector<halfv::Cell> budget_row(const std::string& name, const halfv::FlopsBudget& b,
                                    double speedup) {
    return {name,
            static_cast<std::int64_t>(b.t),
            static_cast<std::int64_t>(b.v),
            static_cast<std::int64_t>(b.v_prime),
            static_cast<std::int64_t>(b.v_ssr),
            static_cast<std::int64_t>(b.l1),
            static_cast<std::int64_t>(b.l2),
            static_cast<std::int64_t>(b.l3),
            b.f1,
            b.f2,
            b.f3,
            b.total,
            speedup};
}

const std::vector<std::string> kBudgetColumns = {"schedule", "t",  "v",  "v_prime", "v_ssr",
                                                 "l1",       "l2", "l3", "f1",      "f2",
                                                 "f3",       "total", "speedup"};

}  // namespace

halfv_status halfv_flops_report(const halfv_profile* profile, const halfv_model_dims* dims,
                                const char* out_path, const halfv_manifest* manifest) {
    if (!dims) return null_argument("dims");
    return guarded([&] {
        const auto d = to_dims(*dims);
        const auto vanilla = halfv::vanilla_flops(d);
        halfv::Table table{kBudgetColumns, {}};
        table.add(budget_row("vanilla", vanilla, 1.0));
        if (profile) {
            const auto accel = halfv::total_flops(profile->profile, d);
            table.add(budget_row("profile", accel, halfv::speedup(vanilla, accel)));
        }
        auto header = make_header(manifest);
        if (profile) header.notes.push_back("profile=" + profile->profile.to_json_text());
        halfv::write_report(table, out_or_stdout(out_path), &header);
    });
}

halfv_status halfv_flops_sweep(const halfv_profile* base, const halfv_model_dims* dims,
                               const halfv_sweep_grid* grid, const char* out_path,
                               const halfv_manifest* manifest) {
    if (!dims) return null_argument("dims");
    return guarded([&] {
        const auto d = to_dims(*dims);
        const halfv::ArchProfile proto = base ? base->profile : halfv::ArchProfile{};
        std::vector<double> r_ivr = {0.25, 0.5, 0.75};
        std::vector<double> r_ssr = {0.05, 0.1, 0.25};
        if (grid && grid->r_ivr && grid->r_ivr_count > 0) {
            r_ivr.assign(grid->r_ivr, grid->r_ivr + grid->r_ivr_count);
        }
        if (grid && grid->r_ssr && grid->r_ssr_count > 0) {
            r_ssr.assign(grid->r_ssr, grid->r_ssr + grid->r_ssr_count);
        }
        const bool sparse = proto.ssr_mode == halfv::SsrMode::TokenSparsity;
        if (!sparse) r_ssr = {std::nan("")};

        const auto vanilla = halfv::vanilla_flops(d);
        halfv::Table table{{"l_ivr", "r_ivr", "l_ssr", "r_ssr", "v_prime", "v_ssr", "total",
                            "speedup"},
                           {}};
        for (std::size_t l_ivr = 1; l_ivr + 1 < d.layers; ++l_ivr) {
            for (std::size_t l_ssr = l_ivr + 1; l_ssr < d.layers; ++l_ssr) {
                for (double ri : r_ivr) {
                    for (double rs : r_ssr) {
                        halfv::ArchProfile p = proto;
                        p.l_ivr = l_ivr;
                        p.l_ssr = l_ssr;
                        p.r_ivr = {ri};
                        p.r_ssr = sparse ? std::optional<double>(rs) : std::nullopt;
                        const auto b = halfv::total_flops(p, d);
                        table.add({static_cast<std::int64_t>(l_ivr), ri,
                                   static_cast<std::int64_t>(l_ssr),
                                   sparse ? halfv::Cell(rs) : halfv::Cell(std::string()),
                                   static_cast<std::int64_t>(b.v_prime),
                                   static_cast<std::int64_t>(b.v_ssr), b.total,
                                   halfv::speedup(vanilla, b)});
                    }
                }
            }
        }
        auto header = make_header(manifest);
        header.notes.push_back(std::string("ssr_mode=") + halfv::to_string(proto.ssr_mode));
        halfv::write_report(table, out_or_stdout(out_path), &header);
    });
}

halfv_status halfv_simulate(const char* config_path, const char* out_dir, int has_seed,
                            uint64_t seed, int dump_traces, halfv_simulation_summary* summary) {
    if (!config_path) return null_argument("config_path");
    if (!out_dir) return null_argument("out_dir");
    return guarded([&] {
        auto cfg = halfv::SimulationConfig::load(config_path);
        if (has_seed) cfg.override_seed(seed);

        halfv::ReportHeader header;
        header.tool_version = std::string("halfv ") + halfv::kVersion;
        header.subcommand = "simulate";
        header.seed = cfg.decoder.seed;
        header.config_hash = halfv::hash_file(config_path);
        header.notes.push_back("input_seed=" + std::to_string(cfg.input_seed));
        header.notes.push_back("profile=" + cfg.profile.to_json_text());

        const auto s = halfv::simulate(cfg, out_dir, dump_traces != 0, header);
        if (summary) {
            *summary = {s.kl_vanilla_halfv, s.counted_vanilla, s.counted_halfv,
                        s.analytic_vanilla, s.analytic_halfv,  s.analytic_speedup,
                        s.counted_speedup,  s.v_prime,         s.v_ssr};
        }
    });
}

}  // extern "C"
