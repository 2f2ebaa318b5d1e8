// Copyright (C) 2026 The HalfV Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "halfv/pipeline.hpp"

#include <algorithm>
#include <numeric>

#include <json.hpp>

#include "halfv/error.hpp"
#include "halfv/lifecycle.hpp"
#include "halfv/rng.hpp"

namespace halfv {

HalfvRun run_halfv(const ToyDecoder& decoder, const DenseMatrix& embeddings,
                   const std::vector<Modality>& modality, const ArchProfile& profile,
                   FrozenKvCache* cache) {
    profile.validate_for_layers(decoder.num_layers());
    HalfvRun run;
    DecoderState state = begin_forward(decoder, embeddings, modality);
    const std::size_t v = state.num_visual();
    run.v_prime = v;
    run.v_ssr = v;
    const StepOptions options{cache, &run.capture};

    for (std::size_t l = 0; l < decoder.num_layers(); ++l) {
        if (profile.l_ivr && l == *profile.l_ivr && v > 0) {
            const RelevanceContext ctx =
                relevance_context(decoder, state, l, PositionalEncoding::Disabled);
            state.tally.selection += relevance_flops(ctx.query.size(), ctx.visual_keys.rows());
            std::vector<std::size_t> vis(state.num_visual());
            std::iota(vis.begin(), vis.end(), 0);
            run.ivr_plan = plan_prune(state.hidden.select_rows(vis), ctx,
                                      ivr_keep_count(profile.r_ivr.front(), v), profile.r_anchor);
            retain_visual(state, run.ivr_plan->selected);
            run.v_prime = state.num_visual();
            run.v_ssr = run.v_prime;
        }
        if (profile.l_ssr && l == *profile.l_ssr && state.num_visual() > 0) {
            run.ssr_kept = apply_ssr(decoder, state, profile, v);
            run.v_ssr = run.ssr_kept.size();
        }
        step_layer(decoder, state, LayerUpdatePolicy{}, options);
    }
    run.result = finish_forward(decoder, state, &run.capture);
    return run;
}

// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

std::size_t count_field(const json& v, const std::string& key) {
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        fail(ErrorKind::Config, key + " must be a non-negative integer");
    }
    return v.get<std::size_t>();
}

std::uint64_t seed_field(const json& v, const std::string& key) {
    if (!v.is_number_integer()) fail(ErrorKind::Config, key + " must be an integer");
    return v.is_number_unsigned() ? v.get<std::uint64_t>()
                                  : static_cast<std::uint64_t>(v.get<long long>());
}

}  // namespace

SimulationConfig SimulationConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorKind::Config, std::string("simulation config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) fail(ErrorKind::Config, "simulation config must be a JSON object");

    SimulationConfig cfg;
    for (const auto& [key, value] : j.items()) {
        if (key == "decoder") {
            if (!value.is_object()) fail(ErrorKind::Config, "decoder must be an object");
            for (const auto& [k, v] : value.items()) {
                if (k == "num_layers") cfg.decoder.num_layers = count_field(v, k);
                else if (k == "hidden_dim") cfg.decoder.hidden_dim = count_field(v, k);
                else if (k == "num_heads") cfg.decoder.num_heads = count_field(v, k);
                else if (k == "ffn_dim") cfg.decoder.ffn_dim = count_field(v, k);
                else if (k == "vocab") cfg.decoder.vocab = count_field(v, k);
                else if (k == "seed") cfg.decoder.seed = seed_field(v, k);
                else if (k == "rope_base") {
                    if (!v.is_number()) fail(ErrorKind::Config, "rope_base must be a number");
                    cfg.decoder.rope_base = v.get<double>();
                } else {
                    fail(ErrorKind::Config, "unknown decoder key '" + k + "'");
                }
            }
        } else if (key == "profile") {
            cfg.profile = ArchProfile::from_json_text(value.dump());
        } else if (key == "input") {
            if (!value.is_object()) fail(ErrorKind::Config, "input must be an object");
            for (const auto& [k, v] : value.items()) {
                if (k == "visual_tokens") cfg.visual_tokens = count_field(v, k);
                else if (k == "text_tokens") cfg.text_tokens = count_field(v, k);
                else if (k == "seed") cfg.input_seed = seed_field(v, k);
                else if (k == "visual_embeddings") {
                    const auto kind = v.is_string() ? v.get<std::string>() : std::string();
                    if (kind == "random") cfg.zero_visual = false;
                    else if (kind == "zero") cfg.zero_visual = true;
                    else fail(ErrorKind::Config, "visual_embeddings must be random or zero");
                } else {
                    fail(ErrorKind::Config, "unknown input key '" + k + "'");
                }
            }
        } else {
            fail(ErrorKind::Config, "unknown simulation key '" + key + "'");
        }
    }
    cfg.decoder.validate();
    if (cfg.text_tokens == 0) fail(ErrorKind::Config, "input needs at least one text token");
    cfg.profile.validate_for_layers(cfg.decoder.num_layers);
    return cfg;
}

SimulationConfig SimulationConfig::load(const std::filesystem::path& path) {
    return from_json_text(read_text_file(path));
}

void SimulationConfig::override_seed(std::uint64_t seed) {
    decoder.seed = seed;
    input_seed = SplitMix64(seed).next();
}

SimulationOutputs run_simulation(const SimulationConfig& cfg) {
    const ToyDecoder decoder = build_decoder(cfg.decoder);
    DenseMatrix emb = synth_embeddings(cfg.visual_tokens, cfg.text_tokens,
                                       cfg.decoder.hidden_dim, cfg.input_seed);
    if (cfg.zero_visual) {
        for (std::size_t i = 0; i < cfg.visual_tokens; ++i) std::ranges::fill(emb.row(i), 0.0);
    }
    const auto modality = prefill_modality(cfg.visual_tokens, cfg.text_tokens);

    SimulationOutputs out;
    out.vanilla = forward(decoder, emb, modality, {}, StepOptions{nullptr, &out.vanilla_capture});
    out.halfv = run_halfv(decoder, emb, modality, cfg.profile);
    out.layer_kl = layer_kl_probe(decoder, emb, modality);

    const ModelDims dims{cfg.text_tokens, cfg.visual_tokens, cfg.decoder.hidden_dim,
                         cfg.decoder.ffn_dim, cfg.decoder.num_layers};
    out.budget_vanilla = vanilla_flops(dims);
    out.budget_halfv = total_flops(cfg.profile, dims);

    auto& s = out.summary;
    s.kl_vanilla_halfv = kl_divergence(out.vanilla.next_token_distribution,
                                       out.halfv.result.next_token_distribution);
    s.counted_vanilla = out.vanilla.flops_counted;
    s.counted_halfv = out.halfv.result.flops_counted;
    s.analytic_vanilla = out.budget_vanilla.total;
    s.analytic_halfv = out.budget_halfv.total;
    s.analytic_speedup = speedup(out.budget_vanilla, out.budget_halfv);
    s.counted_speedup = s.counted_halfv == 0 ? 0.0
                                             : static_cast<double>(s.counted_vanilla) /
                                                   static_cast<double>(s.counted_halfv);
    s.v_prime = out.halfv.v_prime;
    s.v_ssr = out.halfv.v_ssr;
    return out;
}

Table prune_plan_table(const PrunePlan& plan) {
    Table t{{"token_index", "role", "score"}, {}};
    for (std::size_t idx : plan.selected) {
        const bool anchor =
            std::binary_search(plan.anchor_set.begin(), plan.anchor_set.end(), idx);
        t.add({static_cast<std::int64_t>(idx), std::string(anchor ? "anchor" : "cover"),
               plan.relevance_scores[idx]});
    }
    return t;
}

SimulationSummary simulate(const SimulationConfig& cfg, const std::filesystem::path& out_dir,
                           bool dump_traces, const ReportHeader& header) {
    if (out_dir.empty()) fail(ErrorKind::Io, "empty output directory");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create " + out_dir.string() + ": " + ec.message());

    const SimulationOutputs out = run_simulation(cfg);
    const auto& s = out.summary;

    Table summary{{"schedule", "visual_tokens", "visual_after_ivr", "visual_after_ssr",
                   "counted_flops", "analytic_flops", "counted_speedup", "analytic_speedup",
                   "kl_from_vanilla"},
                  {}};
    const auto v = static_cast<std::int64_t>(cfg.visual_tokens);
    summary.add({std::string("vanilla"), v, v, v, static_cast<std::int64_t>(s.counted_vanilla),
                 s.analytic_vanilla, 1.0, 1.0, 0.0});
    summary.add({std::string("halfv"), v, static_cast<std::int64_t>(s.v_prime),
                 static_cast<std::int64_t>(s.v_ssr), static_cast<std::int64_t>(s.counted_halfv),
                 s.analytic_halfv, s.counted_speedup, s.analytic_speedup, s.kl_vanilla_halfv});
    write_report(summary, out_dir / "simulate.csv", &header);

    const auto& b = out.budget_halfv;
    Table layers{{"layer", "stage", "tokens_vanilla", "tokens_halfv", "counted_vanilla",
                  "counted_halfv", "analytic_halfv", "kl_freeze_probe"},
                 {}};
    for (std::size_t l = 0; l < cfg.decoder.num_layers; ++l) {
        const int stage = l < b.l1 ? 1 : (l < b.l1 + b.l2 ? 2 : 3);
        const double analytic = stage == 1 ? b.f1 : (stage == 2 ? b.f2 : b.f3);
        layers.add({static_cast<std::int64_t>(l), static_cast<std::int64_t>(stage),
                    static_cast<std::int64_t>(out.vanilla_capture.tokens_per_layer[l]),
                    static_cast<std::int64_t>(out.halfv.capture.tokens_per_layer[l]),
                    static_cast<std::int64_t>(out.vanilla_capture.per_layer_flops[l]),
                    static_cast<std::int64_t>(out.halfv.capture.per_layer_flops[l]), analytic,
                    out.layer_kl[l]});
    }
    write_report(layers, out_dir / "layers.csv", &header);

    if (out.halfv.ivr_plan) {
        write_report(prune_plan_table(*out.halfv.ivr_plan), out_dir / "prune_plan.csv", &header);
    }
    if (dump_traces) {
        const auto modality = prefill_modality(cfg.visual_tokens, cfg.text_tokens);
        write_trace(out.vanilla_capture.to_trace(modality), out_dir / "vanilla.hvtd");
        write_trace(out.halfv.capture.to_trace(modality), out_dir / "halfv.hvtd");
    }
    return s;
}

}  // namespace halfv
