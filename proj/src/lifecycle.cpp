// Copyright (C) 2026 The HalfV Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "halfv/lifecycle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "halfv/decoder.hpp"
#include "halfv/error.hpp"

namespace halfv {

LifecycleReport detect_stages(std::span<const double> curve, const StageParams& params) {
    const std::vector<double> copy(curve.begin(), curve.end());
    const std::size_t n = curve.size();
    const std::size_t w = params.window;
    if (n < 4) fail(ErrorKind::Validation, "stage detection needs at least 4 layers");
    if (w == 0) fail(ErrorKind::Config, "window must be at least 1");
    if (!(params.delta > 0.0) || !(params.tau > 0.0)) {
        fail(ErrorKind::Config, "delta and tau must be positive");
    }

    const auto [lo, hi] = std::minmax_element(curve.begin(), curve.end());
    const double range = *hi - *lo;
    if (!(range > 0.0)) throw DetectionFailure("entropy curve is flat", copy);

    std::size_t stage2 = 0;
    for (std::size_t l = 1; l + w <= n && stage2 == 0; ++l) {
        bool declining = true;
        for (std::size_t j = l; j < l + w && declining; ++j) declining = curve[j] < curve[j - 1];
        if (declining && curve[l - 1] - curve[l + w - 1] >= params.delta * range) stage2 = l;
    }
    if (stage2 == 0) throw DetectionFailure("no sustained entropy decline found", copy);

    std::size_t stage3 = 0;
    for (std::size_t l = stage2 + 1; l + w <= n && stage3 == 0; ++l) {
        bool settled = true;
        for (std::size_t j = l; j < l + w && settled; ++j) {
            settled = std::abs(curve[j] - curve[j - 1]) < params.tau * range;
        }
        if (settled) stage3 = l;
    }
    if (stage3 == 0) throw DetectionFailure("entropy never settles after the decline", copy);

    LifecycleReport report;
    report.stage2_onset = stage2;
    report.stage3_onset = stage3;
    report.entropy_curve = copy;
    char notes[128];
    std::snprintf(notes, sizeof(notes), "window=%zu delta=%g tau=%g range=%.9g", w, params.delta,
                  params.tau, range);
    report.method_notes = notes;
    return report;
}

LifecycleReport detect_stages(const EntropyTrajectory& traj, const StageParams& params) {
    const auto curve = traj.curve(TokenGroup::Visual);
    if (curve.empty()) fail(ErrorKind::Validation, "trajectory has no visual-group curve");
    return detect_stages(curve, params);
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) fail(ErrorKind::Shape, "distributions differ in length");
    double sp = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!(p[i] >= 0.0) || !(q[i] >= 0.0)) fail(ErrorKind::Domain, "negative probability");
        sp += p[i];
        sq += q[i];
    }
    if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9) {
        fail(ErrorKind::Domain, "distributions must sum to 1");
    }
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;
        if (q[i] == 0.0) fail(ErrorKind::Domain, "p has mass outside the support of q");
        kl += p[i] * std::log(p[i] / q[i]);
    }
    return kl;
}

std::vector<double> layer_kl_probe(const ToyDecoder& decoder, const DenseMatrix& embeddings,
                                   const std::vector<Modality>& modality,
                                   std::span<const LayerUpdatePolicy> base_schedule) {
    std::vector<LayerUpdatePolicy> base(base_schedule.begin(), base_schedule.end());
    if (base.empty()) base.resize(decoder.num_layers());
    const ForwardResult reference = forward(decoder, embeddings, modality, base);

    std::vector<double> kl(decoder.num_layers());
    for (std::size_t l = 0; l < decoder.num_layers(); ++l) {
        auto schedule = base;
        schedule[l].mode = UpdateMode::FreezeVisual;
        const ForwardResult probed = forward(decoder, embeddings, modality, schedule);
        kl[l] = kl_divergence(reference.next_token_distribution, probed.next_token_distribution);
    }
    return kl;
}

MarginalUtility marginal_utility(double delta_perf, double delta_cost, double epsilon) {
    const double denom = delta_cost + epsilon;
    if (!(denom > 0.0)) fail(ErrorKind::Domain, "delta_cost + epsilon must be positive");
    const double value = -delta_perf / denom;
    return {delta_perf, delta_cost, epsilon, value == 0.0 ? 0.0 : value};
}

}  // namespace halfv
