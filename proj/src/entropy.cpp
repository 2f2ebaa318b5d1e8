// Copyright (C) 2026 The HalfV Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "halfv/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "halfv/error.hpp"

namespace halfv {

const char* to_string(TokenGroup group) {
    switch (group) {
        case TokenGroup::Visual: return "visual";
        case TokenGroup::Text: return "text";
        case TokenGroup::All: return "all";
    }
    return "?";
}

std::vector<double> EntropyTrajectory::curve(TokenGroup group) const {
    std::vector<double> out;
    for (const auto& r : records)
        if (r.group == group) out.push_back(r.spectrum.truncated_entropy);
    return out;
}

GramSide gram_side_for(const DenseMatrix& z) {
    return z.rows() >= z.cols() ? GramSide::DimsSide : GramSide::TokensSide;
}

DenseMatrix gram(const DenseMatrix& z, GramSide side) {
    if (z.empty()) fail(ErrorKind::Validation, "gram of an empty matrix");
    const DenseMatrix zt = z.transpose();
    return side == GramSide::DimsSide ? matmul(zt, z) : matmul(z, zt);
}

DenseMatrix gram(const DenseMatrix& z) { return gram(z, gram_side_for(z)); }

std::vector<double> gram_spectrum(const DenseMatrix& g) {
    auto values = sym_eig(g).eigenvalues;
    const double scale = values.empty() ? 0.0
                                        : std::max(std::abs(values.front()),
                                                   std::abs(values.back()));
    for (double& v : values) {
        if (v >= 0.0) continue;
        if (v < -1e-9 * std::max(1.0, scale)) {
            fail(ErrorKind::Domain, "Gram matrix has a negative eigenvalue");
        }
        v = 0.0;
    }
    return values;
}

std::size_t elbow_index(std::span<const double> eigenvalues) {
    if (eigenvalues.empty() || !(eigenvalues.front() > 0.0)) {
        fail(ErrorKind::DegenerateSpectrum, "spectrum has no positive eigenvalue");
    }
    const double floor = 1e-12 * eigenvalues.front();
    std::size_t count = 0;
    while (count < eigenvalues.size() && eigenvalues[count] > floor) ++count;

    std::size_t best_k = count;
    double best_gap = -1.0;
    for (std::size_t i = 0; i + 1 < count; ++i) {
        const double gap = std::log(eigenvalues[i]) - std::log(eigenvalues[i + 1]);
        if (gap > best_gap) {
            best_gap = gap;
            best_k = i + 1;
        }
    }
    if (best_gap < std::log(2.0)) return count;
    return best_k;
}

double truncated_entropy(std::span<const double> eigenvalues, std::size_t k) {
    if (k == 0) fail(ErrorKind::Validation, "truncation rank must be at least 1");
    if (k > eigenvalues.size()) {
        fail(ErrorKind::Validation, "truncation rank exceeds the spectrum length");
    }
    double trace_k = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        if (!(eigenvalues[i] > 0.0)) {
            fail(ErrorKind::Validation, "truncation rank exceeds the positive eigenvalue count");
        }
        trace_k += eigenvalues[i];
    }
    double h = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double p = eigenvalues[i] / trace_k;
        h -= p * std::log(p);
    }
    return std::max(h, 0.0);
}

SpectrumSummary summarize(const DenseMatrix& z, GramSide side) {
    SpectrumSummary s;
    s.gram_side = side;
    s.eigenvalues = gram_spectrum(gram(z, side));
    s.elbow_k = elbow_index(s.eigenvalues);
    s.truncated_entropy = truncated_entropy(s.eigenvalues, s.elbow_k);
    return s;
}

SpectrumSummary summarize(const DenseMatrix& z) { return summarize(z, gram_side_for(z)); }

DenseMatrix group_rows(const LayerTrace& trace, std::size_t layer, TokenGroup group) {
    if (layer >= trace.num_layers()) fail(ErrorKind::Validation, "layer out of range");
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < trace.num_tokens(); ++i) {
        const bool visual = trace.modality[i] == Modality::Visual;
        if (group == TokenGroup::All || (group == TokenGroup::Visual) == visual) idx.push_back(i);
    }
    if (idx.empty()) {
        fail(ErrorKind::Validation, std::string("token group '") + to_string(group) + "' is empty");
    }
    return trace.states[layer].select_rows(idx);
}

EntropyTrajectory probe_trace(const LayerTrace& trace, std::span<const TokenGroup> groups) {
    if (groups.empty()) fail(ErrorKind::Validation, "no token group requested");
    trace.validate();
    EntropyTrajectory traj;
    for (std::size_t l = 0; l < trace.num_layers(); ++l) {
        for (auto g : groups) {
            traj.records.push_back({l, g, summarize(group_rows(trace, l, g))});
        }
    }
    return traj;
}

}  // namespace halfv
