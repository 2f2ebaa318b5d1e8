// Copyright (C) 2026 The HalfV Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "halfv/linalg.hpp"
#include "halfv/trace_io.hpp"

namespace halfv {

enum class GramSide {
    TokensSide,  // Z Z^T, N x N
    DimsSide,    // Z^T Z, D x D
};

enum class TokenGroup { Visual, Text, All };

const char* to_string(TokenGroup group);

struct SpectrumSummary {
    std::vector<double> eigenvalues;  // descending, clipped at zero
    std::size_t elbow_k = 0;
    double truncated_entropy = 0.0;
    GramSide gram_side = GramSide::DimsSide;
};

struct EntropyRecord {
    std::size_t layer = 0;
    TokenGroup group = TokenGroup::Visual;
    SpectrumSummary spectrum;
};

/// Records in layer-major order, groups in request order within a layer.
struct EntropyTrajectory {
    std::vector<EntropyRecord> records;

    /// Truncated entropy per layer for one group.
    std::vector<double> curve(TokenGroup group) const;
};

/// Z^T Z when N >= D, otherwise Z Z^T.
DenseMatrix gram(const DenseMatrix& z);
GramSide gram_side_for(const DenseMatrix& z);
/// Forces one side regardless of shape.
DenseMatrix gram(const DenseMatrix& z, GramSide side);

/// Eigenvalues of a Gram matrix in descending order. Values in [-1e-9, 0)
/// (relative to the largest magnitude) are clipped to zero; anything more
/// negative is rejected as a non-PSD input.
std::vector<double> gram_spectrum(const DenseMatrix& g);

/// Largest log-gap detector. Works on eigenvalues above 1e-12 * lambda_1 and
/// returns the count ahead of the widest gap in ln(lambda); a widest gap below
/// ln 2 means no elbow, and every eigenvalue above the floor is kept.
std::size_t elbow_index(std::span<const double> eigenvalues);

/// Shannon entropy (natural log) of the top-k eigenvalues normalized by their sum.
double truncated_entropy(std::span<const double> eigenvalues, std::size_t k);

/// gram -> spectrum -> elbow -> entropy for one representation matrix.
SpectrumSummary summarize(const DenseMatrix& z);
SpectrumSummary summarize(const DenseMatrix& z, GramSide side);

/// Stacks the selected tokens' hidden states at one layer.
DenseMatrix group_rows(const LayerTrace& trace, std::size_t layer, TokenGroup group);

EntropyTrajectory probe_trace(const LayerTrace& trace, std::span<const TokenGroup> groups);

}  // namespace halfv
