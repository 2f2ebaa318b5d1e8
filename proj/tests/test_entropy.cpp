// Copyright (C) 2026 The HalfV Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "halfv/entropy.hpp"
#include "halfv/error.hpp"
#include "support/oracles.hpp"

using halfv::DenseMatrix;
using halfv::GramSide;
using halfv::TokenGroup;

namespace {

// Entropy of the top-k normalized values, written out directly.
double direct_entropy(const std::vector<double>& eig, std::size_t k) {
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += eig[i];
    double h = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double p = eig[i] / sum;
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

// Largest log-gap with ties to the smaller k, ln 2 threshold.
std::size_t direct_elbow(const std::vector<double>& eig) {
    std::vector<double> pos;
    for (double l : eig)
        if (l > 1e-12 * eig[0]) pos.push_back(l);
    std::size_t k = pos.size();
    double best = -1.0;
    for (std::size_t i = 0; i + 1 < pos.size(); ++i) {
        const double gap = std::log(pos[i]) - std::log(pos[i + 1]);
        if (gap > best) {
            best = gap;
            k = i + 1;
        }
    }
    return best < std::log(2.0) ? pos.size() : k;
}

halfv::LayerTrace random_trace(std::uint64_t seed, std::size_t layers, std::size_t nv,
                               std::size_t nt, std::size_t dim) {
    halfv::SplitMix64 rng(seed);
    halfv::LayerTrace t;
    t.modality.assign(nv, halfv::Modality::Visual);
    t.modality.insert(t.modality.end(), nt, halfv::Modality::Text);
    for (std::size_t l = 0; l < layers; ++l) t.states.push_back(oracle::random_matrix(nv + nt, dim, rng));
    return t;
}

}  // namespace

TEST_CASE("gram branch selection") {
    CHECK(halfv::gram(DenseMatrix::identity(2)) == DenseMatrix::identity(2));
    const auto z = DenseMatrix::from_rows({{1, 0, 0}, {0, 2, 0}});
    const auto g = halfv::gram(z);
    CHECK(g == DenseMatrix::from_rows({{1, 0}, {0, 4}}));
    CHECK(halfv::gram_side_for(z) == GramSide::TokensSide);
    CHECK(halfv::gram_side_for(z.transpose()) == GramSide::DimsSide);
    CHECK_THROWS_AS(halfv::gram(DenseMatrix()), halfv::Error);
}

TEST_CASE("nonzero spectra of both gram products agree") {
    halfv::SplitMix64 rng(5);
    const auto z = oracle::random_matrix(4, 3, rng);
    const auto a = halfv::gram_spectrum(halfv::gram(z, GramSide::DimsSide));
    const auto b = halfv::gram_spectrum(halfv::gram(z, GramSide::TokensSide));
    REQUIRE(a.size() == 3);
    REQUIRE(b.size() == 4);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-9);
    CHECK(std::abs(b[3]) <= 1e-9);
}

TEST_CASE("gram spectrum clipping") {
    // eigenvalues 1 and -1e-10 (clipped) vs 1 and -1e-3 (rejected)
    const auto near = halfv::gram_spectrum(DenseMatrix::from_rows({{1, 0}, {0, -1e-10}}));
    CHECK(near[1] == 0.0);
    CHECK_THROWS_AS(halfv::gram_spectrum(DenseMatrix::from_rows({{1, 0}, {0, -1e-3}})),
                    halfv::Error);
}

TEST_CASE("elbow detector") {
    const std::vector<double> a = {10, 9.5, 9, 0.01, 0.009};
    CHECK(halfv::elbow_index(a) == 3);
    CHECK(direct_elbow(a) == 3);
    CHECK(halfv::elbow_index(std::vector<double>{5}) == 1);
    CHECK(halfv::elbow_index(std::vector<double>{1, 1, 1, 1}) == 4);
    // equal gaps: smaller k wins
    CHECK(halfv::elbow_index(std::vector<double>{4, 2, 1}) == 1);
    // zeros below the floor are ignored
    CHECK(halfv::elbow_index(std::vector<double>{2, 2, 0, 0}) == 2);
    try {
        halfv::elbow_index(std::vector<double>{0, 0});
        FAIL("zero spectrum accepted");
    } catch (const halfv::Error& e) {
        CHECK(e.kind() == halfv::ErrorKind::DegenerateSpectrum);
    }

    halfv::SplitMix64 rng(6);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> eig(1 + rng.below(10));
        for (auto& x : eig) x = std::exp(rng.uniform(-8, 3));
        std::sort(eig.rbegin(), eig.rend());
        CHECK(halfv::elbow_index(eig) == direct_elbow(eig));
    }
}

TEST_CASE("truncated entropy values") {
    for (std::size_t k = 1; k <= 9; ++k) {
        const std::vector<double> flat(k, 2.7);
        CHECK(std::abs(halfv::truncated_entropy(flat, k) - std::log(double(k))) <= 1e-12);
    }
    CHECK(halfv::truncated_entropy(std::vector<double>{7, 3}, 1) == 0.0);
    const double expected = -(0.75 * std::log(0.75) + 0.25 * std::log(0.25));
    CHECK(std::abs(halfv::truncated_entropy(std::vector<double>{3, 1}, 2) - expected) <= 1e-15);
    CHECK(std::abs(expected - 0.5623) < 1e-4);
    CHECK_THROWS_AS(halfv::truncated_entropy(std::vector<double>{1, 0}, 2), halfv::Error);
    CHECK_THROWS_AS(halfv::truncated_entropy(std::vector<double>{1}, 0), halfv::Error);
}

TEST_CASE("summarize composes the primitive steps") {
    halfv::SplitMix64 rng(7);
    for (int trial = 0; trial < 30; ++trial) {
        const auto z = oracle::random_matrix(2 + rng.below(8), 2 + rng.below(8), rng);
        const auto s = halfv::summarize(z);
        const auto eig = halfv::gram_spectrum(halfv::gram(z));
        CHECK(s.eigenvalues == eig);
        CHECK(s.elbow_k == direct_elbow(eig));
        CHECK(std::abs(s.truncated_entropy - direct_entropy(eig, s.elbow_k)) <= 1e-12);
    }
}

TEST_CASE("rank-one and orthonormal traces") {
    halfv::LayerTrace collapse;
    collapse.modality = {halfv::Modality::Visual, halfv::Modality::Visual, halfv::Modality::Visual,
                         halfv::Modality::Text};
    for (int l = 0; l < 3; ++l) {
        DenseMatrix m(4, 5);
        for (std::size_t r = 0; r < 3; ++r)
            for (std::size_t c = 0; c < 5; ++c) m(r, c) = 0.5 + double(c) + l;
        m(3, 0) = 1.0;
        collapse.states.push_back(m);
    }
    const TokenGroup visual[] = {TokenGroup::Visual};
    for (double h : halfv::probe_trace(collapse, visual).curve(TokenGroup::Visual)) CHECK(h == 0.0);

    halfv::LayerTrace iso;
    iso.modality = collapse.modality;
    DenseMatrix m(4, 6);
    m(0, 0) = m(1, 1) = m(2, 2) = 1.0;
    m(3, 4) = 1.0;
    iso.states = {m, m};
    const auto traj = halfv::probe_trace(iso, visual);
    for (const auto& r : traj.records) {
        CHECK(r.spectrum.elbow_k == 3);
        CHECK(std::abs(r.spectrum.truncated_entropy - std::log(3.0)) <= 1e-12);
    }
}

TEST_CASE("probe trajectory equals per-layer composition") {
    const auto t = random_trace(8, 4, 6, 3, 5);
    const TokenGroup groups[] = {TokenGroup::Visual, TokenGroup::Text, TokenGroup::All};
    const auto traj = halfv::probe_trace(t, groups);
    REQUIRE(traj.records.size() == 12);
    std::size_t i = 0;
    for (std::size_t l = 0; l < 4; ++l) {
        for (TokenGroup g : groups) {
            const auto& rec = traj.records[i++];
            CHECK(rec.layer == l);
            CHECK(rec.group == g);
            std::vector<std::size_t> rows;
            for (std::size_t r = 0; r < 9; ++r) {
                const bool vis = r < 6;
                if (g == TokenGroup::All || (g == TokenGroup::Visual) == vis) rows.push_back(r);
            }
            const auto z = t.states[l].select_rows(rows);
            const auto eig = halfv::gram_spectrum(halfv::gram(z));
            const auto k = halfv::elbow_index(eig);
            CHECK(rec.spectrum.elbow_k == k);
            CHECK(std::abs(rec.spectrum.truncated_entropy - halfv::truncated_entropy(eig, k)) <= 1e-12);
        }
    }
    const auto curve = traj.curve(TokenGroup::Text);
    CHECK(curve.size() == 4);
}

TEST_CASE("missing group is a validation error") {
    auto t = random_trace(9, 2, 0, 3, 4);
    const TokenGroup visual[] = {TokenGroup::Visual};
    try {
        halfv::probe_trace(t, visual);
        FAIL("empty group accepted");
    } catch (const halfv::Error& e) {
        CHECK(e.kind() == halfv::ErrorKind::Validation);
    }
}
