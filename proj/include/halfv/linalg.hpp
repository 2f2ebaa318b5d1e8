// Copyright (C) 2026 The HalfV Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace halfv {

/// Row-major dense matrix of doubles. Entries are checked for finiteness when
/// the matrix is built from external data.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols);
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static DenseMatrix identity(std::size_t n);
    static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return m_rows; }
    std::size_t cols() const noexcept { return m_cols; }
    bool empty() const noexcept { return m_rows == 0 || m_cols == 0; }

    double& operator()(std::size_t r, std::size_t c) noexcept { return m_data[r * m_cols + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return m_data[r * m_cols + c]; }

    std::span<double> row(std::size_t r) noexcept { return {m_data.data() + r * m_cols, m_cols}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {m_data.data() + r * m_cols, m_cols};
    }

    std::span<const double> data() const noexcept { return m_data; }
    std::span<double> data() noexcept { return m_data; }

    DenseMatrix transpose() const;
    DenseMatrix select_rows(std::span<const std::size_t> indices) const;

    bool operator==(const DenseMatrix& other) const = default;

private:
    std::size_t m_rows = 0;
    std::size_t m_cols = 0;
    std::vector<double> m_data;
};

struct EigenDecomposition {
    std::vector<double> eigenvalues;  // non-increasing
    DenseMatrix eigenvectors;         // column i pairs with eigenvalues[i]
};

/// Accumulates each output entry over the inner index in ascending order.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

/// Cyclic Jacobi eigensolver for symmetric matrices. The input is symmetrized
/// as (A + A^T) / 2 before rotation; asymmetry above 1e-9 relative is rejected.
EigenDecomposition sym_eig(const DenseMatrix& a);

DenseMatrix softmax_rows(const DenseMatrix& a);

/// Zero rows are returned unchanged.
DenseMatrix l2_normalize_rows(const DenseMatrix& a);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);
double frobenius_norm(const DenseMatrix& a);
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);

}  // namespace halfv
