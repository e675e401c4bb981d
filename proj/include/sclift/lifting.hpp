// SPDX-License-Identifier: Apache-2.0
//
// sclift - array self-calibration with off-grid direction-of-arrival estimation
// Copyright (C) 2026 The sclift authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

// Lifting of the bilinear self-calibration model.
//
// With D = diag(B h) and a dictionary G (M x PN), the snapshots obey
// Y = D G X. Writing b_i for the i-th column of B^H and g_i^T for the i-th
// row of G, sensor i sees
//
//     Y(i, :) = b_i^H  Xt  Gt_i,      Xt = h [x_1^T, ..., x_L^T]   (m x PLN)
//
// where Gt_i is block diagonal with g_i repeated L times. The map Xt -> Y is
// linear; its matrix Phi (ML x mPLN) acts on the column stack of Xt and
// produces the column stack of Y^T, i.e. rows are ordered sensor-major:
// row i*L + l holds Y(i, l).
//
// Lifted column layout: snapshot l occupies columns [l*PN, (l+1)*PN). Within a
// snapshot block the first N columns carry s-bar and, for the off-grid
// dictionary (P = 2), the next N carry p = beta .* s-bar.

#include "sclift/array_model.hpp"
#include "sclift/common.hpp"
#include "sclift/grid.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <cstddef>

namespace sclift {

// Lifted unknown, m x (P L N), laid out as documented above.
using LiftedMatrix = CMatrix;

struct Dictionary {
    CMatrix steering;   // A-bar, M x N
    CMatrix derivative; // B-bar, M x N
    CMatrix combined;   // G = [A-bar, B-bar], M x 2N
};

inline Dictionary build_dictionary(const ArrayGeometry& geometry, const AngleGrid& grid)
{
    geometry.validate();
    const int M = geometry.num_sensors;
    const int N = grid.size();
    if (N < 1) throw DomainError("build_dictionary: empty grid");
    Dictionary dict;
    dict.steering.resize(M, N);
    dict.derivative.resize(M, N);
    for (int i = 0; i < N; ++i) {
        dict.steering.col(i) = steering_vector(geometry, grid.angles[i]);
        dict.derivative.col(i) = steering_derivative(geometry, grid.angles[i]);
    }
    dict.combined.resize(M, 2 * N);
    dict.combined << dict.steering, dict.derivative;
    return dict;
}

inline constexpr std::size_t default_phi_budget = std::size_t{2} << 30; // 2 GiB

class LiftedOperator {
public:
    // `dictionary` has P*N columns with P in {1, 2}.
    LiftedOperator(CMatrix basis, CMatrix dictionary, int num_bins, int num_snapshots)
        : basis_(std::move(basis)), dictionary_(std::move(dictionary)), bins_(num_bins),
          snapshots_(num_snapshots)
    {
        if (bins_ < 1 || snapshots_ < 1) throw DomainError("LiftedOperator: need N >= 1 and L >= 1");
        if (basis_.rows() != dictionary_.rows()) {
            throw DimensionError("LiftedOperator: basis and dictionary must have one row per sensor");
        }
        if (dictionary_.cols() != bins_ && dictionary_.cols() != 2 * bins_) {
            throw DimensionError("LiftedOperator: dictionary must have N or 2N columns");
        }
        blocks_ = static_cast<int>(dictionary_.cols() / bins_);
    }

    // G = [A-bar, B-bar]: the off-grid model.
    static LiftedOperator off_grid(const CMatrix& basis, const Dictionary& dict, int num_snapshots)
    {
        return {basis, dict.combined, static_cast<int>(dict.steering.cols()), num_snapshots};
    }

    // G = A-bar only: the on-grid model with the p blocks dropped.
    static LiftedOperator on_grid(const CMatrix& basis, const Dictionary& dict, int num_snapshots)
    {
        return {basis, dict.steering, static_cast<int>(dict.steering.cols()), num_snapshots};
    }

    int num_sensors() const { return static_cast<int>(basis_.rows()); }
    int num_basis() const { return static_cast<int>(basis_.cols()); }
    int num_bins() const { return bins_; }
    int num_snapshots() const { return snapshots_; }
    int blocks_per_snapshot() const { return blocks_; }
    bool models_off_grid() const { return blocks_ == 2; }
    int snapshot_width() const { return blocks_ * bins_; }
    int lifted_cols() const { return blocks_ * bins_ * snapshots_; }

    const CMatrix& basis() const { return basis_; }
    const CMatrix& dictionary() const { return dictionary_; }

    // Lifted column of bin i, block j (0 = s-bar, 1 = p), snapshot l.
    int column(int bin, int block, int snapshot) const
    {
        return snapshot * snapshot_width() + block * bins_ + bin;
    }

    // b_i: i-th column of B^H.
    CVector sensor_basis_vector(int i) const { return basis_.row(i).adjoint(); }

    // Gt_i: block diagonal (PLN x L) with g_i repeated L times.
    CMatrix sensor_block(int i) const
    {
        const int W = snapshot_width();
        CMatrix Gt = CMatrix::Zero(lifted_cols(), snapshots_);
        for (int l = 0; l < snapshots_; ++l) {
            Gt.block(l * W, l, W, 1) = dictionary_.row(i).transpose();
        }
        return Gt;
    }

    // Y(i, l) = sum_{r, j} B(i, r) Xt(r, l W + j) G(i, j). Never forms Phi.
    CMatrix apply_forward(const LiftedMatrix& X) const
    {
        check_lifted(X, "apply_forward");
        const int M = num_sensors();
        const int W = snapshot_width();
        const CMatrix T = basis_ * X; // M x PLN
        CMatrix Y(M, snapshots_);
        for (int l = 0; l < snapshots_; ++l) {
            Y.col(l) = T.middleCols(l * W, W).cwiseProduct(dictionary_).rowwise().sum();
        }
        return Y;
    }

    // Adjoint under <U, V> = sum conj(U) V:  Xt(r, l W + j) = sum_i conj(B(i, r) G(i, j)) R(i, l).
    LiftedMatrix apply_adjoint(const CMatrix& R) const
    {
        if (R.rows() != num_sensors() || R.cols() != snapshots_) {
            throw DimensionError("apply_adjoint: residual must be M x L");
        }
        const int M = num_sensors();
        const int W = snapshot_width();
        CMatrix T(M, lifted_cols());
        const CMatrix Gc = dictionary_.conjugate();
        for (int l = 0; l < snapshots_; ++l) {
            T.middleCols(l * W, W) = R.col(l).asDiagonal() * Gc;
        }
        return basis_.adjoint() * T;
    }

    // Dense Phi built literally from phi_i = conj(Gt_i) kron b_i, rows phi_i^H.
    CMatrix materialize_phi(std::size_t budget_bytes = default_phi_budget) const
    {
        const std::size_t rows = static_cast<std::size_t>(num_sensors()) * snapshots_;
        const std::size_t cols = static_cast<std::size_t>(num_basis()) * lifted_cols();
        if (phi_bytes() > budget_bytes) {
            throw ResourceError("materialize_phi: dense Phi needs " + std::to_string(phi_bytes()) +
                                " bytes, over the budget; use apply_forward/apply_adjoint instead");
        }
        CMatrix Phi(rows, cols);
        for (int i = 0; i < num_sensors(); ++i) {
            const CMatrix phi_i = Eigen::kroneckerProduct(sensor_block(i).conjugate(), sensor_basis_vector(i)).eval();
            Phi.middleRows(static_cast<Eigen::Index>(i) * snapshots_, snapshots_) = phi_i.adjoint();
        }
        return Phi;
    }

    std::size_t phi_bytes() const
    {
        return sizeof(cplx) * static_cast<std::size_t>(num_sensors()) * snapshots_ *
               static_cast<std::size_t>(num_basis()) * lifted_cols();
    }

private:
    void check_lifted(const LiftedMatrix& X, const char* who) const
    {
        if (X.rows() != num_basis() || X.cols() != lifted_cols()) {
            throw DimensionError(std::string(who) + ": lifted matrix must be m x PLN");
        }
    }

    CMatrix basis_;
    CMatrix dictionary_;
    int bins_;
    int snapshots_;
    int blocks_ = 2;
};

// Xt = h [x_1^T, ..., x_L^T] for a coefficient matrix X (PN x L).
inline LiftedMatrix lift(const CVector& h, const CMatrix& X)
{
    const Eigen::Index W = X.rows();
    LiftedMatrix Xt(h.size(), W * X.cols());
    for (Eigen::Index l = 0; l < X.cols(); ++l) {
        Xt.middleCols(l * W, W) = h * X.col(l).transpose();
    }
    return Xt;
}

// Stack S-bar (N x L) over P = Gamma S-bar into the (2N x L) coefficient matrix X.
inline CMatrix offgrid_coefficients(const CMatrix& sbar, const RVector& beta)
{
    CMatrix X(2 * sbar.rows(), sbar.cols());
    X << sbar, beta.asDiagonal() * sbar;
    return X;
}

inline CVector column_stack(const CMatrix& A)
{
    return Eigen::Map<const CVector>(A.data(), A.size());
}

} // namespace sclift
