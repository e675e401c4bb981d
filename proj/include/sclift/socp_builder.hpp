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

// Second-order cone form of the group-sparse lifted recovery problem
//
//     minimize  q
//     s.t.      Phi vec(Xt) - vec(Y^T) = z,   ||z|| <= eta
//               ||Xt(:, k)|| <= v_k                         every lifted column
//               sqrt(sum over bin i of v_k^2) <= b_i        every grid bin
//               1^T b <= q,   v >= 0
//               v_p <= r v_sbar                             off-grid model only
//
// The group cones bound v, so the objective is ||v||_{1,2}, which equals
// ||Xt||_{2,1,2} once v is tight. Bounding the Xt entries directly instead
// (GroupCone::lifted_entries) leaves v out of the objective: v_sbar can then
// grow for free and the r-coupling stops constraining p.
//
// Real variable vector, in order (slices are named in the variable map):
//
//     xt  2 m PLN   vec(Xt) column-major, complex entry c*m + r stored as (re, im)
//     v   PLN       column bounds
//     b   N         group bounds
//     q   1         objective epigraph
//     z   2 ML      residual, complex entry i*L + l stored as (re, im)
//
// Cone order: zero (2ML residual equalities); nonnegative (v >= 0, then the
// r-coupling rows, then q - 1^T b); residual SOC (eta, z); one SOC per lifted
// column; one SOC per grid bin (dimension PL + 1, or 2mPL + 1 for
// lifted_entries).

#include "sclift/common.hpp"
#include "sclift/conic_program.hpp"
#include "sclift/lifting.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace sclift {

// What the per-bin group cones bound: the column bounds v (default) or the
// entries of Xt.
enum class GroupCone { column_bounds, lifted_entries };

struct BuildOptions {
    GroupCone group = GroupCone::column_bounds;
    std::size_t max_variables = 5'000'000;
    std::size_t max_nonzeros = 200'000'000;
};

struct LiftedProgram {
    ConicProgram program;
    int num_basis = 0;
    int num_bins = 0;
    int num_snapshots = 0;
    int blocks = 2;
    double eta = 0.0;
    double half_interval = 0.0;
    bool zero_feasible = false; // eta >= ||Y||_F, so Xt = 0 is optimal

    int lifted_cols() const { return blocks * num_bins * num_snapshots; }

    // Xt from a primal vector.
    LiftedMatrix lifted(const RVector& x) const
    {
        const auto& s = program.slice("xt");
        LiftedMatrix Xt(num_basis, lifted_cols());
        for (int c = 0; c < lifted_cols(); ++c) {
            for (int r = 0; r < num_basis; ++r) {
                const int k = s.offset + 2 * (c * num_basis + r);
                Xt(r, c) = cplx(x(k), x(k + 1));
            }
        }
        return Xt;
    }

    // Primal vector with the given Xt and the tightest matching auxiliaries
    // (v = column norms, b = group norms, q = 1^T b, z = residual).
    RVector pack(const LiftedOperator& op, const LiftedMatrix& Xt, const CMatrix& Y) const
    {
        RVector x = RVector::Zero(program.num_variables());
        const auto& xs = program.slice("xt");
        const auto& vs = program.slice("v");
        const auto& bs = program.slice("b");
        const auto& qs = program.slice("q");
        const auto& zs = program.slice("z");
        for (int c = 0; c < lifted_cols(); ++c) {
            for (int r = 0; r < num_basis; ++r) {
                const int k = xs.offset + 2 * (c * num_basis + r);
                x(k) = Xt(r, c).real();
                x(k + 1) = Xt(r, c).imag();
            }
            x(vs.offset + c) = Xt.col(c).norm();
        }
        double total = 0.0;
        for (int i = 0; i < num_bins; ++i) {
            double ss = 0.0;
            for (int c = i; c < lifted_cols(); c += num_bins) ss += Xt.col(c).squaredNorm();
            x(bs.offset + i) = std::sqrt(ss);
            total += x(bs.offset + i);
        }
        x(qs.offset) = total;
        const CMatrix R = op.apply_forward(Xt) - Y;
        const int L = num_snapshots;
        for (int i = 0; i < R.rows(); ++i) {
            for (int l = 0; l < L; ++l) {
                x(zs.offset + 2 * (i * L + l)) = R(i, l).real();
                x(zs.offset + 2 * (i * L + l) + 1) = R(i, l).imag();
            }
        }
        return x;
    }
};

// eta with P(||N||_F <= eta) = confidence for i.i.d. circular noise of
// variance sigma2: ||N||_F^2 / (sigma2 / 2) is chi-square with 2ML degrees.
inline double select_eta(double sigma2, int M, int L, double confidence)
{
    if (!(confidence > 0.0 && confidence < 1.0)) throw DomainError("select_eta: confidence must lie in (0, 1)");
    if (!(sigma2 >= 0.0)) throw DomainError("select_eta: noise variance must be nonnegative");
    if (M < 1 || L < 1) throw DomainError("select_eta: need M >= 1 and L >= 1");
    if (sigma2 == 0.0) return 0.0;
    const boost::math::chi_squared_distribution<double> chi2(2.0 * M * L);
    return std::sqrt(0.5 * sigma2 * boost::math::quantile(chi2, confidence));
}

// Builds the program for snapshots Y (M x L). `r` is the half grid interval in
// radians; r = 0 forces every p block to zero.
inline LiftedProgram build_program(const LiftedOperator& op, const CMatrix& Y, double eta, double r,
                                   const BuildOptions& options = {})
{
    const int M = op.num_sensors();
    const int m = op.num_basis();
    const int N = op.num_bins();
    const int L = op.num_snapshots();
    const int P = op.blocks_per_snapshot();
    const int W = op.snapshot_width();
    const int C = op.lifted_cols();
    if (Y.rows() != M || Y.cols() != L) throw DimensionError("build_program: Y must be M x L");
    if (!std::isfinite(eta) || !(eta >= std::numeric_limits<double>::min())) {
        throw DomainError("build_program: eta must be positive");
    }
    if (!(r >= 0.0) || !std::isfinite(r)) throw DomainError("build_program: r must be nonnegative");
    if (!Y.allFinite()) throw DomainError("build_program: non-finite observations");

    const std::size_t n_xt = 2 * static_cast<std::size_t>(m) * C;
    const std::size_t n_total = n_xt + C + N + 1 + 2 * static_cast<std::size_t>(M) * L;
    const std::size_t nnz_est = 4 * static_cast<std::size_t>(M) * L * m * W + 2 * n_xt + 8 * C + 4 * N;
    if (n_total > options.max_variables || nnz_est > options.max_nonzeros) {
        throw ResourceError("build_program: problem size exceeds the configured limits");
    }

    LiftedProgram out;
    out.num_basis = m;
    out.num_bins = N;
    out.num_snapshots = L;
    out.blocks = P;
    out.eta = eta;
    out.half_interval = r;
    out.zero_feasible = eta >= Y.norm();

    ConicProgram& p = out.program;
    const int o_xt = 0;
    const int o_v = o_xt + static_cast<int>(n_xt);
    const int o_b = o_v + C;
    const int o_q = o_b + N;
    const int o_z = o_q + 1;
    const int n = o_z + 2 * M * L;
    p.variables = {{"xt", o_xt, static_cast<int>(n_xt)}, {"v", o_v, C}, {"b", o_b, N}, {"q", o_q, 1}, {"z", o_z, 2 * M * L}};
    p.c = RVector::Zero(n);
    p.c(o_q) = 1.0;

    auto xre = [&](int col, int row) { return o_xt + 2 * (col * m + row); };

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(nnz_est);
    std::vector<double> rhs;
    int row = 0;

    // Phi vec(Xt) - z = vec(Y^T):  Phi(iL + l, c m + r) = B(i, r) G(i, j) for c = l W + j.
    const CMatrix& B = op.basis();
    const CMatrix& G = op.dictionary();
    for (int i = 0; i < M; ++i) {
        for (int l = 0; l < L; ++l) {
            const int re = row, im = row + 1;
            for (int j = 0; j < W; ++j) {
                const int col = l * W + j;
                for (int rr = 0; rr < m; ++rr) {
                    const cplx a = B(i, rr) * G(i, j);
                    const int k = xre(col, rr);
                    trips.emplace_back(re, k, a.real());
                    trips.emplace_back(re, k + 1, -a.imag());
                    trips.emplace_back(im, k, a.imag());
                    trips.emplace_back(im, k + 1, a.real());
                }
            }
            const int zr = o_z + 2 * (i * L + l);
            trips.emplace_back(re, zr, -1.0);
            trips.emplace_back(im, zr + 1, -1.0);
            rhs.push_back(Y(i, l).real());
            rhs.push_back(Y(i, l).imag());
            row += 2;
        }
    }
    p.cones.push_back({ConeKind::zero, 2 * M * L});

    // Orthant: v >= 0; r v_sbar - v_p >= 0; q - 1^T b >= 0.
    int n_orthant = 0;
    for (int k = 0; k < C; ++k, ++row, ++n_orthant) {
        trips.emplace_back(row, o_v + k, -1.0);
        rhs.push_back(0.0);
    }
    if (P == 2) {
        for (int l = 0; l < L; ++l) {
            for (int i = 0; i < N; ++i, ++row, ++n_orthant) {
                if (r != 0.0) trips.emplace_back(row, o_v + op.column(i, 0, l), -r);
                trips.emplace_back(row, o_v + op.column(i, 1, l), 1.0);
                rhs.push_back(0.0);
            }
        }
    }
    trips.emplace_back(row, o_q, -1.0);
    for (int i = 0; i < N; ++i) trips.emplace_back(row, o_b + i, 1.0);
    rhs.push_back(0.0);
    ++row;
    ++n_orthant;
    p.cones.push_back({ConeKind::nonnegative, n_orthant});

    // (eta, z).
    rhs.push_back(eta);
    ++row;
    for (int k = 0; k < 2 * M * L; ++k, ++row) {
        trips.emplace_back(row, o_z + k, -1.0);
        rhs.push_back(0.0);
    }
    p.cones.push_back({ConeKind::second_order, 2 * M * L + 1});

    // (v_k, Xt(:, k)).
    for (int col = 0; col < C; ++col) {
        trips.emplace_back(row++, o_v + col, -1.0);
        rhs.push_back(0.0);
        for (int rr = 0; rr < m; ++rr) {
            trips.emplace_back(row++, xre(col, rr), -1.0);
            trips.emplace_back(row++, xre(col, rr) + 1, -1.0);
            rhs.push_back(0.0);
            rhs.push_back(0.0);
        }
        p.cones.push_back({ConeKind::second_order, 2 * m + 1});
    }

    // (b_i, v of every column of bin i).
    for (int i = 0; i < N && options.group == GroupCone::column_bounds; ++i) {
        trips.emplace_back(row++, o_b + i, -1.0);
        rhs.push_back(0.0);
        for (int l = 0; l < L; ++l) {
            for (int blk = 0; blk < P; ++blk) {
                trips.emplace_back(row++, o_v + op.column(i, blk, l), -1.0);
                rhs.push_back(0.0);
            }
        }
        p.cones.push_back({ConeKind::second_order, P * L + 1});
    }
    // (b_i, every Xt entry of bin i).
    for (int i = 0; i < N && options.group == GroupCone::lifted_entries; ++i) {
        trips.emplace_back(row++, o_b + i, -1.0);
        rhs.push_back(0.0);
        for (int l = 0; l < L; ++l) {
            for (int blk = 0; blk < P; ++blk) {
                const int col = op.column(i, blk, l);
                for (int rr = 0; rr < m; ++rr) {
                    trips.emplace_back(row++, xre(col, rr), -1.0);
                    trips.emplace_back(row++, xre(col, rr) + 1, -1.0);
                    rhs.push_back(0.0);
                    rhs.push_back(0.0);
                }
            }
        }
        p.cones.push_back({ConeKind::second_order, 2 * m * P * L + 1});
    }

    p.A.resize(row, n);
    p.A.setFromTriplets(trips.begin(), trips.end());
    p.A.makeCompressed();
    p.b = Eigen::Map<const RVector>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
    p.validate();
    return out;
}

} // namespace sclift
