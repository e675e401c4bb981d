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

// Shared test helpers: independent KKT certification, random data, and a
// brute-force LP oracle. Nothing here calls into the solver internals.

#include "sclift/conic_program.hpp"
#include "sclift/conic_solver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

namespace sclift::testing {

struct Certificate {
    double primal_residual = 0;
    double dual_residual = 0;
    double gap = 0;
    double worst_primal_cone = 0; // most negative cone eigenvalue of s
    double worst_dual_cone = 0;   // most negative cone eigenvalue of z
};

// Recomputes the optimality measures from the raw program data.
inline Certificate certify(const ConicProgram& p, const ConicSolution& sol)
{
    Certificate cert;
    const RVector& x = sol.primal;
    const RVector& s = sol.slacks;
    const RVector& z = sol.dual;
    cert.primal_residual = (RVector(p.A * x) + s - p.b).norm() / (1.0 + p.b.norm());
    cert.dual_residual = (RVector(p.A.transpose() * z) + p.c).norm() / (1.0 + p.c.norm());
    const double pobj = p.c.dot(x);
    const double dobj = -p.b.dot(z);
    cert.gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj));
    int off = 0;
    for (const auto& k : p.cones) {
        const auto ss = s.segment(off, k.dim);
        const auto zz = z.segment(off, k.dim);
        double ps = 0, pz = 0;
        if (k.kind == ConeKind::zero) {
            ps = -ss.cwiseAbs().maxCoeff();
        } else if (k.kind == ConeKind::nonnegative) {
            ps = ss.minCoeff();
            pz = zz.minCoeff();
        } else {
            ps = ss(0) - ss.tail(k.dim - 1).norm();
            pz = zz(0) - zz.tail(k.dim - 1).norm();
        }
        cert.worst_primal_cone = std::min(cert.worst_primal_cone, ps);
        cert.worst_dual_cone = std::min(cert.worst_dual_cone, pz);
        off += k.dim;
    }
    return cert;
}

// Minimizes c^T x over {A x = b, x >= 0} by enumerating every basis.
inline std::optional<double> lp_vertex_oracle(const RMatrix& A, const RVector& b, const RVector& c)
{
    const int m = static_cast<int>(A.rows());
    const int n = static_cast<int>(A.cols());
    std::vector<int> pick(n, 0);
    std::fill(pick.begin(), pick.begin() + m, 1);
    std::sort(pick.begin(), pick.end());
    std::optional<double> best;
    do {
        std::vector<int> cols;
        for (int j = 0; j < n; ++j) {
            if (pick[j]) cols.push_back(j);
        }
        RMatrix B(m, m);
        RVector cb(m);
        for (int k = 0; k < m; ++k) {
            B.col(k) = A.col(cols[k]);
            cb(k) = c(cols[k]);
        }
        Eigen::FullPivLU<RMatrix> lu(B);
        if (lu.rank() < m) continue;
        const RVector xb = lu.solve(b);
        if (xb.minCoeff() < -1e-10) continue;
        const double obj = cb.dot(xb);
        if (!best || obj < *best) best = obj;
    } while (std::next_permutation(pick.begin(), pick.end()));
    return best;
}

// Random program with strictly feasible primal and dual points, so an optimum exists.
inline ConicProgram random_feasible_program(std::mt19937_64& rng, int max_vars = 200)
{
    std::uniform_int_distribution<int> pick_n(3, std::max(3, max_vars / 4));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<int> soc_dim(2, 6);
    const int n = pick_n(rng);

    ConicProgram p;
    const int n_zero = std::uniform_int_distribution<int>(0, n / 3)(rng);
    if (n_zero > 0) p.cones.push_back({ConeKind::zero, n_zero});
    p.cones.push_back({ConeKind::nonnegative, std::uniform_int_distribution<int>(1, n)(rng)});
    const int n_soc = std::uniform_int_distribution<int>(1, 4)(rng);
    for (int i = 0; i < n_soc; ++i) p.cones.push_back({ConeKind::second_order, soc_dim(rng)});
    const int m = p.cone_dim_total();

    RMatrix A(m, n);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) A(i, j) = normal(rng);
    }
    RVector x0(n), s0 = RVector::Zero(m), z0(m);
    for (int j = 0; j < n; ++j) x0(j) = normal(rng);
    for (int i = 0; i < m; ++i) z0(i) = normal(rng);
    int off = 0;
    for (const auto& k : p.cones) {
        auto ss = s0.segment(off, k.dim);
        auto zz = z0.segment(off, k.dim);
        if (k.kind == ConeKind::nonnegative) {
            for (int i = 0; i < k.dim; ++i) {
                ss(i) = 0.1 + std::abs(normal(rng));
                zz(i) = 0.1 + std::abs(normal(rng));
            }
        } else if (k.kind == ConeKind::second_order) {
            for (int i = 1; i < k.dim; ++i) ss(i) = normal(rng);
            ss(0) = ss.tail(k.dim - 1).norm() + 0.1 + std::abs(normal(rng));
            zz(0) = zz.tail(k.dim - 1).norm() + 0.1 + std::abs(normal(rng));
        }
        off += k.dim;
    }
    p.A = A.sparseView();
    p.b = A * x0 + s0;
    p.c = -A.transpose() * z0;
    p.variables.push_back({"x", 0, n});
    return p;
}

inline CMatrix random_complex(std::mt19937_64& rng, int rows, int cols)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    CMatrix X(rows, cols);
    for (int j = 0; j < cols; ++j) {
        for (int i = 0; i < rows; ++i) X(i, j) = cplx(normal(rng), normal(rng));
    }
    return X;
}

} // namespace sclift::testing
