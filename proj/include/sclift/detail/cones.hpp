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

// Per-cone algebra for the interior-point method: Jordan products, Nesterov-Todd
// scalings, and maximal step lengths. All operate on segments of the stacked
// slack vector.

#include "sclift/common.hpp"
#include "sclift/conic_program.hpp"

#include <cmath>
#include <limits>

namespace sclift::detail {

using Seg = Eigen::Ref<RVector>;
using CSeg = Eigen::Ref<const RVector>;

inline constexpr double infinite_step = std::numeric_limits<double>::infinity();

// u0^2 - ||u1||^2 evaluated as a product to keep accuracy near the boundary.
inline double soc_residual(const CSeg& u)
{
    const double t = u(0);
    const double r = u.tail(u.size() - 1).norm();
    return (t - r) * (t + r);
}

// Smallest eigenvalue with respect to the cone (interior iff positive).
inline double min_eig(ConeKind kind, const CSeg& u)
{
    switch (kind) {
    case ConeKind::zero: return infinite_step;
    case ConeKind::nonnegative: return u.minCoeff();
    case ConeKind::second_order: return u(0) - u.tail(u.size() - 1).norm();
    }
    return 0.0;
}

inline void add_identity(ConeKind kind, Seg u, double alpha)
{
    if (kind == ConeKind::nonnegative) u.array() += alpha;
    else if (kind == ConeKind::second_order) u(0) += alpha;
}

// u o v.
inline void jordan_product(ConeKind kind, const CSeg& u, const CSeg& v, Seg out)
{
    if (kind == ConeKind::nonnegative) {
        out = u.cwiseProduct(v);
    } else if (kind == ConeKind::second_order) {
        const Eigen::Index n = u.size() - 1;
        const double head = u.dot(v);
        out.tail(n) = u(0) * v.tail(n) + v(0) * u.tail(n);
        out(0) = head;
    } else {
        out.setZero();
    }
}

// Solves lambda o x = v for x.
inline void jordan_divide(ConeKind kind, const CSeg& lambda, const CSeg& v, Seg out)
{
    if (kind == ConeKind::nonnegative) {
        out = v.cwiseQuotient(lambda);
    } else if (kind == ConeKind::second_order) {
        const Eigen::Index n = lambda.size() - 1;
        const double l0 = lambda(0);
        const double det = soc_residual(lambda);
        const double x0 = (l0 * v(0) - lambda.tail(n).dot(v.tail(n))) / det;
        out.tail(n) = (v.tail(n) - x0 * lambda.tail(n)) / l0;
        out(0) = x0;
    } else {
        out.setZero();
    }
}

// Largest alpha >= 0 with u + alpha d in the cone, for u in the interior.
inline double max_step(ConeKind kind, const CSeg& u, const CSeg& d)
{
    double alpha = infinite_step;
    if (kind == ConeKind::nonnegative) {
        for (Eigen::Index i = 0; i < u.size(); ++i) {
            if (d(i) < 0.0) alpha = std::min(alpha, -u(i) / d(i));
        }
    } else if (kind == ConeKind::second_order) {
        const Eigen::Index n = u.size() - 1;
        // f(a) = a2 a^2 + 2 a1 a + a0 is the cone residual along the ray.
        const double a2 = d(0) * d(0) - d.tail(n).squaredNorm();
        const double a1 = u(0) * d(0) - u.tail(n).dot(d.tail(n));
        const double a0 = std::max(soc_residual(u), 0.0);
        auto consider = [&](double root) {
            if (root > 0.0) alpha = std::min(alpha, root);
        };
        if (std::abs(a2) < 1e-300) {
            if (a1 < 0.0) consider(-a0 / (2.0 * a1));
        } else {
            const double disc = a1 * a1 - a2 * a0;
            if (disc >= 0.0) {
                const double q = -(a1 + std::copysign(std::sqrt(disc), a1));
                consider(q / a2);
                if (q != 0.0) consider(a0 / q);
            }
        }
        // The head must stay nonnegative as well (guards the degenerate a0 == 0 case).
        if (d(0) < 0.0) alpha = std::min(alpha, -u(0) / d(0));
    }
    return alpha;
}

// Nesterov-Todd scaling of one cone: W z = W^{-1} s = lambda.
struct NtScaling {
    ConeKind kind = ConeKind::zero;
    RVector w;      // nonnegative: sqrt(s / z); second-order: normalized wbar
    double eta = 1; // second-order scale factor
};

inline NtScaling nt_scaling(ConeKind kind, const CSeg& s, const CSeg& z)
{
    NtScaling sc;
    sc.kind = kind;
    if (kind == ConeKind::nonnegative) {
        sc.w = (s.array() / z.array()).sqrt().matrix();
    } else if (kind == ConeKind::second_order) {
        const double sres = soc_residual(s);
        const double zres = soc_residual(z);
        const RVector sbar = s / std::sqrt(sres);
        const RVector zbar = z / std::sqrt(zres);
        const double gamma = std::sqrt((1.0 + sbar.dot(zbar)) / 2.0);
        sc.w = sbar;
        sc.w(0) += zbar(0);
        sc.w.tail(sc.w.size() - 1) -= zbar.tail(zbar.size() - 1);
        sc.w /= 2.0 * gamma;
        sc.eta = std::sqrt(std::sqrt(sres / zres));
    }
    return sc;
}

// out = W u.
inline void apply_w(const NtScaling& sc, const CSeg& u, Seg out)
{
    if (sc.kind == ConeKind::nonnegative) {
        out = sc.w.cwiseProduct(u);
    } else if (sc.kind == ConeKind::second_order) {
        const Eigen::Index n = u.size() - 1;
        const double w0 = sc.w(0);
        const auto w1 = sc.w.tail(n);
        const double dot = w1.dot(u.tail(n));
        const double head = w0 * u(0) + dot;
        out.tail(n) = sc.eta * (u(0) * w1 + u.tail(n) + (dot / (1.0 + w0)) * w1);
        out(0) = sc.eta * head;
    } else {
        out.setZero();
    }
}

// out = W^{-1} u.
inline void apply_w_inv(const NtScaling& sc, const CSeg& u, Seg out)
{
    if (sc.kind == ConeKind::nonnegative) {
        out = u.cwiseQuotient(sc.w);
    } else if (sc.kind == ConeKind::second_order) {
        const Eigen::Index n = u.size() - 1;
        const double w0 = sc.w(0);
        const auto w1 = sc.w.tail(n);
        const double dot = w1.dot(u.tail(n));
        const double head = w0 * u(0) - dot;
        out.tail(n) = (-u(0) * w1 + u.tail(n) + (dot / (1.0 + w0)) * w1) / sc.eta;
        out(0) = head / sc.eta;
    } else {
        out.setZero();
    }
}

// Dense H = W^T W for a second-order cone: eta^2 (2 wbar wbar^T - J).
inline RMatrix soc_hessian(const NtScaling& sc)
{
    const Eigen::Index d = sc.w.size();
    RMatrix H = 2.0 * sc.w * sc.w.transpose();
    H(0, 0) -= 1.0;
    for (Eigen::Index i = 1; i < d; ++i) H(i, i) += 1.0;
    return sc.eta * sc.eta * H;
}

} // namespace sclift::detail
