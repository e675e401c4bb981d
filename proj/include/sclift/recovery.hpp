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

// From the solved lifted matrix to calibration and direction estimates:
// leading singular pair, per-bin spectrum and support, |beta| from row-norm
// ratios, sign by exhaustive residual comparison, final angles.

#include "sclift/common.hpp"
#include "sclift/conic_solver.hpp"
#include "sclift/grid.hpp"
#include "sclift/lifting.hpp"
#include "sclift/socp_builder.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <ostream>
#include <vector>

namespace sclift {

struct RankOneFactor {
    CVector h;           // sqrt(s1) u1, largest-magnitude entry real positive
    CVector x;           // sqrt(s1) conj(w1), so that h x^T is the best rank-one fit
    double sigma1_ratio; // s1 / sum of singular values
};

inline RankOneFactor rank_one_factor(const LiftedMatrix& X)
{
    if (X.size() == 0 || !(X.norm() > 0.0)) throw DegenerateInputError("rank_one_factor: zero matrix");
    if (!X.allFinite()) throw DegenerateInputError("rank_one_factor: non-finite entries");
    const Eigen::BDCSVD<CMatrix> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const RVector& sv = svd.singularValues();
    const double s1 = sv(0);
    RankOneFactor f;
    f.sigma1_ratio = s1 / sv.sum();
    f.h = std::sqrt(s1) * svd.matrixU().col(0);
    f.x = std::sqrt(s1) * svd.matrixV().col(0).conjugate();
    Eigen::Index big = 0;
    f.h.cwiseAbs().maxCoeff(&big);
    const cplx phase = f.h(big) / std::abs(f.h(big));
    f.h /= phase;
    f.x *= phase;
    return f;
}

// |<A, B>| / (||A|| ||B||): 1 when A and B agree up to a complex scale.
inline double aligned_correlation(const CMatrix& A, const CMatrix& B)
{
    const double na = A.norm();
    const double nb = B.norm();
    if (!(na > 0.0) || !(nb > 0.0)) return 0.0;
    return std::abs((A.conjugate().cwiseProduct(B)).sum()) / (na * nb);
}

struct SupportEstimate {
    std::vector<int> support; // ascending
    RVector spectrum;         // per-bin magnitude, max 1
};

// Adjacent bins share one off-grid source, so by default picks must be at
// least two bins apart. Ties go to the lower index.
inline SupportEstimate detect_support(const CVector& x, int num_bins, int num_snapshots, int K,
                                      int min_separation = 2)
{
    const int N = num_bins;
    if (K < 1) throw DomainError("detect_support: need K >= 1");
    if (K > N) throw DomainError("detect_support: K exceeds the number of grid bins");
    if (N < 1 || num_snapshots < 1 || x.size() % (static_cast<Eigen::Index>(N) * num_snapshots) != 0) {
        throw DimensionError("detect_support: row length must be a multiple of L N");
    }
    SupportEstimate out;
    out.spectrum = RVector::Zero(N);
    for (Eigen::Index c = 0; c < x.size(); ++c) out.spectrum(c % N) += std::norm(x(c));
    out.spectrum = out.spectrum.cwiseSqrt();
    const double peak = out.spectrum.maxCoeff();
    if (peak > 0.0) out.spectrum /= peak;

    std::vector<int> order(N);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return out.spectrum(a) > out.spectrum(b); });
    std::vector<char> taken(N, 0);
    for (int idx : order) {
        if (static_cast<int>(out.support.size()) == K) break;
        bool clear = true;
        for (int s : out.support) clear = clear && std::abs(s - idx) >= min_separation;
        if (clear) {
            out.support.push_back(idx);
            taken[idx] = 1;
        }
    }
    // Too crowded for the separation rule: fill with the strongest leftovers.
    for (int idx : order) {
        if (static_cast<int>(out.support.size()) == K) break;
        if (!taken[idx]) {
            out.support.push_back(idx);
            taken[idx] = 1;
        }
    }
    std::sort(out.support.begin(), out.support.end());
    return out;
}

// s-bar (N x L) and p (N x L) rows of a lifted coefficient row; p is zero for
// the on-grid layout.
inline void split_coefficients(const CVector& x, int num_bins, int num_snapshots, CMatrix& sbar, CMatrix& p)
{
    const int N = num_bins;
    const int L = num_snapshots;
    const Eigen::Index W = x.size() / L;
    if (W != N && W != 2 * N) throw DimensionError("split_coefficients: row length must be L N or 2 L N");
    sbar.resize(N, L);
    p = CMatrix::Zero(N, L);
    for (int l = 0; l < L; ++l) {
        sbar.col(l) = x.segment(l * W, N);
        if (W == 2 * N) p.col(l) = x.segment(l * W + N, N);
    }
}

struct BetaMagnitudes {
    RVector magnitude;         // one per support entry, radians in [0, r]
    std::vector<char> unstable; // s-bar row too small for a ratio; magnitude set to 0
};

// |beta_i| = ||p row i|| / ||s-bar row i||, clamped to [0, r]. Rows whose
// spectrum value is below `floor` are treated as vanishing.
inline BetaMagnitudes beta_magnitude(const CMatrix& sbar, const CMatrix& p, const std::vector<int>& support,
                                     double r, const RVector& spectrum = {}, double floor = 1e-3)
{
    BetaMagnitudes out;
    out.magnitude = RVector::Zero(static_cast<Eigen::Index>(support.size()));
    out.unstable.assign(support.size(), 0);
    for (std::size_t k = 0; k < support.size(); ++k) {
        const int i = support[k];
        if (i < 0 || i >= sbar.rows()) throw DimensionError("beta_magnitude: support index out of range");
        const double s = sbar.row(i).norm();
        const bool weak = spectrum.size() > 0 && !(spectrum(i) >= floor);
        if (!(s > 0.0) || weak) {
            out.unstable[k] = 1;
            continue;
        }
        out.magnitude(static_cast<Eigen::Index>(k)) = std::clamp(p.row(i).norm() / s, 0.0, r);
    }
    return out;
}

inline constexpr int max_sign_sources = 20;

struct SignChoice {
    RVector beta;                   // signed, one per support entry
    double residual = 0.0;          // ||A(Xt) - Y||_F of the chosen pattern
    std::vector<double> residuals;  // every pattern; bit k set means source k negative
    std::uint32_t pattern = 0;
};

// Tries all 2^K sign patterns for p = +-|beta| s-bar on the support, keeping
// h and s-bar fixed, and returns the pattern with the smallest residual.
// Equal residuals keep the lower pattern index, so beta = 0 yields all-positive.
inline SignChoice recover_sign(const LiftedOperator& op, const CMatrix& Y, const CVector& h, const CMatrix& sbar,
                               const RVector& magnitudes, const std::vector<int>& support)
{
    const int K = static_cast<int>(support.size());
    if (K > max_sign_sources) throw ConfigError("recover_sign: more than 20 sources to enumerate");
    if (magnitudes.size() != K) throw DimensionError("recover_sign: one magnitude per support entry");
    if (!op.models_off_grid()) throw DomainError("recover_sign: needs the off-grid operator");
    const int N = op.num_bins();
    const int L = op.num_snapshots();
    if (sbar.rows() != N || sbar.cols() != L) throw DimensionError("recover_sign: s-bar must be N x L");

    CMatrix Sk = CMatrix::Zero(N, L);
    for (int i : support) Sk.row(i) = sbar.row(i);
    SignChoice best;
    const std::uint32_t patterns = std::uint32_t{1} << K;
    best.residuals.resize(patterns);
    RVector beta_full = RVector::Zero(N);
    for (std::uint32_t pat = 0; pat < patterns; ++pat) {
        for (int k = 0; k < K; ++k) {
            beta_full(support[k]) = ((pat >> k) & 1u) ? -magnitudes(k) : magnitudes(k);
        }
        const double res = (op.apply_forward(lift(h, offgrid_coefficients(Sk, beta_full))) - Y).norm();
        best.residuals[pat] = res;
        if (pat == 0 || res < best.residual) {
            best.residual = res;
            best.pattern = pat;
        }
    }
    best.beta.resize(K);
    for (int k = 0; k < K; ++k) best.beta(k) = ((best.pattern >> k) & 1u) ? -magnitudes(k) : magnitudes(k);
    return best;
}

struct EstimateSettings {
    double eta = 0.0;        // residual bound, must be positive
    double half_interval = 0.0; // r in radians; ignored by the on-grid operator
    BuildOptions build;
    SolverSettings solver;
    int min_separation = 2;
    double spectrum_floor = 1e-3;
    // Model-order hook: when set, K is taken from the spectrum instead of the caller.
    std::function<int(const RVector&)> model_order;
};

struct RecoveryResult {
    CVector h_hat;
    CMatrix sbar_hat; // N x L
    CMatrix p_hat;    // N x L, zero for the on-grid operator
    RVector beta_hat; // N, radians, zero off the support
    std::vector<int> support;
    std::vector<double> theta_hat; // degrees, ascending with the support
    double residual = 0.0;
    RVector spectrum;

    SolverStatus solver_status = SolverStatus::optimal;
    int solver_iterations = 0;
    double objective = 0.0;
    double sigma1_ratio = 0.0;
    std::vector<double> sign_residuals;
    bool degenerate = false;     // solution was zero or unusable
    bool unstable_ratio = false; // some support row of s-bar vanished

    bool ok() const { return solver_status == SolverStatus::optimal && !degenerate && !unstable_ratio; }
};

// build_program -> solve -> rank-one factor -> support -> |beta| -> sign -> angles.
inline RecoveryResult estimate(const LiftedOperator& op, const AngleGrid& grid, const CMatrix& Y,
                               const EstimateSettings& settings, int K, std::ostream* solver_log = nullptr)
{
    if (grid.size() != op.num_bins()) throw DimensionError("estimate: grid and operator disagree on N");
    if (K < 1) throw DomainError("estimate: need K >= 1");
    const int N = op.num_bins();
    const int L = op.num_snapshots();
    const double r = op.models_off_grid() ? settings.half_interval : 0.0;

    const LiftedProgram lp = build_program(op, Y, settings.eta, r, settings.build);
    const ConicSolution sol = solve(lp.program, settings.solver, solver_log);

    RecoveryResult res;
    res.solver_status = sol.status;
    res.solver_iterations = sol.iterations;
    res.objective = sol.primal_objective;
    res.beta_hat = RVector::Zero(N);
    res.spectrum = RVector::Zero(N);
    res.sbar_hat = CMatrix::Zero(N, L);
    res.p_hat = CMatrix::Zero(N, L);
    res.h_hat = CVector::Zero(op.num_basis());
    res.residual = Y.norm();

    const LiftedMatrix X = lp.lifted(sol.primal);
    RankOneFactor f;
    try {
        // eta >= ||Y||: Xt = 0 is optimal and any nonzero output is solver noise.
        if (lp.zero_feasible) throw DegenerateInputError("estimate: zero solution is optimal");
        f = rank_one_factor(X);
    } catch (const DegenerateInputError&) {
        // Still report K angles (the first separated bins) so metrics stay defined.
        res.degenerate = true;
        if (K <= N) {
            res.support = detect_support(CVector::Zero(static_cast<Eigen::Index>(2) * N * L), N, L, K,
                                         settings.min_separation).support;
            for (int i : res.support) res.theta_hat.push_back(grid.angle_deg(i));
        }
        return res;
    }
    res.h_hat = f.h;
    res.sigma1_ratio = f.sigma1_ratio;
    split_coefficients(f.x, N, L, res.sbar_hat, res.p_hat);

    SupportEstimate sup = detect_support(f.x, N, L, 1, settings.min_separation);
    const int k_used = settings.model_order ? settings.model_order(sup.spectrum) : K;
    if (k_used < 1 || k_used > N) throw DomainError("estimate: model order out of range");
    sup = detect_support(f.x, N, L, k_used, settings.min_separation);
    res.support = sup.support;
    res.spectrum = sup.spectrum;

    RVector beta(k_used);
    beta.setZero();
    if (op.models_off_grid()) {
        const BetaMagnitudes mag =
            beta_magnitude(res.sbar_hat, res.p_hat, res.support, r, res.spectrum, settings.spectrum_floor);
        res.unstable_ratio = std::any_of(mag.unstable.begin(), mag.unstable.end(), [](char u) { return u != 0; });
        const SignChoice sc = recover_sign(op, Y, res.h_hat, res.sbar_hat, mag.magnitude, res.support);
        beta = sc.beta;
        res.residual = sc.residual;
        res.sign_residuals = sc.residuals;
    } else {
        CMatrix Sk = CMatrix::Zero(N, L);
        for (int i : res.support) Sk.row(i) = res.sbar_hat.row(i);
        res.residual = (op.apply_forward(lift(res.h_hat, Sk)) - Y).norm();
    }
    for (int k = 0; k < k_used; ++k) {
        const int i = res.support[k];
        res.beta_hat(i) = beta(k);
        res.theta_hat.push_back(rad_to_deg(grid.angles[i] + beta(k)));
    }
    return res;
}

// CSV with header angle_deg,amplitude and one row per grid bin.
inline void write_spectrum_csv(std::ostream& os, const AngleGrid& grid, const RVector& spectrum)
{
    if (spectrum.size() != grid.size()) throw DimensionError("write_spectrum_csv: spectrum length must equal N");
    os << "angle_deg,amplitude\n";
    for (int i = 0; i < grid.size(); ++i) {
        os << format_shortest(grid.angle_deg(i)) << "," << format_shortest(spectrum(i)) << "\n";
    }
}

} // namespace sclift
