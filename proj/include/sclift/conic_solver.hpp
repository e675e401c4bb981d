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

// Primal-dual interior-point solver for linear programs over products of zero
// cones, nonnegative orthants and second-order cones.
//
// The solver works on the homogeneous self-dual embedding of
//
//     primal:  min c^T x   s.t.  A x + s = b,  s in K
//     dual:    max -b^T z  s.t.  A^T z + c = 0,  z in K*
//
// with variables (x, s, z, tau, kappa), Nesterov-Todd scaling and a Mehrotra
// predictor-corrector. Each iteration factors the quasi-definite KKT matrix
//
//     [ eps I      A^T        ]
//     [   A    -(W^T W + eps I) ]
//
// once, solves it for two right-hand sides and refines against the
// unregularized matrix. No feasible starting point is needed, and
// infeasibility is reported through the embedding's certificates.

#include "sclift/common.hpp"
#include "sclift/conic_program.hpp"
#include "sclift/detail/cones.hpp"
#include "sclift/detail/ldl.hpp"

#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace sclift {

struct SolverSettings {
    double feas_tol = 1e-7;
    double gap_tol = 1e-7;
    int max_iters = 100;
    double step_fraction = 0.99;
    double static_reg = 1e-8;
    int max_refine_steps = 10;

    void validate() const
    {
        if (!(feas_tol > 0.0) || !(gap_tol > 0.0)) throw DomainError("SolverSettings: tolerances must be positive");
        if (max_iters < 1) throw DomainError("SolverSettings: max_iters must be at least 1");
        if (!(step_fraction > 0.0 && step_fraction < 1.0)) {
            throw DomainError("SolverSettings: step_fraction must lie in (0, 1)");
        }
        if (!(static_reg >= 0.0)) throw DomainError("SolverSettings: static_reg must be nonnegative");
    }
};

enum class SolverStatus { optimal, max_iters, infeasible_detected, numerical_failure };

inline const char* status_name(SolverStatus s)
{
    switch (s) {
    case SolverStatus::optimal: return "optimal";
    case SolverStatus::max_iters: return "max-iters";
    case SolverStatus::infeasible_detected: return "infeasible-detected";
    case SolverStatus::numerical_failure: return "numerical-failure";
    }
    return "?";
}

struct ConicSolution {
    RVector primal; // x
    RVector dual;   // z
    RVector slacks; // s
    SolverStatus status = SolverStatus::numerical_failure;
    double primal_residual = 0.0; // ||A x + s - b|| / (1 + ||b||)
    double dual_residual = 0.0;   // ||A^T z + c|| / (1 + ||c||)
    double duality_gap = 0.0;     // |c^T x + b^T z| / (1 + |c^T x|)
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    int iterations = 0;
    std::string diagnostics;
};

// Euclidean projection onto {(t, u) : ||u|| <= t}.
inline RVector project_soc(const RVector& point)
{
    if (point.size() < 1) throw DimensionError("project_soc: empty point");
    const Eigen::Index n = point.size() - 1;
    const double t = point(0);
    const double r = point.tail(n).norm();
    if (r <= t) return point;
    if (r <= -t) return RVector::Zero(point.size());
    RVector out(point.size());
    const double a = (t + r) / 2.0;
    out(0) = a;
    out.tail(n) = (a / r) * point.tail(n);
    return out;
}

namespace detail {

struct ConeBlock {
    ConeKind kind;
    int offset;
    int dim;
};

class KktSystem {
public:
    KktSystem(const ConicProgram& p, const std::vector<ConeBlock>& blocks, double static_reg)
        : A_(p.A), blocks_(blocks), n_(p.num_variables()), m_(p.num_constraints()), reg_(static_reg)
    {
        A_.makeCompressed();
        At_ = A_.transpose();
        std::vector<int> rows, cols;
        for (int i = 0; i < n_; ++i) {
            rows.push_back(i);
            cols.push_back(i);
        }
        for (int col = 0; col < A_.outerSize(); ++col) {
            for (SparseMatrix::InnerIterator it(A_, col); it; ++it) {
                rows.push_back(n_ + it.row());
                cols.push_back(col);
            }
        }
        cone_start_ = static_cast<int>(rows.size());
        for (const auto& b : blocks_) {
            if (b.kind == ConeKind::second_order) {
                for (int j = 0; j < b.dim; ++j) {
                    for (int i = j; i < b.dim; ++i) {
                        rows.push_back(n_ + b.offset + i);
                        cols.push_back(n_ + b.offset + j);
                    }
                }
            } else {
                for (int i = 0; i < b.dim; ++i) {
                    rows.push_back(n_ + b.offset + i);
                    cols.push_back(n_ + b.offset + i);
                }
            }
        }
        std::vector<int> signs(n_ + m_, -1);
        std::fill(signs.begin(), signs.begin() + n_, 1);
        std::vector<int> stages(n_ + m_, 0);
        std::fill(stages.begin(), stages.begin() + n_, 1);
        for (const auto& b : blocks_) {
            if (b.kind == ConeKind::zero) std::fill_n(stages.begin() + n_ + b.offset, b.dim, 2);
        }
        ldl_.emplace(n_ + m_, rows, cols, std::move(signs), stages);
        values_.assign(rows.size(), 0.0);
        for (int i = 0; i < n_; ++i) values_[i] = reg_;
        int k = n_;
        for (int col = 0; col < A_.outerSize(); ++col) {
            for (SparseMatrix::InnerIterator it(A_, col); it; ++it) values_[k++] = it.value();
        }
    }

    // Factors with H = blockdiag(W_k^T W_k); an empty scaling list means H = I.
    void factor(const std::vector<NtScaling>* scalings)
    {
        scalings_ = scalings;
        std::size_t k = cone_start_;
        for (std::size_t c = 0; c < blocks_.size(); ++c) {
            const auto& b = blocks_[c];
            if (b.kind == ConeKind::zero) {
                for (int i = 0; i < b.dim; ++i) values_[k++] = -reg_;
            } else if (b.kind == ConeKind::nonnegative) {
                for (int i = 0; i < b.dim; ++i) {
                    const double h = scalings ? (*scalings)[c].w(i) * (*scalings)[c].w(i) : 1.0;
                    values_[k++] = -h - reg_;
                }
            } else {
                const RMatrix H = scalings ? soc_hessian((*scalings)[c]) : RMatrix::Identity(b.dim, b.dim);
                for (int j = 0; j < b.dim; ++j) {
                    for (int i = j; i < b.dim; ++i) values_[k++] = -H(i, j) - (i == j ? reg_ : 0.0);
                }
            }
        }
        regularized_pivots_ = ldl_->factor(values_);
    }

    int regularized_pivots() const { return regularized_pivots_; }
    std::size_t factor_nonzeros() const { return ldl_->factor_nonzeros(); }

    // Solves [0 A^T; A -H] [dx; dz] = [rx; rz] with iterative refinement.
    void solve(const RVector& rx, const RVector& rz, RVector& dx, RVector& dz, int max_refine = 10) const
    {
        RVector rhs(n_ + m_);
        rhs << rx, rz;
        RVector sol;
        ldl_->solve(rhs, sol);
        const double rhs_norm = rhs.lpNorm<Eigen::Infinity>();
        RVector res = rhs - multiply(sol);
        double res_norm = res.lpNorm<Eigen::Infinity>();
        RVector corr;
        for (int it = 0; it < max_refine; ++it) {
            if (!(res_norm > 1e-14 * (1.0 + rhs_norm))) break;
            ldl_->solve(res, corr);
            const RVector trial = sol + corr;
            RVector trial_res = rhs - multiply(trial);
            const double trial_norm = trial_res.lpNorm<Eigen::Infinity>();
            // Singular or badly regularized systems can make refinement diverge;
            // keep the last improvement.
            if (!(trial_norm < res_norm)) break;
            sol = trial;
            res = std::move(trial_res);
            res_norm = trial_norm;
        }
        dx = sol.head(n_);
        dz = sol.tail(m_);
    }

    // H u for the current scaling.
    RVector apply_h(const RVector& u) const
    {
        RVector out = RVector::Zero(m_);
        RVector tmp;
        for (std::size_t c = 0; c < blocks_.size(); ++c) {
            const auto& b = blocks_[c];
            if (b.kind == ConeKind::zero) continue;
            if (!scalings_) {
                out.segment(b.offset, b.dim) = u.segment(b.offset, b.dim);
                continue;
            }
            tmp.resize(b.dim);
            apply_w((*scalings_)[c], u.segment(b.offset, b.dim), tmp);
            apply_w((*scalings_)[c], tmp, out.segment(b.offset, b.dim));
        }
        return out;
    }

private:
    RVector multiply(const RVector& sol) const
    {
        RVector out(n_ + m_);
        out.head(n_) = At_ * sol.tail(m_);
        out.tail(m_) = A_ * sol.head(n_) - apply_h(sol.tail(m_));
        return out;
    }

    SparseMatrix A_;
    SparseMatrix At_;
    std::vector<ConeBlock> blocks_;
    int n_;
    int m_;
    double reg_;
    std::size_t cone_start_ = 0;
    std::vector<double> values_;
    std::optional<QuasiDefiniteLdl> ldl_;
    const std::vector<NtScaling>* scalings_ = nullptr;
    int regularized_pivots_ = 0;
};

} // namespace detail

// Solves `program`; when `log` is non-null an iteration log is written to it as CSV.
inline ConicSolution solve(const ConicProgram& program, const SolverSettings& settings = {},
                           std::ostream* log = nullptr)
{
    using namespace detail;
    program.validate();
    settings.validate();

    const int n = program.num_variables();
    const int m = program.num_constraints();
    const RVector& c = program.c;
    const RVector& b = program.b;
    const SparseMatrix& A = program.A;
    const SparseMatrix At = A.transpose();

    std::vector<ConeBlock> blocks;
    int degree = 0;
    {
        int off = 0;
        for (const auto& k : program.cones) {
            blocks.push_back({k.kind, off, k.dim});
            off += k.dim;
            if (k.kind == ConeKind::nonnegative) degree += k.dim;
            if (k.kind == ConeKind::second_order) degree += 1;
        }
    }

    auto seg = [](RVector& v, const ConeBlock& bl) { return v.segment(bl.offset, bl.dim); };
    auto cseg = [](const RVector& v, const ConeBlock& bl) { return v.segment(bl.offset, bl.dim); };

    KktSystem kkt(program, blocks, settings.static_reg);
    const int refine = settings.max_refine_steps;

    // Initial point: least-squares primal and minimum-norm dual, shifted into the cone.
    RVector x, s, z, tmp_x, tmp_z;
    kkt.factor(nullptr);
    kkt.solve(RVector::Zero(n), b, x, tmp_z, refine);
    s = -tmp_z;
    kkt.solve(-c, RVector::Zero(m), tmp_x, z, refine);
    auto shift_into_cone = [&](RVector& v) {
        double worst = -infinite_step;
        for (const auto& bl : blocks) {
            if (bl.kind == ConeKind::zero) {
                seg(v, bl).setZero();
                continue;
            }
            worst = std::max(worst, -min_eig(bl.kind, cseg(v, bl)));
        }
        if (worst >= 0.0) {
            for (const auto& bl : blocks) add_identity(bl.kind, seg(v, bl), 1.0 + worst);
        }
    };
    shift_into_cone(s);
    {
        // z is free on zero cones; keep those entries.
        RVector zz = z;
        shift_into_cone(zz);
        for (const auto& bl : blocks) {
            if (bl.kind != ConeKind::zero) seg(z, bl) = cseg(zz, bl);
        }
    }
    double tau = 1.0;
    double kappa = 1.0;

    const double b_norm = b.norm();
    const double c_norm = c.norm();

    ConicSolution sol;
    if (log) {
        *log << "iteration,primal_objective,dual_objective,gap,primal_residual,dual_residual,mu,step,sigma\n";
    }

    std::vector<NtScaling> scalings(blocks.size());
    RVector lambda(m), lambda_sq(m), ones_e(m);
    ones_e.setZero();
    for (const auto& bl : blocks) add_identity(bl.kind, seg(ones_e, bl), 1.0);

    double last_step = 0.0;
    double last_sigma = 0.0;
    int tiny_steps = 0;

    auto finalize = [&](SolverStatus status, int iters, const std::string& why) {
        sol.status = status;
        sol.iterations = iters;
        sol.diagnostics = why;
        if (status == SolverStatus::infeasible_detected) {
            sol.primal = x;
            sol.dual = z;
            sol.slacks = s;
        } else {
            sol.primal = x / tau;
            sol.dual = z / tau;
            sol.slacks = s / tau;
        }
        return sol;
    };

    for (int iter = 0;; ++iter) {
        // Residuals of the embedding.
        const RVector rx = At * z + c * tau;
        const RVector rz = A * x + s - b * tau;
        const double cx = c.dot(x);
        const double bz = b.dot(z);
        const double rtau = cx + bz + kappa;
        const double mu = (s.dot(z) + tau * kappa) / (degree + 1);

        const double pobj = cx / tau;
        const double dobj = -bz / tau;
        sol.primal_residual = rz.norm() / tau / (1.0 + b_norm);
        sol.dual_residual = rx.norm() / tau / (1.0 + c_norm);
        sol.duality_gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj));
        sol.primal_objective = pobj;
        sol.dual_objective = dobj;

        if (log) {
            *log << iter << "," << format_g17(pobj) << "," << format_g17(dobj) << "," << format_g17(sol.duality_gap)
                 << "," << format_g17(sol.primal_residual) << "," << format_g17(sol.dual_residual) << ","
                 << format_g17(mu) << "," << format_g17(last_step) << "," << format_g17(last_sigma) << "\n";
        }

        if (!std::isfinite(mu) || !std::isfinite(sol.primal_residual) || !std::isfinite(sol.dual_residual)) {
            return finalize(SolverStatus::numerical_failure, iter, "non-finite iterate");
        }
        if (sol.primal_residual <= settings.feas_tol && sol.dual_residual <= settings.feas_tol &&
            sol.duality_gap <= settings.gap_tol) {
            return finalize(SolverStatus::optimal, iter, "");
        }
        // Certificates: A^T z ~ 0 with b^T z < 0 (primal infeasible), A x + s ~ 0 with c^T x < 0 (dual infeasible).
        if (bz < 0.0 && (At * z).norm() <= settings.feas_tol * -bz && tau < kappa) {
            return finalize(SolverStatus::infeasible_detected, iter, "primal infeasible");
        }
        if (cx < 0.0 && (A * x + s).norm() <= settings.feas_tol * -cx && tau < kappa) {
            return finalize(SolverStatus::infeasible_detected, iter, "dual infeasible");
        }
        if (iter >= settings.max_iters) {
            return finalize(SolverStatus::max_iters, iter, "iteration limit reached");
        }

        for (std::size_t k = 0; k < blocks.size(); ++k) {
            const auto& bl = blocks[k];
            scalings[k] = nt_scaling(bl.kind, cseg(s, bl), cseg(z, bl));
            if (bl.kind != ConeKind::zero) {
                apply_w(scalings[k], cseg(z, bl), seg(lambda, bl));
            } else {
                seg(lambda, bl).setZero();
            }
            jordan_product(bl.kind, cseg(lambda, bl), cseg(lambda, bl), seg(lambda_sq, bl));
        }
        kkt.factor(&scalings);

        RVector x1, z1;
        kkt.solve(-c, b, x1, z1, refine);
        const double denom_base = c.dot(x1) + b.dot(z1);

        // Direction for right-hand side (xi_x, xi_z, xi_tau, xi_s, xi_kappa).
        struct Direction {
            RVector dx, dz, ds;
            double dtau = 0.0, dkappa = 0.0;
        };
        auto direction = [&](const RVector& xi_x, const RVector& xi_z, double xi_tau, const RVector& xi_s,
                             double xi_kappa) {
            Direction d;
            // w_term = W (lambda \ xi_s)
            RVector w_term = RVector::Zero(m);
            RVector tmp;
            for (std::size_t k = 0; k < blocks.size(); ++k) {
                const auto& bl = blocks[k];
                if (bl.kind == ConeKind::zero) continue;
                tmp.resize(bl.dim);
                jordan_divide(bl.kind, cseg(lambda, bl), cseg(xi_s, bl), tmp);
                apply_w(scalings[k], tmp, seg(w_term, bl));
            }
            RVector x2, z2;
            kkt.solve(xi_x, xi_z - w_term, x2, z2, refine);
            const double denom = denom_base - kappa / tau;
            d.dtau = (xi_tau - c.dot(x2) - b.dot(z2) - xi_kappa / tau) / denom;
            d.dx = x2 + d.dtau * x1;
            d.dz = z2 + d.dtau * z1;
            d.ds = w_term - kkt.apply_h(d.dz);
            for (const auto& bl : blocks) {
                if (bl.kind == ConeKind::zero) seg(d.ds, bl).setZero();
            }
            d.dkappa = (xi_kappa - kappa * d.dtau) / tau;
            return d;
        };
        auto step_to_boundary = [&](const Direction& d) {
            double alpha = infinite_step;
            for (const auto& bl : blocks) {
                alpha = std::min(alpha, max_step(bl.kind, cseg(s, bl), cseg(d.ds, bl)));
                alpha = std::min(alpha, max_step(bl.kind, cseg(z, bl), cseg(d.dz, bl)));
            }
            if (d.dtau < 0.0) alpha = std::min(alpha, -tau / d.dtau);
            if (d.dkappa < 0.0) alpha = std::min(alpha, -kappa / d.dkappa);
            return alpha;
        };

        // Predictor.
        const Direction aff = direction(-rx, -rz, -rtau, -lambda_sq, -tau * kappa);
        const double alpha_aff = std::min(1.0, step_to_boundary(aff));
        const double sigma = std::pow(1.0 - alpha_aff, 3);

        // Corrector with second-order term (W^{-T} ds_a) o (W dz_a).
        RVector xi_s(m);
        {
            RVector u, v, prod;
            for (std::size_t k = 0; k < blocks.size(); ++k) {
                const auto& bl = blocks[k];
                if (bl.kind == ConeKind::zero) {
                    seg(xi_s, bl).setZero();
                    continue;
                }
                u.resize(bl.dim);
                v.resize(bl.dim);
                prod.resize(bl.dim);
                apply_w_inv(scalings[k], cseg(aff.ds, bl), u);
                apply_w(scalings[k], cseg(aff.dz, bl), v);
                jordan_product(bl.kind, u, v, prod);
                seg(xi_s, bl) = -cseg(lambda_sq, bl) - prod + sigma * mu * cseg(ones_e, bl);
            }
        }
        const double xi_kappa = -tau * kappa - aff.dtau * aff.dkappa + sigma * mu;
        const Direction dir =
            direction(-(1.0 - sigma) * rx, -(1.0 - sigma) * rz, -(1.0 - sigma) * rtau, xi_s, xi_kappa);
        double alpha = std::min(1.0, settings.step_fraction * step_to_boundary(dir));
        // Round-off near the boundary can still put a cone just outside; back off.
        auto inside = [&](double a) {
            for (const auto& bl : blocks) {
                if (bl.kind == ConeKind::zero) continue;
                const RVector ss = cseg(s, bl) + a * cseg(dir.ds, bl);
                const RVector zz = cseg(z, bl) + a * cseg(dir.dz, bl);
                if (!(min_eig(bl.kind, ss) > 0.0) || !(min_eig(bl.kind, zz) > 0.0)) return false;
            }
            return true;
        };
        for (int back = 0; back < 50 && alpha > 0.0 && !inside(alpha); ++back) alpha *= 0.8;

        if (!(alpha > 1e-10)) {
            if (++tiny_steps >= 3) return finalize(SolverStatus::numerical_failure, iter + 1, "step length collapsed");
        } else {
            tiny_steps = 0;
        }
        x += alpha * dir.dx;
        s += alpha * dir.ds;
        z += alpha * dir.dz;
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;
        last_step = alpha;
        last_sigma = sigma;
        sol.iterations = iter + 1;

        for (const auto& bl : blocks) {
            if (bl.kind == ConeKind::zero) continue;
            if (min_eig(bl.kind, cseg(s, bl)) <= 0.0 || min_eig(bl.kind, cseg(z, bl)) <= 0.0) {
                return finalize(SolverStatus::numerical_failure, iter + 1, "iterate left the cone");
            }
        }
        if (!(tau > 0.0) || !(kappa > 0.0)) {
            return finalize(SolverStatus::numerical_failure, iter + 1, "tau or kappa left the positive half-line");
        }
    }
}

} // namespace sclift
