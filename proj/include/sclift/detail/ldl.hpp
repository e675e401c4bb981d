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

// Sparse LDL^T for symmetric quasi-definite matrices with a fixed pattern.
// Up-looking factorization over an elimination tree, fill-reducing AMD
// ordering, and dynamic regularization of pivots whose sign disagrees with
// the expected inertia.
//
// Each index carries an elimination stage; the AMD order is stably
// partitioned so that lower stages are eliminated first. For the interior-point
// KKT matrix the stages are: cone rows (H positive definite), then primal
// variables, then equality rows. Eliminating the equality rows before the
// primal block would leave Schur complements of the size of the static
// regularization and destroy the pivots by cancellation.

#include "sclift/common.hpp"

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

namespace sclift::detail {

class QuasiDefiniteLdl {
public:
    // `rows`/`cols` list the lower-triangular pattern (row >= col) in a fixed
    // order; values are later supplied in the same order. Duplicates are summed.
    // `signs[i]` is +1 or -1, the expected sign of pivot i; `stages[i]` its
    // elimination stage (empty means a single stage).
    QuasiDefiniteLdl(int dim, const std::vector<int>& rows, const std::vector<int>& cols,
                     std::vector<int> signs, const std::vector<int>& stages = {})
        : n_(dim), signs_(std::move(signs))
    {
        order(rows, cols, stages);
        new_of_old_.assign(n_, 0);
        for (int k = 0; k < n_; ++k) new_of_old_[old_of_new_[k]] = k;

        // Upper-triangular CSC of the permuted matrix; slot_[k] locates entry k.
        std::vector<std::pair<int, int>> pos(rows.size());
        for (std::size_t k = 0; k < rows.size(); ++k) {
            int a = new_of_old_[rows[k]];
            int b = new_of_old_[cols[k]];
            if (a > b) std::swap(a, b);
            pos[k] = {b, a}; // (column, row)
        }
        std::vector<std::size_t> by_pos(rows.size());
        std::iota(by_pos.begin(), by_pos.end(), std::size_t{0});
        std::sort(by_pos.begin(), by_pos.end(), [&](std::size_t x, std::size_t y) { return pos[x] < pos[y]; });
        Ap_.assign(n_ + 1, 0);
        slot_.assign(rows.size(), 0);
        std::pair<int, int> last{-1, -1};
        for (std::size_t idx : by_pos) {
            if (pos[idx] != last) {
                Ai_.push_back(pos[idx].second);
                ++Ap_[pos[idx].first + 1];
                last = pos[idx];
            }
            slot_[idx] = static_cast<int>(Ai_.size()) - 1;
        }
        for (int j = 0; j < n_; ++j) Ap_[j + 1] += Ap_[j];
        Ax_.assign(Ai_.size(), 0.0);
        for (int j = 0; j < n_; ++j) {
            if (Ap_[j + 1] == Ap_[j] || Ai_[Ap_[j + 1] - 1] != j) {
                throw DimensionError("QuasiDefiniteLdl: structurally missing diagonal entry");
            }
        }
        symbolic();
    }

    int dim() const { return n_; }
    std::size_t factor_nonzeros() const { return Li_.size(); }

    // Numeric factorization with the values listed in pattern order. Returns
    // the number of pivots that had to be regularized. A pivot of the wrong
    // sign keeps its magnitude with the sign forced, and tiny pivots are
    // raised to `pivot_delta`. Near the optimum cancellation can flip the sign
    // of a large pivot; snapping it to a fixed small value instead would
    // perturb the factor far beyond what refinement can repair.
    int factor(const std::vector<double>& values, double pivot_eps = 1e-13, double pivot_delta = 1e-7)
    {
        std::fill(Ax_.begin(), Ax_.end(), 0.0);
        for (std::size_t k = 0; k < values.size(); ++k) Ax_[slot_[k]] += values[k];

        std::vector<double>& y = work_vals_;
        std::vector<char>& mark = work_mark_;
        std::fill(y.begin(), y.end(), 0.0);
        std::fill(mark.begin(), mark.end(), 0);
        std::vector<int> next_free(Lp_.begin(), Lp_.end() - 1);
        std::vector<int> yidx(n_);
        std::vector<int> buf(n_);
        int bumped = 0;

        for (int k = 0; k < n_; ++k) {
            int nnz_y = 0;
            double dk = 0.0;
            for (int p = Ap_[k]; p < Ap_[k + 1]; ++p) {
                const int i = Ai_[p];
                if (i == k) {
                    dk = Ax_[p];
                    continue;
                }
                y[i] = Ax_[p];
                if (mark[i]) continue;
                int len = 0;
                int node = i;
                while (node != -1 && node < k && !mark[node]) {
                    mark[node] = 1;
                    buf[len++] = node;
                    node = etree_[node];
                }
                while (len > 0) yidx[nnz_y++] = buf[--len];
            }
            for (int t = nnz_y - 1; t >= 0; --t) {
                const int c = yidx[t];
                const double yc = y[c];
                const int end = next_free[c];
                for (int q = Lp_[c]; q < end; ++q) {
                    y[Li_[q]] -= Lx_[q] * yc;
                }
                const double l = yc * Dinv_[c];
                Li_[end] = k;
                Lx_[end] = l;
                dk -= yc * l;
                ++next_free[c];
                y[c] = 0.0;
                mark[c] = 0;
            }
            const int old = old_of_new_[k];
            const double sgn = signs_[old];
            if (!(sgn * dk > pivot_eps)) {
                dk = sgn * std::max(pivot_delta, std::abs(dk));
                ++bumped;
            }
            D_[k] = dk;
            Dinv_[k] = 1.0 / dk;
        }
        return bumped;
    }

    // Solves with the most recent factorization, in the original ordering.
    void solve(const RVector& rhs, RVector& out) const
    {
        RVector x(n_);
        for (int k = 0; k < n_; ++k) x(k) = rhs(old_of_new_[k]);
        for (int c = 0; c < n_; ++c) {
            const double xc = x(c);
            for (int q = Lp_[c]; q < Lp_[c + 1]; ++q) x(Li_[q]) -= Lx_[q] * xc;
        }
        for (int k = 0; k < n_; ++k) x(k) *= Dinv_[k];
        for (int c = n_ - 1; c >= 0; --c) {
            double acc = x(c);
            for (int q = Lp_[c]; q < Lp_[c + 1]; ++q) acc -= Lx_[q] * x(Li_[q]);
            x(c) = acc;
        }
        out.resize(n_);
        for (int k = 0; k < n_; ++k) out(old_of_new_[k]) = x(k);
    }

private:
    // Fill-reducing ordering. Without stages: AMD on the pattern. With stages:
    // stage-0 nodes go first in index order; the rest are ordered by AMD on
    // the graph left after eliminating stage 0 (every connected stage-0
    // component turns its outside neighbours into a clique), then stably
    // partitioned by stage.
    void order(const std::vector<int>& rows, const std::vector<int>& cols, const std::vector<int>& stages)
    {
        using Pattern = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
        auto amd_order = [](int dim, const std::vector<Eigen::Triplet<double>>& trips) {
            Pattern pattern(dim, dim);
            pattern.setFromTriplets(trips.begin(), trips.end());
            Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm;
            Eigen::AMDOrdering<int> amd;
            amd(pattern, perm);
            // perm.indices()[new] = old.
            return std::vector<int>(perm.indices().data(), perm.indices().data() + dim);
        };

        if (stages.empty()) {
            std::vector<Eigen::Triplet<double>> trips;
            trips.reserve(rows.size());
            for (std::size_t k = 0; k < rows.size(); ++k) trips.emplace_back(rows[k], cols[k], 1.0);
            old_of_new_ = amd_order(n_, trips);
            return;
        }

        // Union-find over stage-0 nodes joined by stage-0 edges.
        std::vector<int> parent(n_);
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&](int a) {
            while (parent[a] != a) a = parent[a] = parent[parent[a]];
            return a;
        };
        for (std::size_t k = 0; k < rows.size(); ++k) {
            if (stages[rows[k]] == 0 && stages[cols[k]] == 0) {
                const int a = find(rows[k]), b = find(cols[k]);
                if (a != b) parent[std::max(a, b)] = std::min(a, b);
            }
        }
        std::vector<int> reduced(n_, -1), full_of_reduced;
        for (int i = 0; i < n_; ++i) {
            if (stages[i] != 0) {
                reduced[i] = static_cast<int>(full_of_reduced.size());
                full_of_reduced.push_back(i);
            }
        }
        std::vector<std::vector<int>> outside(n_);
        std::vector<Eigen::Triplet<double>> trips;
        for (std::size_t k = 0; k < rows.size(); ++k) {
            const int a = rows[k], b = cols[k];
            if (stages[a] != 0 && stages[b] != 0) {
                trips.emplace_back(reduced[a], reduced[b], 1.0);
            } else if (stages[a] == 0 && stages[b] != 0) {
                outside[find(a)].push_back(reduced[b]);
            } else if (stages[b] == 0 && stages[a] != 0) {
                outside[find(b)].push_back(reduced[a]);
            }
        }
        for (auto& nb : outside) {
            std::sort(nb.begin(), nb.end());
            nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
            for (std::size_t x = 0; x < nb.size(); ++x) {
                for (std::size_t y = 0; y <= x; ++y) trips.emplace_back(nb[x], nb[y], 1.0);
            }
        }
        const int nr = static_cast<int>(full_of_reduced.size());
        for (int i = 0; i < nr; ++i) trips.emplace_back(i, i, 1.0);

        old_of_new_.clear();
        for (int i = 0; i < n_; ++i) {
            if (stages[i] == 0) old_of_new_.push_back(i);
        }
        const std::size_t head = old_of_new_.size();
        for (int r : amd_order(nr, trips)) old_of_new_.push_back(full_of_reduced[r]);
        std::stable_sort(old_of_new_.begin() + head, old_of_new_.end(),
                         [&](int a, int b) { return stages[a] < stages[b]; });
    }

    void symbolic()
    {
        etree_.assign(n_, -1);
        std::vector<int> col_nnz(n_, 0);
        std::vector<int> flag(n_, -1);
        for (int j = 0; j < n_; ++j) {
            flag[j] = j;
            for (int p = Ap_[j]; p < Ap_[j + 1]; ++p) {
                int i = Ai_[p];
                while (flag[i] != j) {
                    if (etree_[i] == -1) etree_[i] = j;
                    ++col_nnz[i];
                    flag[i] = j;
                    i = etree_[i];
                }
            }
        }
        Lp_.assign(n_ + 1, 0);
        for (int j = 0; j < n_; ++j) Lp_[j + 1] = Lp_[j] + col_nnz[j];
        Li_.assign(Lp_[n_], 0);
        Lx_.assign(Lp_[n_], 0.0);
        D_.assign(n_, 0.0);
        Dinv_.assign(n_, 0.0);
        work_vals_.assign(n_, 0.0);
        work_mark_.assign(n_, 0);
    }

    int n_;
    std::vector<int> signs_;
    std::vector<int> old_of_new_;
    std::vector<int> new_of_old_;
    std::vector<int> Ap_, Ai_;
    std::vector<double> Ax_;
    std::vector<int> slot_;
    std::vector<int> etree_;
    std::vector<int> Lp_, Li_;
    std::vector<double> Lx_;
    std::vector<double> D_, Dinv_;
    std::vector<double> work_vals_;
    std::vector<char> work_mark_;
};

} // namespace sclift::detail
