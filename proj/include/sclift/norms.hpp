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

#include "sclift/common.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace sclift {

// Column 2-norms of the lifted matrix (the vector v).
inline RVector column_norms(const CMatrix& X)
{
    return X.colwise().norm().transpose();
}

// Sum over bins of the Frobenius norm of all columns that belong to the bin.
// With the lifted layout every column c with c mod N == i belongs to bin i,
// whatever the number of blocks per snapshot.
inline double bin_group_norm(const CMatrix& X, int num_bins)
{
    if (num_bins < 1 || X.cols() % num_bins != 0) {
        throw DimensionError("bin_group_norm: column count not divisible by N");
    }
    const RVector v = column_norms(X);
    double total = 0.0;
    for (int i = 0; i < num_bins; ++i) {
        double sq = 0.0;
        for (Eigen::Index c = i; c < X.cols(); c += num_bins) sq += v(c) * v(c);
        total += std::sqrt(sq);
    }
    return total;
}

// ||Xt||_{2,1,2} for an m x 2LN lifted matrix.
inline double norm_212(const CMatrix& X, int num_bins, int num_snapshots)
{
    if (num_bins < 1 || num_snapshots < 1 || X.cols() % (2 * num_bins) != 0 ||
        X.cols() != 2L * num_bins * num_snapshots) {
        throw DimensionError("norm_212: column count must equal 2LN");
    }
    return bin_group_norm(X, num_bins);
}

inline double nuclear_norm(const CMatrix& X)
{
    if (X.size() == 0) return 0.0;
    return Eigen::BDCSVD<CMatrix>(X).singularValues().sum();
}

inline double entrywise_l1(const CMatrix& X)
{
    return X.cwiseAbs().sum();
}

struct NormReport {
    double nuclear = 0.0;
    double entrywise_l1 = 0.0;
    double group_212 = 0.0;
    RVector column_norms;
    double group_scale = 0.0; // sqrt(2 m L)
    bool upper_violated = false;
    bool lower_violated = false;

    bool holds() const { return !upper_violated && !lower_violated; }
};

// Evaluates sqrt(2mL) ||Xt||_{2,1,2} >= ||Xt||_1 >= ||Xt||_* with a relative slack.
inline NormReport corollary1_check(const CMatrix& X, int num_bins, int num_snapshots,
                                   double rel_slack = 1e-9)
{
    NormReport rep;
    rep.column_norms = column_norms(X);
    rep.group_212 = norm_212(X, num_bins, num_snapshots);
    rep.entrywise_l1 = entrywise_l1(X);
    rep.nuclear = nuclear_norm(X);
    rep.group_scale = std::sqrt(2.0 * static_cast<double>(X.rows()) * num_snapshots);
    const double upper = rep.group_scale * rep.group_212;
    rep.upper_violated = rep.entrywise_l1 > upper * (1.0 + rel_slack);
    rep.lower_violated = rep.nuclear > rep.entrywise_l1 * (1.0 + rel_slack);
    return rep;
}

} // namespace sclift
