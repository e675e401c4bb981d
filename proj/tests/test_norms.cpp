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

#include "sclift/norms.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace sclift;
using sclift::testing::random_complex;

TEST(Norm212, ZeroMatrix)
{
    EXPECT_EQ(norm_212(CMatrix::Zero(2, 8), 2, 2), 0.0);
}

TEST(Norm212, AllOnesTwoByFour)
{
    // Columns have norm sqrt(2); bins {0, 2} and {1, 3} have Frobenius norm 2.
    EXPECT_NEAR(norm_212(CMatrix::Ones(2, 4), 2, 1), 4.0, 1e-15);
}

TEST(Norm212, SingleGroupEqualsItsFrobeniusNorm)
{
    std::mt19937_64 rng(1);
    const int N = 5, L = 3;
    CMatrix X = CMatrix::Zero(3, 2 * L * N);
    CMatrix group(3, 2 * L);
    for (int j = 0; j < 2 * L; ++j) {
        X.col(2 + j * N) = random_complex(rng, 3, 1);
        group.col(j) = X.col(2 + j * N);
    }
    EXPECT_NEAR(norm_212(X, N, L), group.norm(), 1e-13);
}

TEST(Norm212, RejectsWrongColumnCount)
{
    EXPECT_THROW(norm_212(CMatrix::Zero(2, 7), 2, 2), DimensionError);
    EXPECT_THROW(norm_212(CMatrix::Zero(2, 4), 2, 2), DimensionError);
}

TEST(Corollary1, RankOneUnitFactors)
{
    std::mt19937_64 rng(2);
    CVector u = random_complex(rng, 3, 1);
    CVector w = random_complex(rng, 8, 1);
    u.normalize();
    w.normalize();
    const NormReport r = corollary1_check(u * w.adjoint(), 2, 2);
    EXPECT_NEAR(r.nuclear, 1.0, 1e-12);
    EXPECT_GE(r.entrywise_l1, 1.0 - 1e-12);
    EXPECT_TRUE(r.holds());
}

TEST(Corollary1, ZeroMatrixIsTight)
{
    const NormReport r = corollary1_check(CMatrix::Zero(2, 4), 2, 1);
    EXPECT_EQ(r.nuclear, 0.0);
    EXPECT_EQ(r.entrywise_l1, 0.0);
    EXPECT_EQ(r.group_212, 0.0);
    EXPECT_TRUE(r.holds());
}

TEST(Corollary1, RandomSweepHasNoViolations)
{
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<int> mdist(1, 4);
    int violations = 0;
    for (int t = 0; t < 1000; ++t) {
        const int m = mdist(rng);
        // 2LN <= 24: pick (L, N) from the admissible pairs.
        const int L = 1 + t % 3;
        const int N = 1 + (t / 3) % (12 / L);
        const NormReport r = corollary1_check(random_complex(rng, m, 2 * L * N), N, L);
        violations += r.holds() ? 0 : 1;
        EXPECT_NEAR(r.group_scale, std::sqrt(2.0 * m * L), 1e-15);
    }
    EXPECT_EQ(violations, 0);
}

TEST(Corollary1, ColumnNormsAreColumnTwoNorms)
{
    std::mt19937_64 rng(6);
    const CMatrix X = random_complex(rng, 3, 8);
    const NormReport r = corollary1_check(X, 2, 2);
    for (int c = 0; c < 8; ++c) {
        double s = 0.0;
        for (int i = 0; i < 3; ++i) s += std::norm(X(i, c));
        EXPECT_NEAR(r.column_norms(c), std::sqrt(s), 1e-14);
    }
}

TEST(Norms, NuclearOfDiagonalIsTraceOfMagnitudes)
{
    CMatrix X = CMatrix::Zero(3, 3);
    X(0, 0) = cplx(3, 4);
    X(1, 1) = -2.0;
    X(2, 2) = cplx(0, 1);
    EXPECT_NEAR(nuclear_norm(X), 8.0, 1e-13);
    EXPECT_NEAR(entrywise_l1(X), 8.0, 1e-13);
}

TEST(Norms, BinGroupNormHandlesOnGridLayout)
{
    // P = 1: N = 2, L = 2, columns {0, 2} and {1, 3}.
    CMatrix X = CMatrix::Zero(1, 4);
    X(0, 0) = 3.0;
    X(0, 2) = 4.0;
    X(0, 1) = 1.0;
    EXPECT_NEAR(bin_group_norm(X, 2), 6.0, 1e-15);
}
