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

#include "sclift/array_model.hpp"
#include "sclift/recovery.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

using namespace sclift;
using sclift::testing::random_complex;

namespace {

const ArrayGeometry ula8{8, 0.5};

// x row of h [x_1^T ... x_L^T] for an N x L coefficient block pair.
CVector coefficient_row(const CMatrix& sbar, const CMatrix& p)
{
    const Eigen::Index N = sbar.rows();
    const Eigen::Index L = sbar.cols();
    CVector x(2 * N * L);
    for (Eigen::Index l = 0; l < L; ++l) {
        x.segment(2 * N * l, N) = sbar.col(l);
        x.segment(2 * N * l + N, N) = p.col(l);
    }
    return x;
}

} // namespace

TEST(RankOneFactor, ExactRankOneRecovered)
{
    std::mt19937_64 rng(1);
    const CVector h = random_complex(rng, 3, 1);
    const CVector x = random_complex(rng, 20, 1);
    const CMatrix X = h * x.transpose();
    const RankOneFactor f = rank_one_factor(X);
    EXPECT_GE(aligned_correlation(f.h, h), 1.0 - 1e-10);
    EXPECT_GE(aligned_correlation(f.x, x), 1.0 - 1e-10);
    EXPECT_LE((f.h * f.x.transpose() - X).norm(), 1e-12 * X.norm());
    EXPECT_NEAR(f.sigma1_ratio, 1.0, 1e-12);
}

TEST(RankOneFactor, PhaseMakesLargestEntryRealPositive)
{
    std::mt19937_64 rng(2);
    const CMatrix X = random_complex(rng, 4, 10);
    const RankOneFactor f = rank_one_factor(X);
    Eigen::Index big = 0;
    f.h.cwiseAbs().maxCoeff(&big);
    EXPECT_GT(f.h(big).real(), 0.0);
    EXPECT_NEAR(f.h(big).imag(), 0.0, 1e-14);
    // Balanced scale: ||h|| = ||x|| = sqrt(s1).
    EXPECT_NEAR(f.h.norm(), f.x.norm(), 1e-12 * f.h.norm());
}

TEST(RankOneFactor, SmallNoiseKeepsDominantSingularValue)
{
    std::mt19937_64 rng(3);
    const CMatrix X = random_complex(rng, 2, 1) * random_complex(rng, 1, 24);
    CMatrix E = random_complex(rng, 2, 24);
    E *= 0.01 * X.norm() / E.norm();
    EXPECT_GE(rank_one_factor(X + E).sigma1_ratio, 0.9);
}

TEST(RankOneFactor, EqualSingularValues)
{
    CMatrix X = CMatrix::Zero(3, 8);
    for (int i = 0; i < 3; ++i) X(i, 2 * i) = 1.0;
    EXPECT_NEAR(rank_one_factor(X).sigma1_ratio, 1.0 / 3.0, 1e-14);
}

TEST(RankOneFactor, ZeroMatrixIsDegenerate)
{
    EXPECT_THROW(rank_one_factor(CMatrix::Zero(2, 4)), DegenerateInputError);
}

TEST(DetectSupport, PaperAnglesOnOneDegreeGrid)
{
    const AngleGrid g = build_grid(-90, 90, 1);
    const auto cal = make_calibration(dft_calibration_basis(8, 2), draw_calibration_coefficients(2, 1));
    const Simulation sim = simulate(ula8, cal, {{13.2220, 28.6022}, 3, {1.0, 1.0}, 20.0}, g, 5);
    const CMatrix p = sim.truth.beta.asDiagonal() * sim.truth.sbar;
    const SupportEstimate s = detect_support(coefficient_row(sim.truth.sbar, p), 180, 3, 2);
    // 13.222 -> 13 deg (bin 103); 28.6022 is nearest to 29 deg (bin 119), offset -0.3978 deg.
    EXPECT_EQ(s.support, (std::vector<int>{103, 119}));
    EXPECT_NEAR(s.spectrum.maxCoeff(), 1.0, 1e-15);
}

TEST(DetectSupport, SingleGroup)
{
    std::mt19937_64 rng(4);
    CMatrix S = CMatrix::Zero(10, 2);
    S.row(6) = random_complex(rng, 1, 2);
    const SupportEstimate s = detect_support(coefficient_row(S, 0.01 * S), 10, 2, 1);
    EXPECT_EQ(s.support, std::vector<int>{6});
    EXPECT_EQ(s.spectrum(6), 1.0);
    EXPECT_EQ(s.spectrum.sum(), 1.0);
}

TEST(DetectSupport, TiesGoToLowerIndex)
{
    CMatrix S = CMatrix::Zero(10, 1);
    S(2, 0) = 1.0;
    S(7, 0) = cplx(0.0, 1.0);
    S(4, 0) = 0.5;
    const SupportEstimate one = detect_support(coefficient_row(S, CMatrix::Zero(10, 1)), 10, 1, 1);
    EXPECT_EQ(one.support, std::vector<int>{2});
    const SupportEstimate two = detect_support(coefficient_row(S, CMatrix::Zero(10, 1)), 10, 1, 2);
    EXPECT_EQ(two.support, (std::vector<int>{2, 7}));
}

TEST(DetectSupport, SeparationSkipsNeighbour)
{
    CMatrix S = CMatrix::Zero(10, 1);
    S(4, 0) = 1.0;
    S(5, 0) = 0.9; // leakage into the adjacent bin
    S(8, 0) = 0.5;
    const auto x = coefficient_row(S, CMatrix::Zero(10, 1));
    EXPECT_EQ(detect_support(x, 10, 1, 2).support, (std::vector<int>{4, 8}));
    EXPECT_EQ(detect_support(x, 10, 1, 2, 1).support, (std::vector<int>{4, 5}));
}

TEST(DetectSupport, Errors)
{
    const CVector x = CVector::Ones(20);
    EXPECT_THROW(detect_support(x, 10, 1, 11), DomainError);
    EXPECT_THROW(detect_support(x, 10, 1, 0), DomainError);
    EXPECT_THROW(detect_support(CVector::Ones(19), 10, 1, 1), DimensionError);
}

TEST(BetaMagnitude, ZeroPRowGivesZero)
{
    std::mt19937_64 rng(5);
    const CMatrix S = random_complex(rng, 6, 3);
    const auto b = beta_magnitude(S, CMatrix::Zero(6, 3), {1, 4}, 0.05);
    EXPECT_EQ(b.magnitude(0), 0.0);
    EXPECT_EQ(b.magnitude(1), 0.0);
}

TEST(BetaMagnitude, ProportionalRowsAndClamp)
{
    std::mt19937_64 rng(6);
    const CMatrix S = random_complex(rng, 6, 3);
    const auto open = beta_magnitude(S, 0.3 * S, {0, 3}, 0.5);
    EXPECT_NEAR(open.magnitude(0), 0.3, 1e-14);
    EXPECT_NEAR(open.magnitude(1), 0.3, 1e-14);
    const auto clamped = beta_magnitude(S, 0.3 * S, {0, 3}, 0.026);
    EXPECT_EQ(clamped.magnitude(0), 0.026);
}

TEST(BetaMagnitude, VanishingRowFlagsUnstable)
{
    std::mt19937_64 rng(7);
    CMatrix S = random_complex(rng, 6, 2);
    S.row(2).setZero();
    const auto b = beta_magnitude(S, 0.1 * S, {2, 5}, 0.2);
    EXPECT_TRUE(b.unstable[0]);
    EXPECT_FALSE(b.unstable[1]);
    EXPECT_EQ(b.magnitude(0), 0.0);
    // Below the spectrum floor counts as vanishing too.
    RVector spectrum = RVector::Ones(6);
    spectrum(5) = 5e-4;
    EXPECT_TRUE(beta_magnitude(S, 0.1 * S, {5}, 0.2, spectrum).unstable[0]);
}

TEST(BetaMagnitude, NoiselessPipelineRecoversOffset)
{
    const AngleGrid g = build_grid(-90, 90, 1);
    const auto cal = make_calibration(dft_calibration_basis(8, 2), draw_calibration_coefficients(2, 2));
    const Simulation sim = simulate(ula8, cal, {{13.2220}, 4, {1.0}, 300.0}, g, 8);
    // Through the lift and factorization, as estimate() does it.
    const CMatrix X = offgrid_coefficients(sim.truth.sbar, sim.truth.beta);
    const RankOneFactor f = rank_one_factor(lift(cal.coefficients, X));
    CMatrix sbar, p;
    split_coefficients(f.x, 180, 4, sbar, p);
    const auto b = beta_magnitude(sbar, p, sim.truth.support, g.half_interval);
    EXPECT_NEAR(b.magnitude(0), 0.2220 * pi / 180.0, 1e-3);
}

TEST(RecoverSign, PositiveOffsetNoiseless)
{
    const AngleGrid g = build_grid(-90, 90, 1);
    const auto cal = make_calibration(dft_calibration_basis(8, 2), draw_calibration_coefficients(2, 3));
    const Simulation sim = simulate(ula8, cal, {{10.2}, 3, {1.0}, 300.0}, g, 9);
    const auto op = LiftedOperator::off_grid(cal.basis, build_dictionary(ula8, g), 3);
    const int bin = sim.truth.support[0];
    const RVector mag = RVector::Constant(1, std::abs(sim.truth.beta(bin)));
    const SignChoice sc =
        recover_sign(op, sim.snapshots.observations, cal.coefficients, sim.truth.sbar, mag, sim.truth.support);
    EXPECT_GT(sc.beta(0), 0.0);
    ASSERT_EQ(sc.residuals.size(), 2u);
    EXPECT_GT(sc.residuals[1] / sc.residuals[0], 1.5);
    EXPECT_EQ(sc.residual, sc.residuals[0]);
}

TEST(RecoverSign, ZeroMagnitudesPickAllPositive)
{
    std::mt19937_64 rng(10);
    const AngleGrid g = build_grid(-90, 90, 10);
    const auto op = LiftedOperator::off_grid(dft_calibration_basis(8, 2), build_dictionary(ula8, g), 2);
    const CMatrix S = random_complex(rng, 18, 2);
    const SignChoice sc =
        recover_sign(op, random_complex(rng, 8, 2), random_complex(rng, 2, 1), S, RVector::Zero(3), {1, 5, 9});
    EXPECT_EQ(sc.pattern, 0u);
    for (double r : sc.residuals) EXPECT_EQ(r, sc.residuals[0]);
}

TEST(RecoverSign, EnumerationGuard)
{
    const AngleGrid g = build_grid(-90, 90, 2);
    const auto op = LiftedOperator::off_grid(dft_calibration_basis(8, 2), build_dictionary(ula8, g), 1);
    std::vector<int> support(21);
    for (int k = 0; k < 21; ++k) support[k] = 4 * k;
    EXPECT_THROW(recover_sign(op, CMatrix::Zero(8, 1), CVector::Ones(2), CMatrix::Zero(90, 1), RVector::Zero(21),
                              support),
                 ConfigError);
}

namespace {

struct ToyScene {
    AngleGrid grid = build_grid(-90, 90, 6); // N = 30
    Dictionary dict = build_dictionary(ula8, grid);
    CMatrix basis = dft_calibration_basis(8, 2);
};

EstimateSettings toy_settings(double eta, double r)
{
    EstimateSettings st;
    st.eta = eta;
    st.half_interval = r;
    return st;
}

} // namespace

TEST(Estimate, OnGridOperatorRecoversGridAngleExactly)
{
    ToyScene t;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto cal = make_calibration(t.basis, draw_calibration_coefficients(2, 100 + seed));
        const Simulation sim = simulate(ula8, cal, {{-24.0}, 5, {1.0}, 120.0}, t.grid, seed);
        const auto op = LiftedOperator::on_grid(t.basis, t.dict, 5);
        const double eta = select_eta(sim.snapshots.noise_variance, 8, 5, 0.95);
        const RecoveryResult res = estimate(op, t.grid, sim.snapshots.observations, toy_settings(eta, 0.0), 1);
        ASSERT_EQ(res.solver_status, SolverStatus::optimal);
        ASSERT_EQ(res.theta_hat.size(), 1u);
        EXPECT_EQ(res.theta_hat[0], -24.0) << seed;
        CMatrix truth = lift(cal.coefficients, sim.truth.sbar);
        EXPECT_GE(aligned_correlation(lift(res.h_hat, res.sbar_hat), truth), 0.99);
    }
}

TEST(Estimate, InvariantsOnNoisyOffGridScene)
{
    ToyScene t;
    const auto cal = make_calibration(t.basis, draw_calibration_coefficients(2, 7));
    const Simulation sim = simulate(ula8, cal, {{-40.7, 20.9}, 5, {1.0, 1.0}, 20.0}, t.grid, 4);
    const auto op = LiftedOperator::off_grid(t.basis, t.dict, 5);
    const double eta = select_eta(sim.snapshots.noise_variance, 8, 5, 0.95);
    const RecoveryResult res =
        estimate(op, t.grid, sim.snapshots.observations, toy_settings(eta, t.grid.half_interval), 2);
    ASSERT_EQ(res.theta_hat.size(), 2u);
    EXPECT_GE(res.spectrum.minCoeff(), 0.0);
    EXPECT_NEAR(res.spectrum.maxCoeff(), 1.0, 1e-15);
    for (int i = 0; i < t.grid.size(); ++i) {
        const bool on = std::find(res.support.begin(), res.support.end(), i) != res.support.end();
        if (on) {
            EXPECT_LE(std::abs(res.beta_hat(i)), t.grid.half_interval);
        } else {
            EXPECT_EQ(res.beta_hat(i), 0.0);
        }
    }
    for (std::size_t k = 0; k < 2; ++k) {
        const int i = res.support[k];
        EXPECT_DOUBLE_EQ(res.theta_hat[k], rad_to_deg(t.grid.angles[i] + res.beta_hat(i)));
    }
    EXPECT_EQ(res.sign_residuals.size(), 4u);

    // Global phase of the data does not move the estimates.
    const CMatrix Yr = std::polar(1.0, 0.9) * sim.snapshots.observations;
    const RecoveryResult rot = estimate(op, t.grid, Yr, toy_settings(eta, t.grid.half_interval), 2);
    EXPECT_EQ(rot.support, res.support);
    for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(rot.theta_hat[k], res.theta_hat[k], 1e-3);
    EXPECT_LE((rot.spectrum - res.spectrum).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Estimate, SourceOrderDoesNotChangeTheSet)
{
    ToyScene t;
    const auto cal = make_calibration(t.basis, draw_calibration_coefficients(2, 9));
    const Simulation a = simulate(ula8, cal, {{-30.0, 36.0}, 3, {1.0, 2.0}, 300.0}, t.grid, 6);
    const auto op = LiftedOperator::on_grid(t.basis, t.dict, 3);
    // Same data written with the two sources listed in the other order.
    CMatrix A(8, 2);
    A.col(0) = t.dict.steering.col(a.truth.support[1]);
    A.col(1) = t.dict.steering.col(a.truth.support[0]);
    CMatrix S(2, 3);
    S.row(0) = a.truth.signals.row(1);
    S.row(1) = a.truth.signals.row(0);
    const CMatrix Yb = cal.gains.asDiagonal() * A * S;
    const auto st = toy_settings(1e-6, 0.0);
    const RecoveryResult ra = estimate(op, t.grid, a.snapshots.observations, st, 2);
    const RecoveryResult rb = estimate(op, t.grid, Yb, st, 2);
    EXPECT_EQ(std::set<double>(ra.theta_hat.begin(), ra.theta_hat.end()),
              std::set<double>(rb.theta_hat.begin(), rb.theta_hat.end()));
}

TEST(Estimate, ZeroSolutionIsFlaggedDegenerate)
{
    ToyScene t;
    const auto op = LiftedOperator::off_grid(t.basis, t.dict, 2);
    std::mt19937_64 rng(11);
    const CMatrix Y = 0.01 * random_complex(rng, 8, 2);
    const RecoveryResult res = estimate(op, t.grid, Y, toy_settings(10.0, t.grid.half_interval), 2);
    EXPECT_TRUE(res.degenerate);
    EXPECT_FALSE(res.ok());
    EXPECT_EQ(res.theta_hat.size(), 2u);
}

TEST(SpectrumCsv, HeaderAndRows)
{
    const AngleGrid g = build_grid(0, 10, 2.5);
    RVector s(4);
    s << 0.25, 1.0, 0.5, 0.0;
    std::ostringstream os;
    write_spectrum_csv(os, g, s);
    EXPECT_EQ(os.str(), "angle_deg,amplitude\n0,0.25\n2.5,1\n5,0.5\n7.5,0\n");
}
