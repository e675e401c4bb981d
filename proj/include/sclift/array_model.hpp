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

// Uniform linear array with unknown per-sensor complex gains D = diag(B h),
// far-field narrowband sources and circular Gaussian noise.

#include "sclift/common.hpp"
#include "sclift/grid.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace sclift {

struct ArrayGeometry {
    int num_sensors = 8;        // M
    double spacing_ratio = 0.5; // d / lambda

    void validate() const
    {
        if (num_sensors < 2) throw DomainError("ArrayGeometry: need at least 2 sensors");
        if (!(spacing_ratio > 0.0)) throw DomainError("ArrayGeometry: spacing ratio must be positive");
    }
};

// Known basis B (M x m), unknown coefficients h, gains d = B h.
struct CalibrationModel {
    CMatrix basis;
    CVector coefficients;
    CVector gains;

    int num_basis() const { return static_cast<int>(basis.cols()); }
};

inline CalibrationModel make_calibration(CMatrix basis, CVector coefficients)
{
    if (basis.cols() != coefficients.size()) {
        throw DimensionError("make_calibration: basis columns must match coefficient count");
    }
    if (basis.cols() >= basis.rows()) {
        throw DomainError("make_calibration: need m < M");
    }
    CalibrationModel cal;
    cal.gains = basis * coefficients;
    cal.basis = std::move(basis);
    cal.coefficients = std::move(coefficients);
    return cal;
}

struct SourceScene {
    std::vector<double> true_doas_deg;
    int num_snapshots = 1;
    std::vector<double> source_powers;
    double snr_db = 10.0;

    int num_sources() const { return static_cast<int>(true_doas_deg.size()); }

    void validate() const
    {
        if (true_doas_deg.empty()) throw DomainError("SourceScene: need at least one source");
        if (source_powers.size() != true_doas_deg.size()) {
            throw DimensionError("SourceScene: one power per source required");
        }
        for (double t : true_doas_deg) {
            if (!(t > -90.0 && t < 90.0)) throw DomainError("SourceScene: DoA outside (-90, 90) deg");
        }
        for (double p : source_powers) {
            if (!(p > 0.0)) throw DomainError("SourceScene: source powers must be positive");
        }
        if (num_snapshots < 1) throw DomainError("SourceScene: need at least one snapshot");
    }

    // Noise variance for the configured SNR, measured against the total
    // source power per sensor per snapshot.
    double noise_variance() const
    {
        const double total = std::accumulate(source_powers.begin(), source_powers.end(), 0.0);
        return total / std::pow(10.0, snr_db / 10.0);
    }
};

struct SnapshotSet {
    CMatrix observations; // Y, M x L
    double noise_variance = 0.0;
    std::uint64_t rng_seed = 0;
};

struct GroundTruth {
    CMatrix signals;          // S, K x L
    CMatrix sbar;             // S-bar, N x L, nonzero only on the support rows
    RVector beta;             // N, radians, zero off the support
    std::vector<int> support; // grid bin per source, in source order
};

enum class TruthModel { linearized, exact };

struct Simulation {
    SnapshotSet snapshots;
    GroundTruth truth;
};

// a(theta)_k = exp(-j (k - (M-1)/2) 2 pi (d/lambda) sin(theta)), k = 0..M-1.
inline CVector steering_vector(const ArrayGeometry& geometry, double angle_rad)
{
    if (!within_half_circle(angle_rad)) throw DomainError("steering_vector: |angle| > pi/2");
    const int M = geometry.num_sensors;
    const double center = (M - 1) / 2.0;
    const double phase_step = 2.0 * pi * geometry.spacing_ratio * std::sin(angle_rad);
    CVector a(M);
    for (int k = 0; k < M; ++k) {
        a(k) = std::polar(1.0, -(k - center) * phase_step);
    }
    return a;
}

// Derivative of the steering vector with respect to the angle in radians.
inline CVector steering_derivative(const ArrayGeometry& geometry, double angle_rad)
{
    if (!within_half_circle(angle_rad)) throw DomainError("steering_derivative: |angle| > pi/2");
    const int M = geometry.num_sensors;
    const double center = (M - 1) / 2.0;
    const double scale = 2.0 * pi * geometry.spacing_ratio * std::cos(angle_rad);
    CVector a = steering_vector(geometry, angle_rad);
    for (int k = 0; k < M; ++k) {
        a(k) *= cplx(0.0, -(k - center) * scale);
    }
    return a;
}

// First m columns of the unnormalized M x M DFT matrix, entries exp(-j 2 pi k l / M).
inline CMatrix dft_calibration_basis(int M, int m)
{
    if (m < 1 || m >= M) throw DomainError("dft_calibration_basis: need 1 <= m < M");
    CMatrix B(M, m);
    for (int k = 0; k < M; ++k) {
        for (int l = 0; l < m; ++l) {
            // Reduce k*l mod M first so the phase stays small and exact.
            const double frac = static_cast<double>((k * l) % M) / M;
            B(k, l) = std::polar(1.0, -2.0 * pi * frac);
        }
    }
    return B;
}

// Circular complex Gaussian draw with E|x|^2 = variance.
template <class Rng>
cplx complex_gaussian(Rng& rng, double variance)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    const double s = std::sqrt(variance / 2.0);
    const double re = normal(rng);
    const double im = normal(rng);
    return {s * re, s * im};
}

inline CVector draw_calibration_coefficients(int m, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    CVector h(m);
    for (int i = 0; i < m; ++i) h(i) = complex_gaussian(rng, 1.0);
    return h;
}

// Draws one scenario. The linearized truth follows Y = D (A-bar + B-bar Gamma) S-bar + N
// with each source snapped to its nearest grid bin; the exact truth uses
// Y = D A(theta) S + N. Sources are drawn before noise from the same stream.
inline Simulation simulate(const ArrayGeometry& geometry, const CalibrationModel& calibration,
                           const SourceScene& scene, const AngleGrid& grid, std::uint64_t seed,
                           TruthModel model = TruthModel::linearized)
{
    geometry.validate();
    scene.validate();
    if (calibration.gains.size() != geometry.num_sensors) {
        throw DimensionError("simulate: calibration gains must have one entry per sensor");
    }
    const int M = geometry.num_sensors;
    const int K = scene.num_sources();
    const int L = scene.num_snapshots;
    const int N = grid.size();

    Simulation sim;
    GroundTruth& truth = sim.truth;
    truth.beta = RVector::Zero(N);
    truth.sbar = CMatrix::Zero(N, L);
    truth.signals = CMatrix(K, L);
    for (int k = 0; k < K; ++k) {
        const auto [bin, offset] = grid.nearest(deg_to_rad(scene.true_doas_deg[k]));
        if (std::find(truth.support.begin(), truth.support.end(), bin) != truth.support.end()) {
            throw ScenarioError("simulate: two sources map to the same grid bin");
        }
        truth.support.push_back(bin);
        truth.beta(bin) = offset;
    }

    std::mt19937_64 rng(seed);
    for (int l = 0; l < L; ++l) {
        for (int k = 0; k < K; ++k) {
            truth.signals(k, l) = complex_gaussian(rng, scene.source_powers[k]);
        }
    }
    for (int k = 0; k < K; ++k) truth.sbar.row(truth.support[k]) = truth.signals.row(k);

    CMatrix response(M, K);
    for (int k = 0; k < K; ++k) {
        const int bin = truth.support[k];
        if (model == TruthModel::exact) {
            response.col(k) = steering_vector(geometry, deg_to_rad(scene.true_doas_deg[k]));
        } else {
            response.col(k) = steering_vector(geometry, grid.angles[bin]) +
                              truth.beta(bin) * steering_derivative(geometry, grid.angles[bin]);
        }
    }

    const double sigma2 = scene.noise_variance();
    CMatrix Y = calibration.gains.asDiagonal() * (response * truth.signals);
    for (int l = 0; l < L; ++l) {
        for (int i = 0; i < M; ++i) Y(i, l) += complex_gaussian(rng, sigma2);
    }
    sim.snapshots.observations = std::move(Y);
    sim.snapshots.noise_variance = sigma2;
    sim.snapshots.rng_seed = seed;
    return sim;
}

} // namespace sclift
