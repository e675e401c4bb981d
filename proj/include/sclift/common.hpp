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

#include <Eigen/Dense>

#include <charconv>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace sclift {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

// Error taxonomy. Everything derives from std::runtime_error or std::domain_error
// so callers that do not care about the category can catch the std base.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct ScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ResourceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DegenerateInputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr double pi = std::numbers::pi;

inline constexpr double deg_to_rad(double deg) { return deg * pi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / pi; }

// Angles at exactly +-90 degrees are admitted (the half-open search grid starts
// at -90 degrees); the slack absorbs round-off from degree conversion.
inline constexpr double angle_slack = 1e-12;

inline bool within_half_circle(double angle_rad)
{
    return std::abs(angle_rad) <= pi / 2 + angle_slack;
}

// Shortest decimal that reads back to the same double.
inline std::string format_shortest(double v)
{
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace sclift
