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

#include <cmath>
#include <vector>

namespace sclift {

// Uniform search grid over directions. Angles are stored in radians; the
// degree parameters are kept for I/O and exact nearest-bin arithmetic.
struct AngleGrid {
    std::vector<double> angles; // radians, strictly increasing
    double half_interval = 0.0; // r, radians
    double start_deg = 0.0;
    double step_deg = 0.0;

    int size() const { return static_cast<int>(angles.size()); }
    double angle_deg(int i) const { return start_deg + step_deg * i; }

    // Grid bin closest to `angle_rad` and the signed offset angle - phi (radians).
    // Throws ScenarioError when the angle is farther than r from every bin.
    std::pair<int, double> nearest(double angle_rad) const
    {
        const double pos = (rad_to_deg(angle_rad) - start_deg) / step_deg;
        const long k = std::lround(pos);
        if (k < 0 || k >= size()) {
            throw ScenarioError("direction " + std::to_string(rad_to_deg(angle_rad)) +
                                " deg lies outside the grid span");
        }
        const int idx = static_cast<int>(k);
        const double offset = angle_rad - angles[idx];
        if (std::abs(offset) > half_interval * (1.0 + 1e-9)) {
            throw ScenarioError("direction " + std::to_string(rad_to_deg(angle_rad)) +
                                " deg lies outside the grid span");
        }
        return {idx, offset};
    }
};

// Half-open grid [start, stop) with uniform step; r = step / 2.
inline AngleGrid build_grid(double start_deg, double stop_deg, double step_deg)
{
    if (!(step_deg > 0.0) || !(stop_deg > start_deg)) {
        throw DomainError("build_grid: need step > 0 and stop > start");
    }
    if (start_deg < -90.0 || stop_deg > 90.0 + step_deg) {
        throw DomainError("build_grid: grid must lie within [-90, 90] degrees");
    }
    AngleGrid grid;
    grid.start_deg = start_deg;
    grid.step_deg = step_deg;
    grid.half_interval = deg_to_rad(step_deg) / 2.0;
    // Count with a relative tolerance so that (-90, 90, 1) yields exactly 180.
    const double span = (stop_deg - start_deg) / step_deg;
    const auto n = static_cast<long>(std::ceil(span - 1e-9));
    for (long k = 0; k < n; ++k) {
        const double deg = start_deg + step_deg * static_cast<double>(k);
        if (deg > 90.0 + 1e-12) {
            throw DomainError("build_grid: grid must lie within [-90, 90] degrees");
        }
        grid.angles.push_back(deg_to_rad(deg));
    }
    if (grid.angles.empty()) {
        throw DomainError("build_grid: empty grid");
    }
    return grid;
}

} // namespace sclift
