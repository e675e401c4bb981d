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

// Real standard-form conic program
//
//     minimize  c^T x   subject to   A x + s = b,   s in K,
//
// where K is an ordered product of zero cones (equalities), nonnegative
// orthants and second-order cones {(t, u) : ||u|| <= t}. Rows of A are
// partitioned among the cones in list order.
//
// Text dump format (all indices 0-based, floats printed with 17 significant
// digits so a dump reads back bit-identical):
//
//     sclift-conic 1
//     variables <n>
//     constraints <rows>
//     nonzeros <nnz>
//     cones <count>
//     varmap <count>
//     objective            followed by n lines: <value>
//     rhs                  followed by rows lines: <value>
//     matrix               followed by nnz lines: <row> <col> <value>
//     cone-list            followed by count lines: zero|nonnegative|soc <dim>
//     variable-map         followed by count lines: <name> <offset> <size>
//     end

#include "sclift/common.hpp"

#include <Eigen/SparseCore>

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace sclift {

enum class ConeKind { zero, nonnegative, second_order };

struct Cone {
    ConeKind kind;
    int dim;
};

inline const char* cone_name(ConeKind k)
{
    switch (k) {
    case ConeKind::zero: return "zero";
    case ConeKind::nonnegative: return "nonnegative";
    case ConeKind::second_order: return "soc";
    }
    return "?";
}

struct VariableSlice {
    std::string name;
    int offset = 0;
    int size = 0;
};

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

struct ConicProgram {
    RVector c;
    SparseMatrix A;
    RVector b;
    std::vector<Cone> cones;
    std::vector<VariableSlice> variables;

    int num_variables() const { return static_cast<int>(c.size()); }
    int num_constraints() const { return static_cast<int>(b.size()); }

    const VariableSlice& slice(const std::string& name) const
    {
        for (const auto& v : variables) {
            if (v.name == name) return v;
        }
        throw DimensionError("ConicProgram: no variable named " + name);
    }

    int cone_dim_total() const
    {
        int total = 0;
        for (const auto& k : cones) total += k.dim;
        return total;
    }

    int count(ConeKind kind) const
    {
        int n = 0;
        for (const auto& k : cones) n += k.kind == kind;
        return n;
    }

    // Structural checks: dimensions agree, cones tile the rows, slices are
    // disjoint and inside the variable vector.
    void validate() const
    {
        if (A.cols() != c.size() || A.rows() != b.size()) {
            throw DimensionError("ConicProgram: A, b and c dimensions disagree");
        }
        if (cone_dim_total() != b.size()) {
            throw DimensionError("ConicProgram: cone dimensions must sum to the row count");
        }
        for (const auto& k : cones) {
            if (k.dim < 1) throw DimensionError("ConicProgram: cone of nonpositive dimension");
        }
        std::vector<char> used(static_cast<std::size_t>(c.size()), 0);
        for (const auto& v : variables) {
            if (v.offset < 0 || v.size < 0 || v.offset + v.size > c.size()) {
                throw DimensionError("ConicProgram: variable slice " + v.name + " out of range");
            }
            for (int i = v.offset; i < v.offset + v.size; ++i) {
                if (used[static_cast<std::size_t>(i)]) {
                    throw DimensionError("ConicProgram: variable slices overlap at " + v.name);
                }
                used[static_cast<std::size_t>(i)] = 1;
            }
        }
        if (!c.allFinite() || !b.allFinite()) throw DomainError("ConicProgram: non-finite data");
    }
};

inline std::string format_g17(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_program(std::ostream& os, const ConicProgram& p)
{
    SparseMatrix A = p.A;
    A.makeCompressed();
    os << "sclift-conic 1\n";
    os << "variables " << p.num_variables() << "\n";
    os << "constraints " << p.num_constraints() << "\n";
    os << "nonzeros " << A.nonZeros() << "\n";
    os << "cones " << p.cones.size() << "\n";
    os << "varmap " << p.variables.size() << "\n";
    os << "objective\n";
    for (Eigen::Index i = 0; i < p.c.size(); ++i) os << format_g17(p.c(i)) << "\n";
    os << "rhs\n";
    for (Eigen::Index i = 0; i < p.b.size(); ++i) os << format_g17(p.b(i)) << "\n";
    os << "matrix\n";
    for (int col = 0; col < A.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(A, col); it; ++it) {
            os << it.row() << " " << it.col() << " " << format_g17(it.value()) << "\n";
        }
    }
    os << "cone-list\n";
    for (const auto& k : p.cones) os << cone_name(k.kind) << " " << k.dim << "\n";
    os << "variable-map\n";
    for (const auto& v : p.variables) os << v.name << " " << v.offset << " " << v.size << "\n";
    os << "end\n";
}

inline ConicProgram read_program(std::istream& is)
{
    int line_no = 0;
    std::string line;
    auto next = [&]() -> std::istringstream {
        while (std::getline(is, line)) {
            ++line_no;
            if (!line.empty()) return std::istringstream(line);
        }
        throw ConfigError("conic program: unexpected end of input after line " + std::to_string(line_no));
    };
    auto fail = [&](const std::string& what) {
        throw ConfigError("conic program line " + std::to_string(line_no) + ": " + what);
    };
    auto header = [&](const std::string& key) {
        auto ss = next();
        std::string k;
        long v = -1;
        if (!(ss >> k >> v) || k != key || v < 0) fail("expected '" + key + " <count>'");
        return v;
    };
    auto keyword = [&](const std::string& key) {
        auto ss = next();
        std::string k;
        if (!(ss >> k) || k != key) fail("expected '" + key + "'");
    };

    {
        auto ss = next();
        std::string magic;
        int version = 0;
        if (!(ss >> magic >> version) || magic != "sclift-conic" || version != 1) {
            fail("not a sclift-conic version 1 file");
        }
    }
    const long n = header("variables");
    const long rows = header("constraints");
    const long nnz = header("nonzeros");
    const long ncones = header("cones");
    const long nvars = header("varmap");

    ConicProgram p;
    p.c.resize(n);
    p.b.resize(rows);
    keyword("objective");
    for (long i = 0; i < n; ++i) {
        auto ss = next();
        if (!(ss >> p.c(i))) fail("bad objective entry");
    }
    keyword("rhs");
    for (long i = 0; i < rows; ++i) {
        auto ss = next();
        if (!(ss >> p.b(i))) fail("bad rhs entry");
    }
    keyword("matrix");
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(nnz));
    for (long i = 0; i < nnz; ++i) {
        auto ss = next();
        long r = -1, col = -1;
        double v = 0;
        if (!(ss >> r >> col >> v) || r < 0 || r >= rows || col < 0 || col >= n) fail("bad matrix triplet");
        trips.emplace_back(static_cast<int>(r), static_cast<int>(col), v);
    }
    p.A.resize(rows, n);
    p.A.setFromTriplets(trips.begin(), trips.end());
    keyword("cone-list");
    for (long i = 0; i < ncones; ++i) {
        auto ss = next();
        std::string kind;
        int dim = 0;
        if (!(ss >> kind >> dim)) fail("bad cone entry");
        if (kind == "zero") p.cones.push_back({ConeKind::zero, dim});
        else if (kind == "nonnegative") p.cones.push_back({ConeKind::nonnegative, dim});
        else if (kind == "soc") p.cones.push_back({ConeKind::second_order, dim});
        else fail("unknown cone kind '" + kind + "'");
    }
    keyword("variable-map");
    for (long i = 0; i < nvars; ++i) {
        auto ss = next();
        VariableSlice v;
        if (!(ss >> v.name >> v.offset >> v.size)) fail("bad variable-map entry");
        p.variables.push_back(v);
    }
    keyword("end");
    p.validate();
    return p;
}

} // namespace sclift
