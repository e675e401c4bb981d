#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
#
# sclift - array self-calibration with off-grid direction-of-arrival estimation
# Copyright (C) 2026 The sclift authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
# ------------------------------------------------------------------------
"""Solve a dumped program.txt with CVXPY to cross-check the built-in solver.

    python3 tools/crosscheck.py out/resolution/program.txt [SOLVER]

Needs numpy, scipy and cvxpy; not part of the build or the tests.
"""

import argparse

import cvxpy as cp
import numpy as np
import scipy.sparse as sp


def read_program(path):
    lines = open(path).read().split("\n")
    pos = 0

    def fields():
        nonlocal pos
        parts = lines[pos].split()
        pos += 1
        return parts

    fields()  # format tag
    n = int(fields()[1])
    m = int(fields()[1])
    nnz = int(fields()[1])
    ncones = int(fields()[1])
    fields()  # variable slice count

    def block(count):
        nonlocal pos
        fields()  # section header
        out = lines[pos : pos + count]
        pos += count
        return out

    c = np.array([float(v) for v in block(n)])
    b = np.array([float(v) for v in block(m)])
    trip = np.array([t.split() for t in block(nnz)], dtype=float).reshape(-1, 3)
    A = sp.csr_matrix((trip[:, 2], (trip[:, 0].astype(int), trip[:, 1].astype(int))), shape=(m, n))
    cones = [(t.split()[0], int(t.split()[1])) for t in block(ncones)]
    return c, A, b, cones


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("program")
    ap.add_argument("solver", nargs="?", default="CLARABEL")
    args = ap.parse_args()

    c, A, b, cones = read_program(args.program)
    x = cp.Variable(len(c))
    s = b - A @ x
    constraints = []
    off = 0
    for kind, dim in cones:
        seg = s[off : off + dim]
        if kind == "zero":
            constraints.append(seg == 0)
        elif kind == "nonnegative":
            constraints.append(seg >= 0)
        else:
            constraints.append(cp.SOC(seg[0], seg[1:]))
        off += dim
    problem = cp.Problem(cp.Minimize(c @ x), constraints)
    value = problem.solve(solver=args.solver)
    print(f"{args.solver}: objective {value:.10g} ({problem.status})")


if __name__ == "__main__":
    main()
