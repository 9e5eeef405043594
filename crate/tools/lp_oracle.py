#!/usr/bin/env python3
"""Exact LP objective of an hpr-wbp instance, computed with HiGHS via scipy.

Builds the full barycenter LP directly from the instance files (not from the
Rust operator code):

    min  sum_t <D^t, X^t>
    s.t. X^t 1 = p,  (X^t)^T 1 = a^t,  sum(p) = 1,  X^t >= 0,  p >= 0

and writes {"objective": ..., "solver": ...} as JSON.

Usage: lp_oracle.py INSTANCE_DIR_OR_MANIFEST [--out oracle.json]
"""

import argparse
import json
import struct
import sys
from pathlib import Path

import numpy as np
import scipy
import scipy.sparse as sp
from scipy.optimize import linprog


def read_weights(path):
    weights = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        first = line.split(",")[0].strip()
        try:
            weights.append(float(first))
        except ValueError:
            continue  # header row
    return np.array(weights)


def read_cost(path):
    raw = path.read_bytes()
    rows, cols = struct.unpack("<II", raw[:8])
    data = np.frombuffer(raw[8:], dtype="<f8")
    if data.size != rows * cols:
        sys.exit(f"{path}: expected {rows * cols} entries, found {data.size}")
    return data.reshape(rows, cols)


def squared_distance_costs(manifest, base):
    def points(path, skip_weight):
        rows = []
        for line in path.read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                vals = [float(v) for v in line.split(",")]
            except ValueError:
                continue
            rows.append(vals[1:] if skip_weight else vals)
        return np.array(rows)

    bary = points(base / manifest["barycenter_supports"], False)
    costs = []
    for f in manifest["samples"]:
        q = points(base / f, True)
        costs.append(((bary[:, None, :] - q[None, :, :]) ** 2).sum(axis=2))
    scale = max(c.max() for c in costs)
    return [c / scale if scale > 0 else c for c in costs], "ground"


def load(path):
    path = Path(path)
    manifest_path = path / "manifest.json" if path.is_dir() else path
    manifest = json.loads(manifest_path.read_text())
    base = manifest_path.parent
    omega = np.array(manifest["omega"])
    weights = [read_weights(base / f) for f in manifest["samples"]]
    costs = manifest.get("costs")
    if costs is None:
        mats, kind = squared_distance_costs(manifest, base)
    else:
        mats, kind = [read_cost(base / f) for f in costs["files"]], costs["kind"]
    if kind == "ground":
        mats = [w * c for w, c in zip(omega, mats)]
    return manifest["m"], weights, mats


def solve(m, weights, costs):
    sizes = [len(a) for a in weights]
    n_plans = sum(m * k for k in sizes)
    n = n_plans + m
    c = np.concatenate([D.reshape(-1, order="F") for D in costs] + [np.zeros(m)])

    rows, cols, vals, rhs = [], [], [], []
    r = 0
    offset = 0
    for a, k in zip(weights, sizes):
        # variable (i, j) of plan t sits at offset + j*m + i
        for i in range(m):  # row sums equal p_i
            for j in range(k):
                rows.append(r); cols.append(offset + j * m + i); vals.append(1.0)
            rows.append(r); cols.append(n_plans + i); vals.append(-1.0)
            rhs.append(0.0)
            r += 1
        for j in range(k):  # column sums equal a_j
            for i in range(m):
                rows.append(r); cols.append(offset + j * m + i); vals.append(1.0)
            rhs.append(a[j])
            r += 1
        offset += m * k
    for i in range(m):
        rows.append(r); cols.append(n_plans + i); vals.append(1.0)
    rhs.append(1.0)
    r += 1

    A = sp.csr_matrix((vals, (rows, cols)), shape=(r, n))
    res = linprog(c, A_eq=A, b_eq=np.array(rhs), bounds=(0, None), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        sys.exit(f"HiGHS failed: {res.message}")
    return res.fun


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("instance")
    ap.add_argument("--out")
    args = ap.parse_args()
    obj = solve(*load(args.instance))
    record = {"objective": obj, "solver": f"scipy {scipy.__version__} linprog(method='highs')"}
    text = json.dumps(record, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")


if __name__ == "__main__":
    main()
