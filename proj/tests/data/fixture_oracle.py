#!/usr/bin/env python3
"""Brute-force bounds for `matchbound bounds --formulation f4 --matches 3`.

Recomputes every step without the C++ library: pooled-covariance Mahalanobis
distances, greedy nearest-neighbour baseline, the baseline's moment gaps and
total distance, the (1 + eps) spec, and an exhaustive search over every set
of three pairs that uses each treated unit and each control at most once.

usage: fixture_oracle.py fixture_4x6.csv [eps] > fixture_4x6_expected.json
"""

import csv
import itertools
import json
import sys

import numpy as np


def load(path):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    covs = [c for c in rows[0] if c not in ("id", "treat", "outcome")]
    units = [(r["id"], int(r["treat"]), float(r["outcome"]), [float(r[c]) for c in covs]) for r in rows]
    treated = [u for u in units if u[1] == 1]
    control = [u for u in units if u[1] == 0]
    return covs, treated, control


def mahalanobis(treated, control):
    x = np.array([u[3] for u in treated + control])
    inv = np.linalg.inv(np.cov(x, rowvar=False, ddof=1))
    d = np.zeros((len(treated), len(control)))
    for i, t in enumerate(treated):
        for j, c in enumerate(control):
            diff = np.array(t[3]) - np.array(c[3])
            d[i, j] = float(np.sqrt(diff @ inv @ diff))
    return d


def greedy(d):
    taken, pairs = set(), []
    for i in range(d.shape[0]):
        j = min((j for j in range(d.shape[1]) if j not in taken), key=lambda j: (d[i, j], j))
        taken.add(j)
        pairs.append((i, j))
    return pairs


def estimate(pairs, treated, control):
    return sum(treated[i][2] - control[j][2] for i, j in pairs) / len(pairs)


def gap(pairs, treated, control, p, k):
    return abs(sum(treated[i][3][p] ** k - control[j][3][p] ** k for i, j in pairs)) / len(pairs)


def main():
    path = sys.argv[1]
    eps = float(sys.argv[2]) if len(sys.argv) > 2 else 0.05
    covs, treated, control = load(path)
    d = mahalanobis(treated, control)
    base = greedy(d)
    orders = (1, 2, 3)
    targets = {(p, k): (1 + eps) * gap(base, treated, control, p, k) for p in range(len(covs)) for k in orders}
    budget = (1 + eps) * sum(d[i, j] for i, j in base)

    values, tightest = [], float("inf")
    nt, nc = len(treated), len(control)
    for rows in itertools.combinations(range(nt), 3):
        for cols in itertools.permutations(range(nc), 3):
            pairs = list(zip(rows, cols))
            slacks = [budget - sum(d[i, j] for i, j in pairs)]
            slacks += [b - gap(pairs, treated, control, p, k) for (p, k), b in targets.items()]
            tightest = min(tightest, min(abs(s) for s in slacks))
            if min(slacks) >= 0:
                values.append(estimate(pairs, treated, control))
    json.dump({"epsilon": eps, "matches": 3, "feasible_assignments": len(values),
               "baseline_estimate": estimate(base, treated, control),
               "upper": max(values), "lower": min(values), "tightest_slack": tightest}, sys.stdout, indent=2)
    print()


if __name__ == "__main__":
    main()
