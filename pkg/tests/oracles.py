"""Independent brute-force reference implementations.

Everything here is deliberately written with plain Python loops and
math functions, not numpy, so the package implementations are checked
against a second, structurally different computation.  Keep these slow
and obvious.
"""
from __future__ import annotations

import math


def delta_oracle(series, halfwidth):
    """Direct evaluation of the delta regression with replicated
    endpoints."""
    m = halfwidth
    den = sum(k * k for k in range(-m, m + 1))
    n = len(series)

    def at(i):
        return series[min(max(i, 0), n - 1)]

    return [
        sum(k * at(t + k) for k in range(-m, m + 1)) / den for t in range(n)
    ]


def zscore_oracle(column):
    n = len(column)
    mean = math.fsum(column) / n
    var = math.fsum((c - mean) ** 2 for c in column) / n
    std = math.sqrt(var)
    if std < 1e-12:
        return [0.0] * n
    return [(c - mean) / std for c in column]


def sq_dist(a, b):
    return sum((x - y) ** 2 for x, y in zip(a, b))


def distortion_oracle(centroids, rows):
    """Mean nearest-centroid squared distance, exhaustive."""
    total = 0.0
    for r in rows:
        total += min(sq_dist(r, c) for c in centroids)
    return total / len(rows)


def nearest_oracle(centroids, row):
    """Index of the nearest centroid, lowest index on ties."""
    best_i = 0
    best_d = sq_dist(row, centroids[0])
    for i in range(1, len(centroids)):
        d = sq_dist(row, centroids[i])
        if d < best_d:
            best_d = d
            best_i = i
    return best_i


def dtw_oracle(a, b, squared=True, normalize=True):
    """Minimum path cost by explicit enumeration of every monotone
    path with steps (1,0), (0,1), (1,1).  Exponential; keep inputs at
    6 x 6 or smaller."""
    la, lb = len(a), len(b)

    def local(i, j):
        d = sq_dist(a[i], b[j])
        return d if squared else math.sqrt(d)

    best = [math.inf]

    def walk(i, j, acc):
        acc = acc + local(i, j)
        if i == la - 1 and j == lb - 1:
            if acc < best[0]:
                best[0] = acc
            return
        if i + 1 < la:
            walk(i + 1, j, acc)
        if j + 1 < lb:
            walk(i, j + 1, acc)
        if i + 1 < la and j + 1 < lb:
            walk(i + 1, j + 1, acc)

    walk(0, 0, 0.0)
    cost = best[0]
    return cost / (la + lb) if normalize else cost


def min_dcf_oracle(genuine, impostor, c_miss=1.0, c_fa=1.0, p_true=0.5):
    """Exhaustive threshold evaluation; accept iff score <= threshold.
    Returns (min cost, smallest threshold achieving it)."""
    candidates = [float("-inf")] + sorted(list(genuine) + list(impostor))
    candidates.append(float("inf"))
    best_cost = math.inf
    best_th = None
    for th in candidates:
        p_miss = sum(1 for g in genuine if g > th) / len(genuine)
        p_fa = sum(1 for s in impostor if s <= th) / len(impostor)
        cost = c_miss * p_miss * p_true + c_fa * p_fa * (1.0 - p_true)
        if cost < best_cost:
            best_cost = cost
            best_th = th
    return best_cost, best_th


def rel_err(got, want):
    return abs(got - want) / max(1.0, abs(want))
