"""Independent reference implementations used by the tests."""

from __future__ import annotations

import itertools
import math
from collections import defaultdict

import numpy as np
from scipy.optimize import linear_sum_assignment


def w1_brute_force(u, v) -> float:
    """Optimal transport cost between two uniform empirical measures.

    Equal sizes enumerate every permutation. Otherwise each atom is
    replicated up to lcm(m, n) copies, which turns the problem into an
    assignment between equal-mass atoms, where a permutation is optimal.
    """
    u = list(map(float, u))
    v = list(map(float, v))
    m, n = len(u), len(v)
    if m == n and m <= 7:
        return min(sum(abs(a - v[p]) for a, p in zip(u, perm)) / m for perm in itertools.permutations(range(n)))
    L = math.lcm(m, n)
    a = np.repeat(u, L // m)
    b = np.repeat(v, L // n)
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].sum() / L)


def w1_sorted_mean(u, v) -> float:
    return float(np.mean(np.abs(np.sort(u) - np.sort(v))))


def kruskal_h_textbook(groups) -> float:
    """H from the rank-sum formula, midranks, with the usual tie correction."""
    pooled = sorted(x for g in groups for x in g)
    rank = {}
    i = 0
    while i < len(pooled):
        j = i
        while j < len(pooled) and pooled[j] == pooled[i]:
            j += 1
        rank[pooled[i]] = (i + 1 + j) / 2.0
        i = j
    N = len(pooled)
    h = 12.0 / (N * (N + 1)) * sum(sum(rank[x] for x in g) ** 2 / len(g) for g in groups) - 3 * (N + 1)
    ties = defaultdict(int)
    for x in pooled:
        ties[x] += 1
    c = 1 - sum(t**3 - t for t in ties.values()) / (N**3 - N)
    return h / c


def quantile_naive(values, p) -> float:
    xs = sorted(values)
    h = (len(xs) - 1) * p
    lo = int(math.floor(h))
    hi = min(lo + 1, len(xs) - 1)
    return xs[lo] + (h - lo) * (xs[hi] - xs[lo])


def grouped_distinct_naive(records, group_field, counted_field):
    """Nested-loop group-by; groups in first-appearance order."""
    keys = []
    for r in records:
        k = getattr(r, group_field)
        if k not in keys:
            keys.append(k)
    out = []
    for k in keys:
        seen = []
        for r in records:
            if getattr(r, group_field) == k:
                c = getattr(r, counted_field)
                if c not in seen:
                    seen.append(c)
        out.append(len(seen))
    return out


def knn_naive(X, k):
    n = X.shape[0]
    out = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        d = [(float(np.sum((X[i] - X[j]) ** 2)), j) for j in range(n) if j != i]
        d.sort()
        out[i] = [j for _, j in d[:k]]
    return out
