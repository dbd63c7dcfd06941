"""Numba-compiled versions of the hot kernels.

Each function returns exactly what its counterpart in ``_numpy`` returns.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def wasserstein_sorted(u, v):
    n, m = u.size, v.size
    i = 0
    j = 0
    total = 0.0
    while i < n or j < m:
        if j >= m or (i < n and u[i] <= v[j]):
            x = u[i]
        else:
            x = v[j]
        while i < n and u[i] == x:
            i += 1
        while j < m and v[j] == x:
            j += 1
        if i == n and j == m:
            break
        if j >= m or (i < n and u[i] < v[j]):
            nxt = u[i]
        else:
            nxt = v[j]
        total += abs(i / n - j / m) * (nxt - x)
    return total


@njit(cache=True, nogil=True)
def distinct_pair_counts(group_codes, counted_codes, n_groups, n_counted):
    # bucket rows by group (counting sort), then stamp each counted code
    # with the last group that saw it; linear in rows + codes
    n = group_codes.size
    start = np.zeros(n_groups + 1, dtype=np.int64)
    for t in range(n):
        start[group_codes[t] + 1] += 1
    for g in range(n_groups):
        start[g + 1] += start[g]
    fill = start[:-1].copy()
    order = np.empty(n, dtype=np.int64)
    for t in range(n):
        g = group_codes[t]
        order[fill[g]] = t
        fill[g] += 1
    stamp = np.full(n_counted, -1, dtype=np.int64)
    counts = np.zeros(n_groups, dtype=np.int64)
    for g in range(n_groups):
        for p in range(start[g], start[g + 1]):
            c = counted_codes[order[p]]
            if stamp[c] != g:
                stamp[c] = g
                counts[g] += 1
    return counts


@njit(cache=True, nogil=True)
def knn(X, k):
    n, dim = X.shape
    out = np.empty((n, k), dtype=np.int64)
    best_d = np.empty(k)
    best_i = np.empty(k, dtype=np.int64)
    for r in range(n):
        filled = 0
        for j in range(n):
            if j == r:
                continue
            d = 0.0
            for c in range(dim):
                diff = X[r, c] - X[j, c]
                d += diff * diff
            if filled < k:
                pos = filled
                filled += 1
            elif d < best_d[k - 1]:
                pos = k - 1
            else:
                continue
            # strict comparison keeps earlier indices ahead on ties
            while pos > 0 and best_d[pos - 1] > d:
                best_d[pos] = best_d[pos - 1]
                best_i[pos] = best_i[pos - 1]
                pos -= 1
            best_d[pos] = d
            best_i[pos] = j
        out[r] = best_i
    return out
