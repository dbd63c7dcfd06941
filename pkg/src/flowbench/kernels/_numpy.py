"""Pure-numpy versions of the hot kernels."""

import numpy as np

_KNN_CHUNK = 256


def wasserstein_sorted(u, v):
    """W1 between the empirical measures of sorted arrays ``u`` and ``v``.

    Integrates |U - V| exactly over the pooled support; both CDFs are
    constant between consecutive pooled values.
    """
    n, m = u.size, v.size
    pooled = np.unique(np.concatenate((u, v)))
    if pooled.size < 2:
        return 0.0
    left = pooled[:-1]
    i = np.searchsorted(u, left, side="right")
    j = np.searchsorted(v, left, side="right")
    return float(np.sum(np.abs(i / n - j / m) * np.diff(pooled)))


def distinct_pair_counts(group_codes, counted_codes, n_groups, n_counted):
    """Number of distinct counted codes seen with each group code."""
    keys = group_codes.astype(np.int64) * np.int64(n_counted) + counted_codes
    uniq = np.unique(keys)
    return np.bincount(uniq // n_counted, minlength=n_groups).astype(np.int64)


def knn(X, k):
    """Indices of the ``k`` nearest rows of ``X`` for every row, self excluded.

    Ties in distance go to the lower index.
    """
    n, dim = X.shape
    out = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, _KNN_CHUNK):
        stop = min(start + _KNN_CHUNK, n)
        d = np.zeros((stop - start, n))
        # accumulate dimension by dimension so summation order matches the jit kernel
        for c in range(dim):
            d += (X[start:stop, c, None] - X[None, :, c]) ** 2
        rows = np.arange(stop - start)
        d[rows, rows + start] = np.inf
        kth = np.partition(d, k - 1, axis=1)[:, k - 1]
        for r in range(stop - start):
            cand = np.flatnonzero(d[r] <= kth[r])
            if cand.size > k:
                cand = cand[np.argsort(d[r, cand], kind="stable")[:k]]
            else:
                cand = cand[np.argsort(d[r, cand], kind="stable")]
            out[start + r] = cand
    return out
