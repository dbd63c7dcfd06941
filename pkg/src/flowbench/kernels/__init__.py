"""Hot numeric kernels.

The numba implementations are used when numba imports cleanly, unless the
environment variable ``FLOWBENCH_DISABLE_NUMBA`` is set to a non-empty value
other than ``0``. Both paths produce the same results; see
``benchmarks/bench_kernels.py`` for a timing comparison.
"""

import os

import numpy as np

from . import _numpy


def _numba_requested():
    flag = os.environ.get("FLOWBENCH_DISABLE_NUMBA", "")
    return flag in ("", "0")


_impl = _numpy
BACKEND = "numpy"
if _numba_requested():
    try:
        from . import _numba
    except ImportError:  # pragma: no cover - numba missing
        pass
    else:
        _impl = _numba
        BACKEND = "numba"


def wasserstein_sorted(u, v):
    """W1 distance between two non-empty, ascending float64 arrays."""
    return float(_impl.wasserstein_sorted(u, v))


def distinct_pair_counts(group_codes, counted_codes, n_groups, n_counted):
    """Per-group count of distinct counted codes (both code arrays int64)."""
    return _impl.distinct_pair_counts(
        np.ascontiguousarray(group_codes, dtype=np.int64),
        np.ascontiguousarray(counted_codes, dtype=np.int64),
        int(n_groups),
        int(max(n_counted, 1)),
    )


def knn(X, k):
    """(n, k) neighbour indices by squared Euclidean distance, self excluded."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if not 1 <= k < X.shape[0]:
        raise ValueError(f"k must be in [1, {X.shape[0] - 1}], got {k}")
    return _impl.knn(X, int(k))
