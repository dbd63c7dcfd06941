import os
import subprocess
import sys

import numpy as np
import pytest

from flowbench import kernels
from flowbench.kernels import _numpy
from oracles import knn_naive, w1_brute_force

_numba = pytest.importorskip("flowbench.kernels._numba")
IMPLS = [pytest.param(_numpy, id="numpy"), pytest.param(_numba, id="numba")]


@pytest.mark.parametrize("impl", IMPLS)
def test_wasserstein(impl):
    rng = np.random.default_rng(0)
    for _ in range(200):
        u = np.sort(rng.integers(0, 6, rng.integers(1, 7)).astype(float))
        v = np.sort(rng.normal(size=rng.integers(1, 7)))
        assert impl.wasserstein_sorted(u, v) == pytest.approx(w1_brute_force(u, v), abs=1e-9)


def test_backends_agree_on_wasserstein():
    rng = np.random.default_rng(1)
    for _ in range(50):
        u = np.sort(rng.lognormal(size=rng.integers(1, 500)))
        v = np.sort(rng.lognormal(size=rng.integers(1, 500)))
        assert _numba.wasserstein_sorted(u, v) == pytest.approx(_numpy.wasserstein_sorted(u, v), rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("impl", IMPLS)
def test_distinct_pair_counts(impl):
    rng = np.random.default_rng(2)
    g = rng.integers(0, 30, 2000)
    c = rng.integers(0, 12, 2000)
    expected = [len(set(c[g == k].tolist())) for k in range(30)]
    assert impl.distinct_pair_counts(g, c, 30, 12).tolist() == expected


@pytest.mark.parametrize("impl", IMPLS)
def test_knn_against_naive(impl):
    rng = np.random.default_rng(3)
    X = rng.normal(size=(120, 4))
    np.testing.assert_array_equal(impl.knn(X, 5), knn_naive(X, 5))
    # integer grid: many exact ties, resolved toward the lower index
    G = rng.integers(0, 3, size=(80, 2)).astype(float)
    np.testing.assert_array_equal(impl.knn(G, 7), knn_naive(G, 7))


def test_knn_validation():
    with pytest.raises(ValueError):
        kernels.knn(np.zeros((3, 2)), 3)


def test_env_flag_selects_numpy():
    code = "from flowbench import kernels; print(kernels.BACKEND)"
    env = {**os.environ, "FLOWBENCH_DISABLE_NUMBA": "1"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
    env["FLOWBENCH_DISABLE_NUMBA"] = "0"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numba"
