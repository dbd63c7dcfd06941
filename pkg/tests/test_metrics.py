import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from flowbench.features import FeatureSample, FeatureUnavailableError
from flowbench.flow_model import FeatureId
from flowbench.metrics import (
    DistanceMatrix,
    MetricError,
    averaged_distance_matrix,
    kruskal_wallis,
    normalize_features,
    pairwise_distance_matrix,
    reference_scatter,
    wasserstein_1d,
    wasserstein_over_pca,
)
from oracles import kruskal_h_textbook, w1_brute_force, w1_sorted_mean

finite = st.floats(-1e6, 1e6, allow_nan=False)
samples = st.lists(finite, min_size=1, max_size=30)


def _fs(name, values, feature=FeatureId.FLOW_DURATION):
    return FeatureSample(feature, name, np.asarray(values, dtype=float), 0)


class TestWasserstein:
    def test_known_values(self):
        assert wasserstein_1d([0.0], [1.0]) == 1.0
        assert wasserstein_1d([0, 1], [0, 1]) == 0.0
        # half the mass moves by 2
        assert wasserstein_1d([0, 2], [2, 2]) == pytest.approx(1.0)
        assert wasserstein_1d([0, 0, 3], [1]) == pytest.approx(4 / 3)

    def test_matches_brute_force_small(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            u = rng.integers(-5, 6, rng.integers(1, 7)).astype(float)
            v = rng.normal(size=rng.integers(1, 7))
            assert wasserstein_1d(u, v) == pytest.approx(w1_brute_force(u, v), abs=1e-9)

    @given(samples, samples)
    def test_symmetry_exact(self, u, v):
        assert wasserstein_1d(u, v) == wasserstein_1d(v, u)

    @given(samples)
    def test_identity(self, u):
        assert wasserstein_1d(u, u[::-1]) == 0.0

    @given(st.lists(finite, min_size=1, max_size=40))
    def test_equal_sizes_sorted_difference(self, u):
        v = [x * 0.5 + 3 for x in u][::-1]
        assert wasserstein_1d(u, v) == pytest.approx(w1_sorted_mean(u, v), rel=1e-9, abs=1e-6)

    @given(samples, st.floats(-1e3, 1e3), st.floats(0.01, 100))
    def test_shift_and_scale(self, u, shift, scale):
        v = [x + 1.0 for x in u]
        base = wasserstein_1d(u, v)
        moved = wasserstein_1d([scale * x + shift for x in u], [scale * x + shift for x in v])
        assert moved == pytest.approx(scale * base, rel=1e-6, abs=1e-6)

    def test_duplicates_are_multiset_not_set(self):
        assert wasserstein_1d([0, 0, 1], [0, 1, 1]) > 0

    def test_empty_rejected(self):
        with pytest.raises(MetricError, match="empty"):
            wasserstein_1d([], [1.0])


class TestMatrices:
    def test_pairwise_normalized(self):
        a, b, c = _fs("a", [0, 10]), _fs("b", [0, 10]), _fs("c", [10, 10])
        m = pairwise_distance_matrix([a, b, c])
        assert m.labels == ("a", "b", "c")
        assert m["a", "b"] == 0.0
        assert m["a", "c"] == pytest.approx(0.5)
        assert m.feature == "flow_duration"

    def test_unnormalized(self):
        m = pairwise_distance_matrix([_fs("a", [0, 10]), _fs("c", [10, 10])], normalize="none")
        assert m["a", "c"] == pytest.approx(5.0)

    def test_minmax_over_union(self):
        out = normalize_features([_fs("a", [2, 4]), _fs("b", [6])])
        assert out[0].values.tolist() == [0.0, 0.5]
        assert out[1].values.tolist() == [1.0]
        const = normalize_features([_fs("a", [3, 3]), _fs("b", [3])])
        assert const[0].values.tolist() == [0.0, 0.0]

    def test_normalized_scale_invariant(self):
        rng = np.random.default_rng(1)
        xs = [rng.lognormal(size=50) for _ in range(3)]
        m1 = pairwise_distance_matrix([_fs(str(i), x) for i, x in enumerate(xs)])
        m2 = pairwise_distance_matrix([_fs(str(i), 1000 * x + 7) for i, x in enumerate(xs)])
        np.testing.assert_allclose(m1.entries, m2.entries, atol=1e-12)

    def test_unavailable_names_dataset(self):
        with pytest.raises(FeatureUnavailableError, match="'b'"):
            pairwise_distance_matrix([_fs("a", [1]), None], feature=FeatureId.L7_PROTOS_PER_DST_PORT, labels=["a", "b"])

    def test_average_and_mismatch(self):
        m1 = DistanceMatrix(("a", "b"), np.array([[0, 1.0], [1.0, 0]]), "x")
        m2 = DistanceMatrix(("a", "b"), np.array([[0, 3.0], [3.0, 0]]), "y")
        assert averaged_distance_matrix([m1, m2])["a", "b"] == 2.0
        m3 = DistanceMatrix(("a", "c"), np.array([[0, 3.0], [3.0, 0]]), "y")
        with pytest.raises(MetricError, match="label mismatch"):
            averaged_distance_matrix([m1, m3])

    def test_matrix_validation(self):
        with pytest.raises(MetricError):
            DistanceMatrix(("a", "b"), np.array([[0, 1.0], [2.0, 0]]), "x")
        with pytest.raises(MetricError):
            DistanceMatrix(("a", "b"), np.array([[1.0, 1.0], [1.0, 0]]), "x")

    def test_round_trip(self):
        m = DistanceMatrix(("a", "b"), np.array([[0, 0.1], [0.1, 0]]), "x")
        back = DistanceMatrix.from_dict(m.to_dict())
        assert back.labels == m.labels and back.feature == m.feature
        assert np.array_equal(back.entries, m.entries)
        assert m.to_csv().splitlines()[0] == ",a,b"

    def test_reference_scatter(self):
        e = np.array([[0, 1, 4], [1, 0, 5], [4, 5, 0]], dtype=float)
        sc = reference_scatter(DistanceMatrix(("r1", "r2", "s"), e, "avg"), "r1", "r2")
        assert sc.points == {"r1": (0.0, 1.0), "r2": (1.0, 0.0), "s": (4.0, 5.0)}
        with pytest.raises(MetricError, match="unknown reference"):
            reference_scatter(DistanceMatrix(("r1", "r2", "s"), e, "avg"), "r1", "zz")


class TestKruskal:
    def test_reference_values(self):
        assert kruskal_wallis([[1, 2, 3], [4, 5, 6], [7, 8, 9]]).statistic == pytest.approx(7.2, abs=1e-12)
        r = kruskal_wallis([[1, 3], [2, 4]])
        assert r.statistic == pytest.approx(0.6, abs=1e-12)
        assert r.df == 1 and r.n == 4

    def test_ties_match_textbook_and_scipy(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            groups = [rng.integers(0, 5, rng.integers(2, 12)).tolist() for _ in range(rng.integers(2, 5))]
            if len({x for g in groups for x in g}) < 2:
                continue
            h = kruskal_wallis(groups)
            assert h.statistic == pytest.approx(kruskal_h_textbook(groups), rel=1e-12)
            ref = stats.kruskal(*groups)
            assert h.pvalue == pytest.approx(ref.pvalue, rel=1e-9)

    def test_monotone_invariance(self):
        rng = np.random.default_rng(3)
        groups = [rng.integers(0, 50, 20) for _ in range(3)]
        h1 = kruskal_wallis(groups)
        h2 = kruskal_wallis([np.exp(g / 10.0) * 3 - 1 for g in groups])
        assert h1.statistic == h2.statistic and h1.pvalue == h2.pvalue

    def test_degenerate(self):
        with pytest.raises(MetricError, match="all values identical"):
            kruskal_wallis([[1, 1], [1, 1]])
        with pytest.raises(MetricError):
            kruskal_wallis([[1, 2, 3]])


class TestPcaWasserstein:
    def test_separated_shift(self):
        rng = np.random.default_rng(4)
        n, delta = 4000, 3.0
        direction = np.array([1.0, 1.0]) / np.sqrt(2)
        base = rng.normal(size=(2 * n, 2))
        a, b = base[:n], base[n:] + delta * direction
        m = wasserstein_over_pca({"a": a, "b": b}, component=1)
        # after standardization the shift along PC1 is delta over the pooled std
        pooled_std = np.sqrt(1 + delta**2 / 8)
        assert m["a", "b"] == pytest.approx(delta / pooled_std, rel=0.05)
        assert m.feature == "pca_component_1"

    def test_component_range(self):
        with pytest.raises(MetricError):
            wasserstein_over_pca({"a": np.eye(3), "b": np.eye(3)}, component=3)
