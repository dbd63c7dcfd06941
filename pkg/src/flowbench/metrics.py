"""Distances between datasets' feature distributions.

The workhorse is the one-dimensional Wasserstein distance (earth mover's
distance), evaluated exactly as the integral of the absolute difference of
the two empirical CDFs.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import stats

from . import kernels
from .embed import pca_fit, standardize
from .features import FeatureSample, FeatureUnavailableError

log = logging.getLogger(__name__)

NORMALIZE_MODES = ("minmax", "none")


class MetricError(ValueError):
    pass


def _array(sample) -> np.ndarray:
    values = sample.values if isinstance(sample, FeatureSample) else sample
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise MetricError("empty sample")
    return values


def wasserstein_1d(u, v) -> float:
    """W1 distance between the empirical distributions of two samples."""
    a = np.sort(_array(u))
    b = np.sort(_array(v))
    return kernels.wasserstein_sorted(a, b)


def minmax_range(samples: Sequence) -> tuple[float, float]:
    lo = min(float(_array(s).min()) for s in samples)
    hi = max(float(_array(s).max()) for s in samples)
    return lo, hi


def normalize_features(samples: Sequence[FeatureSample]) -> list[FeatureSample]:
    """Rescale every sample to [0, 1] with the min and max of their union.

    A constant union maps to all zeros.
    """
    if not samples:
        raise MetricError("normalize_features needs at least one sample")
    lo, hi = minmax_range(samples)
    span = hi - lo
    out = []
    for s in samples:
        vals = (s.values - lo) / span if span > 0 else np.zeros_like(s.values, dtype=np.float64)
        out.append(FeatureSample(s.feature, s.dataset, vals, s.skipped_degenerate))
    return out


@dataclass(frozen=True)
class DistanceMatrix:
    labels: tuple
    entries: np.ndarray
    feature: str

    def __post_init__(self):
        e = self.entries
        if e.shape != (len(self.labels), len(self.labels)):
            raise MetricError("entries shape does not match labels")
        if np.any(e < 0) or np.any(np.diag(e) != 0) or not np.allclose(e, e.T, rtol=0, atol=1e-12):
            raise MetricError("distance matrix must be symmetric, non-negative, zero on the diagonal")

    def __getitem__(self, pair: tuple[str, str]) -> float:
        a, b = pair
        return float(self.entries[self.labels.index(a), self.labels.index(b)])

    def to_dict(self) -> dict:
        return {"labels": list(self.labels), "feature": self.feature, "entries": self.entries.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DistanceMatrix":
        return cls(tuple(d["labels"]), np.asarray(d["entries"], dtype=np.float64), d["feature"])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["", *self.labels])
        for label, row in zip(self.labels, self.entries.tolist()):
            writer.writerow([label, *(repr(v) for v in row)])
        return buf.getvalue()


def _distance_table(samples: Sequence, labels: Sequence[str], tag: str) -> DistanceMatrix:
    k = len(samples)
    entries = np.zeros((k, k))
    sorted_samples = [np.sort(_array(s)) for s in samples]
    for i in range(k):
        for j in range(i + 1, k):
            entries[i, j] = entries[j, i] = kernels.wasserstein_sorted(sorted_samples[i], sorted_samples[j])
    return DistanceMatrix(tuple(labels), entries, tag)


def pairwise_distance_matrix(
    samples: Sequence[Optional[FeatureSample]],
    feature=None,
    normalize: str = "minmax",
    labels: Sequence[str] | None = None,
) -> DistanceMatrix:
    """W1 between every pair of datasets for one feature.

    ``samples`` holds one sample per dataset; an entry of ``None`` marks the
    feature as unavailable for that dataset. With ``normalize="minmax"`` the
    samples are first rescaled jointly to [0, 1].
    """
    if normalize not in NORMALIZE_MODES:
        raise MetricError(f"normalize must be one of {NORMALIZE_MODES}")
    if len(samples) < 2:
        raise MetricError("need at least 2 datasets")
    if labels is None:
        labels = [s.dataset if s is not None else f"#{i}" for i, s in enumerate(samples)]
    tag = getattr(feature, "value", feature) or (samples[0].feature.value if samples[0] and samples[0].feature else "")
    for label, s in zip(labels, samples):
        if s is None or len(s) == 0:
            raise FeatureUnavailableError(f"feature {tag} unavailable for dataset {label!r}")
    if len(set(labels)) != len(labels):
        raise MetricError("dataset names must be unique")
    if normalize == "minmax":
        samples = normalize_features(samples)
    return _distance_table(samples, labels, tag)


def averaged_distance_matrix(per_feature: Sequence[DistanceMatrix], tag: str = "averaged") -> DistanceMatrix:
    """Entrywise mean of matrices that share labels."""
    if not per_feature:
        raise MetricError("need at least one matrix to average")
    labels = per_feature[0].labels
    for m in per_feature[1:]:
        if m.labels != labels:
            raise MetricError(f"label mismatch: {m.labels} vs {labels}")
    entries = np.mean([m.entries for m in per_feature], axis=0)
    entries = (entries + entries.T) / 2
    np.fill_diagonal(entries, 0.0)
    return DistanceMatrix(labels, entries, tag)


@dataclass(frozen=True)
class ScatterCoordinates:
    ref1: str
    ref2: str
    points: dict  # dataset -> (distance to ref1, distance to ref2)

    def to_dict(self) -> dict:
        return {"ref1": self.ref1, "ref2": self.ref2, "points": {k: list(v) for k, v in self.points.items()}}


def reference_scatter(avg: DistanceMatrix, ref1: str, ref2: str) -> ScatterCoordinates:
    for ref in (ref1, ref2):
        if ref not in avg.labels:
            raise MetricError(f"unknown reference dataset {ref!r}; have {list(avg.labels)}")
    i, j = avg.labels.index(ref1), avg.labels.index(ref2)
    points = {name: (float(avg.entries[r, i]), float(avg.entries[r, j])) for r, name in enumerate(avg.labels)}
    return ScatterCoordinates(ref1, ref2, points)


@dataclass(frozen=True)
class KruskalResult:
    statistic: float
    pvalue: float
    df: int
    n: int

    def to_dict(self) -> dict:
        return {"H": self.statistic, "p_value": self.pvalue, "df": self.df, "n": self.n}


def kruskal_wallis(groups: Sequence) -> KruskalResult:
    """Kruskal-Wallis H on midranks with tie correction.

    The p-value is the chi-squared upper tail with k - 1 degrees of freedom.
    """
    arrays = [_array(g) for g in groups]
    if len(arrays) < 2:
        raise MetricError("need at least 2 groups")
    sizes = np.array([a.size for a in arrays])
    pooled = np.concatenate(arrays)
    N = pooled.size
    if N < 3:
        raise MetricError("need at least 3 observations in total")
    ranks = stats.rankdata(pooled)  # average ranks for ties
    _, tie_counts = np.unique(pooled, return_counts=True)
    correction = 1.0 - np.sum(tie_counts.astype(np.float64) ** 3 - tie_counts) / (float(N) ** 3 - N)
    if correction <= 0:
        raise MetricError("degenerate ties: all values identical")
    bounds = np.cumsum(sizes)[:-1]
    rank_sums = np.array([r.sum() for r in np.split(ranks, bounds)])
    h = (12.0 / (N * (N + 1)) * np.sum(rank_sums**2 / sizes) - 3.0 * (N + 1)) / correction
    df = len(arrays) - 1
    return KruskalResult(float(h), float(stats.chi2.sf(h, df)), df, int(N))


def wasserstein_over_pca(vectors: Mapping[str, np.ndarray], component: int = 1) -> DistanceMatrix:
    """W1 between datasets on one principal-component score.

    PCA is fitted once on the pooled, standardized vectors of all datasets.
    """
    if component not in (1, 2):
        raise MetricError("component must be 1 or 2")
    names = list(vectors)
    if len(names) < 2:
        raise MetricError("need at least 2 datasets")
    blocks = [np.asarray(vectors[n], dtype=np.float64) for n in names]
    Z, _ = standardize(np.vstack(blocks))
    fit = pca_fit(Z)
    scores = fit.scores(Z, 2)[:, component - 1]
    parts = np.split(scores, np.cumsum([b.shape[0] for b in blocks])[:-1])
    return _distance_table(parts, names, f"pca_component_{component}")
