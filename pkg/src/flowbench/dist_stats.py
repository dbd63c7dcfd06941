"""Empirical distributions and boxplot summaries."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .features import FeatureSample

WHISKER_REACH = 1.5


class EmptySampleError(ValueError):
    pass


def _values(sample) -> np.ndarray:
    values = sample.values if isinstance(sample, FeatureSample) else sample
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise EmptySampleError("empty sample")
    return values


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Distinct sorted values with their probability masses."""

    support: np.ndarray
    counts: np.ndarray
    n: int

    @property
    def weights(self) -> np.ndarray:
        return self.counts / self.n

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.counts) / self.n

    def __call__(self, x):
        return ecdf_eval(self, x)

    def to_dict(self) -> dict:
        return {"support": self.support.tolist(), "counts": self.counts.tolist(), "n": self.n}

    @classmethod
    def from_dict(cls, d: dict) -> "EmpiricalDistribution":
        return cls(np.asarray(d["support"], dtype=np.float64), np.asarray(d["counts"], dtype=np.int64), int(d["n"]))


def ecdf(sample) -> EmpiricalDistribution:
    values = _values(sample)
    support, counts = np.unique(values, return_counts=True)
    return EmpiricalDistribution(support, counts.astype(np.int64), values.size)


def ecdf_eval(dist: EmpiricalDistribution, x):
    """Fraction of mass at or below ``x`` (right-continuous). Accepts scalars
    or arrays."""
    idx = np.searchsorted(dist.support, x, side="right")
    cum = np.concatenate(([0], np.cumsum(dist.counts)))
    out = cum[idx] / dist.n
    return float(out) if np.ndim(out) == 0 else out


def quantile(sorted_values: np.ndarray, p):
    """Linear interpolation between closest order statistics (type 7)."""
    n = sorted_values.size
    h = (n - 1) * np.asarray(p, dtype=np.float64)
    lo = np.floor(h).astype(np.int64)
    hi = np.minimum(lo + 1, n - 1)
    frac = h - lo
    return sorted_values[lo] + frac * (sorted_values[hi] - sorted_values[lo])


@dataclass(frozen=True)
class BoxplotSummary:
    mean: float
    median: float
    q1: float
    q3: float
    iqr: float
    whisker_low: float
    whisker_high: float
    std: float
    n: int

    def to_dict(self) -> dict:
        return asdict(self)


def boxplot_summary(sample) -> BoxplotSummary:
    """Quartiles, 1.5 IQR whiskers, mean and population std.

    Whiskers sit on the most extreme observations inside the fences
    ``[q1 - 1.5 iqr, q3 + 1.5 iqr]``.
    """
    x = np.sort(_values(sample))
    q1, median, q3 = (float(v) for v in quantile(x, [0.25, 0.5, 0.75]))
    iqr = q3 - q1
    lo_fence = q1 - WHISKER_REACH * iqr
    hi_fence = q3 + WHISKER_REACH * iqr
    inside = x[(x >= lo_fence) & (x <= hi_fence)]
    return BoxplotSummary(
        mean=float(x.mean()),
        median=median,
        q1=q1,
        q3=q3,
        iqr=iqr,
        whisker_low=float(inside[0]),
        whisker_high=float(inside[-1]),
        std=float(x.std()),
        n=int(x.size),
    )
