"""Normality and coverage diagnostics: QQ pairs, QQ correlation, hit rates."""

from dataclasses import dataclass

import numpy as np

from .quantiles import normal_quantile


@dataclass(frozen=True)
class QQData:
    theoretical: np.ndarray     # standard-normal quantiles, strictly increasing
    sample: np.ndarray          # standardized order statistics
    qq_corr: float

    @property
    def pairs(self) -> np.ndarray:
        return np.stack([self.theoretical, self.sample], axis=1)


def qq_data(sample) -> QQData:
    """QQ pairs of a sample against the standard normal.

    The sample is standardized by its own mean and standard deviation; order
    statistic i of m is paired with normal_quantile((i - 0.5)/m). qq_corr is
    the Pearson correlation of the pairs.
    """
    xs = np.sort(np.asarray(sample, dtype=float))
    m = len(xs)
    if m < 10:
        raise ValueError(f"need at least 10 sample points, got {m}")
    sd = xs.std()
    if sd == 0.0:
        raise ValueError("sample has zero variance")
    std_sample = (xs - xs.mean()) / sd
    theo = np.array([normal_quantile((i - 0.5) / m) for i in range(1, m + 1)])
    corr = float(np.corrcoef(theo, std_sample)[0, 1])
    return QQData(theoretical=theo, sample=std_sample, qq_corr=corr)


def coverage(points, region) -> float:
    """Fraction of points the region's membership test accepts."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None] if region.kind == "Interval" else pts
    if len(pts) == 0:
        raise ValueError("no points supplied")
    if region.kind == "TwoSidedUnion" or (pts.ndim == 1):
        hits = sum(region.contains(float(t)) for t in pts)
    else:
        hits = sum(region.contains(t) for t in pts)
    return hits / len(pts)
