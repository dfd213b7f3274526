"""Binned means on each side of the cutoff, for plotting RD pictures."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, NamedTuple

import numpy as np

from .exceptions import InsufficientDataError
from .panel import CrossSection


class Bin(NamedTuple):
    side: str
    bin_center: float
    mean_value: float
    count: int


@dataclass(frozen=True)
class BinnedSeries:
    series_label: str
    bins: List[Bin]

    def rows(self):
        return [(self.series_label, b.side, b.bin_center, b.mean_value, b.count)
                for b in self.bins]


def _bin_side(d, y, lo, hi, n_bins, side):
    width = (hi - lo) / n_bins
    if width > 0:
        idx = np.clip(np.floor((d - lo) / width).astype(np.int64), 0, n_bins - 1)
    else:
        idx = np.zeros(d.size, dtype=np.int64)
    counts = np.bincount(idx, minlength=n_bins)
    sums = np.bincount(idx, weights=y, minlength=n_bins)
    out = []
    for b in np.flatnonzero(counts):
        center = lo + (b + 0.5) * width
        out.append(Bin(side, float(center), float(sums[b] / counts[b]), int(counts[b])))
    return out


def binned_series(points: CrossSection, n_bins: int, label: str = "") -> BinnedSeries:
    """Equal-width bins per side over the observed distance range.

    The left side spans ``[min(D), 0)`` and the right side ``[0, max(D)]``,
    so no bin straddles the cutoff. Empty bins are dropped.
    """
    if n_bins < 2:
        raise ValueError("need at least 2 bins per side")
    d, y = points.distance, points.value
    left, right = d < 0, d >= 0
    for side, mask in (("left", left), ("right", right)):
        if not mask.any():
            raise InsufficientDataError(side, 0, 1, "binned scatter")
    bins = _bin_side(d[left], y[left], float(d[left].min()), 0.0, n_bins, "left")
    bins += _bin_side(d[right], y[right], 0.0, float(d[right].max()), n_bins, "right")
    return BinnedSeries(label or points.label, bins)
