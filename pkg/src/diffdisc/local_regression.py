"""One-sided local polynomial regression at the cutoff and bandwidth selection.

All fits are centred at the cutoff (distance zero), so the intercept of a
fit is the estimated one-sided limit of the regression function there.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import scipy.linalg

from .exceptions import (InsufficientDataError, NoFeasibleBandwidthError,
                         SingularDesignError)
from .panel import CrossSection

RANK_TOL = 1e-10
AUTO_GRID_POINTS = 12
ROT_CONSTANT = 1.06


class KernelKind(str, enum.Enum):
    UNIFORM = "uniform"
    TRIANGULAR = "triangular"
    EPANECHNIKOV = "epanechnikov"


def kernel_weights(kind, u):
    """Vectorised kernel evaluation; all kernels vanish outside ``|u| <= 1``."""
    kind = KernelKind(kind)
    a = np.abs(np.asarray(u, dtype=float))
    if kind is KernelKind.UNIFORM:
        return np.where(a <= 1.0, 0.5, 0.0)
    if kind is KernelKind.TRIANGULAR:
        return np.maximum(0.0, 1.0 - a)
    return np.maximum(0.0, 0.75 * (1.0 - a * a))


def kernel_weight(kind, u: float) -> float:
    return float(kernel_weights(kind, u))


def _side_mask(distance, side):
    if side == "right":
        return distance >= 0
    if side == "left":
        return distance < 0
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


# --------------------------------------------------------------------------
# bandwidth specifications

@dataclass(frozen=True)
class FixedBandwidth:
    h: float

    def __post_init__(self):
        if not (math.isfinite(self.h) and self.h > 0):
            raise ValueError(f"bandwidth must be a positive finite number, got {self.h!r}")


@dataclass(frozen=True)
class CrossValidation:
    """Leave-one-out cross-validation over a grid of bandwidths.

    With ``grid=None`` the grid is 12 geometrically spaced values spanning
    ``[range/50, range/2]`` of the observed distances.
    """

    grid: Optional[tuple] = None

    def __post_init__(self):
        if self.grid is not None:
            grid = tuple(float(h) for h in self.grid)
            if not grid or any(not (math.isfinite(h) and h > 0) for h in grid):
                raise ValueError("cross-validation grid must be nonempty with positive entries")
            object.__setattr__(self, "grid", grid)


@dataclass(frozen=True)
class RuleOfThumb:
    """Silverman-style pilot ``1.06 * sd(distance) * n**(-1/5)``.

    A crude pilot only; it ignores the outcome and the boundary entirely.
    """


BandwidthSpec = Union[FixedBandwidth, CrossValidation, RuleOfThumb]


def default_grid(distance) -> np.ndarray:
    distance = np.asarray(distance, dtype=float)
    span = float(distance.max() - distance.min())
    if not span > 0:
        raise NoFeasibleBandwidthError("distances have zero range; cannot build a bandwidth grid")
    return np.geomspace(span / 50.0, span / 2.0, AUTO_GRID_POINTS)


# --------------------------------------------------------------------------
# weighted least squares

@dataclass(frozen=True)
class WlsSolution:
    coefficients: np.ndarray
    influence: np.ndarray  # (k, n): coefficients == influence @ y


def weighted_lstsq(design, y, weights) -> WlsSolution:
    """Minimise ``sum w_i (y_i - x_i b)^2`` through a pivoted QR of ``sqrt(W) X``.

    Raises SingularDesignError when a diagonal entry of R falls below
    ``RANK_TOL`` relative to the largest one.
    """
    design = np.asarray(design, dtype=float)
    sw = np.sqrt(np.asarray(weights, dtype=float))
    a = design * sw[:, None]
    q, r, piv = scipy.linalg.qr(a, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0 or np.any(diag < RANK_TOL * diag[0]):
        raise SingularDesignError(
            f"design matrix is rank deficient ({design.shape[1]} columns, "
            f"{design.shape[0]} weighted rows)")
    inv_r_qt = scipy.linalg.solve_triangular(r, q.T)
    influence = np.empty_like(inv_r_qt)
    influence[piv] = inv_r_qt
    influence *= sw[None, :]
    return WlsSolution(influence @ np.asarray(y, dtype=float), influence)


def polynomial_design(u, order):
    return np.vander(np.asarray(u, dtype=float), order + 1, increasing=True)


# --------------------------------------------------------------------------
# local fits

@dataclass(frozen=True, eq=False)
class LocalFit:
    """Kernel-weighted polynomial fit on one side of the cutoff.

    ``coefficients`` are in distance units: intercept (the one-sided limit at
    the cutoff), slope, and so on. The per-point arrays cover only the
    points with positive kernel weight. ``design`` and ``influence`` are in
    the scaled basis ``(distance / h) ** k``; their intercept rows coincide
    with the unscaled ones.
    """

    side: str
    order: int
    kernel: KernelKind
    bandwidth_used: float
    coefficients: np.ndarray
    residuals: np.ndarray
    weights: np.ndarray
    unit_id: np.ndarray
    distance: np.ndarray
    design: np.ndarray = field(repr=False)
    influence: np.ndarray = field(repr=False)

    @property
    def n_effective(self) -> int:
        return int(self.weights.size)

    @property
    def intercept(self) -> float:
        return float(self.coefficients[0])


def window(distance, side, kernel, bandwidth):
    """Indices and weights of the points a one-sided fit actually uses."""
    idx = np.flatnonzero(_side_mask(distance, side))
    w = kernel_weights(kernel, distance[idx] / bandwidth)
    keep = w > 0
    return idx[keep], w[keep]


def fit_local_polynomial(points: CrossSection, side: str, order: int = 1,
                         kernel=KernelKind.TRIANGULAR, bandwidth: float = 1.0) -> LocalFit:
    """Fit ``value ~ sum_k b_k distance**k`` on one side with kernel weights ``K(d/h)``.

    Parameters
    ----------
    points : CrossSection
    side : {"left", "right"}
        ``left`` uses ``distance < 0``; ``right`` uses ``distance >= 0``.
    order : int
        Polynomial order p >= 1.
    kernel : KernelKind
    bandwidth : float
        Window half-width h in distance units.
    """
    kernel = KernelKind(kernel)
    if order < 1:
        raise ValueError("polynomial order must be at least 1")
    if not (math.isfinite(bandwidth) and bandwidth > 0):
        raise ValueError(f"bandwidth must be positive, got {bandwidth!r}")

    idx, w = window(points.distance, side, kernel, bandwidth)
    needed = order + 1
    if idx.size < needed:
        raise InsufficientDataError(side, int(idx.size), needed,
                                    f"bandwidth {bandwidth!r}")
    d = points.distance[idx]
    if np.unique(d).size < needed:
        raise SingularDesignError(
            f"{side} side has fewer than {needed} distinct distances inside the window")

    x = polynomial_design(d / bandwidth, order)
    y = points.value[idx]
    sol = weighted_lstsq(x, y, w)
    coef = sol.coefficients / bandwidth ** np.arange(needed)
    return LocalFit(
        side=side, order=order, kernel=kernel, bandwidth_used=float(bandwidth),
        coefficients=coef, residuals=y - x @ sol.coefficients, weights=w,
        unit_id=points.unit_id[idx], distance=d, design=x, influence=sol.influence,
    )


# --------------------------------------------------------------------------
# bandwidth selection

def _cutoff_feasible(distance, kernel, h, order):
    for side in ("left", "right"):
        idx, _ = window(distance, side, kernel, h)
        if np.unique(distance[idx]).size < order + 1:
            return False
    return True


def _loo_side(d, y, h, order, kernel, max_cells=1 << 21):
    """Leave-one-out predictions at each point from same-side local fits.

    Returns None if any point lacks enough distinct neighbours.
    """
    order_idx = np.argsort(d, kind="stable")
    d = d[order_idx]
    y = y[order_idx]
    m = d.size
    closed = KernelKind(kernel) is KernelKind.UNIFORM
    if closed:
        lo = np.searchsorted(d, d - h, side="left")
        hi = np.searchsorted(d, d + h, side="right")
    else:
        lo = np.searchsorted(d, d - h, side="right")
        hi = np.searchsorted(d, d + h, side="left")

    # distinct neighbour count, excluding the held-out point's own value
    uniq, counts = np.unique(d, return_counts=True)
    if closed:
        ulo = np.searchsorted(uniq, d - h, side="left")
        uhi = np.searchsorted(uniq, d + h, side="right")
    else:
        ulo = np.searchsorted(uniq, d - h, side="right")
        uhi = np.searchsorted(uniq, d + h, side="left")
    own = counts[np.searchsorted(uniq, d)]
    distinct = (uhi - ulo) - (own == 1)
    if np.any(distinct < order + 1):
        return None

    k = order + 1
    pred = np.empty(m)
    width = int((hi - lo).max())
    rows = max(1, max_cells // max(width, 1))
    for start in range(0, m, rows):
        stop = min(m, start + rows)
        r = np.arange(start, stop)
        cols = lo[r, None] + np.arange(width)[None, :]
        valid = (cols < hi[r, None]) & (cols != r[:, None])
        cols = np.minimum(cols, m - 1)
        du = (d[cols] - d[r, None]) / h
        w = np.where(valid, kernel_weights(kernel, du), 0.0)
        powers = [w]
        for _ in range(2 * order):
            powers.append(powers[-1] * du)
        moments = np.stack([p.sum(axis=1) for p in powers], axis=1)
        s = np.empty((r.size, k, k))
        for a in range(k):
            s[:, a, :] = moments[:, a:a + k]
        yy = y[cols]
        t = np.stack([(powers[a] * yy).sum(axis=1) for a in range(k)], axis=1)
        try:
            sol = np.linalg.solve(s, t[..., None])[..., 0]
        except np.linalg.LinAlgError:
            return None
        pred[r] = sol[:, 0]
    if not np.all(np.isfinite(pred)):
        return None
    out = np.empty(m)
    out[order_idx] = pred
    return out


def cv_score(points: CrossSection, bandwidth: float, order: int = 1,
             kernel=KernelKind.TRIANGULAR) -> Optional[float]:
    """Summed squared leave-one-out prediction error, or None if infeasible.

    Each held-out point is predicted by a local polynomial centred at its own
    distance using only the other points on its side of the cutoff. A
    bandwidth is infeasible when either cutoff fit or any held-out
    prediction lacks ``order + 1`` distinct points in its window.
    """
    kernel = KernelKind(kernel)
    if not _cutoff_feasible(points.distance, kernel, bandwidth, order):
        return None
    total = 0.0
    for side in ("left", "right"):
        mask = _side_mask(points.distance, side)
        pred = _loo_side(points.distance[mask], points.value[mask], bandwidth, order, kernel)
        if pred is None:
            return None
        total += float(np.sum((points.value[mask] - pred) ** 2))
    return total


def choose_from_grid(scores):
    """Pick the bandwidth with the lowest score; ties go to the smaller bandwidth.

    ``scores`` maps bandwidth to score (None marks infeasible).
    """
    best_h, best = None, None
    for h in sorted(scores):
        s = scores[h]
        if s is None:
            continue
        if best is None or s < best:
            best_h, best = h, s
    if best_h is None:
        raise NoFeasibleBandwidthError(
            "no bandwidth in the grid gives a feasible fit on both sides: "
            + ", ".join(f"{h:.6g}" for h in sorted(scores)))
    return best_h


def cv_scores(samples: Sequence[CrossSection], grid, order, kernel):
    """CV score per bandwidth, summed over several cross-sections."""
    out = {}
    for h in grid:
        total = 0.0
        for s in samples:
            score = cv_score(s, float(h), order, kernel)
            if score is None:
                total = None
                break
            total += score
        out[float(h)] = total
    return out


def select_bandwidth(points: Union[CrossSection, Sequence[CrossSection]], spec: BandwidthSpec,
                     order: int = 1, kernel=KernelKind.TRIANGULAR) -> float:
    """Resolve a bandwidth specification to a positive number.

    ``points`` may be a sequence of cross-sections (e.g. the two periods of a
    pooled sample); cross-validation then sums the scores across them.
    """
    samples = [points] if isinstance(points, CrossSection) else list(points)
    distance = np.concatenate([s.distance for s in samples])
    if not (np.any(distance < 0) and np.any(distance >= 0)):
        raise InsufficientDataError("left" if not np.any(distance < 0) else "right", 0, 1,
                                    "bandwidth selection needs points on both sides")
    if isinstance(spec, FixedBandwidth):
        return spec.h
    if isinstance(spec, RuleOfThumb):
        if distance.size < 2:
            raise NoFeasibleBandwidthError("rule of thumb needs at least two points")
        h = ROT_CONSTANT * float(np.std(distance, ddof=1)) * distance.size ** -0.2
        if not h > 0:
            raise NoFeasibleBandwidthError("distances have zero spread")
        return h
    if isinstance(spec, CrossValidation):
        grid = spec.grid if spec.grid is not None else default_grid(distance)
        return choose_from_grid(cv_scores(samples, grid, order, KernelKind(kernel)))
    raise TypeError(f"unknown bandwidth specification: {spec!r}")
