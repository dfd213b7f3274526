"""Sharp RD and difference-in-discontinuities estimators.

Three estimators share one local polynomial engine and one bandwidth per
estimate:

* ``estimate_sharp_rd``: jump in a single cross-section at the cutoff.
* ``estimate_diff_disc_fd``: sharp RD on first-differenced outcomes
  ``y1 - y0``; any time-invariant jump at the border differences out.
* ``estimate_diff_disc_pooled``: one kernel-weighted regression on both
  periods with full side x period x distance interactions; the
  period-1 x treated-side intercept shift is the estimate. Works on
  repeated cross-sections as well as panels.

On a balanced panel with a common bandwidth the two diff-in-disc forms agree
to rounding error, and both equal the post-period jump minus the pre-period
jump.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy import stats

from .exceptions import InferenceError, InsufficientDataError, SingularDesignError
from .local_regression import (BandwidthSpec, CrossValidation, KernelKind, LocalFit,
                               fit_local_polynomial, kernel_weights, polynomial_design,
                               select_bandwidth, weighted_lstsq)
from .panel import CrossSection, PanelDataset, first_difference, period_slice, require_valid

RECORD_KEYS = ("tau_hat", "se", "ci_lower", "ci_upper", "gamma_hat", "disc_pre",
               "disc_post", "bandwidth", "n_left", "n_right", "variant")


@dataclass(frozen=True)
class EstimatorConfig:
    kernel: KernelKind = KernelKind.TRIANGULAR
    bandwidth: BandwidthSpec = field(default_factory=CrossValidation)
    order: int = 1
    confidence_level: float = 0.95

    def __post_init__(self):
        object.__setattr__(self, "kernel", KernelKind(self.kernel))
        if int(self.order) != self.order or self.order < 1:
            raise ValueError(f"order must be an integer >= 1, got {self.order!r}")
        if not 0.0 < self.confidence_level < 1.0:
            raise ValueError(f"confidence level must lie in (0, 1), got {self.confidence_level!r}")


def _clean(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


@dataclass(frozen=True, eq=False)
class RdEstimate:
    tau_hat: float
    se: float
    ci: Tuple[float, float]
    intercept_left: float
    intercept_right: float
    n_left: int
    n_right: int
    bandwidth_used: float
    left_fit: Optional[LocalFit] = field(default=None, repr=False)
    right_fit: Optional[LocalFit] = field(default=None, repr=False)

    def to_record(self):
        return {
            "tau_hat": _clean(self.tau_hat), "se": _clean(self.se),
            "ci_lower": _clean(self.ci[0]), "ci_upper": _clean(self.ci[1]),
            "gamma_hat": None, "disc_pre": None, "disc_post": None,
            "bandwidth": self.bandwidth_used,
            "n_left": self.n_left, "n_right": self.n_right, "variant": "rd",
        }


@dataclass(frozen=True, eq=False)
class DiffDiscEstimate:
    tau_hat: float
    se: float
    ci: Tuple[float, float]
    gamma_hat: float
    disc_pre: float
    disc_post: float
    variant: str  # "first_difference" or "pooled"
    bandwidth_used: float
    n_units_effective: int
    n_left: int
    n_right: int

    def to_record(self):
        return {
            "tau_hat": _clean(self.tau_hat), "se": _clean(self.se),
            "ci_lower": _clean(self.ci[0]), "ci_upper": _clean(self.ci[1]),
            "gamma_hat": _clean(self.gamma_hat), "disc_pre": _clean(self.disc_pre),
            "disc_post": _clean(self.disc_post), "bandwidth": self.bandwidth_used,
            "n_left": self.n_left, "n_right": self.n_right, "variant": self.variant,
        }


@dataclass(frozen=True)
class PooledCoefficients:
    """Coefficients of the fully interacted pooled regression, in distance units.

    Each block holds the polynomial coefficients (constant, slope, ...) of one
    regressor group: ``delta`` baseline, ``gamma`` treated side, ``alpha``
    post period, ``beta`` post period on the treated side.
    """

    delta: Tuple[float, ...]
    gamma: Tuple[float, ...]
    alpha: Tuple[float, ...]
    beta: Tuple[float, ...]

    delta0 = property(lambda self: self.delta[0])
    delta1 = property(lambda self: self.delta[1])
    gamma0 = property(lambda self: self.gamma[0])
    gamma1 = property(lambda self: self.gamma[1])
    alpha0 = property(lambda self: self.alpha[0])
    alpha1 = property(lambda self: self.alpha[1])
    beta0 = property(lambda self: self.beta[0])
    beta1 = property(lambda self: self.beta[1])


# --------------------------------------------------------------------------
# inference

def confidence_interval(tau_hat: float, se: float, level: float = 0.95):
    """Normal-approximation interval ``tau_hat +/- z * se``."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level!r}")
    if se is None or not math.isfinite(se):
        return (math.nan, math.nan)
    z = stats.norm.ppf(0.5 + level / 2.0)
    return (float(tau_hat - z * se), float(tau_hat + z * se))


def contrast_se(scores_weight, residuals, n_params, clusters=None) -> float:
    """Sandwich standard error of a linear contrast of WLS coefficients.

    ``scores_weight[i]`` is the contrast applied to the influence column of
    observation i, so the contrast's estimation error is
    ``sum_i scores_weight[i] * residual[i]``. HC1 scaling ``n / (n - k)``; with
    clusters, scores are summed within cluster and scaled by
    ``G / (G - 1) * (n - 1) / (n - k)``.
    """
    psi = np.asarray(scores_weight, dtype=float) * np.asarray(residuals, dtype=float)
    n = psi.size
    dof = n - n_params
    if dof <= 0:
        raise InferenceError(f"no residual degrees of freedom (n={n}, k={n_params})")
    if clusters is None:
        return math.sqrt(n / dof * float(psi @ psi))
    _, groups = np.unique(np.asarray(clusters), return_inverse=True)
    psi_g = np.bincount(groups, weights=psi)
    g = psi_g.size
    if g <= 1:
        raise InferenceError("clustered variance needs at least two clusters")
    factor = g / (g - 1) * (n - 1) / dof
    return math.sqrt(factor * float(psi_g @ psi_g))


def robust_standard_error(design, residuals, weights, contrast, clusters=None) -> float:
    """HC1 (optionally cluster-robust) standard error of ``contrast @ beta``.

    ``beta`` is the weighted least squares fit of some outcome on ``design``
    with ``weights``; ``residuals`` are that fit's residuals.
    """
    design = np.asarray(design, dtype=float)
    sol = weighted_lstsq(design, np.zeros(design.shape[0]), weights)
    row = np.asarray(contrast, dtype=float) @ sol.influence
    return contrast_se(row, residuals, design.shape[1], clusters)


def _se_or_nan(*args, **kwargs):
    try:
        return contrast_se(*args, **kwargs)
    except InferenceError:
        return math.nan


# --------------------------------------------------------------------------
# sharp RD

def rd_at_bandwidth(points: CrossSection, bandwidth: float, config: EstimatorConfig) -> RdEstimate:
    """Sharp RD with the bandwidth already fixed."""
    left = fit_local_polynomial(points, "left", config.order, config.kernel, bandwidth)
    right = fit_local_polynomial(points, "right", config.order, config.kernel, bandwidth)
    tau = right.intercept - left.intercept
    # stacked block-diagonal fit; the contrast is right intercept minus left
    weight = np.concatenate([-left.influence[0], right.influence[0]])
    resid = np.concatenate([left.residuals, right.residuals])
    se = _se_or_nan(weight, resid, 2 * (config.order + 1))
    return RdEstimate(
        tau_hat=tau, se=se, ci=confidence_interval(tau, se, config.confidence_level),
        intercept_left=left.intercept, intercept_right=right.intercept,
        n_left=left.n_effective, n_right=right.n_effective,
        bandwidth_used=float(bandwidth), left_fit=left, right_fit=right,
    )


def estimate_sharp_rd(points: CrossSection, config: EstimatorConfig = None) -> RdEstimate:
    """Jump in ``value`` at distance zero: right limit minus left limit."""
    config = config or EstimatorConfig()
    h = select_bandwidth(points, config.bandwidth, config.order, config.kernel)
    return rd_at_bandwidth(points, h, config)


# --------------------------------------------------------------------------
# diff-in-disc, first-difference form

def estimate_diff_disc_fd(data: PanelDataset, config: EstimatorConfig = None) -> DiffDiscEstimate:
    """Sharp RD on ``y1 - y0``.

    The bandwidth is chosen once on the differenced outcome and reused for
    the per-period RDs that fill ``disc_pre``/``disc_post``.
    """
    config = config or EstimatorConfig()
    diff = first_difference(data)
    h = select_bandwidth(diff, config.bandwidth, config.order, config.kernel)
    fd = rd_at_bandwidth(diff, h, config)
    pre = rd_at_bandwidth(period_slice(data, 0), h, config)
    post = rd_at_bandwidth(period_slice(data, 1), h, config)
    return DiffDiscEstimate(
        tau_hat=fd.tau_hat, se=fd.se, ci=fd.ci,
        gamma_hat=pre.tau_hat, disc_pre=pre.tau_hat, disc_post=post.tau_hat,
        variant="first_difference", bandwidth_used=h,
        n_units_effective=fd.n_left + fd.n_right, n_left=fd.n_left, n_right=fd.n_right,
    )


# --------------------------------------------------------------------------
# diff-in-disc, pooled interaction form

def pooled_design(distance, period, order, bandwidth):
    """Regressor blocks [D^k, R*D^k, T*D^k, T*R*D^k] in the scaled basis d/h."""
    base = polynomial_design(np.asarray(distance) / bandwidth, order)
    right = (np.asarray(distance) >= 0).astype(float)[:, None]
    post = (np.asarray(period) == 1).astype(float)[:, None]
    return np.hstack([base, right * base, post * base, post * right * base])


def _check_cells(distance, period, order):
    needed = order + 1
    for t in (0, 1):
        for side in ("left", "right"):
            on_side = distance >= 0 if side == "right" else distance < 0
            d = distance[(period == t) & on_side]
            if d.size < needed:
                raise InsufficientDataError(side, int(d.size), needed, f"period {t}")
            if np.unique(d).size < needed:
                raise SingularDesignError(
                    f"period {t}, {side} side has fewer than {needed} distinct distances "
                    "inside the window")


def pooled_at_bandwidth(data: PanelDataset, bandwidth: float, config: EstimatorConfig):
    w_all = kernel_weights(config.kernel, data.distance / bandwidth)
    rows = np.flatnonzero(w_all > 0)
    d = data.distance[rows]
    t = data.period[rows]
    _check_cells(d, t, config.order)

    k = config.order + 1
    x = pooled_design(d, t, config.order, bandwidth)
    y = data.outcome[rows]
    sol = weighted_lstsq(x, y, w_all[rows])
    coef = sol.coefficients
    scale = bandwidth ** np.arange(k)
    blocks = [tuple((coef[j * k:(j + 1) * k] / scale).tolist()) for j in range(4)]
    pooled = PooledCoefficients(*blocks)

    beta0 = 3 * k
    tau = float(coef[beta0])
    units = data.unit_id[rows]
    se = _se_or_nan(sol.influence[beta0], y - x @ coef, x.shape[1], clusters=units)
    n_left = int(np.unique(units[d < 0]).size)
    n_right = int(np.unique(units[d >= 0]).size)
    est = DiffDiscEstimate(
        tau_hat=tau, se=se, ci=confidence_interval(tau, se, config.confidence_level),
        gamma_hat=pooled.gamma0, disc_pre=pooled.gamma0,
        disc_post=pooled.gamma0 + tau, variant="pooled", bandwidth_used=float(bandwidth),
        n_units_effective=int(np.unique(units).size), n_left=n_left, n_right=n_right,
    )
    return est, pooled


def estimate_diff_disc_pooled(data: PanelDataset, config: EstimatorConfig = None,
                              repeated_cross_section: bool = False):
    """Pooled interaction regression over both periods.

    Parameters
    ----------
    data : PanelDataset
        A balanced panel, or with ``repeated_cross_section=True`` two
        independent samples whose unit ids need not match across periods.
    config : EstimatorConfig

    Returns
    -------
    (DiffDiscEstimate, PooledCoefficients)
        Standard errors cluster on unit id, since a panel unit contributes a
        row to each period.
    """
    config = config or EstimatorConfig()
    ignore = ("unbalanced", "distance_drift") if repeated_cross_section else ()
    require_valid(data, ignore=ignore)
    slices = [period_slice(data, 0), period_slice(data, 1)]
    h = select_bandwidth(slices, config.bandwidth, config.order, config.kernel)
    return pooled_at_bandwidth(data, h, config)
