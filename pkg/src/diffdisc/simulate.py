"""Synthetic two-period border panels and a reproducible Monte Carlo harness.

Outcomes follow

    y_it = f_t(D) + gamma(D) 1(D >= 0) + tau(D) 1(D >= 0) 1(t = 1) + eta_i + u_it

with polynomial f_0, f_1, linear gamma(D) = gamma0 + gamma_slope * D and
tau(D) = tau0 + tau_slope * D. ``eta_i`` is a unit effect shared by both
periods. A violation adds ``shift * 1(D >= 0)`` to period-1 outcomes only,
which is exactly the kind of jump differencing cannot remove.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from .estimators import (EstimatorConfig, estimate_diff_disc_fd, estimate_diff_disc_pooled,
                         estimate_sharp_rd)
from .exceptions import DomainError, EstimationError, HarnessError, PreconditionError
from .panel import PanelDataset, period_slice

VIOLATIONS = ("none", "period1_sorting", "period1_policy")
ESTIMATORS = ("naive_rd_post", "diff_disc_fd", "diff_disc_pooled")


@dataclass(frozen=True)
class DgpSpec:
    n_units: int = 2000
    distance_half_width: float = 1.0  # D ~ uniform(-a, a)
    f0_coeffs: Tuple[float, ...] = (0.0, 1.0, 0.5)
    f1_coeffs: Tuple[float, ...] = (0.5, 1.2, 0.5)
    gamma0: float = 2.0
    gamma_slope: float = 0.5
    tau0: float = 1.5
    tau_slope: float = 0.25
    noise_sd: float = 1.0
    unit_effect_sd: float = 1.0
    violation: str = "none"
    violation_shift: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "f0_coeffs", tuple(float(c) for c in self.f0_coeffs))
        object.__setattr__(self, "f1_coeffs", tuple(float(c) for c in self.f1_coeffs))
        if int(self.n_units) != self.n_units or self.n_units < 2:
            raise DomainError(f"n_units must be an integer >= 2, got {self.n_units!r}")
        if not (math.isfinite(self.distance_half_width) and self.distance_half_width > 0):
            raise DomainError("distance_half_width must be positive")
        if self.noise_sd < 0 or self.unit_effect_sd < 0:
            raise DomainError("noise_sd and unit_effect_sd must be nonnegative")
        if self.violation not in VIOLATIONS:
            raise DomainError(f"violation must be one of {VIOLATIONS}, got {self.violation!r}")
        numbers = (*self.f0_coeffs, *self.f1_coeffs, self.gamma0, self.gamma_slope,
                   self.tau0, self.tau_slope, self.noise_sd, self.unit_effect_sd,
                   self.violation_shift)
        if not all(math.isfinite(v) for v in numbers):
            raise DomainError("all DGP parameters must be finite")


def oracle_true_effect(spec: DgpSpec) -> float:
    """Treatment effect at the border, tau(0)."""
    return spec.tau0


def _poly(coeffs, x):
    # coefficients are constant-first; an empty list is the zero polynomial
    if len(coeffs) == 0:
        return np.zeros_like(x)
    return np.polynomial.polynomial.polyval(x, np.asarray(coeffs, dtype=float))


def generate_panel(spec: DgpSpec, seed: int) -> PanelDataset:
    """Draw one panel; identical ``(spec, seed)`` give bit-identical data.

    Rows are ordered unit by unit, period 0 before period 1.
    """
    rng = np.random.default_rng(seed)
    n = spec.n_units
    a = spec.distance_half_width
    d = rng.uniform(-a, a, n)
    # draws are taken even when a scale is zero so the stream layout is fixed
    eta = spec.unit_effect_sd * rng.standard_normal(n)
    u = spec.noise_sd * rng.standard_normal((2, n))

    treated = (d >= 0).astype(float)
    gamma = (spec.gamma0 + spec.gamma_slope * d) * treated
    tau = (spec.tau0 + spec.tau_slope * d) * treated
    y0 = _poly(spec.f0_coeffs, d) + gamma + eta + u[0]
    y1 = _poly(spec.f1_coeffs, d) + gamma + tau + eta + u[1]
    if spec.violation != "none":
        y1 = y1 + spec.violation_shift * treated

    width = len(str(n - 1))
    ids = np.array([f"u{i:0{width}d}" for i in range(n)], dtype=object)
    meta = {"source": f"generate_panel(seed={seed})", "seed": seed,
            "violation": spec.violation}
    return PanelDataset(
        unit_id=np.repeat(ids, 2),
        period=np.tile([0, 1], n),
        outcome=np.column_stack([y0, y1]).ravel(),
        distance=np.repeat(d, 2),
        metadata=meta,
    )


# --------------------------------------------------------------------------
# spec files: flat "key = value" lines, '#' comments, lists comma-separated

_TUPLE_KEYS = {"f0_coeffs", "f1_coeffs"}


def parse_spec(text: str) -> DgpSpec:
    types = {f.name: f.type for f in fields(DgpSpec)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"spec line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise DomainError(f"spec line {lineno}: unknown key {key!r}")
        try:
            if key in _TUPLE_KEYS:
                values[key] = tuple(float(v) for v in value.split(",") if v.strip())
            elif key == "violation":
                values[key] = value
            elif key == "n_units":
                values[key] = int(value)
            else:
                values[key] = float(value)
        except ValueError:
            raise DomainError(f"spec line {lineno}: bad value for {key}: {value!r}") from None
    return DgpSpec(**values)


def load_spec(path: Union[str, Path]) -> DgpSpec:
    return parse_spec(Path(path).read_text(encoding="utf-8"))


def format_spec(spec: DgpSpec) -> str:
    lines = []
    for key, value in asdict(spec).items():
        if key in _TUPLE_KEYS:
            value = ", ".join(repr(float(v)) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Monte Carlo

@dataclass(frozen=True)
class McSummary:
    """Aggregates over successful replications; ``failures`` counts the rest."""

    estimator: str
    reps: int
    true_effect: float
    mean_estimate: float
    bias: float
    sd: float
    rmse: float
    coverage_rate: float
    failures: int

    def to_record(self):
        return asdict(self)


def replication_seed(master_seed: int, rep: int) -> int:
    """Seed for replication ``rep``, a pure function of ``(master_seed, rep)``."""
    ss = np.random.SeedSequence([int(master_seed), int(rep)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def run_estimator(estimator: str, data: PanelDataset, config: EstimatorConfig):
    if estimator == "naive_rd_post":
        return estimate_sharp_rd(period_slice(data, 1), config)
    if estimator == "diff_disc_fd":
        return estimate_diff_disc_fd(data, config)
    if estimator == "diff_disc_pooled":
        return estimate_diff_disc_pooled(data, config)[0]
    raise ValueError(f"unknown estimator {estimator!r}; expected one of {ESTIMATORS}")


def _replicate(args):
    spec, estimator, config, master_seed, rep = args
    data = generate_panel(spec, replication_seed(master_seed, rep))
    try:
        est = run_estimator(estimator, data, config)
    except (EstimationError, PreconditionError) as exc:
        return None, f"replication {rep}: {type(exc).__name__}: {exc}"
    return (est.tau_hat, est.ci[0], est.ci[1]), None


def summarize(estimates, lower, upper, truth, reps, estimator) -> McSummary:
    est = np.asarray(estimates, dtype=float)
    ok = est.size
    mean = float(np.mean(est))
    sd = float(np.std(est, ddof=1)) if ok > 1 else 0.0
    bias = mean - truth
    rmse = math.sqrt(float(np.mean((est - truth) ** 2)))
    covered = (np.asarray(lower) <= truth) & (truth <= np.asarray(upper))
    return McSummary(estimator=estimator, reps=reps, true_effect=float(truth),
                     mean_estimate=mean, bias=bias, sd=sd, rmse=rmse,
                     coverage_rate=float(np.mean(covered)), failures=reps - ok)


def run_monte_carlo(spec: DgpSpec, estimator: str, config: EstimatorConfig, reps: int,
                    master_seed: int, workers: Optional[int] = None) -> McSummary:
    """Repeat generate-then-estimate ``reps`` times.

    Replication r always uses ``replication_seed(master_seed, r)`` and
    results are aggregated in replication order, so the summary does not
    depend on ``workers``.
    """
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}; expected one of {ESTIMATORS}")
    if int(reps) != reps or reps < 1:
        raise ValueError(f"reps must be a positive integer, got {reps!r}")
    jobs = [(spec, estimator, config, master_seed, r) for r in range(reps)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate, jobs, chunksize=max(1, reps // (4 * workers))))
    else:
        results = [_replicate(job) for job in jobs]

    good = [r for r, _ in results if r is not None]
    errors = [e for _, e in results if e is not None]
    if not good:
        raise HarnessError(f"all {reps} replications failed; first: {errors[0]}", errors[0])
    tau, lo, hi = (np.array(col) for col in zip(*good))
    return summarize(tau, lo, hi, oracle_true_effect(spec), reps, estimator)
