"""Two-period geographic RD panels: data model, validation, differencing, CSV I/O.

Distances are signed with the border at zero; non-negative distances are on
the treated side, so a unit sitting exactly on the border counts as treated.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Optional, TextIO, Union

import numpy as np

from .exceptions import DomainError, ParseError, PreconditionError, SchemaError

PERIODS = (0, 1)


class Observation(NamedTuple):
    unit_id: str
    period: int
    outcome: float
    distance: float


@dataclass(frozen=True)
class ColumnMapping:
    """CSV column names for the four panel fields."""

    unit: str = "unit_id"
    period: str = "period"
    outcome: str = "outcome"
    distance: str = "distance"

    def as_dict(self):
        return {"unit": self.unit, "period": self.period,
                "outcome": self.outcome, "distance": self.distance}


def _frozen(values, dtype):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """Unit-period observations stored column-wise.

    Construction does not enforce the balanced-panel invariants; call
    :func:`validate_panel` for that. Operations that need a balanced panel
    check it themselves.
    """

    unit_id: np.ndarray
    period: np.ndarray
    outcome: np.ndarray
    distance: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "unit_id", _frozen([str(u) for u in self.unit_id], object))
        object.__setattr__(self, "period", _frozen(self.period, np.int64))
        object.__setattr__(self, "outcome", _frozen(self.outcome, np.float64))
        object.__setattr__(self, "distance", _frozen(self.distance, np.float64))
        n = len(self.unit_id)
        if not (len(self.period) == len(self.outcome) == len(self.distance) == n):
            raise ValueError("panel columns must have equal length")

    @classmethod
    def from_observations(cls, observations: Iterable[Observation], metadata=None):
        obs = [Observation(*o) for o in observations]
        return cls(
            unit_id=[o.unit_id for o in obs],
            period=[o.period for o in obs],
            outcome=[o.outcome for o in obs],
            distance=[o.distance for o in obs],
            metadata=dict(metadata or {}),
        )

    @property
    def observations(self):
        return tuple(
            Observation(u, int(p), float(y), float(d))
            for u, p, y, d in zip(self.unit_id, self.period, self.outcome, self.distance)
        )

    def __len__(self):
        return len(self.unit_id)

    def replace_outcome(self, outcome, **metadata):
        """Copy of the panel with a new outcome column."""
        meta = dict(self.metadata)
        meta.update(metadata)
        return PanelDataset(self.unit_id, self.period, outcome, self.distance, meta)

    def swap_periods(self):
        return PanelDataset(self.unit_id, 1 - self.period, self.outcome,
                            self.distance, dict(self.metadata))


@dataclass(frozen=True, eq=False)
class CrossSection:
    """One value per unit at a signed distance: a period slice or first differences."""

    unit_id: np.ndarray
    distance: np.ndarray
    value: np.ndarray
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "unit_id", _frozen([str(u) for u in self.unit_id], object))
        object.__setattr__(self, "distance", _frozen(self.distance, np.float64))
        object.__setattr__(self, "value", _frozen(self.value, np.float64))
        if not (len(self.unit_id) == len(self.distance) == len(self.value)):
            raise ValueError("cross-section columns must have equal length")
        if not (np.all(np.isfinite(self.distance)) and np.all(np.isfinite(self.value))):
            raise DomainError("cross-section distances and values must be finite")
        if len(np.unique(self.unit_id)) != len(self.unit_id):
            raise DomainError("cross-section unit ids must be unique")

    @classmethod
    def from_arrays(cls, distance, value, unit_id=None, label=""):
        distance = np.asarray(distance, dtype=float)
        if unit_id is None:
            unit_id = [str(i) for i in range(len(distance))]
        return cls(unit_id, distance, value, label)

    @property
    def points(self):
        return tuple(zip(self.unit_id, self.distance.tolist(), self.value.tolist()))

    @property
    def treated(self):
        """Boolean mask of points on the treated side, ``distance >= 0``."""
        return self.distance >= 0

    def __len__(self):
        return len(self.unit_id)

    def subset(self, mask):
        return CrossSection(self.unit_id[mask], self.distance[mask], self.value[mask], self.label)


# --------------------------------------------------------------------------
# validation

class Issue(NamedTuple):
    severity: str  # "error" or "warning"
    unit_id: Optional[str]  # None for panel-wide issues
    message: str
    code: str = ""  # period, nonfinite, duplicate, unbalanced, distance_drift, empty_side


class PanelCounts(NamedTuple):
    n_units: int
    n_left: tuple  # per period (0, 1)
    n_right: tuple


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple
    counts: PanelCounts

    @property
    def is_valid(self):
        return not any(i.severity == "error" for i in self.issues)

    def errors(self, ignore=()):
        return [i for i in self.issues if i.severity == "error" and i.code not in ignore]

    def summary(self, limit=5):
        errs = self.errors()
        lines = [f"{len(errs)} validation error(s)"]
        for issue in errs[:limit]:
            where = "panel" if issue.unit_id is None else f"unit {issue.unit_id!r}"
            lines.append(f"  {where}: {issue.message}")
        if len(errs) > limit:
            lines.append(f"  ... and {len(errs) - limit} more")
        return "\n".join(lines)


def validate_panel(data: PanelDataset) -> ValidationReport:
    """Check the balanced two-period panel invariants.

    Every violation is reported; nothing is raised.
    """
    issues = []
    units, inverse = np.unique(data.unit_id, return_inverse=True)
    n_units = len(units)

    bad_period = ~np.isin(data.period, PERIODS)
    for i in np.flatnonzero(bad_period):
        issues.append(Issue("error", data.unit_id[i],
                            f"period {data.period[i]} is not 0 or 1", "period"))

    nonfinite = ~(np.isfinite(data.outcome) & np.isfinite(data.distance))
    for i in np.flatnonzero(nonfinite):
        issues.append(Issue("error", data.unit_id[i],
                            f"non-finite outcome or distance in period {data.period[i]}",
                            "nonfinite"))

    counts = np.zeros((n_units, 2), dtype=np.int64)
    for t in PERIODS:
        counts[:, t] = np.bincount(inverse[data.period == t], minlength=n_units)

    for u in np.flatnonzero((counts > 1).any(axis=1)):
        issues.append(Issue("error", units[u], "duplicate (unit, period) rows", "duplicate"))
    for u in np.flatnonzero((counts == 0).any(axis=1)):
        missing = [t for t in PERIODS if counts[u, t] == 0]
        issues.append(Issue("error", units[u],
                            f"unbalanced: no observation for period {missing[0]}",
                            "unbalanced"))

    # distance must not change within a unit
    dist_min = np.full(n_units, np.inf)
    dist_max = np.full(n_units, -np.inf)
    np.minimum.at(dist_min, inverse, data.distance)
    np.maximum.at(dist_max, inverse, data.distance)
    for u in np.flatnonzero(dist_max > dist_min):
        issues.append(Issue("error", units[u],
                            f"distance drift: {dist_min[u]!r} vs {dist_max[u]!r}",
                            "distance_drift"))

    n_left, n_right = [], []
    for t in PERIODS:
        in_t = data.period == t
        left = int(np.count_nonzero(in_t & (data.distance < 0)))
        right = int(np.count_nonzero(in_t & (data.distance >= 0)))
        n_left.append(left)
        n_right.append(right)
        if left == 0:
            issues.append(Issue("error", None, f"no units left of the cutoff in period {t}",
                                "empty_side"))
        if right == 0:
            issues.append(Issue("error", None, f"no units right of the cutoff in period {t}",
                                "empty_side"))

    return ValidationReport(tuple(issues), PanelCounts(n_units, tuple(n_left), tuple(n_right)))


def require_valid(data: PanelDataset, ignore=()) -> ValidationReport:
    """Validate and raise PreconditionError on any error not listed in ``ignore``."""
    report = validate_panel(data)
    if report.errors(ignore):
        raise PreconditionError("panel failed validation\n" + report.summary(), report)
    return report


# --------------------------------------------------------------------------
# cross-sections

def period_slice(data: PanelDataset, period: int) -> CrossSection:
    """Outcomes of a single period, one point per unit, in row order."""
    if period not in PERIODS:
        raise DomainError(f"period must be 0 or 1, got {period!r}")
    mask = data.period == period
    return CrossSection(data.unit_id[mask], data.distance[mask], data.outcome[mask],
                        label=f"period{period}")


def first_difference(data: PanelDataset) -> CrossSection:
    """Per-unit ``y1 - y0`` at the unit's distance.

    Units appear in the order of their period-0 rows. The time-invariant
    part of the outcome, including any level jump at the border, drops out.
    """
    require_valid(data)
    pre = np.flatnonzero(data.period == 0)
    post = np.flatnonzero(data.period == 1)
    post_by_unit = dict(zip(data.unit_id[post], post))
    post = np.array([post_by_unit[u] for u in data.unit_id[pre]], dtype=np.intp)
    return CrossSection(
        data.unit_id[pre],
        data.distance[pre],
        data.outcome[post] - data.outcome[pre],
        label="first_difference",
    )


# --------------------------------------------------------------------------
# CSV

def _parse_float(text, row, column):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ParseError(row, f"column {column!r}: cannot parse {text!r} as a number") from None
    if not math.isfinite(value):
        raise ParseError(row, f"column {column!r}: non-finite value {text!r}")
    return value


def _parse_period(text, row, column):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ParseError(row, f"column {column!r}: cannot parse {text!r} as an integer") from None
    if not value.is_integer():
        raise ParseError(row, f"column {column!r}: {text!r} is not an integer")
    period = int(value)
    if period not in PERIODS:
        raise DomainError(f"period {period} is not 0 or 1", row=row)
    return period


def load_panel(source: Union[TextIO, str, Path], schema: Optional[ColumnMapping] = None,
               name: Optional[str] = None) -> PanelDataset:
    """Read a panel from CSV text.

    ``source`` is an open text stream or a filesystem path. Row numbers in
    error messages count data rows from 1 (the header is not counted).
    """
    schema = schema or ColumnMapping()
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            return load_panel(fh, schema, name=str(source))

    reader = csv.reader(source)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise SchemaError(schema.unit, "input is empty; a header row is required") from None

    index = {}
    for key, column in schema.as_dict().items():
        if column not in header:
            raise SchemaError(column)
        index[key] = header.index(column)

    units, periods, outcomes, distances = [], [], [], []
    for row, record in enumerate(reader, start=1):
        if not record or all(not cell.strip() for cell in record):
            continue
        if len(record) < len(header):
            raise ParseError(row, f"expected {len(header)} fields, found {len(record)}")
        units.append(record[index["unit"]].strip())
        periods.append(_parse_period(record[index["period"]].strip(), row, schema.period))
        outcomes.append(_parse_float(record[index["outcome"]], row, schema.outcome))
        distances.append(_parse_float(record[index["distance"]], row, schema.distance))

    metadata = {"source": name or getattr(source, "name", "<stream>"),
                "columns": schema.as_dict()}
    return PanelDataset(units, periods, outcomes, distances, metadata)


def write_panel(data: PanelDataset, sink: Union[TextIO, str, Path],
                schema: Optional[ColumnMapping] = None) -> None:
    """Write a panel as CSV; floats use ``repr`` so a reload is exact."""
    schema = schema or ColumnMapping()
    if isinstance(sink, (str, Path)):
        with open(sink, "w", newline="", encoding="utf-8") as fh:
            write_panel(data, fh, schema)
        return
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow([schema.unit, schema.period, schema.outcome, schema.distance])
    for obs in data.observations:
        writer.writerow([obs.unit_id, obs.period, repr(obs.outcome), repr(obs.distance)])


def panel_to_csv(data: PanelDataset, schema: Optional[ColumnMapping] = None) -> str:
    buf = io.StringIO()
    write_panel(data, buf, schema)
    return buf.getvalue()
