import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from diffdisc.panel import PanelDataset  # noqa: E402

DATA = Path(__file__).resolve().parents[1] / "src" / "diffdisc" / "data"

_acceptance = []


def record_acceptance(number, name, passed, detail):
    _acceptance.append((number, name, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in sorted(_acceptance):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number}. {name}: {detail}")


def make_panel(d, y0, y1, ids=None):
    d = np.asarray(d, dtype=float)
    n = d.size
    ids = ids if ids is not None else [f"u{i}" for i in range(n)]
    return PanelDataset(
        unit_id=np.repeat(ids, 2),
        period=np.tile([0, 1], n),
        outcome=np.column_stack([y0, y1]).ravel(),
        distance=np.repeat(d, 2),
    )


def random_panel(rng, n=None, noise=1.0):
    n = n or int(rng.integers(60, 400))
    d = rng.uniform(-1, 1, n)
    y0 = rng.normal(size=n) * noise + 0.8 * d + 2.0 * (d >= 0)
    y1 = y0 + rng.normal(size=n) * noise + 0.3 + 1.5 * (d >= 0) - 0.4 * d ** 2
    return make_panel(d, y0, y1)


@pytest.fixture
def fixture_csv():
    return DATA / "noiseless_panel.csv"
