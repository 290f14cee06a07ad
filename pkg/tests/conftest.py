"""Shared fixtures: metric catalog samples and small curves."""

from __future__ import annotations

import numpy as np
import pytest

from confcurves.metric import AlphaFamily, Axisymmetric, Catenoid, Euclidean, Mercator, MuFamily, Torus

# (label, metric) pairs covering every family and both signs of the parameters
FAMILIES = [
    ("euclidean", Euclidean()),
    ("mu:0", MuFamily(0.0)),
    ("mu:0.5", MuFamily(0.5)),
    ("mu:1", MuFamily(1.0)),
    ("mu:2", MuFamily(2.0)),
    ("mu:-1.5", MuFamily(-1.5)),
    ("axisym:3", Axisymmetric(3)),
    ("alpha:-1", AlphaFamily(-1.0)),
    ("alpha:0", AlphaFamily(0.0)),
    ("alpha:1", AlphaFamily(1.0)),
    ("alpha:0.3", AlphaFamily(0.3)),
    ("mercator", Mercator()),
    ("catenoid", Catenoid()),
    ("torus:1", Torus(1.0)),
    ("torus:2.5", Torus(2.5)),
]

SPLITTABLE = [(k, m) for k, m in FAMILIES if not (isinstance(m, MuFamily) and -1.0 < m.mu < 0.0)]


def sample_points(metric, n: int, seed: int = 0) -> np.ndarray:
    """``n`` points well inside the chart domain of ``metric``."""
    rng = np.random.default_rng(seed)
    if isinstance(metric, MuFamily) and not isinstance(metric, Euclidean):
        return np.column_stack([rng.uniform(-2, 2, n), rng.uniform(0.3, 3.0, n)])
    if isinstance(metric, AlphaFamily) and metric.alpha > 0:
        rad = 0.9 / np.sqrt(metric.alpha) * np.sqrt(rng.uniform(0, 1, n))
        th = rng.uniform(0, 2 * np.pi, n)
        return np.column_stack([rad * np.cos(th), rad * np.sin(th)])
    if isinstance(metric, Euclidean):
        return np.column_stack([rng.uniform(-2, 2, n), rng.uniform(0.3, 3.0, n)])
    return rng.uniform(-2, 2, (n, 2))


@pytest.fixture(params=FAMILIES, ids=[k for k, _ in FAMILIES])
def family(request):
    return request.param[1]


# acceptance verdicts, repeated at the end of the terminal report --------------------

_ACCEPTANCE: list[str] = []


def record_acceptance(line: str) -> None:
    _ACCEPTANCE.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
