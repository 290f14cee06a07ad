"""Conformal parameterizations of embedded surfaces and curve lifts.

A chart ``Phi : H -> R^3`` is conformal when the two columns of its Jacobian
are orthogonal with equal length; the common squared length is the metric
``g`` of the paired :class:`~confcurves.metric.Metric`.  Lifting a chart
polygon node by node gives a polygon that lies exactly on the surface.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .curvemesh import Curve, write_polyline
from .metric import AlphaFamily, Catenoid, DomainError, Mercator, Metric, Torus

__all__ = [
    "ChartMap",
    "stereographic",
    "mercator",
    "catenoid",
    "torus",
    "parse_chart",
    "jacobian",
    "conformality_defect",
    "lift_curve",
    "surface_residual",
    "gauss_curvature",
    "gauss_curvature_check",
    "lifted_length",
    "write_polyline3d",
    "read_polyline3d",
]

ON_SURFACE_TOL = 1e-12


@dataclass(frozen=True)
class ChartMap:
    """A conformal chart paired with the metric it induces.

    ``residual`` maps 3-D points to their defect in the implicit surface
    equation (zero on the surface).
    """

    name: str
    phi: Callable[[np.ndarray], np.ndarray]
    metric: Metric
    residual: Callable[[np.ndarray], np.ndarray]

    def __call__(self, z) -> np.ndarray:
        return self.phi(np.asarray(z, dtype=float))


def _stack(*cols) -> np.ndarray:
    return np.stack(np.broadcast_arrays(*cols), axis=-1)


def stereographic() -> ChartMap:
    """Inverse stereographic projection onto the unit sphere from the north pole."""

    def phi(z):
        x, y = z[..., 0], z[..., 1]
        q = x * x + y * y
        return _stack(2 * x, 2 * y, q - 1.0) / (1.0 + q)[..., None]

    return ChartMap("stereographic", phi, AlphaFamily(-1.0), _sphere_residual)


def mercator() -> ChartMap:
    """Mercator chart of the unit sphere without the poles."""

    def phi(z):
        x, y = z[..., 0], z[..., 1]
        return _stack(np.cos(y), np.sin(y), np.sinh(x)) / np.cosh(x)[..., None]

    return ChartMap("mercator", phi, Mercator(), _sphere_residual)


def catenoid() -> ChartMap:
    """Conformal parameterization of the catenoid."""

    def phi(z):
        x, y = z[..., 0], z[..., 1]
        return _stack(np.cosh(x) * np.cos(y), np.cosh(x) * np.sin(y), x)

    def residual(p):
        return np.hypot(p[..., 0], p[..., 1]) - np.cosh(p[..., 2])

    return ChartMap("catenoid", phi, Catenoid(), residual)


def torus(s: float = 1.0) -> ChartMap:
    """Conformal chart of the torus with tube radius 1 and centre radius ``sqrt(s^2 + 1)``."""
    m = Torus(s)
    c = m.c

    def phi(z):
        x, y = z[..., 0], z[..., 1]
        w = s / (c - np.cos(y))
        return _stack(s * np.cos(x / s), s * np.sin(x / s), np.sin(y)) * w[..., None]

    def residual(p):
        return (np.hypot(p[..., 0], p[..., 1]) - c) ** 2 + p[..., 2] ** 2 - 1.0

    return ChartMap(f"torus:{s!r}", phi, m, residual)


def _sphere_residual(p):
    return np.linalg.norm(p, axis=-1) - 1.0


def parse_chart(tag: str) -> ChartMap:
    """Chart from a tag: ``stereographic``, ``mercator``, ``catenoid`` or ``torus:<s>``."""
    name, _, arg = tag.strip().lower().partition(":")
    if name == "stereographic":
        return stereographic()
    if name == "mercator":
        return mercator()
    if name == "catenoid":
        return catenoid()
    if name == "torus":
        try:
            return torus(float(arg) if arg else 1.0)
        except ValueError as exc:
            raise ValueError(f"bad chart tag {tag!r}: {exc}") from None
    raise ValueError(f"unknown chart tag {tag!r}")


def jacobian(chart: ChartMap, z, step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian ``D Phi``, shape ``(..., 3, 2)``."""
    z = np.asarray(z, dtype=float)
    cols = []
    for k in range(2):
        e = np.zeros(2)
        e[k] = step
        cols.append((chart(z + e) - chart(z - e)) / (2 * step))
    return np.stack(cols, axis=-1)


def conformality_defect(chart: ChartMap, z) -> float:
    """Largest relative violation of ``D Phi^T D Phi = g I`` over the sample points."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    D = jacobian(chart, z)
    gram = np.einsum("...ki,...kj->...ij", D, D)
    g = chart.metric.g(z)
    dev = np.abs(gram - g[:, None, None] * np.eye(2))
    return float(np.max(dev / g[:, None, None]))


def surface_residual(chart: ChartMap, points) -> np.ndarray:
    return np.abs(chart.residual(np.asarray(points, dtype=float)))


def lift_curve(chart: ChartMap, c: Curve) -> np.ndarray:
    """Node-wise image ``Phi(X_j)``, shape ``(n, 3)``.

    Raises
    ------
    DomainError
        If a node lies outside the chart domain.
    """
    chart.metric.check(c.nodes)
    pts = chart(c.nodes)
    res = surface_residual(chart, pts)
    if np.any(res > ON_SURFACE_TOL):
        raise DomainError(f"lifted node off the surface by {res.max():.3e}")
    return pts


def lifted_length(chart: ChartMap, c: Curve) -> float:
    """Euclidean length of the lifted polygon in R^3."""
    p = lift_curve(chart, c)
    d = p[c.head] - p[c.tail]
    return float(np.sum(np.linalg.norm(d, axis=1)))


def gauss_curvature(chart: ChartMap, z, step: float = 1e-4) -> np.ndarray:
    """Gaussian curvature of the surface from finite-difference fundamental forms."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    e1, e2 = np.array([step, 0.0]), np.array([0.0, step])
    f0 = chart(z)
    fu = (chart(z + e1) - chart(z - e1)) / (2 * step)
    fv = (chart(z + e2) - chart(z - e2)) / (2 * step)
    fuu = (chart(z + e1) - 2 * f0 + chart(z - e1)) / step**2
    fvv = (chart(z + e2) - 2 * f0 + chart(z - e2)) / step**2
    fuv = (chart(z + e1 + e2) - chart(z + e1 - e2) - chart(z - e1 + e2) + chart(z - e1 - e2)) / (4 * step**2)
    n = np.cross(fu, fv)
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    E, F, G = (np.sum(a * b, axis=-1) for a, b in ((fu, fu), (fu, fv), (fv, fv)))
    L, M, N = (np.sum(a * n, axis=-1) for a in (fuu, fuv, fvv))
    return (L * N - M * M) / (E * G - F * F)


def gauss_curvature_check(chart: ChartMap, z, step: float = 1e-4) -> float:
    """Max ``|S0 - K|`` between the metric's sectional curvature and the surface's Gaussian curvature."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    return float(np.max(np.abs(chart.metric.sectional_curvature(z) - gauss_curvature(chart, z, step))))


def write_polyline3d(path: str | os.PathLike, points) -> None:
    """Write ``x y z`` per line with 17 significant digits."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected shape (n, 3), got {pts.shape}")
    write_polyline(path, pts)


def read_polyline3d(path: str | os.PathLike) -> np.ndarray:
    pts = np.loadtxt(path, ndmin=2)
    if pts.shape[1] != 3:
        raise ValueError(f"{path}: expected three columns, got {pts.shape[1]}")
    return pts
