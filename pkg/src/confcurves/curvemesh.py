"""Polygonal curves and their discrete geometry.

Nodes are stored as an ``(n, 2)`` array.  A closed curve with ``J`` elements
has ``n = J`` nodes and element ``j`` runs from node ``j`` to node
``(j + 1) % J``.  An open curve with ``J`` elements has ``n = J + 1`` nodes
and fixed endpoints.

The element normal is ``nu = -tau^perp`` with ``v^perp = (v2, -v1)``, so an
anticlockwise circle is assigned its inner normal and positive curvature.
All element integrals use the mass-lumped (trapezoidal) rule, so every
quantity depends only on the physical edge lengths.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .metric import Metric

__all__ = [
    "TopologyError",
    "DegenerateCurve",
    "Curve",
    "ElementFrame",
    "Diagnostics",
    "element_frame",
    "vertex_mass",
    "weighted_normals",
    "vertex_normals",
    "lumped_product",
    "discrete_length",
    "discrete_area",
    "mesh_ratio",
    "initial_circle",
    "regular_polygon",
    "segment",
    "polyline",
    "stadium",
    "curvature_vector",
    "initial_curvature",
    "rank_condition",
    "elastic_energy",
    "elastic_energy_g",
    "diagnostics",
    "bounding_box",
    "write_polyline",
    "read_polyline",
    "snapshot_name",
]

DEGENERATE_EDGE = 1e-14
OMEGA_FLOOR = 1e-12


class TopologyError(ValueError):
    """Operation is undefined for the curve's topology."""


class DegenerateCurve(ValueError):
    """An edge has (numerically) zero length or a vertex normal vanishes."""


@dataclass(frozen=True, eq=False)
class Curve:
    """Immutable polygonal curve.

    Parameters
    ----------
    nodes : array_like, shape (n, 2)
        Node positions in order.  For closed curves the first node is not
        repeated.
    closed : bool
        ``True`` for a closed curve, ``False`` for an open curve with fixed
        endpoints.
    """

    nodes: np.ndarray
    closed: bool = True

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise ValueError(f"nodes must have shape (n, 2), got {nodes.shape}")
        if self.closed and len(nodes) < 3:
            raise ValueError("closed curves need at least 3 nodes")
        if not self.closed and len(nodes) < 2:
            raise ValueError("open curves need at least 2 nodes")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return self.n_nodes if self.closed else self.n_nodes - 1

    @cached_property
    def tail(self) -> np.ndarray:
        return np.arange(self.n_elements)

    @cached_property
    def head(self) -> np.ndarray:
        return (self.tail + 1) % self.n_nodes

    @cached_property
    def edges(self) -> np.ndarray:
        return self.nodes[self.head] - self.nodes[self.tail]

    @cached_property
    def lengths(self) -> np.ndarray:
        return np.hypot(self.edges[:, 0], self.edges[:, 1])

    def diameter(self) -> float:
        extent = self.nodes.max(axis=0) - self.nodes.min(axis=0)
        return float(np.hypot(*extent))

    def check(self, metric: Metric | None = None) -> "Curve":
        """Raise if an edge is degenerate or a node lies outside the metric domain."""
        if not np.all(np.isfinite(self.nodes)):
            raise DegenerateCurve("non-finite node coordinates")
        tol = DEGENERATE_EDGE * max(self.diameter(), np.finfo(float).tiny)
        short = np.flatnonzero(self.lengths <= tol)
        if short.size:
            raise DegenerateCurve(f"degenerate edge at element {short[0]}")
        if metric is not None:
            metric.check(self.nodes)
        return self

    def with_nodes(self, nodes) -> "Curve":
        return Curve(nodes, self.closed)

    def reversed(self) -> "Curve":
        return Curve(self.nodes[::-1], self.closed)

    def rolled(self, shift: int) -> "Curve":
        if not self.closed:
            raise TopologyError("only closed curves can be re-indexed cyclically")
        return Curve(np.roll(self.nodes, shift, axis=0), True)


@dataclass(frozen=True)
class ElementFrame:
    """Per-element unit tangent, unit normal and Euclidean length."""

    tangent: np.ndarray
    normal: np.ndarray
    length: np.ndarray


@dataclass(frozen=True)
class Diagnostics:
    length: float
    area: float | None
    elastic_energy: float | None
    ratio: float
    min_edge: float
    max_edge: float


def element_frame(c: Curve) -> ElementFrame:
    length = c.lengths
    if np.any(length <= 0):
        raise DegenerateCurve("zero-length edge")
    tau = c.edges / length[:, None]
    nu = np.column_stack([-tau[:, 1], tau[:, 0]])
    return ElementFrame(tau, nu, length)


def _scatter(c: Curve, tail_vals, head_vals) -> np.ndarray:
    """Sum per-element contributions onto nodes (index order, deterministic)."""
    tail_vals = np.asarray(tail_vals, dtype=float)
    head_vals = np.asarray(head_vals, dtype=float)
    n = c.n_nodes
    if tail_vals.ndim == 1:
        return np.bincount(c.tail, tail_vals, n) + np.bincount(c.head, head_vals, n)
    out = np.empty((n,) + tail_vals.shape[1:])
    for k in range(tail_vals.shape[1]):
        out[:, k] = np.bincount(c.tail, tail_vals[:, k], n) + np.bincount(c.head, head_vals[:, k], n)
    return out


def vertex_mass(c: Curve) -> np.ndarray:
    """Lumped vertex masses ``(chi_j, |X_rho|)^h``."""
    half = 0.5 * c.lengths
    return _scatter(c, half, half)


def weighted_normals(c: Curve) -> np.ndarray:
    """Unnormalised vertex normals ``(nu, chi_j |X_rho|)^h``."""
    fr = element_frame(c)
    half = 0.5 * fr.length[:, None] * fr.normal
    return _scatter(c, half, half)


def vertex_normals(c: Curve) -> np.ndarray:
    """Mass-lumped L2 projection ``omega`` of the element normals onto nodes."""
    return weighted_normals(c) / vertex_mass(c)[:, None]


def lumped_product(a, b, weights) -> float:
    """Mass-lumped product of data given at both ends of each element.

    Parameters
    ----------
    a, b : array_like, shape (E, 2) or (E, 2, k)
        Values at the tail (index 0) and head (index 1) of every element;
        jumps across nodes are allowed.  Trailing axes are contracted.
    weights : array_like, shape (E,)
        Element weights, usually the edge lengths.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    w = np.asarray(weights, dtype=float)
    if a.shape != b.shape or a.shape[:2] != (len(w), 2):
        raise ValueError(f"shape mismatch: a {a.shape}, b {b.shape}, weights {w.shape}")
    prod = (a * b).reshape(len(w), 2, -1).sum(axis=2)
    return float(0.5 * np.sum(w * (prod[:, 0] + prod[:, 1])))


def discrete_length(m: Metric, c: Curve) -> float:
    sg = m.sqrt_g(c.nodes)
    return float(np.sum(c.lengths * 0.5 * (sg[c.tail] + sg[c.head])))


def discrete_area(m: Metric, c: Curve) -> float:
    """Lumped approximation of the enclosed g-area.

    Positive for clockwise curves (where ``nu`` is the outer normal) and
    negative for anticlockwise ones.
    """
    if not c.closed:
        raise TopologyError("area is only defined for closed curves")
    fr = element_frame(c)
    phi = m.area_potential(c.nodes)
    flux = np.sum(phi[c.tail] * fr.normal, axis=1) + np.sum(phi[c.head] * fr.normal, axis=1)
    return float(0.5 * np.sum(fr.length * flux))


def mesh_ratio(c: Curve) -> float:
    length = c.lengths
    if length.min() <= 0:
        raise DegenerateCurve("zero-length edge")
    return float(length.max() / length.min())


# constructors ---------------------------------------------------------------

def initial_circle(a0: float, r0: float, J: int) -> Curve:
    """Nonuniformly sampled anticlockwise circle of radius ``r0`` about ``a0 e2``."""
    if J < 3:
        raise ValueError("J must be at least 3")
    q = np.arange(J) / J
    theta = 2.0 * np.pi * q + 0.1 * np.sin(2.0 * np.pi * q)
    nodes = np.column_stack([r0 * np.cos(theta), a0 + r0 * np.sin(theta)])
    return Curve(nodes, True)


def regular_polygon(J: int, radius: float = 1.0, center=(0.0, 0.0)) -> Curve:
    theta = 2.0 * np.pi * np.arange(J) / J
    cx, cy = center
    return Curve(np.column_stack([cx + radius * np.cos(theta), cy + radius * np.sin(theta)]), True)


def segment(p, q, J: int) -> Curve:
    """Open straight segment from ``p`` to ``q`` with ``J`` equal elements."""
    s = np.linspace(0.0, 1.0, J + 1)[:, None]
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return Curve((1.0 - s) * p + s * q, False)


def polyline(points, J: int, closed: bool = False) -> Curve:
    """Resample a polygon through ``points`` with ``J`` elements, uniform in arc length."""
    pts = np.asarray(points, dtype=float)
    if closed:
        pts = np.vstack([pts, pts[:1]])
    seg = np.hypot(*np.diff(pts, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    n = J if closed else J + 1
    t = np.linspace(0.0, s[-1], J + 1)[:n]
    nodes = np.column_stack([np.interp(t, s, pts[:, 0]), np.interp(t, s, pts[:, 1])])
    return Curve(nodes, closed)


def stadium(width: float, height: float, J: int, center=(0.0, 0.0), vertical: bool = False) -> Curve:
    """Anticlockwise stadium ("cigar"), uniformly sampled in arc length.

    ``width`` is the total extent along the long axis and ``height`` the
    diameter of the two end caps.  ``vertical`` swaps the axes.
    """
    if not width >= height > 0:
        raise ValueError("stadium needs width >= height > 0")
    r = 0.5 * height
    flat = width - height
    total = 2.0 * flat + 2.0 * np.pi * r
    s = np.arange(J) * total / J
    pts = np.empty((J, 2))
    for k, sk in enumerate(s):
        if sk < flat:  # bottom edge, left to right
            pts[k] = (-0.5 * flat + sk, -r)
        elif sk < flat + np.pi * r:  # right cap
            ang = -0.5 * np.pi + (sk - flat) / r
            pts[k] = (0.5 * flat + r * np.cos(ang), r * np.sin(ang))
        elif sk < 2.0 * flat + np.pi * r:  # top edge, right to left
            pts[k] = (0.5 * flat - (sk - flat - np.pi * r), r)
        else:  # left cap
            ang = 0.5 * np.pi + (sk - 2.0 * flat - np.pi * r) / r
            pts[k] = (-0.5 * flat + r * np.cos(ang), r * np.sin(ang))
    if vertical:
        pts = np.column_stack([-pts[:, 1], pts[:, 0]])
    return Curve(pts + np.asarray(center, dtype=float), True)


# curvature and initial data ---------------------------------------------------

def curvature_vector(c: Curve) -> np.ndarray:
    """Lumped discrete curvature vector ``kappa_vec = -(A X) / m``.

    For open curves the endpoint values are set to zero.
    """
    fr = element_frame(c)
    # (X_rho, eta_rho |X_rho|^-1) contributes (X_i - X_k)/|e| at node i
    flux = c.edges / fr.length[:, None]
    ax = _scatter(c, -flux, flux)
    mass = vertex_mass(c)
    kv = -ax / mass[:, None]
    if not c.closed:
        kv[[0, -1]] = 0.0
    return kv


def initial_curvature(m: Metric, c: Curve) -> tuple[np.ndarray, np.ndarray]:
    """Initial nodal curvature ``kappa`` and geodesic curvature ``kappa_g``.

    Returns
    -------
    kappa : ndarray, shape (n,)
        Projection of the discrete curvature vector onto the unit vertex normal.
    kappa_g : ndarray, shape (n,)
        ``g^(-1/2) (kappa - omega . grad(ln g)/2)`` at the nodes.
    """
    c.check(m)
    kv = curvature_vector(c)
    omega = vertex_normals(c)
    norm = np.hypot(omega[:, 0], omega[:, 1])
    if np.any(norm < OMEGA_FLOOR):
        raise DegenerateCurve(f"vertex normal vanishes at node {int(np.argmin(norm))}")
    kappa = np.sum(kv * omega, axis=1) / norm
    b = m.half_grad_ln_g(c.nodes)
    kappa_g = (kappa - np.sum(omega * b, axis=1)) / m.sqrt_g(c.nodes)
    return kappa, kappa_g


def rank_condition(m: Metric, c: Curve, rel_tol: float = 1e-12) -> bool:
    """Whether the vectors ``(g nu, chi_j |X_rho|)^h`` span the plane."""
    z = m.g(c.nodes)[:, None] * weighted_normals(c)
    sv = np.linalg.svd(z, compute_uv=False)
    if sv[0] == 0.0:
        return False
    return bool(sv[1] > rel_tol * sv[0])


def elastic_energy(m: Metric, c: Curve, kappa) -> float:
    """Lumped elastic energy built from the Euclidean-type curvature ``kappa``."""
    fr = element_frame(c)
    kappa = np.asarray(kappa, dtype=float)
    b = m.half_grad_ln_g(c.nodes)
    isg = 1.0 / m.sqrt_g(c.nodes)
    t, h = c.tail, c.head
    at_t = isg[t] * (kappa[t] - np.sum(fr.normal * b[t], axis=1)) ** 2
    at_h = isg[h] * (kappa[h] - np.sum(fr.normal * b[h], axis=1)) ** 2
    return float(0.25 * np.sum(fr.length * (at_t + at_h)))


def elastic_energy_g(m: Metric, c: Curve, kappa_g) -> float:
    """Lumped elastic energy ``1/2 (g^(1/2) kappa_g^2, |X_rho|)^h``."""
    kappa_g = np.asarray(kappa_g, dtype=float)
    return float(0.5 * np.sum(vertex_mass(c) * m.sqrt_g(c.nodes) * kappa_g**2))


def diagnostics(m: Metric, c: Curve, kappa=None, kappa_g=None) -> Diagnostics:
    """Length, area, elastic energy (if a curvature is supplied) and mesh ratio."""
    energy = None
    if kappa is not None:
        energy = elastic_energy(m, c, kappa)
    elif kappa_g is not None:
        energy = elastic_energy_g(m, c, kappa_g)
    length = c.lengths
    return Diagnostics(
        length=discrete_length(m, c),
        area=discrete_area(m, c) if c.closed else None,
        elastic_energy=energy,
        ratio=mesh_ratio(c),
        min_edge=float(length.min()),
        max_edge=float(length.max()),
    )


def bounding_box(c: Curve) -> tuple[float, float]:
    """Width (x extent) and height (y extent) of the node set."""
    ext = c.nodes.max(axis=0) - c.nodes.min(axis=0)
    return float(ext[0]), float(ext[1])


# polyline files ---------------------------------------------------------------

def snapshot_name(step: int) -> str:
    return f"curve_{step}.txt"


def write_polyline(path: str | os.PathLike, points: np.ndarray | Curve) -> None:
    """Write one point per line with 17 significant digits.

    Closed curves repeat their first node at the end.
    """
    if isinstance(points, Curve):
        pts = points.nodes
        if points.closed:
            pts = np.vstack([pts, pts[:1]])
    else:
        pts = np.asarray(points, dtype=float)
    with open(path, "w") as fh:
        for row in pts:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def read_polyline(path: str | os.PathLike, closed: bool | None = None) -> Curve:
    """Read a 2-D polyline; a repeated first node marks a closed curve."""
    pts = np.loadtxt(path, ndmin=2)
    if pts.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns, got {pts.shape[1]}")
    repeated = len(pts) > 1 and np.array_equal(pts[0], pts[-1])
    if closed is None:
        closed = repeated
    if closed and repeated:
        pts = pts[:-1]
    return Curve(pts, closed)

