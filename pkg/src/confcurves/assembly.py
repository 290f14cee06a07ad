"""Sparse assembly of the lumped weak forms and the direct solver.

Unknown vectors are laid out component-major: ``[x_0..x_{n-1}, y_0..y_{n-1}]``
for positions, followed by any scalar or vector curvature unknowns.  Every
lumped product reduces to per-node or per-element data, collected once per
time step in :class:`WeakBlocks`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .curvemesh import Curve, element_frame, vertex_mass, weighted_normals, _scatter
from .metric import Metric

__all__ = [
    "SingularSystem",
    "SideMode",
    "WeakBlocks",
    "SideConstraint",
    "SparseSystem",
    "CooBuilder",
    "build_blocks",
    "stiffness_weights",
    "assemble_side_constraint_euclid",
    "assemble_side_constraint_metric",
    "nonlinear_gradient_source",
    "Factorization",
    "factorize",
    "solve",
]


class SingularSystem(RuntimeError):
    """The linear system could not be solved to the required residual."""

    def __init__(self, message: str, step: int | None = None):
        self.step = step
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)


class SideMode(enum.Enum):
    LINEAR = "linear"
    SPLIT_NONLINEAR = "split_nonlinear"


@dataclass(frozen=True)
class WeakBlocks:
    """Element and node data of one curve snapshot.

    ``nub_tail[e]`` and ``nub_head[e]`` hold ``nu_e . grad(ln g)/2`` at the
    two ends of element ``e``, the two one-sided values a node sees.
    """

    curve: Curve
    metric: Metric
    tail: np.ndarray
    head: np.ndarray
    length: np.ndarray
    normal: np.ndarray
    mass: np.ndarray
    wnormal: np.ndarray
    g: np.ndarray
    sqrt_g: np.ndarray
    grad_sqrt_g: np.ndarray
    half_grad_ln_g: np.ndarray
    s0: np.ndarray
    nub_tail: np.ndarray
    nub_head: np.ndarray

    @property
    def n(self) -> int:
        return self.curve.n_nodes

    def scatter(self, tail_vals, head_vals) -> np.ndarray:
        return _scatter(self.curve, tail_vals, head_vals)


def build_blocks(metric: Metric, curve: Curve) -> WeakBlocks:
    curve.check(metric)
    fr = element_frame(curve)
    z = curve.nodes
    b = metric.half_grad_ln_g(z)
    t, h = curve.tail, curve.head
    return WeakBlocks(
        curve=curve,
        metric=metric,
        tail=t,
        head=h,
        length=fr.length,
        normal=fr.normal,
        mass=vertex_mass(curve),
        wnormal=weighted_normals(curve),
        g=metric.g(z),
        sqrt_g=metric.sqrt_g(z),
        grad_sqrt_g=metric.grad_sqrt_g(z),
        half_grad_ln_g=b,
        s0=metric.sectional_curvature(z),
        nub_tail=np.sum(fr.normal * b[t], axis=1),
        nub_head=np.sum(fr.normal * b[h], axis=1),
    )


def stiffness_weights(blocks: WeakBlocks, coeff: str | None = None) -> np.ndarray:
    """Element weights ``c_e / |e|`` of a lumped stiffness form.

    ``coeff`` selects the nodal factor averaged over each element: ``None``
    (unit), ``"sqrt_g"`` or ``"inv_sqrt_g"``.
    """
    t, h = blocks.tail, blocks.head
    if coeff is None:
        c = 1.0
    elif coeff == "sqrt_g":
        c = 0.5 * (blocks.sqrt_g[t] + blocks.sqrt_g[h])
    elif coeff == "inv_sqrt_g":
        c = 0.5 * (1.0 / blocks.sqrt_g[t] + 1.0 / blocks.sqrt_g[h])
    else:
        raise ValueError(f"unknown stiffness coefficient {coeff!r}")
    return c / blocks.length


class CooBuilder:
    """Triplet accumulator for a square sparse matrix."""

    def __init__(self, size: int):
        self.size = size
        self._r: list[np.ndarray] = []
        self._c: list[np.ndarray] = []
        self._v: list[np.ndarray] = []

    def add(self, rows, cols, vals) -> None:
        rows, cols, vals = np.broadcast_arrays(rows, cols, vals)
        self._r.append(rows.ravel())
        self._c.append(cols.ravel())
        self._v.append(np.asarray(vals, dtype=float).ravel())

    def add_diag(self, row0: int, col0: int, vals) -> None:
        idx = np.arange(len(vals))
        self.add(idx + row0, idx + col0, vals)

    def add_stiffness(self, blocks: WeakBlocks, row0: int, col0: int, weights, scale: float = 1.0) -> None:
        t, h = blocks.tail, blocks.head
        w = scale * np.asarray(weights)
        self.add(t + row0, t + col0, w)
        self.add(h + row0, h + col0, w)
        self.add(t + row0, h + col0, -w)
        self.add(h + row0, t + col0, -w)

    def tocsc(self, dirichlet_rows=None) -> sp.csc_matrix:
        rows = np.concatenate(self._r)
        cols = np.concatenate(self._c)
        vals = np.concatenate(self._v)
        if dirichlet_rows is not None and len(dirichlet_rows):
            dr = np.asarray(dirichlet_rows)
            keep = ~np.isin(rows, dr)
            rows = np.concatenate([rows[keep], dr])
            cols = np.concatenate([cols[keep], dr])
            vals = np.concatenate([vals[keep], np.ones(len(dr))])
        return sp.csc_matrix((vals, (rows, cols)), shape=(self.size, self.size))


@dataclass(frozen=True)
class SideConstraint:
    """Blocks of a curvature side constraint in the position test space.

    The constraint reads ``stiffness @ X + curvature @ k = rhs`` with ``X``
    of length ``2n`` and ``k`` the nodal scalar curvature.
    """

    stiffness: sp.csr_matrix
    curvature: sp.csr_matrix
    rhs: np.ndarray


@dataclass
class SparseSystem:
    matrix: sp.spmatrix
    rhs: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def _side(blocks: WeakBlocks, weights, curv_cols: np.ndarray, rhs: np.ndarray) -> SideConstraint:
    n = blocks.n
    kb = CooBuilder(2 * n)
    kb.add_stiffness(blocks, 0, 0, weights)
    kb.add_stiffness(blocks, n, n, weights)
    idx = np.arange(n)
    curv = sp.csr_matrix(
        (np.concatenate([curv_cols[:, 0], curv_cols[:, 1]]), (np.concatenate([idx, idx + n]), np.concatenate([idx, idx]))),
        shape=(2 * n, n),
    )
    return SideConstraint(kb.tocsc().tocsr(), curv, rhs)


def assemble_side_constraint_euclid(blocks: WeakBlocks) -> SideConstraint:
    """``(k nu, eta |X_rho|)^h + (X_rho, eta_rho |X_rho|^-1) = 0``."""
    return _side(blocks, stiffness_weights(blocks), blocks.wnormal, np.zeros(2 * blocks.n))


def nonlinear_gradient_source(blocks: WeakBlocks, mode: SideMode, iterate: np.ndarray | None = None) -> np.ndarray:
    """Nodal gradient source ``(grad g^(1/2)(...), eta |X_rho|)^h`` as a ``(n, 2)`` array.

    In split mode the convex part and the length weight are evaluated at
    ``iterate`` and the concave part at the old nodes.
    """
    if mode is SideMode.LINEAR:
        return blocks.mass[:, None] * blocks.grad_sqrt_g
    if iterate is None:
        raise ValueError("split nonlinear mode needs the current iterate")
    metric = blocks.metric
    iterate = np.asarray(iterate, dtype=float)
    it_curve = blocks.curve.with_nodes(iterate)
    it_mass = vertex_mass(it_curve)
    grad = metric.grad_sqrt_g_plus(iterate) + metric.grad_sqrt_g_minus(blocks.curve.nodes)
    return it_mass[:, None] * grad


def assemble_side_constraint_metric(
    blocks: WeakBlocks, mode: SideMode = SideMode.LINEAR, iterate: np.ndarray | None = None
) -> SideConstraint:
    """``(g k nu, eta |X_rho|)^h + (grad g^(1/2), eta |X_rho|)^h + (g^(1/2) X_rho, eta_rho |X_rho|^-1)^h = 0``.

    The gradient term is moved to the right-hand side.
    """
    if mode is SideMode.SPLIT_NONLINEAR:
        blocks.metric.split_gradients()  # raises UnsupportedSplit early
    src = nonlinear_gradient_source(blocks, mode, iterate)
    rhs = -np.concatenate([src[:, 0], src[:, 1]])
    return _side(blocks, stiffness_weights(blocks, "sqrt_g"), blocks.g[:, None] * blocks.wnormal, rhs)


# solver -----------------------------------------------------------------------

RESIDUAL_TOL = 1e-10


class Factorization:
    """Sparse LU factorization with a residual-checked solve."""

    def __init__(self, matrix: sp.spmatrix, step: int | None = None):
        self.matrix = sp.csc_matrix(matrix)
        self.step = step
        if self.matrix.shape[0] != self.matrix.shape[1] or self.matrix.shape[0] < 1:
            raise ValueError(f"expected a nonempty square matrix, got {self.matrix.shape}")
        try:
            self._lu = splu(self.matrix, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SingularSystem(str(exc), step) from None
        self._norm = float(abs(self.matrix).sum(axis=1).max())

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        x = self._lu.solve(rhs)
        if not np.all(np.isfinite(x)):
            raise SingularSystem("non-finite solution", self.step)
        res = float(np.max(np.abs(self.matrix @ x - rhs)))
        bound = RESIDUAL_TOL * (self._norm * float(np.max(np.abs(x))) + float(np.max(np.abs(rhs))))
        if res > bound:
            raise SingularSystem(f"residual {res:.3e} exceeds {bound:.3e}", self.step)
        return x


def factorize(matrix: sp.spmatrix, step: int | None = None) -> Factorization:
    return Factorization(matrix, step)


def solve(system: SparseSystem | sp.spmatrix, rhs: np.ndarray | None = None, step: int | None = None) -> np.ndarray:
    """Direct sparse solve with residual check.

    Accepts either a :class:`SparseSystem` or a matrix and right-hand side.
    """
    if isinstance(system, SparseSystem):
        matrix, rhs = system.matrix, system.rhs
    else:
        matrix = system
    if rhs is None:
        raise ValueError("missing right-hand side")
    return Factorization(matrix, step).solve(rhs)
