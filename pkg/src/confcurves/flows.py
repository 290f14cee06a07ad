"""Fully discrete parametric schemes for curvature flow, curve diffusion and elastic flow.

Each step assembles one sparse linear system from the snapshot ``X^m`` and
solves for ``X^{m+1}`` together with the scheme's curvature unknowns.  The
motion equations are multiplied through by ``dt`` before assembly.  The
starred schemes and the reduced normal-velocity scheme contain a nonlinear
gradient term, which is resolved by a lagged (Picard) iteration; their
system matrix does not depend on the iterate, so it is factored once per
step.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import NoConvergence, newton_krylov

from .assembly import (
    CooBuilder,
    Factorization,
    SideMode,
    SingularSystem,
    WeakBlocks,
    build_blocks,
    nonlinear_gradient_source,
    stiffness_weights,
)
from .curvemesh import (
    Curve,
    Diagnostics,
    DegenerateCurve,
    diagnostics,
    discrete_length,
    initial_curvature,
)
from .metric import DomainError, Metric

__all__ = [
    "SchemeKind",
    "StepParams",
    "CurvatureField",
    "StepReport",
    "PicardDivergence",
    "DomainExit",
    "EvolutionFailure",
    "EvolutionResult",
    "step",
    "step_curvature_flow",
    "step_curve_diffusion",
    "step_elastic",
    "initial_field",
    "run_evolution",
    "n_steps",
    "SingularSystem",
]


class SchemeKind(enum.Enum):
    CF_A = "A"
    CF_B = "B"
    CF_C = "C"
    CF_D = "D"
    CF_Cstar = "Cstar"
    CF_Dstar = "Dstar"
    CF_ReducedNu = "ReducedNu"
    CD_E = "E"
    CD_F = "F"
    CD_Fstar = "Fstar"
    EL_U = "U"
    EL_W = "W"
    EL_Wlambda = "Wlambda"
    CF_A_open = "A_open"

    @classmethod
    def parse(cls, tag: str) -> "SchemeKind":
        key = tag.strip().lower().replace("*", "star").replace("-", "_")
        for kind in cls:
            if key in (kind.value.lower(), kind.name.lower()):
                return kind
        raise ValueError(f"unknown scheme {tag!r}")

    @property
    def family(self) -> str:
        if self in _CURVATURE_FLOW:
            return "curvature"
        if self in _DIFFUSION:
            return "diffusion"
        return "elastic"

    @property
    def nonlinear(self) -> bool:
        return self in (SchemeKind.CF_Cstar, SchemeKind.CF_Dstar, SchemeKind.CD_Fstar, SchemeKind.CF_ReducedNu)


_CURVATURE_FLOW = {
    SchemeKind.CF_A,
    SchemeKind.CF_B,
    SchemeKind.CF_C,
    SchemeKind.CF_D,
    SchemeKind.CF_Cstar,
    SchemeKind.CF_Dstar,
    SchemeKind.CF_ReducedNu,
    SchemeKind.CF_A_open,
}
_DIFFUSION = {SchemeKind.CD_E, SchemeKind.CD_F, SchemeKind.CD_Fstar}
_ELASTIC = {SchemeKind.EL_U, SchemeKind.EL_W, SchemeKind.EL_Wlambda}


class PicardDivergence(RuntimeError):
    """The lagged iteration did not converge within ``picard_max`` solves."""


class DomainExit(RuntimeError):
    """A node of the new curve left the metric domain."""


@dataclass(frozen=True)
class StepParams:
    """Time step and nonlinear solver controls.

    Parameters
    ----------
    dt : float
        Time step size.
    picard_tol : float
        Convergence threshold on the maximal node update, relative to the
        curve diameter.
    picard_max : int
        Maximal number of linear solves per step for nonlinear schemes.
    lam : float
        Length penalisation weight, only used by ``EL_Wlambda``.
    """

    dt: float
    picard_tol: float = 1e-10
    picard_max: int = 200
    lam: float = 0.0

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if not self.picard_tol > 0:
            raise ValueError("picard_tol must be positive")
        if self.picard_max < 1:
            raise ValueError("picard_max must be at least 1")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")


@dataclass(frozen=True)
class CurvatureField:
    """Curvature unknowns attached to a curve.

    ``kind`` is one of ``"kappa"``, ``"kappa_g"`` (nodal scalars, shape
    ``(n,)``), ``"kappa_vec"``, ``"kappa_g_vec"`` (nodal vectors, shape
    ``(n, 2)``).  ``aux`` holds the auxiliary variable of the diffusion and
    elastic schemes built on the Euclidean-type side constraint.
    """

    kind: str
    values: np.ndarray
    aux: np.ndarray | None = None


@dataclass
class StepReport:
    curve: Curve
    curvature: CurvatureField
    before: Diagnostics
    after: Diagnostics
    picard_iterations: int = 1
    stability_ok: bool | None = None
    stability_slack: float | None = None
    dissipation: float | None = None
    area_drift: float | None = None
    residual: float = 0.0


# ----------------------------------------------------------------------------
# helpers


def _dot_nodes(vec2: np.ndarray, x: np.ndarray, n: int) -> np.ndarray:
    """Nodewise ``vec2_i . X_i`` for component-major ``x``."""
    return vec2[:, 0] * x[:n] + vec2[:, 1] * x[n : 2 * n]


def _stack(x: np.ndarray) -> np.ndarray:
    return np.concatenate([x[:, 0], x[:, 1]])


def _unstack(v: np.ndarray, n: int) -> np.ndarray:
    return np.column_stack([v[:n], v[n : 2 * n]])


def _add_side(builder: CooBuilder, blk: WeakBlocks, weights, curv: np.ndarray, col: int) -> None:
    """Rows ``0..2n``: stiffness on both components, scalar curvature column block at ``col``."""
    n = blk.n
    idx = np.arange(n)
    builder.add_stiffness(blk, 0, 0, weights)
    builder.add_stiffness(blk, n, n, weights)
    builder.add(idx, col + idx, curv[:, 0])
    builder.add(n + idx, col + idx, curv[:, 1])


def _add_normal_motion(builder: CooBuilder, blk: WeakBlocks, row: int) -> None:
    """Rows ``row..row+n``: ``g omega_tilde . X``."""
    n = blk.n
    idx = np.arange(n)
    gw = blk.g[:, None] * blk.wnormal
    builder.add(row + idx, idx, gw[:, 0])
    builder.add(row + idx, n + idx, gw[:, 1])


def _dirichlet_rows(curve: Curve) -> np.ndarray | None:
    if curve.closed:
        return None
    n = curve.n_nodes
    return np.array([0, n - 1, n, 2 * n - 1])


class _Picard:
    """Lagged iteration on the gradient source with a fixed matrix.

    Plain fixed-point sweeps run first.  When they contract too slowly the
    same fixed point is found by a Newton-Krylov solve of ``G(x) - x = 0``,
    where ``G`` is one lagged solve, and confirmed by a final plain sweep.
    """

    PLAIN_SWEEPS = 30

    def __init__(self, blk: WeakBlocks, params: StepParams, factor: Factorization, rhs_of: Callable[[np.ndarray], np.ndarray]):
        self.blk = blk
        self.params = params
        self.factor = factor
        self.rhs_of = rhs_of
        self.evaluations = 0

    def _sweep(self, it: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        self.evaluations += 1
        sol = self.factor.solve(self.rhs_of(it))
        new = _unstack(sol, self.blk.n)
        if not np.all(np.isfinite(new)):
            raise PicardDivergence("non-finite iterate")
        return sol, new

    def _check(self, new: np.ndarray) -> None:
        try:
            self.blk.metric.check(new)
        except DomainError as exc:
            raise PicardDivergence(f"iterate left the domain: {exc}") from None

    def run(self) -> tuple[np.ndarray, int]:
        n = self.blk.n
        scale = max(self.blk.curve.diameter(), np.finfo(float).tiny)
        tol = self.params.picard_tol * scale
        it = self.blk.curve.nodes
        delta = best = math.inf
        start = it
        for _ in range(min(self.PLAIN_SWEEPS, self.params.picard_max)):
            sol, new = self._sweep(it)
            delta = float(np.max(np.abs(new - it)))
            if delta <= tol:
                return sol, self.evaluations
            if delta < best:
                best, start = delta, new
            elif delta > 10 * best:
                break  # the lagged map is not contracting here
            it = new
            self._check(new)
        budget = self.params.picard_max - self.evaluations
        if budget <= 1:
            raise PicardDivergence(f"no convergence after {self.evaluations} iterations (last update {delta:.3e})")

        def residual(x):
            pts = _unstack(x, n)
            self._check(pts)
            return self._sweep(pts)[0][: 2 * n] - x

        try:
            x = newton_krylov(residual, _stack(start), f_tol=0.5 * tol, maxiter=budget - 1)
        except (NoConvergence, ValueError, PicardDivergence) as exc:
            raise PicardDivergence(
                f"no convergence after {self.evaluations} iterations (last update {delta:.3e}; {type(exc).__name__})"
            ) from None
        sol, new = self._sweep(_unstack(x, n))
        delta = float(np.max(np.abs(new - _unstack(x, n))))
        if delta > tol:
            raise PicardDivergence(f"no convergence after {self.evaluations} iterations (last update {delta:.3e})")
        return sol, self.evaluations


def _grad_source(blk: WeakBlocks, kind: SchemeKind, iterate: np.ndarray | None) -> np.ndarray:
    mode = SideMode.SPLIT_NONLINEAR if kind.nonlinear else SideMode.LINEAR
    return _stack(nonlinear_gradient_source(blk, mode, iterate))


# ----------------------------------------------------------------------------
# curvature flow


def _solve_cf(kind: SchemeKind, blk: WeakBlocks, p: StepParams, step_index: int | None):
    n = blk.n
    dt = p.dt
    x_old = _stack(blk.curve.nodes)
    idx = np.arange(n)
    iters = 1

    if kind in (SchemeKind.CF_A, SchemeKind.CF_A_open):
        B = CooBuilder(3 * n)
        _add_side(B, blk, stiffness_weights(blk), blk.wnormal, 2 * n)
        _add_normal_motion(B, blk, 2 * n)
        B.add_diag(2 * n, 2 * n, -dt * blk.mass)
        rhs = np.zeros(3 * n)
        rhs[2 * n :] = blk.g * _dot_nodes(blk.wnormal, x_old, n) - dt * np.sum(blk.wnormal * blk.half_grad_ln_g, axis=1)
        dr = _dirichlet_rows(blk.curve)
        if dr is not None:
            rhs[dr] = x_old[dr]
        A = B.tocsc(dr)
        sol = Factorization(A, step_index).solve(rhs)
        return A, rhs, sol, CurvatureField("kappa", sol[2 * n :]), iters

    if kind in (SchemeKind.CF_C, SchemeKind.CF_Cstar):
        B = CooBuilder(3 * n)
        _add_side(B, blk, stiffness_weights(blk, "sqrt_g"), blk.g[:, None] * blk.wnormal, 2 * n)
        _add_normal_motion(B, blk, 2 * n)
        B.add_diag(2 * n, 2 * n, -dt * blk.sqrt_g * blk.mass)
        A = B.tocsc()
        base = np.zeros(3 * n)
        base[2 * n :] = blk.g * _dot_nodes(blk.wnormal, x_old, n)
        fac = Factorization(A, step_index)

        def rhs_of(it):
            r = base.copy()
            r[: 2 * n] = -_grad_source(blk, kind, it)
            return r

        if kind is SchemeKind.CF_C:
            rhs = rhs_of(None)
            sol = fac.solve(rhs)
        else:
            sol, iters = _Picard(blk, p, fac, rhs_of).run()
            rhs = rhs_of(_unstack(sol, n))
        return A, rhs, sol, CurvatureField("kappa_g", sol[2 * n :]), iters

    if kind is SchemeKind.CF_B:
        B = CooBuilder(4 * n)
        gm = blk.g * blk.mass
        B.add_diag(0, 0, gm)
        B.add_diag(n, n, gm)
        B.add_diag(0, 2 * n, -dt * blk.mass)
        B.add_diag(n, 3 * n, -dt * blk.mass)
        w = stiffness_weights(blk)
        B.add_stiffness(blk, 2 * n, 0, w)
        B.add_stiffness(blk, 3 * n, n, w)
        B.add_diag(2 * n, 2 * n, blk.mass)
        B.add_diag(3 * n, 3 * n, blk.mass)
        # (nu . grad(ln g)/2) nu tested against vector hats, with one-sided normals
        half = 0.5 * blk.length
        src = blk.scatter((half * blk.nub_tail)[:, None] * blk.normal, (half * blk.nub_head)[:, None] * blk.normal)
        rhs = np.zeros(4 * n)
        rhs[: 2 * n] = np.concatenate([gm, gm]) * x_old - dt * _stack(src)
        A = B.tocsc()
        sol = Factorization(A, step_index).solve(rhs)
        return A, rhs, sol, CurvatureField("kappa_vec", _unstack(sol[2 * n :], n)), iters

    if kind in (SchemeKind.CF_D, SchemeKind.CF_Dstar):
        B = CooBuilder(4 * n)
        gm = blk.g * blk.mass
        B.add_diag(0, 0, gm)
        B.add_diag(n, n, gm)
        B.add_diag(0, 2 * n, -dt * gm)
        B.add_diag(n, 3 * n, -dt * gm)
        w = stiffness_weights(blk, "sqrt_g")
        B.add_stiffness(blk, 2 * n, 0, w)
        B.add_stiffness(blk, 3 * n, n, w)
        g32m = blk.g * blk.sqrt_g * blk.mass
        B.add_diag(2 * n, 2 * n, g32m)
        B.add_diag(3 * n, 3 * n, g32m)
        A = B.tocsc()
        base = np.zeros(4 * n)
        base[: 2 * n] = np.concatenate([gm, gm]) * x_old
        fac = Factorization(A, step_index)

        def rhs_of(it):
            r = base.copy()
            r[2 * n :] = -_grad_source(blk, kind, it)
            return r

        if kind is SchemeKind.CF_D:
            rhs = rhs_of(None)
            sol = fac.solve(rhs)
        else:
            sol, iters = _Picard(blk, p, fac, rhs_of).run()
            rhs = rhs_of(_unstack(sol, n))
        return A, rhs, sol, CurvatureField("kappa_g_vec", _unstack(sol[2 * n :], n)), iters

    if kind is SchemeKind.CF_ReducedNu:
        N = _normal_block(blk)
        B = CooBuilder(2 * n)
        for r, c, v in N:
            B.add(r, c, v)
        w = stiffness_weights(blk, "sqrt_g")
        B.add_stiffness(blk, 0, 0, w, scale=dt)
        B.add_stiffness(blk, n, n, w, scale=dt)
        A = B.tocsc()
        Nmat = sp.csr_matrix((np.concatenate([v for _, _, v in N]), (np.concatenate([r for r, _, _ in N]), np.concatenate([c for _, c, _ in N]))), shape=(2 * n, 2 * n))
        base = Nmat @ x_old
        fac = Factorization(A, step_index)

        def rhs_of(it):
            return base - dt * _grad_source(blk, kind, it)

        sol, iters = _Picard(blk, p, fac, rhs_of).run()
        rhs = rhs_of(_unstack(sol, n))
        velocity = (sol - x_old) / dt
        return A, rhs, sol, CurvatureField("velocity", _unstack(velocity, n)), iters

    raise ValueError(f"{kind} is not a curvature flow scheme")


def _normal_block(blk: WeakBlocks):
    """Per-node 2x2 blocks ``g^(3/2)_i sum_e |e|/2 nu_e nu_e^T`` as triplets."""
    n = blk.n
    half = 0.5 * blk.length
    nu = blk.normal
    g32 = blk.g * blk.sqrt_g
    out = []
    for a in range(2):
        for b in range(2):
            vals = blk.scatter(half * nu[:, a] * nu[:, b], half * nu[:, a] * nu[:, b]) * g32
            idx = np.arange(n)
            out.append((a * n + idx, b * n + idx, vals))
    return out


def _normal_dissipation(blk: WeakBlocks, velocity: np.ndarray) -> float:
    """``(g^(3/2) |V . nu|^2, |X_rho|)^h`` for nodal velocities ``(n, 2)``."""
    nu = blk.normal
    g32 = blk.g * blk.sqrt_g
    vt = np.sum(velocity[blk.tail] * nu, axis=1)
    vh = np.sum(velocity[blk.head] * nu, axis=1)
    return float(0.5 * np.sum(blk.length * (g32[blk.tail] * vt**2 + g32[blk.head] * vh**2)))


# ----------------------------------------------------------------------------
# curve diffusion and elastic flow


def _z_field(blk: WeakBlocks) -> np.ndarray:
    """Nodal ``Z`` with ``(g^(1/2) Z, xi |X_rho|)^h = (nu . grad(ln g)/2, xi |X_rho|)^h``."""
    return np.sum(blk.wnormal * blk.half_grad_ln_g, axis=1) / (blk.mass * blk.sqrt_g)


def _stiffness_matvec(blk: WeakBlocks, weights: np.ndarray, f: np.ndarray) -> np.ndarray:
    diff = weights * (f[blk.tail] - f[blk.head])
    return blk.scatter(diff, -diff)


def _elastic_source(kind: SchemeKind, blk: WeakBlocks, prev: np.ndarray) -> np.ndarray:
    """Explicit cubic and sectional-curvature terms of the elastic motion law."""
    if kind is SchemeKind.EL_U:
        half = 0.5 * blk.length
        t, h = blk.tail, blk.head
        ig = 1.0 / blk.g
        kt = prev[t] - blk.nub_tail
        kh = prev[h] - blk.nub_head
        cubic = blk.scatter(half * ig[t] * kt**3, half * ig[h] * kh**3)
        lin = blk.scatter(half * blk.s0[t] * kt, half * blk.s0[h] * kh)
        return 0.5 * cubic + lin
    return blk.mass * blk.sqrt_g * (0.5 * prev**3 + blk.s0 * prev)


def _solve_cd_el(kind: SchemeKind, blk: WeakBlocks, p: StepParams, prev: CurvatureField | None, step_index: int | None):
    n = blk.n
    dt = p.dt
    x_old = _stack(blk.curve.nodes)
    wprime = stiffness_weights(blk, "inv_sqrt_g")
    motion0 = blk.g * _dot_nodes(blk.wnormal, x_old, n)
    iters = 1

    if kind in (SchemeKind.CD_E, SchemeKind.EL_U):
        B = CooBuilder(4 * n)
        _add_side(B, blk, stiffness_weights(blk), blk.wnormal, 2 * n)
        _add_normal_motion(B, blk, 2 * n)
        B.add_stiffness(blk, 2 * n, 3 * n, wprime, scale=-dt)
        B.add_diag(3 * n, 3 * n, blk.sqrt_g * blk.mass)
        B.add_diag(3 * n, 2 * n, -blk.mass)
        rhs = np.zeros(4 * n)
        rhs[2 * n : 3 * n] = motion0 - dt * _stiffness_matvec(blk, wprime, _z_field(blk))
        if kind is SchemeKind.EL_U:
            rhs[2 * n : 3 * n] -= dt * _elastic_source(kind, blk, prev.values)
        A = B.tocsc()
        sol = Factorization(A, step_index).solve(rhs)
        return A, rhs, sol, CurvatureField("kappa", sol[2 * n : 3 * n], aux=sol[3 * n :]), iters

    B = CooBuilder(3 * n)
    _add_side(B, blk, stiffness_weights(blk, "sqrt_g"), blk.g[:, None] * blk.wnormal, 2 * n)
    _add_normal_motion(B, blk, 2 * n)
    B.add_stiffness(blk, 2 * n, 2 * n, wprime, scale=-dt)
    if kind is SchemeKind.EL_Wlambda and p.lam:
        B.add_diag(2 * n, 2 * n, -dt * p.lam * blk.sqrt_g * blk.mass)
    A = B.tocsc()
    base = np.zeros(3 * n)
    base[2 * n :] = motion0
    if kind in (SchemeKind.EL_W, SchemeKind.EL_Wlambda):
        base[2 * n :] -= dt * _elastic_source(kind, blk, prev.values)
    fac = Factorization(A, step_index)

    def rhs_of(it):
        r = base.copy()
        r[: 2 * n] = -_grad_source(blk, kind, it)
        return r

    if kind is SchemeKind.CD_Fstar:
        sol, iters = _Picard(blk, p, fac, rhs_of).run()
        rhs = rhs_of(_unstack(sol, n))
    else:
        rhs = rhs_of(None)
        sol = fac.solve(rhs)
    return A, rhs, sol, CurvatureField("kappa_g", sol[2 * n :]), iters


# ----------------------------------------------------------------------------
# public step API


def _check_topology(kind: SchemeKind, curve: Curve) -> None:
    if kind is SchemeKind.CF_A_open:
        if curve.closed:
            raise ValueError("A_open needs an open curve")
    elif not curve.closed:
        raise ValueError(f"{kind.value} needs a closed curve")


def initial_field(kind: SchemeKind, metric: Metric, curve: Curve) -> CurvatureField | None:
    """Initial curvature for the elastic schemes (``None`` for the others)."""
    if kind not in _ELASTIC:
        return None
    kappa, kappa_g = initial_curvature(metric, curve)
    if kind is SchemeKind.EL_U:
        return CurvatureField("kappa", kappa)
    return CurvatureField("kappa_g", kappa_g)


def _energy_args(kind: SchemeKind, field_: CurvatureField | None) -> dict:
    if field_ is None or kind not in _ELASTIC:
        return {}
    return {"kappa": field_.values} if field_.kind == "kappa" else {"kappa_g": field_.values}


def step(
    kind: SchemeKind,
    metric: Metric,
    curve: Curve,
    params: StepParams,
    curvature: CurvatureField | None = None,
    step_index: int | None = None,
    before: Diagnostics | None = None,
) -> StepReport:
    """Advance one time step with any scheme of the catalog."""
    _check_topology(kind, curve)
    if kind in _ELASTIC and curvature is None:
        curvature = initial_field(kind, metric, curve)
    blk = build_blocks(metric, curve)
    if before is None:
        before = diagnostics(metric, curve, **_energy_args(kind, curvature))
    if kind in _CURVATURE_FLOW:
        A, rhs, sol, field_, iters = _solve_cf(kind, blk, params, step_index)
    else:
        A, rhs, sol, field_, iters = _solve_cd_el(kind, blk, params, curvature, step_index)

    n = blk.n
    new_nodes = _unstack(sol, n)
    try:
        metric.check(new_nodes)
    except DomainError as exc:
        raise DomainExit(f"step {step_index}: {exc}") from None
    new_curve = Curve(new_nodes, curve.closed)
    try:
        new_curve.check()
    except DegenerateCurve as exc:
        raise SingularSystem(f"degenerate new curve: {exc}", step_index) from None
    after = diagnostics(metric, new_curve, **_energy_args(kind, field_))
    res = float(np.max(np.abs(A @ sol - rhs)) / max(float(np.max(np.abs(rhs))), 1e-300))
    report = StepReport(new_curve, field_, before, after, iters, residual=res)

    if kind.nonlinear:
        diss = params.dt * _dissipation(kind, blk, field_, new_nodes, params.dt)
        slack = after.length + diss - before.length
        report.dissipation = diss
        report.stability_slack = slack
        report.stability_ok = bool(slack <= 10.0 * params.picard_tol * before.length)
    if kind in _DIFFUSION:
        report.area_drift = after.area - before.area
    return report


def _dissipation(kind: SchemeKind, blk: WeakBlocks, field_: CurvatureField, new_nodes: np.ndarray, dt: float) -> float:
    if kind is SchemeKind.CF_Cstar:
        return float(np.sum(blk.sqrt_g * blk.mass * field_.values**2))
    if kind is SchemeKind.CF_Dstar:
        return float(np.sum(blk.g * blk.sqrt_g * blk.mass * np.sum(field_.values**2, axis=1)))
    if kind is SchemeKind.CD_Fstar:
        w = stiffness_weights(blk, "inv_sqrt_g")
        k = field_.values
        return float(np.sum(w * (k[blk.tail] - k[blk.head]) ** 2))
    if kind is SchemeKind.CF_ReducedNu:
        return _normal_dissipation(blk, field_.values)
    raise ValueError(kind)


def step_curvature_flow(kind: SchemeKind, m: Metric, c: Curve, p: StepParams, **kw) -> StepReport:
    if kind not in _CURVATURE_FLOW:
        raise ValueError(f"{kind} is not a curvature flow scheme")
    return step(kind, m, c, p, **kw)


def step_curve_diffusion(kind: SchemeKind, m: Metric, c: Curve, p: StepParams, **kw) -> StepReport:
    if kind not in _DIFFUSION:
        raise ValueError(f"{kind} is not a curve diffusion scheme")
    return step(kind, m, c, p, **kw)


def step_elastic(kind: SchemeKind, m: Metric, c: Curve, kappa_prev: CurvatureField | None, p: StepParams, **kw) -> StepReport:
    if kind not in _ELASTIC:
        raise ValueError(f"{kind} is not an elastic scheme")
    return step(kind, m, c, p, curvature=kappa_prev, **kw)


# ----------------------------------------------------------------------------
# evolution driver


class EvolutionFailure(RuntimeError):
    """A step failed; carries the last accepted state."""

    def __init__(self, cause: Exception, step_index: int, t: float, curve: Curve, curvature: CurvatureField | None):
        super().__init__(f"step {step_index} (t={t:.6g}) failed: {cause}")
        self.cause = cause
        self.step_index = step_index
        self.t = t
        self.curve = curve
        self.curvature = curvature


@dataclass
class EvolutionResult:
    initial: Diagnostics
    reports: list[StepReport] = field(default_factory=list)
    times: list[float] = field(default_factory=list)
    curve: Curve | None = None
    curvature: CurvatureField | None = None
    steps: int = 0


def n_steps(T: float, dt: float) -> int:
    """Number of constant steps with ``t_M <= T`` (guarding against rounding)."""
    return int(math.floor(T / dt + 1e-9))


def run_evolution(
    kind: SchemeKind,
    m: Metric,
    c0: Curve,
    params: StepParams,
    T: float,
    callbacks: Sequence[Callable[[int, float, StepReport], None]] = (),
    keep_reports: bool = True,
    curvature: CurvatureField | None = None,
) -> EvolutionResult:
    """Run ``floor(T / dt)`` constant steps.

    Each callback is invoked as ``cb(step_index, t, report)`` after every
    accepted step.  With ``keep_reports=False`` only the final state is
    retained, which keeps memory flat on long runs.
    """
    if T < 0:
        raise ValueError("T must be nonnegative")
    c0.check(m)
    if curvature is None:
        curvature = initial_field(kind, m, c0)
    initial = diagnostics(m, c0, **_energy_args(kind, curvature))
    result = EvolutionResult(initial=initial, curve=c0, curvature=curvature)
    curve, before = c0, initial
    M = n_steps(T, params.dt)
    for k in range(1, M + 1):
        t = k * params.dt
        try:
            rep = step(kind, m, curve, params, curvature=curvature, step_index=k, before=before)
        except (SingularSystem, PicardDivergence, DomainExit, DomainError, DegenerateCurve) as exc:
            raise EvolutionFailure(exc, k, t, curve, curvature) from exc
        curve, curvature, before = rep.curve, rep.curvature, rep.after
        for cb in callbacks:
            cb(k, t, rep)
        if keep_reports:
            result.reports.append(rep)
            result.times.append(t)
        result.steps = k
    result.curve, result.curvature = curve, curvature
    return result


def euclidean_equivalent(kind: SchemeKind) -> SchemeKind:
    """The scheme each kind collapses to for the flat metric."""
    return {
        SchemeKind.CF_C: SchemeKind.CF_A,
        SchemeKind.CF_Cstar: SchemeKind.CF_A,
        SchemeKind.CF_D: SchemeKind.CF_B,
        SchemeKind.CF_Dstar: SchemeKind.CF_B,
        SchemeKind.CD_F: SchemeKind.CD_E,
        SchemeKind.CD_Fstar: SchemeKind.CD_E,
        SchemeKind.EL_W: SchemeKind.EL_U,
    }.get(kind, kind)
