"""Assembly of the lumped forms, the direct solver and the brute-force residual oracle.

The residual oracle re-evaluates every scheme's defining lumped products with
an element loop written independently of the vectorised assembly, and checks
that the solved unknowns make them vanish.
"""

from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp

from confcurves.assembly import (
    SideMode,
    SingularSystem,
    SparseSystem,
    assemble_side_constraint_euclid,
    assemble_side_constraint_metric,
    build_blocks,
    nonlinear_gradient_source,
    solve,
)
from confcurves.curvemesh import Curve, initial_curvature, regular_polygon, segment
from confcurves.flows import SchemeKind, StepParams, initial_field, step
from confcurves.metric import AlphaFamily, Euclidean, Mercator, MuFamily

# solver ----------------------------------------------------------------------


def test_solve_identity():
    b = np.arange(5.0)
    assert np.array_equal(solve(sp.identity(5, format="csc"), b), b)


def test_solve_two_by_two():
    x = solve(SparseSystem(sp.csr_matrix([[2.0, 1.0], [1.0, 2.0]]), np.array([3.0, 3.0])))
    assert np.allclose(x, [1.0, 1.0], atol=1e-14)


def test_solve_random_diagonally_dominant():
    rng = np.random.default_rng(7)
    A = rng.normal(size=(100, 100)) * (rng.uniform(size=(100, 100)) < 0.1)
    A += np.diag(np.abs(A).sum(axis=1) + 1.0)
    b = rng.normal(size=100)
    x = solve(sp.csr_matrix(A), b)
    assert np.max(np.abs(x - np.linalg.solve(A, b))) <= 1e-10 * np.max(np.abs(x))


def test_solve_singular():
    A = sp.csr_matrix([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(SingularSystem):
        solve(A, np.array([1.0, 0.0]), step=4)


def test_solve_missing_rhs():
    with pytest.raises(ValueError):
        solve(sp.identity(2))


# side constraints ---------------------------------------------------------------


def test_euclid_side_straight_segment():
    blk = build_blocks(Euclidean(), segment((0.0, 1.0), (2.0, 1.0), 2))
    side = assemble_side_constraint_euclid(blk)
    x = np.concatenate([blk.curve.nodes[:, 0], blk.curve.nodes[:, 1]])
    res = side.stiffness @ x + side.curvature @ np.zeros(3) - side.rhs
    assert np.allclose(res[[1, 4]], 0.0, atol=1e-15)  # interior node rows


def test_euclid_side_unit_square_by_hand():
    sq = Curve([[0, 1], [1, 1], [1, 2], [0, 2]], True)
    side = assemble_side_constraint_euclid(build_blocks(Euclidean(), sq))
    K = side.stiffness.toarray()[:4, :4]
    expected = np.array([[2, -1, 0, -1], [-1, 2, -1, 0], [0, -1, 2, -1], [-1, 0, -1, 2]], float)
    assert np.allclose(K, expected)
    # node 0 sees normals (0, 1) of the bottom edge and (1, 0) of the left edge, each with weight 1/2
    C = side.curvature.toarray()
    assert np.allclose([C[0, 0], C[4, 0]], [0.5, 0.5])
    # each corner turns by a right angle: K X = -(1, 1) at node 0, balanced by kappa = 2
    x = np.concatenate([sq.nodes[:, 0], sq.nodes[:, 1]])
    assert np.allclose(side.stiffness @ x + C @ np.full(4, 2.0), 0.0)


def test_euclid_side_regular_polygon_recovers_initial_curvature():
    c = regular_polygon(24, radius=1.5, center=(0.0, 3.0))
    side = assemble_side_constraint_euclid(build_blocks(Euclidean(), c))
    x = np.concatenate([c.nodes[:, 0], c.nodes[:, 1]])
    k, *_ = np.linalg.lstsq(side.curvature.toarray(), -(side.stiffness @ x), rcond=None)
    # the side constraint tests against the weighted normal, of length cos(pi/J) on a regular
    # polygon, while the initial value projects onto its direction
    assert np.allclose(k * np.cos(np.pi / 24), initial_curvature(Euclidean(), c)[0], rtol=1e-12)
    assert np.allclose(k, 1 / 1.5, rtol=2 * (np.pi / 24) ** 2)


def test_metric_side_euclidean_equals_euclid_side():
    c = regular_polygon(12, center=(0.0, 3.0))
    blk = build_blocks(Euclidean(), c)
    a, b = assemble_side_constraint_euclid(blk), assemble_side_constraint_metric(blk)
    assert abs(a.stiffness - b.stiffness).max() < 1e-13
    assert abs(a.curvature - b.curvature).max() < 1e-13
    assert np.allclose(b.rhs, 0.0, atol=1e-13)


def test_gradient_source_single_element():
    c = segment((0.0, 2.0), (0.5, 2.0), 1)
    blk = build_blocks(MuFamily(1), c)
    src = nonlinear_gradient_source(blk, SideMode.LINEAR)
    assert np.allclose(blk.grad_sqrt_g, [[0.0, -0.25], [0.0, -0.25]])
    assert np.allclose(src, 0.5 * 0.5 * np.array([[0.0, -0.25], [0.0, -0.25]]))


def test_split_mode_at_old_nodes_equals_linear_for_mu1():
    c = regular_polygon(16, center=(0.0, 2.0))
    blk = build_blocks(MuFamily(1), c)
    lin = assemble_side_constraint_metric(blk, SideMode.LINEAR)
    spl = assemble_side_constraint_metric(blk, SideMode.SPLIT_NONLINEAR, c.nodes)
    assert np.allclose(lin.rhs, spl.rhs, rtol=1e-14, atol=0)
    assert abs(lin.stiffness - spl.stiffness).max() == 0


def test_split_mode_needs_iterate():
    blk = build_blocks(MuFamily(1), regular_polygon(8, center=(0.0, 2.0)))
    with pytest.raises(ValueError):
        nonlinear_gradient_source(blk, SideMode.SPLIT_NONLINEAR)


def test_periodic_band_structure():
    n = 20
    c = regular_polygon(n, center=(0.0, 3.0))
    side = assemble_side_constraint_metric(build_blocks(MuFamily(1), c))
    rows, cols = side.stiffness.nonzero()
    gap = np.abs((rows % n) - (cols % n))
    assert np.all(np.minimum(gap, n - gap) <= 1)
    assert np.all(rows // n == cols // n)  # no coupling between components


# brute-force residual oracle ------------------------------------------------------


class Acc:
    """Residual accumulator that also records the magnitude of every term."""

    def __init__(self, shape):
        self.r = np.zeros(shape)
        self.s = np.zeros(shape)

    def add(self, idx, val):
        self.r[idx] += val
        self.s[idx] += np.abs(val)

    def rel(self, rows=slice(None)):
        return float(np.max(np.abs(self.r[rows])) / max(np.max(self.s[rows]), 1e-300))


def elements(c: Curve):
    for e in range(c.n_elements):
        i, j = e, (e + 1) % c.n_nodes
        d = c.nodes[j] - c.nodes[i]
        l = float(np.hypot(*d))
        tau = d / l
        yield i, j, l, np.array([-tau[1], tau[0]])


def brute_residuals(kind: SchemeKind, m, c0: Curve, X1: np.ndarray, field, prev, dt: float, lam: float = 0.0):
    """Residuals of the scheme's lumped equations, relative to the largest term in each equation."""
    X0 = c0.nodes
    n = c0.n_nodes
    g, s = m.g(X0), m.sqrt_g(X0)
    gs = m.grad_sqrt_g(X0)
    b = m.half_grad_ln_g(X0)
    S0 = m.sectional_curvature(X0)
    V = (X1 - X0) / dt
    star = kind.nonlinear
    if star:
        grad_star = m.grad_sqrt_g_plus(X1) + m.grad_sqrt_g_minus(X0)
        c1 = c0.with_nodes(X1)
    vec = kind in (SchemeKind.CF_B, SchemeKind.CF_D, SchemeKind.CF_Dstar)
    motion = Acc((n, 2) if vec else n)
    side = Acc((n, 2))
    aux = Acc(n)

    # position test functions: side constraints
    for i, j, l, nu in elements(c0):
        for a in (i, j):
            if kind in (SchemeKind.CF_A, SchemeKind.CF_A_open, SchemeKind.CD_E, SchemeKind.EL_U):
                side.add(a, 0.5 * l * field.values[a] * nu)
            elif kind is SchemeKind.CF_B:
                side.add(a, 0.5 * l * field.values[a])
            elif kind in (SchemeKind.CF_D, SchemeKind.CF_Dstar):
                side.add(a, 0.5 * l * g[a] * s[a] * field.values[a])
            elif kind is SchemeKind.CF_ReducedNu:
                side.add(a, 0.5 * l * g[a] * s[a] * np.dot(V[a], nu) * nu)
            else:
                side.add(a, 0.5 * l * g[a] * field.values[a] * nu)
            if kind not in (SchemeKind.CF_A, SchemeKind.CF_A_open, SchemeKind.CF_B, SchemeKind.CD_E, SchemeKind.EL_U) and not star:
                side.add(a, 0.5 * l * gs[a])
        w = 1.0 / l
        if kind not in (SchemeKind.CF_A, SchemeKind.CF_A_open, SchemeKind.CF_B, SchemeKind.CD_E, SchemeKind.EL_U):
            w = 0.5 * (s[i] + s[j]) / l
        d1 = X1[j] - X1[i]
        side.add(j, w * d1)
        side.add(i, -w * d1)
    if star:
        for i, j, l1, _ in elements(c1):
            for a in (i, j):
                side.add(a, 0.5 * l1 * grad_star[a])

    # motion laws
    if kind in (SchemeKind.CD_E, SchemeKind.EL_U):
        Z = np.zeros(n)
        for i, j, l, nu in elements(c0):
            for a in (i, j):
                Z[a] += 0.5 * l * np.dot(nu, b[a])
        Z /= s * c0_mass(c0)
        frak = field.aux
    for i, j, l, nu in elements(c0):
        for a in (i, j):
            if kind in (SchemeKind.CF_A, SchemeKind.CF_A_open):
                motion.add(a, 0.5 * l * g[a] * np.dot(V[a], nu))
                motion.add(a, -0.5 * l * field.values[a])
                motion.add(a, 0.5 * l * np.dot(nu, b[a]))
            elif kind in (SchemeKind.CF_C, SchemeKind.CF_Cstar):
                motion.add(a, 0.5 * l * g[a] * np.dot(V[a], nu))
                motion.add(a, -0.5 * l * s[a] * field.values[a])
            elif kind is SchemeKind.CF_B:
                motion.add(a, 0.5 * l * g[a] * V[a])
                motion.add(a, -0.5 * l * field.values[a])
                motion.add(a, 0.5 * l * np.dot(nu, b[a]) * nu)
            elif kind in (SchemeKind.CF_D, SchemeKind.CF_Dstar):
                motion.add(a, 0.5 * l * g[a] * V[a])
                motion.add(a, -0.5 * l * g[a] * field.values[a])
            elif kind is SchemeKind.CF_ReducedNu:
                pass
            else:
                motion.add(a, 0.5 * l * g[a] * np.dot(V[a], nu))
            if kind is SchemeKind.EL_U:
                k = prev.values[a] - np.dot(nu, b[a])
                motion.add(a, 0.5 * l * (0.5 * k**3 / g[a] + S0[a] * k))
            if kind in (SchemeKind.EL_W, SchemeKind.EL_Wlambda):
                k = prev.values[a]
                motion.add(a, 0.5 * l * s[a] * (0.5 * k**3 + S0[a] * k))
            if kind is SchemeKind.EL_Wlambda:
                motion.add(a, -0.5 * l * lam * s[a] * field.values[a])
            if kind in (SchemeKind.CD_E, SchemeKind.EL_U):
                aux.add(a, 0.5 * l * s[a] * frak[a])
                aux.add(a, -0.5 * l * field.values[a])
        if kind.family in ("diffusion", "elastic"):
            w = 0.5 * (1.0 / s[i] + 1.0 / s[j]) / l
            f = field.values if kind not in (SchemeKind.CD_E, SchemeKind.EL_U) else frak - Z
            wp = w * (f[j] - f[i])
            motion.add(j, -wp)
            motion.add(i, wp)

    if c0.closed:
        side_rows = slice(None)
    else:
        side_rows = slice(1, n - 1)
    out = {"side": side.rel(side_rows)}
    if kind is not SchemeKind.CF_ReducedNu:
        out["motion"] = motion.rel()
    if kind in (SchemeKind.CD_E, SchemeKind.EL_U):
        out["aux"] = aux.rel()
    return out


def c0_mass(c: Curve) -> np.ndarray:
    m = np.zeros(c.n_nodes)
    for i, j, l, _ in elements(c):
        m[i] += 0.5 * l
        m[j] += 0.5 * l
    return m


def wobbly_curve(center, radii, J=20):
    q = np.arange(J) / J
    th = 2 * np.pi * q + 0.15 * np.sin(2 * np.pi * q) + 0.05 * np.cos(6 * np.pi * q)
    return Curve(np.column_stack([center[0] + radii[0] * np.cos(th), center[1] + radii[1] * np.sin(th)]), True)


CASES = [
    ("A", MuFamily(1), ((0.3, 2.0), (1.3, 1.0))),
    ("B", MuFamily(1), ((0.3, 2.0), (1.3, 1.0))),
    ("C", Mercator(), ((0.3, 0.5), (1.3, 1.0))),
    ("D", Mercator(), ((0.3, 0.5), (1.3, 1.0))),
    ("Cstar", AlphaFamily(-1), ((0.2, 0.1), (0.8, 0.5))),
    ("Dstar", AlphaFamily(-1), ((0.2, 0.1), (0.8, 0.5))),
    ("ReducedNu", AlphaFamily(-1), ((0.2, 0.1), (0.8, 0.5))),
    ("E", MuFamily(1), ((0.3, 2.0), (1.3, 1.0))),
    ("F", Mercator(), ((0.3, 0.5), (1.3, 1.0))),
    ("Fstar", AlphaFamily(-1), ((0.2, 0.1), (0.8, 0.5))),
    ("U", MuFamily(1), ((0.3, 2.0), (1.3, 1.0))),
    ("W", MuFamily(1), ((0.3, 2.0), (1.3, 1.0))),
    ("Wlambda", AlphaFamily(0.5), ((0.1, 0.0), (0.8, 0.5))),
]


@pytest.mark.parametrize("tag,m,geom", CASES, ids=[c[0] for c in CASES])
def test_brute_force_residual(tag, m, geom):
    kind = SchemeKind.parse(tag)
    c0 = wobbly_curve(*geom)
    dt = 1e-3 if kind.family == "curvature" else 1e-4
    p = StepParams(dt, picard_tol=1e-14, lam=0.7)
    prev = initial_field(kind, m, c0)
    rep = step(kind, m, c0, p, curvature=prev)
    res = brute_residuals(kind, m, c0, rep.curve.nodes, rep.curvature, prev, dt, lam=0.7)
    for name, r in res.items():
        assert r < 1e-10, (name, r)


def test_brute_force_residual_open_curve():
    m = MuFamily(1)
    q = np.linspace(0, 1, 17)
    c0 = Curve(np.column_stack([-2 + 4 * q, 1 + 0.8 * np.sin(np.pi * q) + 0.1 * q]), False)
    kind = SchemeKind.CF_A_open
    rep = step(kind, m, c0, StepParams(1e-3))
    res = brute_residuals(kind, m, c0, rep.curve.nodes, rep.curvature, None, 1e-3)
    assert max(res.values()) < 1e-10
    assert np.allclose(rep.curve.nodes[[0, -1]], c0.nodes[[0, -1]], rtol=0, atol=1e-14)


def test_brute_force_detects_a_wrong_solution():
    m = MuFamily(1)
    c0 = wobbly_curve((0.3, 2.0), (1.3, 1.0))
    rep = step(SchemeKind.CF_A, m, c0, StepParams(1e-3))
    bad = rep.curve.nodes.copy()
    bad[3] += 1e-6
    res = brute_residuals(SchemeKind.CF_A, m, c0, bad, rep.curvature, None, 1e-3)
    assert max(res.values()) > 1e-8
