"""Exact circular solutions used as reference trajectories.

Hyperbolic half-plane (``MuFamily(1)``): a circle of Euclidean radius ``r``
centred at ``a e2`` stays a circle under curvature flow and elastic flow.
Disk and elliptic plane (``AlphaFamily``): origin-centred circles of radius
``r`` stay circles.  Implicit solutions are found by bisection on the
monotone branch that contains the initial value and are cross-checked
against adaptive integration of the underlying ODE.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import bisect

__all__ = [
    "PastExtinction",
    "BranchError",
    "OracleMismatch",
    "ExactCircleState",
    "hyperbolic_cf_extinction",
    "hyperbolic_cf_circle",
    "HyperbolicElasticSolution",
    "hyperbolic_elastic_circle",
    "sigma_from_F",
    "F",
    "G",
    "Q",
    "alpha_cf_extinction",
    "alpha_cf_circle",
    "spherical_cf_radius",
    "spherical_cf_extinction",
    "spherical_elastic_radius",
    "alpha_elastic_circle",
    "chart_to_sphere_radius",
    "oracle_table",
]

SQRT2 = math.sqrt(2.0)
BISECT_TOL = 1e-13
ODE_TOL = 1e-12
CROSS_TOL = 1e-8


class PastExtinction(ValueError):
    """The requested time lies at or beyond the extinction time."""


class BranchError(ValueError):
    """The initial data lies outside the branch the solution is defined on."""


class OracleMismatch(RuntimeError):
    """Implicit solution and ODE integration disagree beyond tolerance."""


@dataclass(frozen=True)
class ExactCircleState:
    """One sample of an exact circle.

    ``a`` is the centre height (``nan`` for origin-centred circles), ``sigma``
    the ratio ``a / r`` (hyperbolic only) and ``R`` the radius of the lifted
    circle on the unit sphere (elliptic plane only).
    """

    t: float
    r: float
    a: float = math.nan
    sigma: float = math.nan
    R: float = math.nan


def _ode(rhs, y0, t):
    sol = solve_ivp(rhs, (0.0, t), y0, method="DOP853", rtol=ODE_TOL, atol=ODE_TOL)
    if not sol.success:
        raise OracleMismatch(f"ODE integration failed: {sol.message}")
    return sol.y[:, -1]


def _root(f, lo, hi):
    """Bisection of a monotone function on ``[lo, hi]``; endpoints are returned if the sign does not change."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        return lo if abs(flo) < abs(fhi) else hi
    return bisect(f, lo, hi, xtol=BISECT_TOL, rtol=4 * np.finfo(float).eps, maxiter=400)


# hyperbolic curvature flow ----------------------------------------------------


def hyperbolic_cf_extinction(a0: float, r0: float) -> float:
    """``T0 = -ln(1 - (r0/a0)^2) / 2``."""
    if not a0 > r0 > 0:
        raise BranchError("need a0 > r0 > 0")
    return -0.5 * math.log1p(-((r0 / a0) ** 2))


def hyperbolic_cf_circle(a0: float, r0: float, t: float) -> tuple[float, float]:
    """Centre height and radius of a circle under hyperbolic curvature flow."""
    if t >= hyperbolic_cf_extinction(a0, r0):
        raise PastExtinction(f"t={t} is past the extinction time")
    a = math.exp(-t) * a0
    r = math.sqrt(r0 * r0 - a0 * a0 * (-math.expm1(-2.0 * t)))
    return a, r


# hyperbolic elastic flow ------------------------------------------------------


def F(y):
    """``F(y) = (y^2 - 1) / (y |1 - y^2/2|^(1/2))``; ``F(sigma(t)) = F(sigma(0)) e^t``."""
    y = np.asarray(y, dtype=float)
    return (y * y - 1.0) / (y * np.sqrt(np.abs(1.0 - 0.5 * y * y)))


def sigma_from_F(sigma0: float, t: float) -> float:
    """Solve ``F(sigma) = F(sigma0) e^t`` on the branch of ``sigma0``."""
    if not sigma0 > 1.0:
        raise BranchError("sigma0 must exceed 1")
    if sigma0 == SQRT2:
        return SQRT2
    target = float(F(sigma0)) * math.exp(t)
    f = lambda y: float(F(y)) - target
    if sigma0 < SQRT2:
        return _root(f, sigma0, SQRT2 * (1.0 - 1e-15))
    return _root(f, SQRT2 * (1.0 + 1e-15), sigma0)


def _elastic_rhs(_t, y):
    a, r = y
    s = a / r
    q = s - 0.5 * s**3
    return [-r * q, -a * q]


class HyperbolicElasticSolution:
    """Dense solution of the ``(a, r)`` system of hyperbolic elastic flow on ``[0, t_max]``.

    Evaluation returns ``(a, r, sigma)`` and checks ``sigma`` against the
    implicit ``F`` equation.
    """

    def __init__(self, a0: float, r0: float, t_max: float):
        if not (r0 > 0 and a0 / r0 > 1.0):
            raise BranchError("need a0 > r0 > 0")
        self.a0, self.r0, self.t_max = float(a0), float(r0), float(t_max)
        self.sigma0 = self.a0 / self.r0
        self._sol = None
        if self.sigma0 != SQRT2 and t_max > 0:
            sol = solve_ivp(
                _elastic_rhs,
                (0.0, self.t_max),
                [self.a0, self.r0],
                method="DOP853",
                rtol=ODE_TOL,
                atol=ODE_TOL,
                dense_output=True,
            )
            if not sol.success:
                raise OracleMismatch(f"ODE integration failed: {sol.message}")
            self._sol = sol.sol

    def __call__(self, t: float, check: bool = True) -> tuple[float, float, float]:
        if t < 0 or t > self.t_max * (1 + 1e-12):
            raise ValueError(f"t={t} outside [0, {self.t_max}]")
        if self._sol is None:
            return self.a0, self.r0, self.sigma0
        a, r = (float(v) for v in self._sol(min(t, self.t_max)))
        sigma = a / r
        if check:
            ref = sigma_from_F(self.sigma0, t)
            if abs(ref - sigma) > CROSS_TOL:
                raise OracleMismatch(f"sigma mismatch {abs(ref - sigma):.3e} at t={t}")
        return a, r, sigma


def hyperbolic_elastic_circle(a0: float, r0: float, t: float) -> tuple[float, float, float]:
    """Centre height, radius and ratio ``a/r`` under hyperbolic elastic flow."""
    return HyperbolicElasticSolution(a0, r0, t)(t)


# disk and elliptic plane -------------------------------------------------------


def G(y, alpha: float):
    """``G(y) = |(1 - alpha y^2) / (1 + alpha y^2)|^(1/alpha)``; ``G(r(t)) = G(r0) e^t``."""
    y = np.asarray(y, dtype=float)
    return np.abs((1.0 - alpha * y * y) / (1.0 + alpha * y * y)) ** (1.0 / alpha)


def _alpha_cf_check(alpha: float, r0: float) -> None:
    if not r0 > 0:
        raise BranchError("r0 must be positive")
    if alpha > 0 and r0 * r0 * alpha >= 1.0:
        raise BranchError("circle leaves the disk")
    if alpha != 0 and abs(abs(alpha) * r0 * r0 - 1.0) < 1e-15:
        raise BranchError("r0 sits on the branch point |alpha|^(-1/2)")


def alpha_cf_extinction(alpha: float, r0: float) -> float:
    """Time at which the circle shrinks to the origin (or escapes to infinity)."""
    _alpha_cf_check(alpha, r0)
    if alpha == 0.0:
        return 2.0 * r0 * r0
    return -math.log(float(G(r0, alpha)))


def _alpha_cf_ode(alpha: float, r0: float, t: float) -> float:
    s = _ode(lambda _t, y: [0.5 * (alpha * alpha * y[0] ** 2 - 1.0)], [r0 * r0], t)
    return math.sqrt(s[0])


def alpha_cf_circle(alpha: float, r0: float, t: float) -> float:
    """Radius of an origin-centred circle under curvature flow for ``AlphaFamily(alpha)``."""
    if t >= alpha_cf_extinction(alpha, r0):
        raise PastExtinction(f"t={t} is past the extinction time")
    if alpha == 0.0:
        return math.sqrt(r0 * r0 - 0.5 * t)
    if t == 0.0:
        return r0
    target = float(G(r0, alpha)) * math.exp(t)
    f = lambda y: float(G(y, alpha)) - target
    knee = abs(alpha) ** -0.5
    if r0 < knee:
        r = _root(f, 0.0, r0)
    else:
        hi = 2.0 * r0
        while f(hi) < 0:
            hi *= 2.0
        r = _root(f, r0, hi)
    if alpha == -1.0:
        R = spherical_cf_radius(chart_to_sphere_radius(r0), t)
        if abs(chart_to_sphere_radius(r) - R) > CROSS_TOL:
            raise OracleMismatch("spherical cross-check failed")
    return r


def chart_to_sphere_radius(r):
    """Radius ``2 r / (1 + r^2)`` of the stereographic lift of a chart circle."""
    return 2.0 * r / (1.0 + r * r)


def spherical_cf_extinction(R0: float) -> float:
    """``T0 = ln(1 / (1 - R0^2)) / 2`` for a circle on the unit sphere."""
    if not 0 < R0 < 1:
        raise BranchError("need 0 < R0 < 1")
    return -0.5 * math.log1p(-R0 * R0)


def spherical_cf_radius(R0: float, t: float) -> float:
    """Radius of a circle on the unit sphere under geodesic curvature flow."""
    if t >= spherical_cf_extinction(R0):
        raise PastExtinction(f"t={t} is past the extinction time")
    return math.sqrt(1.0 - (1.0 - R0 * R0) * math.exp(2.0 * t))


def spherical_elastic_radius(R0: float, t: float) -> float:
    """Radius of a circle on the unit sphere under geodesic elastic flow."""
    return (1.0 - (1.0 - R0**4) * math.exp(-2.0 * t)) ** 0.25


def Q(y):
    """``Q(y) = (1 - y^2)^2 / ((1 + y^2) |1 - 6 y^2 + y^4|^(1/2))``; ``Q(r(t)) = Q(r0) e^t``."""
    y = np.asarray(y, dtype=float)
    y2 = y * y
    return (1.0 - y2) ** 2 / ((1.0 + y2) * np.sqrt(np.abs(1.0 - 6.0 * y2 + y2 * y2)))


def _alpha_elastic_ode(alpha: float, r0: float, t: float) -> float:
    def rhs(_t, y):
        r2 = math.sqrt(max(y[0], 0.0))
        return [0.125 * (1.0 - alpha * alpha * y[0]) * (1.0 - 6.0 * alpha * r2 + alpha * alpha * y[0])]

    return _ode(rhs, [r0**4], t)[0] ** 0.25


def alpha_elastic_circle(alpha: float, r0: float, t: float, check: bool = True) -> float:
    """Radius of an origin-centred circle under elastic flow, ``alpha`` in ``{-1, +1}``."""
    if alpha not in (-1.0, 1.0):
        raise BranchError("alpha must be -1 or +1")
    if not r0 > 0:
        raise BranchError("r0 must be positive")
    if alpha == -1.0:
        R = spherical_elastic_radius(chart_to_sphere_radius(r0), t)
        root = math.sqrt(max(1.0 - R * R, 0.0))
        r = (1.0 + root) / R if r0 >= 1.0 else (1.0 - root) / R
    else:
        if r0 >= 1.0:
            raise BranchError("r0 must lie in (0, 1) for the disk")
        knee = SQRT2 - 1.0
        if r0 == knee or t == 0.0:
            return r0
        target = float(Q(r0)) * math.exp(t)
        f = lambda y: float(Q(y)) - target
        if r0 < knee:
            r = _root(f, r0, knee * (1.0 - 1e-15))
        else:
            r = _root(f, knee * (1.0 + 1e-15), r0)
    if check and t > 0:
        ref = _alpha_elastic_ode(alpha, r0, t)
        if abs(ref - r) > CROSS_TOL:
            raise OracleMismatch(f"ODE cross-check failed by {abs(ref - r):.3e}")
    return r


# tables ----------------------------------------------------------------------------


def oracle_table(case: str, times, a0: float = math.nan, r0: float = 1.0, alpha: float = 0.0) -> list[ExactCircleState]:
    """Sample an exact solution.

    ``case`` is one of ``"hyperbolic_cf"``, ``"hyperbolic_elastic"``,
    ``"alpha_cf"`` and ``"alpha_elastic"``.
    """
    times = [float(t) for t in times]
    out = []
    if case == "hyperbolic_cf":
        for t in times:
            a, r = hyperbolic_cf_circle(a0, r0, t)
            out.append(ExactCircleState(t, r, a=a, sigma=a / r))
    elif case == "hyperbolic_elastic":
        sol = HyperbolicElasticSolution(a0, r0, max(times, default=0.0))
        for t in times:
            a, r, s = sol(t)
            out.append(ExactCircleState(t, r, a=a, sigma=s))
    elif case in ("alpha_cf", "alpha_elastic"):
        fn = alpha_cf_circle if case == "alpha_cf" else alpha_elastic_circle
        for t in times:
            r = fn(alpha, r0, t)
            R = float(chart_to_sphere_radius(r)) if alpha == -1.0 else math.nan
            out.append(ExactCircleState(t, r, R=R))
    else:
        raise ValueError(f"unknown oracle case {case!r}")
    return out
