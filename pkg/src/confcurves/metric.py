"""Conformal metric families on planar chart domains.

A metric here is a positive weight ``g`` on an open set ``H`` of the plane,
acting as ``(v, w)_g = g(z) v.w``.  Every family exposes the pointwise
quantities the finite element schemes need: ``g``, ``sqrt(g)``, its gradient,
``grad(ln g)/2``, a convex/concave splitting of ``sqrt(g)``, the sectional
curvature and a vector field ``phi`` with ``div(phi) = g`` used to measure
enclosed area.

All evaluators accept arrays of points of shape ``(..., 2)`` and are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "DomainError",
    "UnsupportedSplit",
    "Metric",
    "MuFamily",
    "Euclidean",
    "Axisymmetric",
    "AlphaFamily",
    "Mercator",
    "Catenoid",
    "Torus",
    "SplitGradients",
    "parse_metric",
    "eval_g",
    "grad_sqrt_g",
    "half_nu_grad_ln_g",
    "split_gradients",
    "sectional_curvature",
    "area_potential",
    "domain_contains",
]


class DomainError(ValueError):
    """A point lies outside the chart domain H of the metric."""


class UnsupportedSplit(ValueError):
    """The metric has no convex/concave splitting of sqrt(g)."""


@dataclass(frozen=True)
class SplitGradients:
    """Gradients of the convex part and the concave part of ``sqrt(g)``."""

    grad_plus: Callable[[np.ndarray], np.ndarray]
    grad_minus: Callable[[np.ndarray], np.ndarray]


def _pts(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != 2:
        raise ValueError(f"expected points with trailing dimension 2, got {z.shape}")
    return z


def _vec(first, second) -> np.ndarray:
    first, second = np.broadcast_arrays(first, second)
    return np.stack([first, second], axis=-1)


class Metric:
    """Base class of the metric catalog.

    Subclasses implement the underscored evaluators assuming valid input;
    the public methods validate the domain first.
    """

    tag: str = ""

    # domain -----------------------------------------------------------
    def contains(self, z) -> np.ndarray | bool:
        z = _pts(z)
        return np.ones(z.shape[:-1], dtype=bool) if z.ndim > 1 else True

    def check(self, z) -> np.ndarray:
        z = _pts(z)
        inside = np.asarray(self.contains(z))
        if not np.all(inside):
            bad = z[~inside] if z.ndim > 1 else z
            raise DomainError(f"{self.tag}: point(s) outside H, e.g. {np.reshape(bad, (-1, 2))[0]}")
        return z

    # public evaluators ---------------------------------------------------
    def g(self, z):
        return self._g(self.check(z))

    def sqrt_g(self, z):
        return self._sqrt_g(self.check(z))

    def grad_sqrt_g(self, z):
        return self._grad_sqrt_g(self.check(z))

    def half_grad_ln_g(self, z):
        """``grad(ln g)/2 = grad(sqrt g)/sqrt g`` as a vector field."""
        return self._half_grad_ln_g(self.check(z))

    def half_nu_grad_ln_g(self, z, nu):
        nu = np.asarray(nu, dtype=float)
        return np.sum(self.half_grad_ln_g(z) * nu, axis=-1)

    def sectional_curvature(self, z):
        return self._s0(self.check(z))

    def area_potential(self, z):
        return self._phi(self.check(z))

    def grad_sqrt_g_minus(self, z):
        self._require_split()
        return self._grad_minus(self.check(z))

    def grad_sqrt_g_plus(self, z):
        z = self.check(z)
        self._require_split()
        return self._grad_sqrt_g(z) - self._grad_minus(z)

    def split_gradients(self) -> SplitGradients:
        self._require_split()
        return SplitGradients(self.grad_sqrt_g_plus, self.grad_sqrt_g_minus)

    def _require_split(self) -> None:
        pass

    # defaults -------------------------------------------------------------
    def _sqrt_g(self, z):
        return np.sqrt(self._g(z))

    def _half_grad_ln_g(self, z):
        return self._grad_sqrt_g(z) / self._sqrt_g(z)[..., None]

    def _grad_minus(self, z):
        return np.zeros_like(z)

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.tag}>"

    def __eq__(self, other) -> bool:
        return type(self) is type(other) and self.tag == other.tag

    def __hash__(self) -> int:
        return hash((type(self).__name__, self.tag))


class MuFamily(Metric):
    """``g(z) = C^2 (z.e2)^(-2 mu)`` on the upper half plane.

    ``mu = 1`` is the Poincare half-plane model of the hyperbolic plane.
    The constant ``C`` is only used by :class:`Axisymmetric`.
    """

    def __init__(self, mu: float, scale: float = 1.0):
        self.mu = float(mu)
        self.scale = float(scale)
        self.tag = f"mu:{self.mu!r}"

    def contains(self, z):
        return _pts(z)[..., 1] > 0

    def _g(self, z):
        return self.scale**2 * z[..., 1] ** (-2.0 * self.mu)

    def _sqrt_g(self, z):
        return self.scale * z[..., 1] ** (-self.mu)

    def _grad_sqrt_g(self, z):
        y = z[..., 1]
        return _vec(np.zeros_like(y), -self.mu * self.scale * y ** (-self.mu - 1.0))

    def _half_grad_ln_g(self, z):
        y = z[..., 1]
        return _vec(np.zeros_like(y), -self.mu / y)

    def _s0(self, z):
        return -self.mu * z[..., 1] ** (2.0 * (self.mu - 1.0)) / self.scale**2

    def _phi(self, z):
        y = z[..., 1]
        if self.mu == 0.5:
            second = self.scale**2 * np.log(y)
        else:
            second = self.scale**2 * y ** (1.0 - 2.0 * self.mu) / (1.0 - 2.0 * self.mu)
        return _vec(np.zeros_like(y), second)

    def _require_split(self):
        # sqrt(g) = y^-mu is convex on H iff mu (mu + 1) >= 0
        if -1.0 < self.mu < 0.0:
            raise UnsupportedSplit(f"no convex/concave splitting for mu={self.mu} in (-1, 0)")


class Euclidean(MuFamily):
    """The flat metric ``g = 1`` on the whole plane."""

    def __init__(self):
        super().__init__(0.0)
        self.tag = "euclidean"

    def contains(self, z):
        z = _pts(z)
        return np.ones(z.shape[:-1], dtype=bool) if z.ndim > 1 else True

    # the mu-family expressions divide by z.e2, so restate them for all of R^2
    def _g(self, z):
        return np.ones(z.shape[:-1])

    def _sqrt_g(self, z):
        return np.ones(z.shape[:-1])

    def _grad_sqrt_g(self, z):
        return np.zeros_like(z)

    def _half_grad_ln_g(self, z):
        return np.zeros_like(z)

    def _s0(self, z):
        return np.zeros(z.shape[:-1])

    def _phi(self, z):
        return _vec(np.zeros_like(z[..., 1]), z[..., 1])


class Axisymmetric(MuFamily):
    """``g(z) = [area(S^(d-2))]^2 (z.e2)^(2(d-2))`` for axisymmetric hypersurfaces in R^d."""

    def __init__(self, d: int):
        d = int(d)
        if d < 3:
            raise ValueError("Axisymmetric metric requires d >= 3")
        n = d - 1
        surface = 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)
        super().__init__(-(d - 2.0), scale=surface)
        self.d = d
        self.tag = f"axisym:{d}"


class AlphaFamily(Metric):
    """``g(z) = 4 / (1 - alpha |z|^2)^2``.

    ``alpha = 1`` is the hyperbolic disk, ``alpha = -1`` the elliptic plane
    (stereographic image of the unit sphere).
    """

    def __init__(self, alpha: float):
        self.alpha = float(alpha)
        self.tag = f"alpha:{self.alpha!r}"

    def contains(self, z):
        z = _pts(z)
        if self.alpha > 0:
            return np.sum(z * z, axis=-1) < 1.0 / self.alpha
        return np.ones(z.shape[:-1], dtype=bool) if z.ndim > 1 else True

    def _w(self, z):
        return 1.0 - self.alpha * np.sum(z * z, axis=-1)

    def _g(self, z):
        return 4.0 / self._w(z) ** 2

    def _sqrt_g(self, z):
        return 2.0 / self._w(z)

    def _grad_sqrt_g(self, z):
        return (4.0 * self.alpha / self._w(z) ** 2)[..., None] * z

    def _half_grad_ln_g(self, z):
        return (2.0 * self.alpha / self._w(z))[..., None] * z

    def _s0(self, z):
        return np.full(z.shape[:-1], -self.alpha)

    def _phi(self, z):
        if self.alpha == 0.0:
            return 2.0 * z
        r2 = np.sum(z * z, axis=-1)
        return (2.0 / (self.alpha * r2 * (1.0 - self.alpha * r2)))[..., None] * z

    def _grad_minus(self, z):
        return 4.0 * min(self.alpha, 0.0) * z


class Mercator(Metric):
    """Mercator chart of the unit sphere: ``g(z) = cosh^-2(z.e1)``."""

    tag = "mercator"

    def _g(self, z):
        return np.cosh(z[..., 0]) ** -2

    def _sqrt_g(self, z):
        return 1.0 / np.cosh(z[..., 0])

    def _grad_sqrt_g(self, z):
        x = z[..., 0]
        return _vec(-np.tanh(x) / np.cosh(x), np.zeros_like(x))

    def _half_grad_ln_g(self, z):
        x = z[..., 0]
        return _vec(-np.tanh(x), np.zeros_like(x))

    def _s0(self, z):
        return np.ones(z.shape[:-1])

    def _phi(self, z):
        x = z[..., 0]
        return _vec(np.tanh(x), np.zeros_like(x))

    def _grad_minus(self, z):
        x = z[..., 0]
        return _vec(-x, np.zeros_like(x))


class Catenoid(Metric):
    """Conformal catenoid chart: ``g(z) = cosh^2(z.e1)``."""

    tag = "catenoid"

    def _g(self, z):
        return np.cosh(z[..., 0]) ** 2

    def _sqrt_g(self, z):
        return np.cosh(z[..., 0])

    def _grad_sqrt_g(self, z):
        x = z[..., 0]
        return _vec(np.sinh(x), np.zeros_like(x))

    def _half_grad_ln_g(self, z):
        x = z[..., 0]
        return _vec(np.tanh(x), np.zeros_like(x))

    def _s0(self, z):
        return -np.cosh(z[..., 0]) ** -4

    def _phi(self, z):
        x = z[..., 0]
        return _vec(0.5 * (x + np.sinh(x) * np.cosh(x)), np.zeros_like(x))


class Torus(Metric):
    """Conformal torus chart with tube radius 1 and ``s = sqrt(R^2 - 1)``.

    ``g(z) = s^2 / (sqrt(s^2 + 1) - cos(z.e2))^2`` on the universal cover R^2.
    """

    def __init__(self, s: float):
        if not s > 0:
            raise ValueError("Torus requires s > 0")
        self.s = float(s)
        self.c = math.sqrt(self.s**2 + 1.0)
        self.tag = f"torus:{self.s!r}"

    def _den(self, z):
        return self.c - np.cos(z[..., 1])

    def _g(self, z):
        return self.s**2 / self._den(z) ** 2

    def _sqrt_g(self, z):
        return self.s / self._den(z)

    def _grad_sqrt_g(self, z):
        y = z[..., 1]
        return _vec(np.zeros_like(y), -self.s * np.sin(y) / self._den(z) ** 2)

    def _half_grad_ln_g(self, z):
        y = z[..., 1]
        return _vec(np.zeros_like(y), -np.sin(y) / self._den(z))

    def _s0(self, z):
        return (self.c * np.cos(z[..., 1]) - 1.0) / self.s**2

    def _phi(self, z):
        y = z[..., 1]
        k = (self.c + 1.0) / self.s
        # add pi per period so the antiderivative stays continuous across y = pi (mod 2 pi)
        branch = np.arctan(k * np.tan(0.5 * y)) + np.pi * np.floor((y + np.pi) / (2.0 * np.pi))
        second = 2.0 * self.c / self.s * branch + np.sin(y) / self._den(z)
        return _vec(np.zeros_like(y), second)

    def _grad_minus(self, z):
        y = z[..., 1]
        return _vec(np.zeros_like(y), -self.s * y / (self.c - 1.0) ** 2)


def parse_metric(tag: str) -> Metric:
    """Build a metric from its config tag, e.g. ``"mu:1"`` or ``"torus:1"``."""
    name, _, arg = tag.strip().lower().partition(":")
    try:
        if name == "euclidean":
            return Euclidean()
        if name == "mu":
            return MuFamily(float(arg))
        if name == "alpha":
            return AlphaFamily(float(arg))
        if name == "mercator":
            return Mercator()
        if name == "catenoid":
            return Catenoid()
        if name == "torus":
            return Torus(float(arg))
        if name == "axisym":
            return Axisymmetric(int(arg))
    except ValueError as exc:
        raise ValueError(f"bad metric tag {tag!r}: {exc}") from None
    raise ValueError(f"unknown metric tag {tag!r}")


# functional aliases ---------------------------------------------------------

def eval_g(m: Metric, z):
    return m.g(z)


def grad_sqrt_g(m: Metric, z):
    return m.grad_sqrt_g(z)


def half_nu_grad_ln_g(m: Metric, z, nu):
    return m.half_nu_grad_ln_g(z, nu)


def split_gradients(m: Metric) -> SplitGradients:
    return m.split_gradients()


def sectional_curvature(m: Metric, z):
    return m.sectional_curvature(z)


def area_potential(m: Metric, z):
    return m.area_potential(z)


def domain_contains(m: Metric, z) -> bool:
    return bool(np.all(m.contains(z)))
