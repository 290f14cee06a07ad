"""Metric catalog: closed-form examples and finite-difference properties."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confcurves.metric import (
    AlphaFamily,
    Axisymmetric,
    Catenoid,
    DomainError,
    Euclidean,
    Mercator,
    MuFamily,
    Torus,
    UnsupportedSplit,
    area_potential,
    domain_contains,
    eval_g,
    grad_sqrt_g,
    half_nu_grad_ln_g,
    parse_metric,
    sectional_curvature,
    split_gradients,
)

from conftest import FAMILIES, SPLITTABLE, sample_points

N_SAMPLES = 120


def fd_grad(f, z, h=1e-5):
    ex, ey = np.array([h, 0.0]), np.array([0.0, h])
    return np.stack([(f(z + ex) - f(z - ex)) / (2 * h), (f(z + ey) - f(z - ey)) / (2 * h)], axis=-1)


def fd_jacobian(f, z, h=1e-5):
    """Jacobian of a vector field, shape (n, 2, 2) with [i, k] = d f_i / d z_k."""
    ex, ey = np.array([h, 0.0]), np.array([0.0, h])
    return np.stack([(f(z + ex) - f(z - ex)) / (2 * h), (f(z + ey) - f(z - ey)) / (2 * h)], axis=-1)


# examples -------------------------------------------------------------------


def test_eval_g_examples():
    assert eval_g(MuFamily(1), [0.0, 1.0]) == pytest.approx(1.0)
    assert eval_g(MuFamily(1), [0.0, 2.0]) == pytest.approx(0.25)
    assert eval_g(AlphaFamily(-1), [0.0, 0.0]) == pytest.approx(4.0)


def test_eval_g_outside_domain():
    with pytest.raises(DomainError):
        eval_g(MuFamily(1), [0.0, -1.0])
    with pytest.raises(DomainError):
        eval_g(AlphaFamily(1), [[0.0, 0.0], [1.0, 0.1]])


def test_grad_sqrt_g_examples():
    assert np.allclose(grad_sqrt_g(MuFamily(0), [[3.0, 0.5], [-1.0, 2.0]]), 0.0)
    assert np.allclose(grad_sqrt_g(MuFamily(1), [0.0, 2.0]), [0.0, -0.25])
    assert np.allclose(grad_sqrt_g(AlphaFamily(-1), [1.0, 0.0]), [-1.0, 0.0])


def test_half_nu_grad_ln_g_examples():
    assert half_nu_grad_ln_g(MuFamily(0), [1.0, 2.0], [0.6, 0.8]) == 0.0
    assert half_nu_grad_ln_g(MuFamily(1), [0.0, 2.0], [0.0, -1.0]) == pytest.approx(0.5)
    assert half_nu_grad_ln_g(Torus(1), [0.0, math.pi / 2], [0.0, 1.0]) == pytest.approx(-1 / math.sqrt(2))


def test_split_examples():
    z = np.array([[0.3, 1.2], [-0.7, 0.4]])
    assert np.allclose(split_gradients(MuFamily(1)).grad_minus(z), 0.0)
    assert np.allclose(split_gradients(AlphaFamily(-1)).grad_minus(z), -4 * z)
    assert np.allclose(split_gradients(Mercator()).grad_minus(z), np.column_stack([-z[:, 0], 0 * z[:, 0]]))


@pytest.mark.parametrize("mu", [-0.5, -0.01, -0.99])
def test_split_unsupported(mu):
    with pytest.raises(UnsupportedSplit):
        split_gradients(MuFamily(mu))


def test_sectional_curvature_examples():
    z = sample_points(MuFamily(1), 20)
    assert np.allclose(sectional_curvature(MuFamily(1), z), -1.0)
    for alpha in (-1.0, 0.0, 0.5):
        assert np.allclose(sectional_curvature(AlphaFamily(alpha), sample_points(AlphaFamily(alpha), 10)), -alpha)
    assert sectional_curvature(Catenoid(), [0.0, 0.0]) == pytest.approx(-1.0)


def test_area_potential_examples():
    assert np.allclose(area_potential(MuFamily(0), [3.0, 1.0]), [0.0, 1.0])
    assert np.allclose(area_potential(MuFamily(1), [0.0, 2.0]), [0.0, -0.5])
    assert np.allclose(area_potential(AlphaFamily(0), [1.0, 1.0]), [2.0, 2.0])


def test_domain_contains_examples():
    assert not domain_contains(MuFamily(1), [0.0, -1.0])
    assert domain_contains(AlphaFamily(1), [0.5, 0.5])
    assert not domain_contains(AlphaFamily(1), [1.0, 0.1])
    assert domain_contains(Mercator(), [[50.0, -3.0], [0.0, 0.0]])


def test_parameter_invariants():
    with pytest.raises(ValueError):
        Torus(0.0)
    with pytest.raises(ValueError):
        Axisymmetric(2)


@pytest.mark.parametrize(
    "tag,cls",
    [("euclidean", Euclidean), ("mu:1", MuFamily), ("alpha:-1", AlphaFamily), ("mercator", Mercator),
     ("catenoid", Catenoid), ("torus:1", Torus), ("axisym:3", Axisymmetric)],
)
def test_parse_metric(tag, cls):
    assert isinstance(parse_metric(tag), cls)


@pytest.mark.parametrize("tag", ["", "mu", "mu:x", "sphere", "torus:-1"])
def test_parse_metric_rejects(tag):
    with pytest.raises(ValueError):
        parse_metric(tag)


def test_euclidean_matches_mu0_on_half_plane():
    z = sample_points(MuFamily(0), N_SAMPLES)
    e, m = Euclidean(), MuFamily(0)
    for name in ("g", "sqrt_g", "grad_sqrt_g", "half_grad_ln_g", "sectional_curvature", "area_potential"):
        assert np.allclose(getattr(e, name)(z), getattr(m, name)(z), rtol=0, atol=1e-15), name


def test_mu_half_uses_log_potential():
    z = np.array([[0.0, math.e]])
    assert area_potential(MuFamily(0.5), z)[0, 1] == pytest.approx(1.0)


# finite-difference properties over the whole catalog ------------------------


@pytest.mark.parametrize("label,m", FAMILIES, ids=[k for k, _ in FAMILIES])
def test_grad_sqrt_g_matches_fd(label, m):
    z = sample_points(m, N_SAMPLES, seed=1)
    exact = m.grad_sqrt_g(z)
    fd = fd_grad(lambda p: np.sqrt(m.g(p)), z)
    scale = np.maximum(np.abs(exact), np.abs(m.sqrt_g(z))[:, None])
    assert np.all(np.abs(exact - fd) <= 1e-6 * scale + 1e-12)


@pytest.mark.parametrize("label,m", FAMILIES, ids=[k for k, _ in FAMILIES])
def test_half_grad_ln_g_identity(label, m):
    z = sample_points(m, N_SAMPLES, seed=2)
    lhs = m.half_grad_ln_g(z)
    rhs = m.grad_sqrt_g(z) / m.sqrt_g(z)[:, None]
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-14)
    fd = fd_grad(lambda p: 0.5 * np.log(m.g(p)), z)
    assert np.allclose(lhs, fd, rtol=1e-6, atol=1e-8)


@pytest.mark.parametrize("label,m", FAMILIES, ids=[k for k, _ in FAMILIES])
def test_sectional_curvature_matches_fd(label, m):
    z = sample_points(m, N_SAMPLES, seed=3)
    h = 1e-3
    lng = lambda p: np.log(m.g(p))  # noqa: E731
    ex, ey = np.array([h, 0.0]), np.array([0.0, h])
    lap = (lng(z + ex) + lng(z - ex) + lng(z + ey) + lng(z - ey) - 4 * lng(z)) / h**2
    fd = -lap / (2 * m.g(z))
    exact = m.sectional_curvature(z)
    assert np.all(np.abs(exact - fd) <= 1e-4 * np.abs(exact) + 1e-6)


@pytest.mark.parametrize("label,m", FAMILIES, ids=[k for k, _ in FAMILIES])
def test_area_potential_divergence(label, m):
    z = sample_points(m, 4 * N_SAMPLES, seed=4)
    z = z[np.hypot(z[:, 0], z[:, 1]) > 0.2][:N_SAMPLES]  # the alpha potentials are singular at 0
    assert len(z) >= 100
    J = fd_jacobian(m.area_potential, z)
    div = J[:, 0, 0] + J[:, 1, 1]
    assert np.allclose(div, m.g(z), rtol=1e-5, atol=0)


@pytest.mark.parametrize("label,m", SPLITTABLE, ids=[k for k, _ in SPLITTABLE])
def test_split_sum_identity(label, m):
    z = sample_points(m, N_SAMPLES, seed=5)
    sg = m.split_gradients()
    assert np.allclose(sg.grad_plus(z) + sg.grad_minus(z), m.grad_sqrt_g(z), rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("label,m", SPLITTABLE, ids=[k for k, _ in SPLITTABLE])
def test_split_semidefinite(label, m):
    z = sample_points(m, N_SAMPLES, seed=6)
    sg = m.split_gradients()
    for grad, sign in ((sg.grad_plus, 1.0), (sg.grad_minus, -1.0)):
        H = fd_jacobian(grad, z)
        H = 0.5 * (H + np.swapaxes(H, 1, 2))
        eig = np.linalg.eigvalsh(sign * H)
        scale = np.maximum(1.0, np.abs(eig).max(axis=1))
        assert np.all(eig.min(axis=1) >= -1e-6 * scale), label


@settings(max_examples=200, deadline=None)
@given(
    alpha=st.floats(-3, 3),
    frac=st.floats(0.0, 0.95),
    theta=st.floats(0.0, 2 * math.pi),
)
def test_alpha_family_grad_property(alpha, frac, theta):
    m = AlphaFamily(alpha)
    rad = frac / math.sqrt(alpha) if alpha > 0 else 2 * frac
    z = rad * np.array([math.cos(theta), math.sin(theta)])
    exact = m.grad_sqrt_g(z)
    fd = fd_grad(lambda p: m.sqrt_g(p), z[None, :])[0]
    assert np.allclose(exact, fd, rtol=1e-6, atol=1e-7 * m.sqrt_g(z))


@settings(max_examples=200, deadline=None)
@given(mu=st.floats(-3, 3), y=st.floats(0.2, 5.0))
def test_mu_family_s0_property(mu, y):
    m = MuFamily(mu)
    assert m.sectional_curvature([0.0, y]) == pytest.approx(-mu * y ** (2 * (mu - 1)), rel=1e-12, abs=1e-300)
