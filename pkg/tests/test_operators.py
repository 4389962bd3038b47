import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from monopole_algebra import fields
from monopole_algebra.fields import PointSet, SpherePoint, make_grid, random_points
from monopole_algebra.monopole import (PhysicalParams, angular_momentum_gauged, geometric_momentum,
                                       geometric_momentum_gauged, scaled_by_r)
from monopole_algebra.operators import (FirstOrderOperator, NotFirstOrderError, OperatorError, apply,
                                        coefficient_values, commutator, compose, conjugate, cross, frame_dot,
                                        lie_cross, multiplication, operator_equal, partial, zero_operator)

GRID = make_grid(20, 40, 0.15, "full")
P = PhysicalParams()

_BASIS = (
    lambda c: c.one,
    lambda c: c.r,
    lambda c: c.cos_theta,
    lambda c: c.sin_theta * c.cos_phi,
    lambda c: c.sin_phi * c.r,
    lambda c: c.cos_theta * c.sin_theta * c.sin_phi,
)


def random_operator(weights, label="O"):
    """Polynomial-coefficient operator; ``weights`` has shape (4, len(_BASIS))."""
    w = np.asarray(weights, complex).reshape(4, len(_BASIS))

    def slot(k):
        def fn(c):
            out = c.zero
            for b, wk in zip(_BASIS, w[k]):
                if wk:
                    out = out + b(c) * wk
            return out
        return fn
    return FirstOrderOperator(*(slot(k) for k in range(4)), label=label)


_weights = st.lists(st.floats(-1, 1, allow_nan=False), min_size=4 * len(_BASIS), max_size=4 * len(_BASIS))
_POINTS = random_points(30, seed=8)


def test_partial_phi_on_harmonic():
    f = fields.test_function("harmonic_m+1")
    pts = random_points(10, seed=1)
    out = apply(partial("phi"), f, pts, 2)
    assert np.allclose(out.value, 1j * f(pts), atol=1e-14)


def test_pi_z_on_constant():
    one = fields.test_function("one")
    pz = geometric_momentum(P)[2]
    v = apply(pz, one, PointSet.from_points([SpherePoint(1, math.pi / 2, 0.3)]), 1).value
    assert abs(v[0]) < 1e-15
    v = apply(pz, one, PointSet.from_points([SpherePoint(1, math.pi / 3, 0.3)]), 1).value
    assert v[0] == pytest.approx(0.5j, abs=1e-15)


def test_pi_z_theta_coefficient():
    th = np.linspace(0.3, 2.8, 7)
    vals = coefficient_values(geometric_momentum(P)[2], PointSet(np.ones(7), th, np.zeros(7)))
    assert np.allclose(vals["theta"], 1j * np.sin(th), atol=1e-15)
    assert np.all(vals["r"] == 0)


def test_apply_needs_order():
    with pytest.raises(OperatorError):
        apply(partial("phi"), fields.test_function("one"), _POINTS, 0)


def test_canonical_commutator():
    theta = multiplication(lambda c: c.theta, "theta")
    rep = operator_equal(commutator(partial("theta"), theta), multiplication(lambda c: c.one), GRID, 1e-14)
    assert rep.passed and rep.max_abs_residual == 0.0


def test_partials_commute():
    rep = operator_equal(commutator(partial("theta"), partial("phi")), zero_operator(), GRID, 1e-14)
    assert rep.passed


def test_flat_angular_momentum_commutator():
    lx, ly, lz = angular_momentum_gauged(P.with_mu(0.0), "north")
    rep = operator_equal(commutator(lx, ly), lz * 1j, GRID, 1e-10)
    assert rep.passed, rep.max_abs_residual


def test_conjugate_trivial_and_gauge_shift():
    d_phi = partial("phi")
    rep = operator_equal(conjugate(d_phi, lambda c: c.zero), d_phi, GRID, 1e-15)
    assert rep.passed
    mu, hb = 0.5, 1.0
    lhs = conjugate(d_phi * (-1j * hb), lambda c: c.phi * (2 * mu / hb))
    rhs = FirstOrderOperator(phi=lambda c: c.const(-1j * hb), mult=lambda c: c.const(2 * mu))
    assert operator_equal(lhs, rhs, GRID, 1e-14).passed


def test_operator_equal_basic_cases():
    d_th = partial("theta")
    same = operator_equal(d_th, d_th, GRID, 1e-10)
    assert same.passed and same.max_abs_residual == 0 and same.grid_size == len(GRID)
    diff = operator_equal(d_th, partial("phi"), GRID, 1e-10)
    assert not diff.passed and diff.max_abs_residual == pytest.approx(1.0)
    assert diff.per_coefficient_residuals["theta"] == pytest.approx(1.0)


def test_rpi_commutator_is_minus_i_hbar_l():
    rpi = scaled_by_r(geometric_momentum(P))
    lz = angular_momentum_gauged(P.with_mu(0.0), "north")[2]
    assert operator_equal(commutator(rpi[0], rpi[1]), lz * -1j, GRID, 1e-9).passed


def test_operator_equal_excludes_out_of_patch_points():
    p = P.with_mu(0.5)
    pi_s = geometric_momentum_gauged(p, "south")[0]
    rep = operator_equal(pi_s, pi_s, GRID, 1e-12)
    assert rep.passed
    assert rep.n_excluded > 0 and rep.grid_size + rep.n_excluded == len(GRID)
    d = rep.to_dict()
    assert {"label", "paper_eq", "residual", "tolerance", "pass"} <= set(d)


def test_operator_equal_needs_points():
    with pytest.raises(OperatorError):
        operator_equal(partial("phi"), partial("phi"), PointSet([], [], []))


def test_frame_dot_transversality():
    e_r = [lambda c, i=i: c.e_r[i] for i in range(3)]
    rep = operator_equal(frame_dot(e_r, geometric_momentum(P)), zero_operator(), GRID, 1e-10)
    assert rep.passed


def test_cross_products():
    l0 = angular_momentum_gauged(P.with_mu(0.0), "north")
    for k, op in enumerate(cross(l0, l0)):
        assert operator_equal(op, l0[k] * 1j, GRID, 1e-9).passed
    p = P.with_mu(0.5)
    grid_n = make_grid(20, 40, 0.15, "north")
    la = angular_momentum_gauged(p, "north")
    rpa = scaled_by_r(geometric_momentum_gauged(p, "north"))
    for k, op in enumerate(lie_cross(la, rpa)):
        assert operator_equal(op, rpa[k] * 1j, grid_n, 1e-9).passed


def test_literal_cross_of_different_operators_is_not_first_order():
    # L x (r Pi) taken with literal operator order keeps a second-order part
    l0 = angular_momentum_gauged(P.with_mu(0.0), "north")
    rpi = scaled_by_r(geometric_momentum(P))
    with pytest.raises(NotFirstOrderError):
        cross(l0, rpi)


def test_compose_second_order_part():
    prod = compose(partial("theta"), partial("theta"))
    assert prod.second_order_residual(_POINTS) == pytest.approx(1.0)
    with pytest.raises(NotFirstOrderError):
        prod.first_order_part(_POINTS)
    diff = compose(partial("theta"), partial("phi")) - compose(partial("phi"), partial("theta"))
    assert diff.second_order_residual(_POINTS) == 0
    assert operator_equal(diff.first_order_part(_POINTS), zero_operator(), _POINTS, 1e-15).passed


@given(_weights, _weights, _weights)
def test_jacobi_identity(w1, w2, w3):
    a, b, c = random_operator(w1), random_operator(w2), random_operator(w3)
    jac = (commutator(commutator(a, b), c) + commutator(commutator(b, c), a)
           + commutator(commutator(c, a), b))
    assert operator_equal(jac, zero_operator(), _POINTS, 1e-9).passed


@given(_weights, _weights)
def test_commutator_antisymmetry(w1, w2):
    a, b = random_operator(w1), random_operator(w2)
    rep = operator_equal(commutator(a, b) + commutator(b, a), zero_operator(), _POINTS, 1e-13)
    assert rep.passed, rep.max_abs_residual


@given(_weights, _weights, st.floats(-2, 2), st.floats(-2, 2))
def test_conjugation_is_an_automorphism(w1, w2, s, t):
    a, b = random_operator(w1), random_operator(w2)
    lam = lambda c: c.cos_theta * s + c.phi * t + c.r * c.sin_phi
    lhs = conjugate(commutator(a, b), lam)
    rhs = commutator(conjugate(a, lam), conjugate(b, lam))
    assert operator_equal(lhs, rhs, _POINTS, 1e-10).passed


@given(_weights, _weights)
def test_commutator_matches_double_application(w1, w2):
    a, b = random_operator(w1), random_operator(w2)
    f = fields.test_function("trig_poly_seed2024")
    pts = _POINTS
    closed = apply(commutator(a, b), f, pts, 2).value
    ab = type(f)("ab", lambda c: b.apply_jet(f.build(c.raised()), c))
    ba = type(f)("ba", lambda c: a.apply_jet(f.build(c.raised()), c))
    double = apply(a, ab, pts, 2).value - apply(b, ba, pts, 2).value
    assert np.allclose(closed, double, atol=1e-9 * (1 + np.abs(double).max()))


def test_apply_is_linear():
    op = angular_momentum_gauged(P.with_mu(0.5), "north")[0]
    f, g = fields.test_function("harmonic_m+1"), fields.test_function("cos_theta_e_iphi")
    h = type(f)("f+2g", lambda c: f.build(c) + g.build(c) * (2 - 1j))
    pts = make_grid(6, 6, 0.2, "north").points
    lhs = apply(op, h, pts, 2).value
    rhs = apply(op, f, pts, 2).value + (2 - 1j) * apply(op, g, pts, 2).value
    assert np.allclose(lhs, rhs, atol=1e-13)
