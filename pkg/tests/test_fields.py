import math

import numpy as np
import pytest

from monopole_algebra import fields
from monopole_algebra.fields import (Coords, GeometryError, PointSet, SpherePoint, frame, make_grid,
                                     random_points)
from monopole_algebra.jets import VARIABLES_2D


def test_sphere_point_excludes_poles():
    for bad in (0.0, math.pi, -0.1, 4.0):
        with pytest.raises(GeometryError):
            SpherePoint(1.0, bad, 0.0)
    with pytest.raises(GeometryError):
        SpherePoint(0.0, 1.0, 0.0)


def test_cartesian_image_lies_on_sphere():
    pts = random_points(500, seed=1)
    x, y, z = pts.cartesian()
    assert np.allclose(x ** 2 + y ** 2 + z ** 2, pts.r ** 2, atol=1e-13, rtol=0)
    p = SpherePoint(2.0, 0.4, 5.0)
    assert sum(c * c for c in p.cartesian()) == pytest.approx(4.0, abs=1e-13)


def test_frame_is_orthonormal_and_right_handed():
    pts = random_points(1000, seed=2)
    f = frame(pts.theta, pts.phi)
    vecs = [np.stack(np.broadcast_arrays(*v)) for v in (f.e_r, f.e_theta, f.e_phi)]
    for i in range(3):
        for j in range(3):
            dot = np.sum(vecs[i] * vecs[j], axis=0)
            assert np.allclose(dot, 1.0 if i == j else 0.0, atol=1e-13)
    assert np.allclose(np.cross(vecs[0], vecs[1], axis=0), vecs[2], atol=1e-13)
    assert np.allclose(vecs[2], np.stack([-np.sin(pts.phi), np.cos(pts.phi), np.zeros(len(pts))]), atol=1e-15)


def test_grid_full_respects_margin():
    g = make_grid(3, 4, 0.3, "full")
    assert len(g) == 12
    assert np.all(g.points.theta >= 0.3) and np.all(g.points.theta <= math.pi - 0.3)


def test_grid_domains():
    a = math.pi / 4
    north = make_grid(8, 8, 0.2, "north")
    assert np.all(north.points.theta <= math.pi / 2 + a)
    south = make_grid(8, 8, 0.2, "south")
    assert np.all(south.points.theta >= math.pi / 2 - a)
    ov = make_grid(20, 40, 0.15, "overlap")
    assert np.all(np.abs(ov.points.theta - math.pi / 2) <= a + 1e-15)
    assert len(ov) > 0


def test_grid_errors():
    with pytest.raises(GeometryError):
        make_grid(1, 4)
    with pytest.raises(GeometryError):
        make_grid(4, 4, 0.0)
    with pytest.raises(GeometryError):
        make_grid(2, 4, 0.2, "overlap", overlap_halfwidth=0.01)


def test_grid_jitter_is_seeded():
    a = make_grid(5, 6, jitter=0.3, seed=4)
    b = make_grid(5, 6, jitter=0.3, seed=4)
    c = make_grid(5, 6, jitter=0.3, seed=5)
    assert a.points == b.points
    assert not (a.points == c.points)
    assert np.all(a.points.theta >= 0.15)


def test_catalog_contents():
    cat = fields.test_function_catalog()
    ids = [f.id for f in cat]
    assert len(cat) >= 7
    for want in ["one", "harmonic_m-2", "harmonic_m-1", "harmonic_m+0", "harmonic_m+1", "harmonic_m+2",
                 "cos_theta_e_iphi"]:
        assert want in ids
    assert any(i.startswith("trig_poly_seed") for i in ids)


def test_constant_function_jet():
    one = fields.test_function("one")
    j = one.jet(SpherePoint(1.0, 0.8, 0.3), 2)
    assert j.value == 1
    assert np.all(j.coeffs[1:] == 0)


def test_harmonic_at_equator():
    f = fields.test_function("harmonic_m+1")
    j = f.jet(SpherePoint(1.0, math.pi / 2, 0.0), 1)
    assert j.value == pytest.approx(1)
    assert j.coeff({"phi": 1}) == pytest.approx(1j)
    assert abs(j.coeff({"theta": 1})) < 1e-15


def test_catalog_functions_are_single_valued():
    pts = random_points(50, seed=3)
    shifted = PointSet(pts.r, pts.theta, pts.phi + 2 * math.pi)
    for f in fields.test_function_catalog():
        assert np.allclose(f(pts), f(shifted), atol=1e-13, rtol=0), f.id


def test_seeded_polynomial_depends_on_seed():
    p = random_points(5, seed=0)
    a = fields.test_function("trig_poly_seed1", seed=1)(p)
    b = fields.test_function("trig_poly_seed2", seed=2)(p)
    assert not np.allclose(a, b)
    assert np.array_equal(a, fields.test_function("trig_poly_seed1", seed=1)(p))


def test_coords_jets_match_closed_forms():
    pts = random_points(20, seed=5)
    c = Coords(pts, 2)
    x, y, z = pts.cartesian()
    assert np.allclose(c.xyz[0].value, x) and np.allclose(c.xyz[2].value, z)
    assert np.allclose(c.inv_sin_theta.value, 1 / np.sin(pts.theta))
    # d/dtheta of e_r_z = cos(theta) is -sin(theta)
    assert np.allclose(c.e_r[2].coeff({"theta": 1}), -np.sin(pts.theta))
    assert c.raised().order == 3
    c2 = Coords(pts, 2, VARIABLES_2D)
    assert c2.r.order == 2 and np.allclose(c2.r.value, pts.r)
