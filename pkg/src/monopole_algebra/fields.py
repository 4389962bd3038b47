"""Sphere geometry: points, the moving frame, evaluation grids and test functions."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from . import jets
from .jets import VARIABLES_2D, VARIABLES_3D, Jet

DEFAULT_THETA_MARGIN = 0.15
DEFAULT_OVERLAP_HALFWIDTH = math.pi / 4


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class SpherePoint:
    """A point off the poles, ``0 < theta < pi``."""

    r: float
    theta: float
    phi: float

    def __post_init__(self):
        if not self.r > 0:
            raise GeometryError(f"radius must be positive, got {self.r}")
        if not 0.0 < self.theta < math.pi:
            raise GeometryError(f"theta={self.theta} is at or beyond a pole")
        object.__setattr__(self, "phi", float(self.phi) % (2 * math.pi))

    def cartesian(self):
        st = math.sin(self.theta)
        return (self.r * st * math.cos(self.phi),
                self.r * st * math.sin(self.phi),
                self.r * math.cos(self.theta))


class PointSet:
    """A batch of sphere points held as parallel arrays.

    Jets built over a ``PointSet`` carry one Taylor expansion per point along
    their leading batch axis.
    """

    def __init__(self, r, theta, phi):
        r, theta, phi = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float),
                                            np.asarray(phi, float))
        if r.ndim != 1:
            raise GeometryError("PointSet expects one-dimensional coordinate arrays")
        if np.any(r <= 0):
            raise GeometryError("radius must be positive")
        if np.any((theta <= 0) | (theta >= math.pi)):
            raise GeometryError("PointSet contains a pole")
        self.r = r.copy()
        self.theta = theta.copy()
        self.phi = np.mod(phi, 2 * math.pi)
        for a in (self.r, self.theta, self.phi):
            a.flags.writeable = False

    @classmethod
    def from_points(cls, points):
        points = list(points)
        return cls([p.r for p in points], [p.theta for p in points], [p.phi for p in points])

    def __len__(self):
        return len(self.r)

    def __getitem__(self, i) -> SpherePoint:
        return SpherePoint(float(self.r[i]), float(self.theta[i]), float(self.phi[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def subset(self, mask) -> "PointSet":
        return PointSet(self.r[mask], self.theta[mask], self.phi[mask])

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, PointSet):
            return NotImplemented
        return (np.array_equal(self.r, other.r) and np.array_equal(self.theta, other.theta)
                and np.array_equal(self.phi, other.phi))

    __hash__ = object.__hash__

    def cartesian(self):
        st = np.sin(self.theta)
        return self.r * st * np.cos(self.phi), self.r * st * np.sin(self.phi), self.r * np.cos(self.theta)


def as_pointset(points) -> PointSet:
    if isinstance(points, PointSet):
        return points
    if isinstance(points, SpherePoint):
        return PointSet([points.r], [points.theta], [points.phi])
    if isinstance(points, Grid):
        return points.points
    return PointSet.from_points(points)


# ---------------------------------------------------------------------------
# moving frame
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Frame:
    e_r: tuple
    e_theta: tuple
    e_phi: tuple


def frame(theta, phi) -> Frame:
    """Cartesian components of (e_r, e_theta, e_phi); works on scalars or arrays."""
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    return Frame(
        e_r=(st * cp, st * sp, ct),
        e_theta=(ct * cp, ct * sp, -st),
        e_phi=(-sp, cp, 0.0 * st),
    )


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

class GaugeDomain(str, enum.Enum):
    NORTH = "north"
    SOUTH = "south"
    OVERLAP = "overlap"
    FULL = "full"


def domain_mask(theta, domain, halfwidth=DEFAULT_OVERLAP_HALFWIDTH):
    domain = GaugeDomain(domain)
    theta = np.asarray(theta)
    if domain is GaugeDomain.NORTH:
        return theta <= math.pi / 2 + halfwidth
    if domain is GaugeDomain.SOUTH:
        return theta >= math.pi / 2 - halfwidth
    if domain is GaugeDomain.OVERLAP:
        return np.abs(theta - math.pi / 2) <= halfwidth
    return np.ones(theta.shape, dtype=bool)


@dataclass(frozen=True)
class Grid:
    points: PointSet
    theta_margin: float
    gauge_domain: GaugeDomain
    overlap_halfwidth: float = DEFAULT_OVERLAP_HALFWIDTH

    def __len__(self):
        return len(self.points)


def make_grid(n_theta: int, n_phi: int, theta_margin: float = DEFAULT_THETA_MARGIN,
              domain="full", r: float = 1.0, overlap_halfwidth: float = DEFAULT_OVERLAP_HALFWIDTH,
              jitter: float = 0.0, seed=None) -> Grid:
    """Tensor grid, uniform in phi and in theta on [margin, pi - margin], cut to ``domain``.

    With ``jitter > 0`` every point is displaced by a seeded uniform offset of at
    most ``jitter`` times the grid spacing; theta stays inside the margin band.
    """
    if n_theta < 2 or n_phi < 2:
        raise GeometryError("n_theta and n_phi must be at least 2")
    if not 0 < theta_margin < math.pi / 2:
        raise GeometryError("theta_margin must lie in (0, pi/2)")
    thetas = np.linspace(theta_margin, math.pi - theta_margin, n_theta)
    phis = np.arange(n_phi) * (2 * math.pi / n_phi)
    tt, pp = np.meshgrid(thetas, phis, indexing="ij")
    tt, pp = tt.ravel(), pp.ravel()
    if jitter:
        rng = np.random.default_rng(seed)
        dt = (thetas[1] - thetas[0]) * jitter
        tt = np.clip(tt + rng.uniform(-dt, dt, tt.shape), theta_margin, math.pi - theta_margin)
        pp = pp + rng.uniform(-1, 1, pp.shape) * jitter * (2 * math.pi / n_phi)
    keep = domain_mask(tt, domain, overlap_halfwidth)
    if not keep.any():
        raise GeometryError(f"grid has no points inside gauge domain {domain!r}")
    pts = PointSet(np.full(keep.sum(), float(r)), tt[keep], pp[keep])
    return Grid(pts, theta_margin, GaugeDomain(domain), overlap_halfwidth)


def random_points(n: int, seed=0, theta_range=(DEFAULT_THETA_MARGIN, math.pi - DEFAULT_THETA_MARGIN),
                  r_range=(0.5, 2.0)) -> PointSet:
    rng = np.random.default_rng(seed)
    return PointSet(rng.uniform(*r_range, n), rng.uniform(*theta_range, n),
                    rng.uniform(0, 2 * math.pi, n))


# ---------------------------------------------------------------------------
# coordinate jets
# ---------------------------------------------------------------------------

class Coords:
    """Coordinate functions and frame components as jets about a point batch.

    This is the evaluation context handed to every operator coefficient
    function. Derived quantities are computed lazily and cached; ``raised()``
    gives the same context one order higher, which the commutator needs.
    In the two-variable mode ``r`` is a constant (the sphere has fixed radius).
    """

    def __init__(self, points, order: int, variables=VARIABLES_3D):
        self.points = as_pointset(points)
        self.order = int(order)
        self.variables = tuple(variables)
        self.cache: dict = {}

    @classmethod
    def at(cls, points, order, variables=VARIABLES_3D):
        return cls(points, order, variables)

    def raised(self, by: int = 1) -> "Coords":
        key = ("raised", by)
        if key not in self.cache:
            self.cache[key] = Coords(self.points, self.order + by, self.variables)
        return self.cache[key]

    def _var(self, name):
        order = max(self.order, 1)
        jet = jets.jet_var(self.points, name, order, self.variables)
        return jet.truncate(self.order) if order != self.order else jet

    @property
    def n(self):
        return len(self.points)

    def const(self, value) -> Jet:
        value = np.broadcast_to(np.asarray(value, dtype=complex), (self.n,))
        return Jet.constant(value, self.order, self.variables, self.points)

    @cached_property
    def zero(self):
        return self.const(0.0)

    @cached_property
    def one(self):
        return self.const(1.0)

    @cached_property
    def r(self):
        return self._var("r")

    @cached_property
    def theta(self):
        return self._var("theta")

    @cached_property
    def phi(self):
        return self._var("phi")

    @cached_property
    def sin_theta(self):
        return jets.sin(self.theta)

    @cached_property
    def cos_theta(self):
        return jets.cos(self.theta)

    @cached_property
    def sin_phi(self):
        return jets.sin(self.phi)

    @cached_property
    def cos_phi(self):
        return jets.cos(self.phi)

    @cached_property
    def inv_r(self):
        return jets.reciprocal(self.r)

    @cached_property
    def inv_sin_theta(self):
        return jets.reciprocal(self.sin_theta)

    @cached_property
    def e_r(self):
        return (self.sin_theta * self.cos_phi, self.sin_theta * self.sin_phi, self.cos_theta)

    @cached_property
    def e_theta(self):
        return (self.cos_theta * self.cos_phi, self.cos_theta * self.sin_phi, -self.sin_theta)

    @cached_property
    def e_phi(self):
        return (-self.sin_phi, self.cos_phi, self.zero)

    @cached_property
    def xyz(self):
        return tuple(self.r * e for e in self.e_r)


# ---------------------------------------------------------------------------
# test functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """A smooth, 2*pi-periodic function on the punctured sphere.

    ``build`` maps a :class:`Coords` context to the jet of the function.
    """

    __test__ = False  # keep pytest from collecting this class

    id: str
    build: Callable[[Coords], Jet] = field(repr=False)
    band_limit: int = 0

    def jet(self, points, order: int, variables=VARIABLES_3D) -> Jet:
        return self.build(Coords(points, order, variables))

    def __call__(self, points):
        return self.jet(points, 0).value


def _harmonic(m):
    def build(c: Coords):
        out = jets.exp(c.phi * (1j * m))
        for _ in range(abs(m)):
            out = out * c.sin_theta
        return out
    return build


def _random_trig_poly(seed):
    rng = np.random.default_rng(seed)
    terms = [(j, m, complex(*rng.normal(size=2))) for j in range(3) for m in range(-2, 3)]

    def build(c: Coords):
        out = c.zero
        for j, m, w in terms:
            t = jets.exp(c.phi * (1j * m)) * w
            for _ in range(j):
                t = t * c.cos_theta
            for _ in range(abs(m)):
                t = t * c.sin_theta
            out = out + t
        return out
    return build


def test_function_catalog(seed: int = 2024) -> list[TestFunction]:
    """Constant, e^{im phi} sin^|m| theta for |m| <= 2, cos(theta) e^{i phi},
    r^2 cos(theta), and a seeded random trigonometric polynomial."""
    fns = [TestFunction("one", lambda c: c.one, 0)]
    for m in range(-2, 3):
        fns.append(TestFunction(f"harmonic_m{m:+d}", _harmonic(m), abs(m)))
    fns.append(TestFunction("cos_theta_e_iphi", lambda c: c.cos_theta * jets.exp(c.phi * 1j), 2))
    fns.append(TestFunction("r2_cos_theta", lambda c: c.r * c.r * c.cos_theta, 1))
    fns.append(TestFunction(f"trig_poly_seed{seed}", _random_trig_poly(seed), 4))
    return fns


def test_function(name: str, seed: int = 2024) -> TestFunction:
    for f in test_function_catalog(seed):
        if f.id == name:
            return f
    raise KeyError(name)


__all__ = [
    "SpherePoint", "PointSet", "Frame", "frame", "Grid", "GaugeDomain", "make_grid",
    "domain_mask", "random_points", "Coords", "TestFunction", "test_function_catalog",
    "test_function", "VARIABLES_2D", "VARIABLES_3D",
]


# these are library functions, not tests, even when imported into a test module
test_function_catalog.__test__ = False
test_function.__test__ = False
