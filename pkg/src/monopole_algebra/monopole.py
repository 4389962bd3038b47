"""Operators of a charge on a sphere around a magnetic monopole.

All vector operators are returned as lists of three Cartesian components.
Coordinates ``x, y, z`` enter as multiplication by ``r sin(theta) cos(phi)``
etc.; the radius is the jet variable ``r`` so that ``[r^2, .]`` is meaningful.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .fields import (DEFAULT_OVERLAP_HALFWIDTH, Coords, GaugeDomain, as_pointset, domain_mask,
                     make_grid)
from .jets import Jet
from .operators import (FirstOrderOperator, apply_coefficients, compose_mult, frame_dot,
                        multiplication)


class GaugeError(ValueError):
    """Point outside a gauge patch, or inconsistent gauge constants."""


@dataclass(frozen=True)
class PhysicalParams:
    """Physical constants in Gaussian units; ``mu = q g / c`` is derived."""

    hbar: float = 1.0
    c: float = 1.0
    q: float = -1.0
    g: float = -0.5
    r: float = 1.0

    def __post_init__(self):
        if not (self.hbar > 0 and self.c > 0 and self.r > 0):
            raise ValueError("hbar, c and r must be positive")

    @property
    def mu(self) -> float:
        return self.q * self.g / self.c

    @classmethod
    def from_mu(cls, mu: float, hbar=1.0, c=1.0, q=-1.0, r=1.0) -> "PhysicalParams":
        """Choose the magnetic charge so that ``q g / c == mu``."""
        if q == 0:
            if mu != 0:
                raise ValueError("mu != 0 needs a nonzero electric charge")
            return cls(hbar, c, q, 0.0, r)
        return cls(hbar, c, q, mu * c / q, r)

    def with_mu(self, mu: float) -> "PhysicalParams":
        return PhysicalParams.from_mu(mu, self.hbar, self.c, self.q, self.r)

    def as_dict(self):
        return {"hbar": self.hbar, "c": self.c, "q": self.q, "g": self.g, "r": self.r, "mu": self.mu}


PRESETS = {
    "natural": PhysicalParams(),
    # Cooper pairs carry twice the electron charge.
    "cooper_pair": PhysicalParams(q=-2.0, g=-0.25),
}


class Patch(str, enum.Enum):
    NORTH = "north"
    SOUTH = "south"


@dataclass(frozen=True)
class GaugeChoice:
    which: Patch = Patch.NORTH
    overlap_halfwidth: float = DEFAULT_OVERLAP_HALFWIDTH

    def __post_init__(self):
        object.__setattr__(self, "which", Patch(self.which))
        if not 0 < self.overlap_halfwidth < math.pi / 2:
            raise GaugeError("overlap half-width must lie in (0, pi/2)")

    def contains(self, theta):
        return domain_mask(theta, GaugeDomain(self.which.value), self.overlap_halfwidth)


NORTH = GaugeChoice(Patch.NORTH)
SOUTH = GaugeChoice(Patch.SOUTH)


def as_gauge(gauge) -> GaugeChoice:
    if isinstance(gauge, GaugeChoice):
        return gauge
    return GaugeChoice(Patch(gauge))


def _component_labels(name):
    return [f"{name}_{a}" for a in "xyz"]


# ---------------------------------------------------------------------------
# gradient splitting
# ---------------------------------------------------------------------------

def grad_cartesian(params: PhysicalParams | None = None):
    """Cartesian gradient written in spherical coordinates, e_r d_r + e_t/r d_t + e_p/(r sin t) d_p."""
    ops = []
    for i, lab in enumerate(_component_labels("grad")):
        ops.append(FirstOrderOperator(
            r=lambda c, i=i: c.e_r[i],
            theta=lambda c, i=i: c.e_theta[i] * c.inv_r,
            phi=lambda c, i=i: c.e_phi[i] * c.inv_r * c.inv_sin_theta,
            label=lab))
    return ops


def grad_parallel(params: PhysicalParams | None = None):
    """Radial part e_r (d_r + 1/r)."""
    return [FirstOrderOperator(r=lambda c, i=i: c.e_r[i], mult=lambda c, i=i: c.e_r[i] * c.inv_r, label=lab)
            for i, lab in enumerate(_component_labels("grad_par"))]


def grad_parallel_symmetrized(params: PhysicalParams | None = None):
    """e_r times (1/2)(e_r . grad + grad . e_r), built by operator composition."""
    grad = grad_cartesian(params)
    e_r = [lambda c, i=i: c.e_r[i] for i in range(3)]
    radial = frame_dot(e_r, grad) * 0.5
    return [radial.times(e_r[i], label=lab) for i, lab in enumerate(_component_labels("grad_par_sym"))]


def grad_perp(params: PhysicalParams | None = None):
    """Transverse part e_t/r d_t + e_p/(r sin t) d_p - e_r/r."""
    return [FirstOrderOperator(
        theta=lambda c, i=i: c.e_theta[i] * c.inv_r,
        phi=lambda c, i=i: c.e_phi[i] * c.inv_r * c.inv_sin_theta,
        mult=lambda c, i=i: -c.e_r[i] * c.inv_r,
        label=lab) for i, lab in enumerate(_component_labels("grad_perp"))]


def grad_perp_symmetrized(params: PhysicalParams | None = None):
    """Symmetric ordering of e_theta d_theta and e_phi d_phi / sin(theta), divided by 2r.

    The theta derivative is symmetrized with the surface measure, i.e.
    ``(1/sin) d_theta o (sin e_theta)``; without it a stray
    ``-cot(theta) e_theta / (2r)`` term survives.
    """
    from .operators import partial
    d_th, d_ph = partial("theta"), partial("phi")
    ops = []
    for i, lab in enumerate(_component_labels("grad_perp_sym")):
        e_t = (lambda c, i=i: c.e_theta[i])
        e_p = (lambda c, i=i: c.e_phi[i])
        sin_e_t = (lambda c, i=i: c.sin_theta * c.e_theta[i])
        inv_sin = (lambda c: c.inv_sin_theta)
        half_over_r = (lambda c: c.inv_r * 0.5)
        body = (d_th.times(e_t)
                + compose_mult(d_th, sin_e_t).times(inv_sin)
                + d_ph.times(lambda c, i=i: c.e_phi[i] * c.inv_sin_theta)
                + compose_mult(d_ph, e_p).times(inv_sin))
        ops.append(body.times(half_over_r, label=lab))
    return ops


# ---------------------------------------------------------------------------
# geometric momentum and gauge potentials
# ---------------------------------------------------------------------------

def geometric_momentum(params: PhysicalParams):
    """Cartesian components of the geometric momentum -i hbar grad_perp, as printed."""
    hb = params.hbar
    px = FirstOrderOperator(
        theta=lambda c: c.cos_theta * c.cos_phi * c.inv_r * (-1j * hb),
        phi=lambda c: -c.sin_phi * c.inv_sin_theta * c.inv_r * (-1j * hb),
        mult=lambda c: -c.sin_theta * c.cos_phi * c.inv_r * (-1j * hb),
        label="Pi_x")
    py = FirstOrderOperator(
        theta=lambda c: c.cos_theta * c.sin_phi * c.inv_r * (-1j * hb),
        phi=lambda c: c.cos_phi * c.inv_sin_theta * c.inv_r * (-1j * hb),
        mult=lambda c: -c.sin_theta * c.sin_phi * c.inv_r * (-1j * hb),
        label="Pi_y")
    pz = FirstOrderOperator(
        theta=lambda c: c.sin_theta * c.inv_r * (1j * hb),
        mult=lambda c: c.cos_theta * c.inv_r * (1j * hb),
        label="Pi_z")
    return [px, py, pz]


def _mask_outside(jet: Jet, inside):
    if np.all(inside):
        return jet
    coeffs = jet.coeffs.copy()
    coeffs[~inside] = np.nan
    return Jet(coeffs, jet.order, jet.variables, jet.base)


def a_phi_fn(params: PhysicalParams, gauge, strict: bool = True):
    """Coefficient function for the azimuthal potential of the chosen patch.

    With ``strict`` the jet is NaN at points outside the patch.
    """
    gauge = as_gauge(gauge)
    g = params.g

    def fn(c: Coords):
        if gauge.which is Patch.NORTH:
            prof = (1.0 - c.cos_theta) * c.inv_sin_theta
        else:
            prof = -(1.0 + c.cos_theta) * c.inv_sin_theta
        out = prof * c.inv_r * g
        return _mask_outside(out, gauge.contains(c.points.theta)) if strict else out
    return fn


def vector_potential_fns(params: PhysicalParams, gauge, strict: bool = True):
    """Cartesian components (-A_phi sin phi, A_phi cos phi, 0) as coefficient functions."""
    a_phi = a_phi_fn(params, gauge, strict)
    return [lambda c: -a_phi(c) * c.sin_phi,
            lambda c: a_phi(c) * c.cos_phi,
            lambda c: c.zero]


def vector_potential(params: PhysicalParams, gauge, points, order: int = 0, variables=None):
    """Jets of the Cartesian vector potential at ``points`` inside the gauge patch."""
    gauge = as_gauge(gauge)
    pts = as_pointset(points)
    if not np.all(gauge.contains(pts.theta)):
        raise GaugeError(f"point(s) outside the {gauge.which.value} patch")
    coords = Coords(pts, order, variables) if variables else Coords(pts, order)
    return [f(coords) for f in vector_potential_fns(params, gauge, strict=False)]


def radial_curl(params: PhysicalParams, gauge, points):
    """e_r . (curl A) at ``points``, differentiating the potential through jets."""
    pts = as_pointset(points)
    grad = grad_cartesian(params)
    a = vector_potential(params, gauge, pts, order=1)
    c0 = Coords(pts, 0)
    d = [[apply_coefficients(grad[j].coefficients(c0), a[k]).value for k in range(3)] for j in range(3)]
    curl = (d[1][2] - d[2][1], d[2][0] - d[0][2], d[0][1] - d[1][0])
    e_r = [e.value for e in c0.e_r]
    return sum(ci * ei for ci, ei in zip(curl, e_r))


def geometric_momentum_gauged(params: PhysicalParams, gauge, strict: bool = True):
    """Pi_i(A) = Pi_i - (q/c) A_i."""
    pis = geometric_momentum(params)
    if params.g == 0 or params.q == 0:
        return [p.with_label(f"{p.label}(A)") for p in pis]
    a = vector_potential_fns(params, gauge, strict)
    k = -params.q / params.c
    return _relabel([p + multiplication(lambda c, ai=ai: ai(c) * k, label="-qA/c") for p, ai in zip(pis, a)],
                    "Pi(A)")


def _relabel(ops, name):
    return [op.with_label(lab) for op, lab in zip(ops, _component_labels(name))]


def angular_momentum_gauged(params: PhysicalParams, gauge, strict: bool = True):
    """L(A) = r x Pi(A) - mu e_r, with x, y, z as multiplication operators."""
    px, py, pz = geometric_momentum_gauged(params, gauge, strict)
    mu = params.mu
    x = lambda c: c.xyz[0]
    y = lambda c: c.xyz[1]
    z = lambda c: c.xyz[2]
    lx = pz.times(y) - py.times(z) + multiplication(lambda c: c.e_r[0] * (-mu))
    ly = px.times(z) - pz.times(x) + multiplication(lambda c: c.e_r[1] * (-mu))
    lz = py.times(x) - px.times(y) + multiplication(lambda c: c.e_r[2] * (-mu))
    return _relabel([lx, ly, lz], "L(A)")


def angular_momentum_canonical(params: PhysicalParams):
    """L = r x P with the full canonical momentum P = -i hbar grad (no monopole)."""
    grad = grad_cartesian(params)
    p = [op * (-1j * params.hbar) for op in grad]
    x = lambda c: c.xyz[0]
    y = lambda c: c.xyz[1]
    z = lambda c: c.xyz[2]
    return _relabel([p[2].times(y) - p[1].times(z),
                     p[0].times(z) - p[2].times(x),
                     p[1].times(x) - p[0].times(y)], "L")


def lz_simplified(params: PhysicalParams, gauge):
    """-i hbar d_phi - mu (north patch) or + mu (south patch)."""
    gauge = as_gauge(gauge)
    sign = -1.0 if gauge.which is Patch.NORTH else 1.0
    mu = params.mu
    return FirstOrderOperator(phi=lambda c: c.const(-1j * params.hbar),
                              mult=lambda c: c.const(sign * mu),
                              label=f"Lz_{gauge.which.value}")


def scaled_by_r(ops, name="rPi"):
    return [op.times(lambda c: c.r, label=lab) for op, lab in zip(ops, _component_labels(name))]


def r_squared():
    return multiplication(lambda c: c.r * c.r, label="r^2")


# ---------------------------------------------------------------------------
# gauge transformation between the patches
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaugeFunction:
    """Phase Lambda with A_north - A_south = (hbar c / q) grad Lambda on the overlap."""

    params: PhysicalParams
    residual: float

    def __call__(self, c: Coords) -> Jet:
        return c.phi * (2.0 * self.params.mu / self.params.hbar)

    def value(self, phi):
        return 2.0 * self.params.mu * np.asarray(phi) / self.params.hbar


def gauge_function(params: PhysicalParams, points=None, tol: float = 1e-10,
                   overlap_halfwidth: float = DEFAULT_OVERLAP_HALFWIDTH) -> GaugeFunction:
    """Return Lambda = 2 mu phi / hbar after checking its defining property.

    The property is checked as (q / hbar c)(A_north - A_south) = grad Lambda,
    which stays meaningful when q = 0.
    """
    if points is None:
        points = make_grid(5, 6, 0.15, "overlap", r=params.r, overlap_halfwidth=overlap_halfwidth).points
    pts = as_pointset(points)
    north = GaugeChoice(Patch.NORTH, overlap_halfwidth)
    south = GaugeChoice(Patch.SOUTH, overlap_halfwidth)
    a_n = vector_potential(params, north, pts)
    a_s = vector_potential(params, south, pts)
    lam = GaugeFunction(params, 0.0)
    c1 = Coords(pts, 1)
    lam_jet = lam(c1)
    c0 = Coords(pts, 0)
    grad = grad_cartesian(params)
    k = params.q / (params.hbar * params.c)
    worst = 0.0
    for i in range(3):
        grad_lam = apply_coefficients(grad[i].coefficients(c0), lam_jet).value
        diff = k * (a_n[i].value - a_s[i].value) - grad_lam
        worst = max(worst, float(np.max(np.abs(diff))))
    if worst > tol:
        raise GaugeError(f"gauge function fails its defining property (residual {worst:.3e})")
    return replace(lam, residual=worst)
