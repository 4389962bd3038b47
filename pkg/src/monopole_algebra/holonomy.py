"""Small-loop holonomy built from exponentials of the gauged geometric momentum.

Every exponential ``exp(t O)`` is a truncated power series whose terms
``O^n f`` come from repeated jet application, so a nested product of four
exponentials needs input jets of order ``4K + 1`` for series order ``K``.
Jets here live in the two angular variables; the radius is fixed.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .fields import Coords, PointSet, SpherePoint, TestFunction, as_pointset, test_function
from .jets import VARIABLES_2D, Jet
from .monopole import (NORTH, GaugeChoice, PhysicalParams, angular_momentum_gauged, as_gauge,
                       geometric_momentum_gauged)
from .operators import FirstOrderOperator, apply_coefficients, coefficient_values

log = logging.getLogger(__name__)

DEFAULT_SERIES_ORDER = 8
SERIES_TOL = 1e-11
DEFAULT_DELTA_Z = (1e-2, 1e-3, 1e-4, 1e-5)
DEFAULT_MIN_SLOPE = 1.4
DEFAULT_PHASE_TOL = 1e-4


class SeriesConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class LoopSpec:
    """A square loop of side ``alpha = beta = sqrt(r dz - dz^2 / 2)`` about the z' axis.

    ``axes`` holds the unit vectors (x', y', z') of the loop frame as rows;
    the identity puts the loop around the north pole.
    """

    delta_z: float
    base_params: PhysicalParams = field(default_factory=PhysicalParams)
    gauge: GaugeChoice = NORTH
    series_order: int = DEFAULT_SERIES_ORDER
    axes: tuple = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))

    def __post_init__(self):
        object.__setattr__(self, "gauge", as_gauge(self.gauge))
        if not 0 < self.delta_z < self.base_params.r:
            raise ValueError(f"delta_z must lie in (0, r), got {self.delta_z}")
        if self.series_order < 4:
            raise ValueError("series order must be at least 4")
        ax = np.asarray(self.axes, float)
        if ax.shape != (3, 3) or not np.allclose(ax @ ax.T, np.eye(3), atol=1e-12):
            raise ValueError("axes must be an orthonormal 3x3 frame")

    @property
    def alpha(self) -> float:
        r, dz = self.base_params.r, self.delta_z
        return math.sqrt(r * dz - dz * dz / 2)

    @property
    def beta(self) -> float:
        return self.alpha

    @property
    def delta_omega(self) -> float:
        return self.alpha * self.beta / self.base_params.r ** 2


@dataclass
class HolonomyResult:
    function_id: str
    points: PointSet
    measured: np.ndarray
    predicted: np.ndarray
    rotated: np.ndarray
    delta_omega: float
    phase_extracted: np.ndarray
    residual: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residual))


# ---------------------------------------------------------------------------
# series exponentials
# ---------------------------------------------------------------------------

def _exp_series(coeffs, t, g: Jet, K: int, check=True) -> Jet:
    """sum_{n<=K} t^n/n! O^n g, returned at order ``g.order - K``."""
    out_order = g.order - K
    if out_order < 0:
        raise ValueError(f"jet order {g.order} too low for series order {K}")
    term = g
    total = g.truncate(out_order)
    sizes = [np.max(np.abs(g.value))]
    for n in range(1, K + 1):
        term = apply_coefficients(coeffs, term) * (t / n)
        total = total + term.truncate(out_order)
        sizes.append(np.max(np.abs(term.value)))
    if check:
        scale = max(np.max(np.abs(total.value)), 1e-300)
        if sizes[-1] > sizes[-2] and sizes[-1] > 1e-14 * scale:
            raise SeriesConvergenceError(
                f"series terms still growing at order {K} (|t|={abs(t):.3g}): {sizes[-2]:.3e} -> {sizes[-1]:.3e}")
    return total


def exp_apply(op: FirstOrderOperator, t: complex, f: TestFunction, points, series_order: int = DEFAULT_SERIES_ORDER,
              variables=VARIABLES_2D, return_terms: bool = False):
    """Value of ``exp(t O) f`` at ``points`` from the truncated series.

    With ``return_terms`` the value of every series term is returned as well
    (shape ``(K + 1, n_points)``), which is what the convergence monitor reads.
    """
    K = series_order
    coords = Coords(points, K + 1, variables)
    coeffs = op.coefficients(coords)
    g = f.build(coords)
    if not return_terms:
        return _exp_series(coeffs, t, g, K).value
    terms = [g.value]
    term = g
    total = g.truncate(1)
    for n in range(1, K + 1):
        term = apply_coefficients(coeffs, term) * (t / n)
        terms.append(term.value)
        total = total + term.truncate(1)
    return total.value, np.array(terms)


# ---------------------------------------------------------------------------
# the loop
# ---------------------------------------------------------------------------

def _combine(ops, weights, label):
    out = None
    for w, op in zip(weights, ops):
        if w == 0:
            continue
        term = op * float(w)
        out = term if out is None else out + term
    return out.with_label(label)


class LoopEngine:
    """Caches the high-order coefficient jets of a loop; reusable across ``delta_z``.

    The coefficients of Pi_x'(A), Pi_y'(A), L_z'(A) and L_z'(0) do not depend
    on the loop size, so a convergence scan only builds them once.
    """

    def __init__(self, params: PhysicalParams, gauge, points, series_order=DEFAULT_SERIES_ORDER,
                 axes=LoopSpec.axes, max_factors: int = 4):
        self.params = params
        self.gauge = as_gauge(gauge)
        self.points = as_pointset(points)
        self.K = series_order
        ax = np.asarray(axes, float)
        pis = geometric_momentum_gauged(params, self.gauge)
        ls = angular_momentum_gauged(params, self.gauge)
        l0 = angular_momentum_gauged(params.with_mu(0.0), self.gauge)
        self.pi_x = _combine(pis, ax[0], "Pi_x'(A)")
        self.pi_y = _combine(pis, ax[1], "Pi_y'(A)")
        self.l_z = _combine(ls, ax[2], "L_z'(A)")
        self.l_z0 = _combine(l0, ax[2], "L_z'(0)")
        self.max_factors = max_factors
        self.order = max_factors * self.K + 1
        self.coords = Coords(self.points, self.order, VARIABLES_2D)
        self._small = Coords(self.points, self.K + 1, VARIABLES_2D)
        self._cx = self.pi_x.coefficients(self.coords)
        self._cy = self.pi_y.coefficients(self.coords)
        self._clz = self.l_z.coefficients(self._small)
        self._clz0 = self.l_z0.coefficients(self._small)
        self._f_cache = {}

    def _f_jets(self, f: TestFunction):
        if f.id not in self._f_cache:
            self._f_cache[f.id] = (f.build(self.coords), f.build(self._small))
        return self._f_cache[f.id]

    def phase_rate(self) -> np.ndarray:
        """Limit of the extracted phase of the constant per unit solid angle, at each point.

        This is -(L_z'(A) - L_z'(0)) 1 / hbar, a pure multiplication. It equals
        mu / hbar when z' is the regular pole of the patch; for other axes the
        patch's potential adds a gauge-dependent term.
        """
        a = coefficient_values(self.l_z, self.points)["mult"]
        b = coefficient_values(self.l_z0, self.points)["mult"]
        return -np.real(a - b) / self.params.hbar

    def loop_steps(self, alpha, beta, inverse=False):
        """Factors of the loop in application order (rightmost first) as ``(axis, t)``.

        The forward loop is ``e^{B} e^{A} e^{-B} e^{-A}`` with ``A = i alpha Pi_x'/hbar``
        and ``B = i beta Pi_y'/hbar``; its inverse ``e^{A} e^{B} e^{-A} e^{-B}``
        traverses the square the other way round.
        """
        hb = self.params.hbar
        a, b = 1j * alpha / hb, 1j * beta / hb
        if inverse:
            return (("y", -b), ("x", -a), ("y", b), ("x", a))
        return (("x", -a), ("y", -b), ("x", a), ("y", b))

    def apply_steps(self, f: TestFunction, steps, check=True):
        if len(steps) > self.max_factors:
            raise ValueError(f"engine built for {self.max_factors} factors, got {len(steps)}")
        g, _ = self._f_jets(f)
        for axis, t in steps:
            g = _exp_series(self._cx if axis == "x" else self._cy, t, g, self.K, check=check)
        return g.value

    def run(self, spec: LoopSpec, f: TestFunction, inverse=False, check=True) -> HolonomyResult:
        dO = spec.delta_omega
        measured = self.apply_steps(f, self.loop_steps(spec.alpha, spec.beta, inverse), check=check)
        _, g_small = self._f_jets(f)
        t = (1j if inverse else -1j) * dO / self.params.hbar
        predicted = _exp_series(self._clz, t, g_small, self.K, check=check).value
        rotated = _exp_series(self._clz0, t, g_small, self.K, check=check).value
        with np.errstate(divide="ignore", invalid="ignore"):
            phase = np.angle(measured / rotated)
        return HolonomyResult(f.id, self.points, measured, predicted, rotated, dO, phase,
                              np.abs(measured - predicted))


def gido_loop(spec: LoopSpec, f: TestFunction, points, inverse=False, check=True) -> HolonomyResult:
    """Apply the four-exponential loop to ``f`` and compare with exp(-i dOmega L_z'(A) / hbar) f.

    ``phase_extracted`` is the argument of the measured value relative to the
    pure rotation exp(-i dOmega L_z'(0) / hbar) f, i.e. what is left once the
    rotation by the solid angle is divided out.
    """
    engine = LoopEngine(spec.base_params, spec.gauge, points, spec.series_order, spec.axes)
    return engine.run(spec, f, inverse=inverse, check=check)


# ---------------------------------------------------------------------------
# convergence scans
# ---------------------------------------------------------------------------

@dataclass
class ScanRow:
    delta_z: float
    delta_omega: float
    max_residual: float
    extracted_phase: float
    predicted_phase: float
    phase_error: float


@dataclass
class ScanResult:
    rows: list
    slope: float
    extrapolated_ratio: float
    extrapolated_error: float
    expected_ratio: float
    warnings: list

    def passes(self, min_slope=DEFAULT_MIN_SLOPE, phase_tol=DEFAULT_PHASE_TOL) -> bool:
        return self.slope >= min_slope and self.extrapolated_error <= phase_tol


def loglog_slope(x, y) -> float:
    """Least-squares slope of log(y) against log(x)."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def richardson_limit(delta_omega, ratio, n_terms=3) -> float:
    """Limit of ``ratio`` as dOmega -> 0, fitting a polynomial in sqrt(dOmega).

    The leading correction to the phase per solid angle is O(sqrt(dOmega))
    (third-order group-commutator terms), so the fit variable is sqrt(dOmega).
    """
    s = np.sqrt(np.asarray(delta_omega, float))
    ratio = np.asarray(ratio, float)
    deg = min(n_terms - 1, len(s) - 1)
    return float(np.polyfit(s, ratio, deg)[-1])


# Smooth through the pole; cos(theta) e^{i phi} is not and makes the series diverge.
DEFAULT_SCAN_FUNCTIONS = ("one", "harmonic_m+1", "harmonic_m-2")


def default_loop_points(r=1.0) -> PointSet:
    return PointSet([r] * 3, [0.3, 0.4, 0.5], [0.0, 2.0, 4.0])


def convergence_scan(specs, functions=None, points=None, phase_function="one") -> ScanResult:
    """Run the loop for each spec (decreasing ``delta_z``) and measure convergence.

    The slope is fitted to the worst residual over functions and points. The
    phase column uses ``phase_function`` (the constant by default), averaged
    over points; the phase error is the worst point. Phases are compared with
    :meth:`LoopEngine.phase_rate` times dOmega, which is mu dOmega / hbar for
    a loop around the regular pole of the patch.
    """
    specs = sorted(specs, key=lambda s: -s.delta_z)
    if len(specs) < 4:
        raise ValueError("a convergence scan needs at least 4 loop sizes")
    dz = np.array([s.delta_z for s in specs])
    if np.log10(dz.max() / dz.min()) < 2 - 1e-12:
        raise ValueError("loop sizes must span at least two decades")
    base = specs[0]
    points = default_loop_points(base.base_params.r) if points is None else as_pointset(points)
    functions = [test_function(f) if isinstance(f, str) else f
                 for f in (functions or DEFAULT_SCAN_FUNCTIONS)]
    if isinstance(phase_function, str):
        phase_function = test_function(phase_function)
    engine = LoopEngine(base.base_params, base.gauge, points, base.series_order, base.axes)
    expected = engine.phase_rate()

    rows, ratios, warnings = [], [], []
    for spec in specs:
        worst = 0.0
        for f in functions:
            worst = max(worst, engine.run(spec, f).max_residual)
        ph = engine.run(spec, phase_function).phase_extracted
        pred = expected * spec.delta_omega
        rows.append(ScanRow(spec.delta_z, spec.delta_omega, worst, float(np.mean(ph)), float(np.mean(pred)),
                            float(np.max(np.abs(ph - pred)))))
        ratios.append(ph / spec.delta_omega)
    resid = [r.max_residual for r in rows]
    if any(b >= a for a, b in zip(resid, resid[1:])):
        warnings.append("residuals are not monotonically decreasing")
        log.warning("scan quality: residuals are not monotonically decreasing")
    slope = loglog_slope([r.delta_omega for r in rows], resid)
    ratios = np.array(ratios)  # (n_specs, n_points)
    d_omega = [r.delta_omega for r in rows]
    limits = np.array([richardson_limit(d_omega, ratios[:, j]) for j in range(ratios.shape[1])])
    err = np.abs(limits - expected)
    j = int(np.argmax(err))
    return ScanResult(rows, slope, float(limits[j]), float(err[j]), float(expected[j]), warnings)


def rotation_about(pole) -> tuple:
    """Orthonormal axes (x', y', z') with z' along ``pole`` (a unit 3-vector)."""
    z = np.asarray(pole, float)
    z = z / np.linalg.norm(z)
    helper = np.array([0.0, 0.0, 1.0]) if abs(z[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    x = np.cross(helper, z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return tuple(map(tuple, (x, y, z)))


ALTERNATIVE_POLES = ((1.0, 0.0, 0.0), (0.0, 1.0, 1.0), (1.0, -1.0, 0.5))


def points_near(pole, r=1.0, offsets=(0.3, 0.4, 0.5)) -> PointSet:
    """Points at angular distances ``offsets`` from ``pole``, spread in azimuth."""
    axes = np.asarray(rotation_about(pole))
    pts = []
    for k, ang in enumerate(offsets):
        az = 2.0 * k
        local = np.array([math.sin(ang) * math.cos(az), math.sin(ang) * math.sin(az), math.cos(ang)])
        v = local @ axes
        theta = math.acos(max(-1.0, min(1.0, v[2])))
        phi = math.atan2(v[1], v[0])
        pts.append(SpherePoint(r, theta, phi))
    return PointSet.from_points(pts)
