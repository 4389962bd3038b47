"""L_z spectra in the two gauge patches, the Dirac condition, AB phases and flux quanta."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import PointSet, TestFunction
from .jets import VARIABLES_2D
from .monopole import GaugeChoice, PhysicalParams, angular_momentum_gauged, as_gauge
from .operators import apply

DIRAC_TOL = 1e-10
CROSS_CHECK_TOL = 1e-12


class QuantizationError(ArithmeticError):
    pass


@dataclass
class SpectrumWindow:
    m_range: tuple
    gauge: GaugeChoice
    params: PhysicalParams
    eigenvalues: list
    operator_residual: float = 0.0


def _eigenfunction(m):
    from . import jets
    return TestFunction(f"e^{{i{m}phi}}", lambda c: jets.exp(c.phi * (1j * m)), abs(m))


def _check_points(r):
    theta = np.linspace(0.9, 2.2, 10)
    return PointSet(np.full(10, r), theta, np.linspace(0.1, 6.0, 10))


def lz_spectrum(params: PhysicalParams, gauge, m_range) -> SpectrumWindow:
    """Eigenvalues m hbar -+ mu of L_z(A) on e^{i m phi}, cross-checked against the operator.

    The check applies the L_z(A) built from r x Pi(A) - mu e_r to e^{i m phi}
    at ten points in the overlap band, where both patches are defined.
    """
    gauge = as_gauge(gauge)
    m_min, m_max = int(m_range[0]), int(m_range[1])
    if m_max < m_min:
        raise ValueError("empty m range")
    sign = -1.0 if gauge.which.value == "north" else 1.0
    ms = range(m_min, m_max + 1)
    eig = [m * params.hbar + sign * params.mu for m in ms]
    lz = angular_momentum_gauged(params, gauge)[2]
    pts = _check_points(params.r)
    worst = 0.0
    for m, lam in zip(ms, eig):
        f = _eigenfunction(m)
        got = apply(lz, f, pts, 1, VARIABLES_2D).value
        want = lam * f(pts)
        worst = max(worst, float(np.max(np.abs(got - want))))
    if worst > CROSS_CHECK_TOL * max(1.0, abs(params.mu), params.hbar * max(abs(m_min), abs(m_max))):
        raise QuantizationError(f"L_z operator disagrees with analytic spectrum (residual {worst:.3e})")
    return SpectrumWindow((m_min, m_max), gauge, params, eig, worst)


@dataclass(frozen=True)
class DiracVerdict:
    allowed: bool
    n: int
    defect: float
    spectra_coincide: bool

    def describe(self) -> str:
        if self.allowed:
            return f"allowed, n={self.n}"
        return f"forbidden, defect {self.defect:.10g}"


def spectra_coincide(params: PhysicalParams, tol: float = DIRAC_TOL) -> bool:
    """Whether the north and south L_z lattices agree as sets on a wide window.

    Both are arithmetic progressions with step hbar, so a window that exceeds
    their relative offset 2|mu|/hbar by a margin settles the question.
    """
    hb = params.hbar
    margin = 2 + math.ceil(abs(params.mu) / hb)
    span = 2 * margin + math.ceil(2 * abs(params.mu) / hb)
    m = np.arange(-span, span + 1)
    north = m * hb - params.mu
    south = m * hb + params.mu
    # compare only where both windows are fully populated
    lo = max(north.min(), south.min()) + margin * hb
    hi = min(north.max(), south.max()) - margin * hb
    n_in = north[(north >= lo - tol * hb) & (north <= hi + tol * hb)]
    s_in = south[(south >= lo - tol * hb) & (south <= hi + tol * hb)]
    dist = np.abs(n_in[:, None] - south[None, :]).min(axis=1)
    dist2 = np.abs(s_in[:, None] - north[None, :]).min(axis=1)
    return bool(np.all(dist <= tol * hb) and np.all(dist2 <= tol * hb))


def dirac_check(mu: float, hbar: float = 1.0, tol: float = DIRAC_TOL) -> DiracVerdict:
    """Is ``mu`` an integer multiple of hbar / 2?"""
    x = 2.0 * mu / hbar
    n = int(round(x))
    defect = abs(x - n)
    allowed = defect <= tol
    coincide = spectra_coincide(PhysicalParams.from_mu(mu, hbar=hbar), tol)
    if coincide != allowed:
        raise QuantizationError(f"Dirac verdict ({allowed}) disagrees with spectrum comparison ({coincide})")
    return DiracVerdict(allowed, n, 0.0 if allowed else defect, coincide)


def ab_phase(params: PhysicalParams, delta_omega: float, tol: float = 1e-13) -> float:
    """mu dOmega / hbar, checked against the flux route (q / hbar c)(g dS / r^2)."""
    if not 0.0 <= delta_omega <= 4 * math.pi:
        raise ValueError("solid angle must lie in [0, 4 pi]")
    phase = params.mu * delta_omega / params.hbar
    d_s = params.r ** 2 * delta_omega
    flux = params.g * d_s / params.r ** 2
    via_flux = params.q / (params.hbar * params.c) * flux
    if abs(phase - via_flux) > tol * max(1.0, abs(phase)):
        raise QuantizationError(f"AB phase routes disagree: {phase!r} vs {via_flux!r}")
    return phase


def flux_quantum(params: PhysicalParams) -> float:
    """phi_0 = h c / q = 2 pi hbar c / q."""
    if params.q == 0:
        raise QuantizationError("flux quantum undefined for q = 0")
    return 2 * math.pi * params.hbar * params.c / params.q


def quantized_flux(params: PhysicalParams, m: int, delta_omega: float) -> float:
    """m phi_0 dOmega / (4 pi); the full sphere carries m phi_0."""
    return m * flux_quantum(params) * delta_omega / (4 * math.pi) + 0.0  # no negative zero


def flux_table(params: PhysicalParams, m_values, delta_omega: float = 4 * math.pi):
    phi0 = flux_quantum(params)
    return [{"m": int(m), "flux": quantized_flux(params, m, delta_omega),
             "flux_over_phi0": quantized_flux(params, m, delta_omega) / phi0 + 0.0} for m in m_values]


DIRAC_SWEEP = tuple(k / 10 for k in range(21))


def _check(label, paper_eq, residual, tol, detail=""):
    return {"label": label, "paper_eq": paper_eq, "residual": float(residual), "tolerance": tol,
            "detail": detail, "pass": bool(residual <= tol)}


def self_checks(base: PhysicalParams | None = None, mus=(0.0, 0.5, 1.0, 1.5),
                gauges=("north", "south")) -> list:
    """Arithmetic and spectral consistency checks, as report entries sorted by label."""
    base = base or PhysicalParams()
    out = []
    for mu in mus:
        p = base.with_mu(mu)
        for gauge in gauges:
            try:
                res = lz_spectrum(p, gauge, (-3, 3)).operator_residual
                out.append(_check(f"L_z(A) e^(i m phi) == (m hbar -+ mu) e^(i m phi) [mu={mu:g}, {gauge}]",
                                  "Eq. (23), (26)", res, CROSS_CHECK_TOL * max(1.0, 3 * p.hbar, abs(mu))))
            except QuantizationError as exc:
                out.append(_check(f"L_z spectrum [mu={mu:g}, {gauge}]", "Eq. (23), (26)", math.inf, 0.0, str(exc)))
    mismatches = []
    for k, x in enumerate(DIRAC_SWEEP):
        mu = x * base.hbar
        try:
            v = dirac_check(mu, base.hbar)
        except QuantizationError as exc:
            mismatches.append(str(exc))
            continue
        want = k % 5 == 0
        if v.allowed != want:
            mismatches.append(f"mu={x:g} hbar: allowed={v.allowed}")
    out.append(_check("spectra coincide iff 2 mu / hbar is an integer", "Eq. (27)", float(len(mismatches)), 0.0,
                      "; ".join(mismatches)))
    worst = 0.0
    for mu in mus:
        p = base.with_mu(mu)
        for d_omega in np.linspace(0.0, 4 * math.pi, 9):
            worst = max(worst, abs(p.mu * d_omega / p.hbar - p.q / (p.hbar * p.c) * p.g * d_omega))
    out.append(_check("mu dOmega / hbar == (q / hbar c) g dOmega", "Eq. (24), (25)", worst, 1e-13))
    if base.q != 0:
        phi0 = flux_quantum(base)
        worst = max(abs(quantized_flux(base, m, 4 * math.pi) - m * phi0) for m in range(-3, 4))
        out.append(_check("total flux over the sphere == m phi_0", "Eq. (29)", worst, 1e-12 * max(1.0, abs(phi0))))
        worst = 0.0
        for m in range(-3, 4):
            p = base.with_mu(m * base.hbar / 2)
            for d_omega in np.linspace(0.0, 4 * math.pi, 9):
                worst = max(worst, abs(quantized_flux(p, m, d_omega) - p.g * d_omega))
        out.append(_check("m phi_0 dOmega / 4 pi == g dOmega when mu = m hbar / 2", "Eq. (29)", worst, 1e-12))
    return sorted(out, key=lambda d: d["label"])
