"""Named verification suites: every operator identity of the model as a runnable check.

An identity is a pair of builders ``ctx -> FirstOrderOperator`` compared with
:func:`operators.operator_equal` on a grid. Builders pull their operators from a
:class:`BuildContext`, which is also where deliberate coefficient mutations are
injected to make sure the checks are not vacuous.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

from .fields import DEFAULT_THETA_MARGIN, make_grid
from .monopole import (GaugeError, PhysicalParams, angular_momentum_canonical, angular_momentum_gauged,
                       as_gauge, gauge_function, geometric_momentum, geometric_momentum_gauged, grad_cartesian, grad_parallel,
                       grad_parallel_symmetrized, grad_perp, grad_perp_symmetrized, lz_simplified,
                       r_squared, scaled_by_r, vector_potential_fns)
from .operators import (SLOTS, FirstOrderOperator, OperatorIdentityReport, commutator, conjugate, cross,
                        frame_dot, levi_civita, lie_cross, multiplication, operator_equal, zero_operator)

log = logging.getLogger(__name__)

DEFAULT_MU_SWEEP = (0.0, 0.5, 1.0, 1.5)
DEFAULT_GAUGES = ("north", "south")


class SuiteError(ValueError):
    pass


# ---------------------------------------------------------------------------
# mutation and build context
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Mutation:
    """Add ``eps * h`` to one coefficient slot of every operator labelled ``target``.

    ``h = 1 + cos(theta)/2 + sin(theta) sin(phi)/4`` rather than a constant:
    constant shifts of a potential, a phase or ``r^2`` are exact symmetries of
    the identities that use them and would go unnoticed.
    """

    target: str
    slot: str = "mult"
    eps: float = 1e-3

    def __post_init__(self):
        if self.slot not in SLOTS:
            raise SuiteError(f"unknown coefficient slot {self.slot!r}")

    def apply(self, op: FirstOrderOperator) -> FirstOrderOperator:
        if op.label != self.target:
            return op
        bump = FirstOrderOperator(**{self.slot: self._bump})
        return (op + bump).with_label(op.label)

    def _bump(self, c):
        return (c.cos_theta * 0.5 + c.sin_theta * c.sin_phi * 0.25 + 1.0) * self.eps

    @classmethod
    def parse(cls, text: str) -> "Mutation":
        """``label[:slot[:eps]]``, e.g. ``Pi(A)_x:theta:1e-3``."""
        parts = text.split(":")
        if not parts[0] or len(parts) > 3:
            raise SuiteError(f"bad mutation spec {text!r}")
        slot = parts[1] if len(parts) > 1 else "mult"
        eps = float(parts[2]) if len(parts) > 2 else 1e-3
        return cls(parts[0], slot, eps)


class BuildContext:
    """Operator factory for one (params, gauge) sweep point."""

    def __init__(self, params: PhysicalParams, gauge=None, mutation: Optional[Mutation] = None):
        self.params = params
        self.gauge = as_gauge(gauge) if gauge is not None else None
        self.mutation = mutation

    def _m(self, ops):
        if self.mutation is None:
            return ops
        if isinstance(ops, FirstOrderOperator):
            return self.mutation.apply(ops)
        return [self.mutation.apply(o) for o in ops]

    def _need_gauge(self, gauge=None):
        g = gauge if gauge is not None else self.gauge
        if g is None and (self.params.g == 0 or self.params.q == 0):
            return "north"  # no potential, either patch gives the same operator
        if g is None:
            raise GaugeError("identity needs a gauge patch")
        return g

    @property
    def hbar(self):
        return self.params.hbar

    def grad(self):
        return self._m(grad_cartesian(self.params))

    def grad_par(self):
        return self._m(grad_parallel(self.params))

    def grad_par_sym(self):
        return self._m(grad_parallel_symmetrized(self.params))

    def grad_perp(self):
        return self._m(grad_perp(self.params))

    def grad_perp_sym(self):
        return self._m(grad_perp_symmetrized(self.params))

    def pi_bare(self):
        return self._m(geometric_momentum(self.params))

    def pi(self, gauge=None):
        return self._m(geometric_momentum_gauged(self.params, self._need_gauge(gauge)))

    def ang(self, gauge=None):
        return self._m(angular_momentum_gauged(self.params, self._need_gauge(gauge)))

    def r_pi(self, gauge=None):
        return self._m(scaled_by_r(self.pi(gauge)))

    def lz_closed(self, gauge=None):
        return self._m(lz_simplified(self.params, self._need_gauge(gauge)))

    def r2(self):
        return self._m(r_squared())

    def e_r(self):
        return [lambda c, i=i: c.e_r[i] for i in range(3)]

    def potential(self, gauge=None):
        fns = vector_potential_fns(self.params, self._need_gauge(gauge))
        return self._m([multiplication(f, label=f"A_{a}") for f, a in zip(fns, "xyz")])

    def gauge_phase(self):
        lam = gauge_function(self.params)
        return self._m(multiplication(lam, label="Lambda"))


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    n_theta: int = 20
    n_phi: int = 40
    theta_margin: float = DEFAULT_THETA_MARGIN
    domain: str = "patch"          # "patch" (gauge patch, or full sphere without gauge), "overlap", "full"
    jitter: float = 0.0

    def build(self, gauge, r: float, seed=None):
        if self.domain == "patch":
            dom = gauge.which.value if gauge is not None else "full"
        else:
            dom = self.domain
        kw = {}
        if gauge is not None:
            kw["overlap_halfwidth"] = gauge.overlap_halfwidth
        return make_grid(self.n_theta, self.n_phi, self.theta_margin, dom, r=r,
                         jitter=self.jitter, seed=seed, **kw)


Builder = Callable[[BuildContext], FirstOrderOperator]


@dataclass(frozen=True)
class Identity:
    label: str
    lhs: Builder
    rhs: Builder
    paper_eq: str
    grid: GridSpec = GridSpec()
    tolerance: float = 1e-9


@dataclass
class IdentitySuite:
    name: str
    identities: list
    params_sweep: list = field(default_factory=lambda: [PhysicalParams()])
    gauges: tuple = (None,)
    description: str = ""
    fixed_params: bool = False     # sweep overrides do not apply (e.g. identities that need A = 0)

    @property
    def labels(self):
        return [i.label for i in self.identities]


@dataclass
class SuiteEntry:
    suite: str
    gauge: Optional[str]
    report: OperatorIdentityReport

    @property
    def passed(self):
        return self.report.passed

    def sort_key(self):
        p = self.report.params
        return (self.suite, self.report.identity_label, p.get("mu", 0.0), self.gauge or "")

    def to_dict(self):
        d = self.report.to_dict()
        d["suite"] = self.suite
        d["gauge"] = self.gauge
        return d


@dataclass
class Report:
    entries: list

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    @property
    def n_failed(self) -> int:
        return sum(not e.passed for e in self.entries)

    def failures(self):
        return [e for e in self.entries if not e.passed]

    def merge(self, other: "Report") -> "Report":
        return Report(sorted(self.entries + other.entries, key=SuiteEntry.sort_key))

    def to_dict(self):
        return {"entries": [e.to_dict() for e in self.entries], "pass": self.passed}


def _sweep(params_list, mus, base=None):
    if mus is None:
        mus = [p.mu for p in params_list]
    if base is None:
        base = params_list[0] if params_list else PhysicalParams()
    return [base.with_mu(m) for m in mus]


def run_suite(suite: IdentitySuite, *, mus=None, gauges=None, tolerance: Optional[float] = None,
              grid: Optional[GridSpec] = None, mutation: Optional[Mutation] = None, seed=None,
              base: Optional[PhysicalParams] = None) -> Report:
    """Evaluate every identity of ``suite`` at every sweep point.

    ``mus`` / ``gauges`` override the suite's sweep (gauge-free suites ignore
    ``gauges``), ``base`` supplies hbar, c, q and r for every sweep point, ``tolerance`` overrides every identity tolerance and ``grid``
    overrides grid resolution and margin while keeping each identity's domain.
    A builder that raises becomes a failed entry carrying the error text.
    """
    sweep = _sweep(suite.params_sweep, None if suite.fixed_params else mus, base)
    if suite.gauges == (None,):
        gauge_list = (None,)
    else:
        gauge_list = tuple(gauges) if gauges is not None else suite.gauges
    entries = []
    for params in sweep:
        for gname in gauge_list:
            gauge = as_gauge(gname) if gname is not None else None
            ctx = BuildContext(params, gauge, mutation)
            for ident in suite.identities:
                tol = ident.tolerance if tolerance is None else tolerance
                spec = ident.grid
                if grid is not None:
                    spec = GridSpec(grid.n_theta, grid.n_phi, grid.theta_margin, spec.domain, grid.jitter)
                pdict = params.as_dict()
                try:
                    g = spec.build(gauge, params.r, seed)
                    rep = operator_equal(ident.lhs(ctx), ident.rhs(ctx), g, tol, label=ident.label)
                except Exception as exc:  # builder failures are reported, not raised
                    log.debug("identity %s failed to build", ident.label, exc_info=True)
                    rep = OperatorIdentityReport(ident.label, math.inf, {}, 0, tol,
                                                 error=f"{type(exc).__name__}: {exc}")
                rep.paper_eq = ident.paper_eq
                rep.params = pdict
                entries.append(SuiteEntry(suite.name, gname, rep))
    return Report(sorted(entries, key=SuiteEntry.sort_key))


def run_suites(suites, **kw) -> Report:
    out = Report([])
    for s in suites:
        out = out.merge(run_suite(s, **kw))
    return out


# -- identity helpers -------------------------------------------------------

def _vec_identities(stem, lhs_vec, rhs_vec, paper_eq, **kw):
    """Three component identities from builders returning 3-vectors of operators."""
    return [Identity(f"{stem}_{a}", (lambda c, i=i: lhs_vec(c)[i]), (lambda c, i=i: rhs_vec(c)[i]),
                     paper_eq, **kw) for i, a in enumerate("xyz")]


def _zero(ctx):
    return zero_operator()


def _eps_rhs(vec, i, j, scale):
    """scale * sum_k eps_ijk vec[k], or the zero operator for i == j."""
    for k in range(3):
        e = levi_civita(i, j, k)
        if e:
            return vec[k] * (scale * e)
    return zero_operator()


def _sum_ops(ops):
    out = ops[0]
    for o in ops[1:]:
        out = out + o
    return out


def _curl_radial(ctx):
    grad, a = ctx.grad(), ctx.potential()
    comps = []
    for k in range(3):
        terms = [commutator(grad[i], a[j]) * levi_civita(k, i, j)
                 for i in range(3) for j in range(3) if levi_civita(k, i, j)]
        comps.append(_sum_ops(terms))
    e_r = ctx.e_r()
    return _sum_ops([comps[k].times(e_r[k]) for k in range(3)])


def _gauge_difference(ctx, i):
    k = ctx.params.q / (ctx.params.hbar * ctx.params.c)
    a_n = ctx.potential("north")[i]
    a_s = ctx.potential("south")[i]
    return (a_n - a_s) * k


def _grad_lambda(ctx, i):
    return commutator(ctx.grad()[i], ctx.gauge_phase())


def _conj_south(ops_fn, ctx):
    lam = gauge_function(ctx.params)
    return [conjugate(o, lambda c: -lam(c)) for o in ops_fn(ctx, "south")]


# -- suite definitions ------------------------------------------------------

def _decomposition():
    ids = []
    ids += _vec_identities("grad == grad_par + grad_perp", lambda c: c.grad(),
                           lambda c: [p + t for p, t in zip(c.grad_par(), c.grad_perp())], "Eq. (5a), (7)",
                           tolerance=1e-10)
    ids += _vec_identities("grad_par symmetrized == closed form", lambda c: c.grad_par_sym(),
                           lambda c: c.grad_par(), "Eq. (6)", tolerance=1e-10)
    ids += _vec_identities("grad_perp symmetrized == closed form", lambda c: c.grad_perp_sym(),
                           lambda c: c.grad_perp(), "Eq. (6), (7)", tolerance=1e-10)
    ids += _vec_identities("Pi components == -i hbar grad_perp", lambda c: c.pi_bare(),
                           lambda c: [g * (-1j * c.hbar) for g in c.grad_perp()], "Eq. (9), (10)",
                           tolerance=1e-10)
    return IdentitySuite("decomposition", ids, [PhysicalParams()], (None,),
                         "radial/transverse splitting of the gradient")


def _transversality():
    ids = [
        Identity("e_r.grad_perp + grad_perp.e_r == 0", lambda c: frame_dot(c.e_r(), c.grad_perp()), _zero,
                 "Eq. (8)", tolerance=1e-10),
        Identity("e_r.Pi(A) + Pi(A).e_r == 0", lambda c: frame_dot(c.e_r(), c.pi()), _zero,
                 "Eq. (8), (19)", tolerance=1e-10),
    ]
    return IdentitySuite("transversality", ids, [PhysicalParams.from_mu(m) for m in DEFAULT_MU_SWEEP],
                         DEFAULT_GAUGES, "transverse momentum is orthogonal to e_r")


def _r2_commutants():
    ids = []
    ids += _vec_identities("[r^2, L(A)] == 0", lambda c: [commutator(c.r2(), L) for L in c.ang()],
                           lambda c: [zero_operator()] * 3, "Eq. (13)", tolerance=1e-12)
    ids += _vec_identities("[r^2, Pi(A)] == 0", lambda c: [commutator(c.r2(), p) for p in c.pi()],
                           lambda c: [zero_operator()] * 3, "Eq. (13)", tolerance=1e-12)
    return IdentitySuite("r2_commutants", ids, [PhysicalParams.from_mu(m) for m in DEFAULT_MU_SWEEP],
                         DEFAULT_GAUGES, "r^2 commutes with L(A) and Pi(A)")


def _so31_flat():
    ids = []
    ids += _vec_identities("(r Pi) x (r Pi) == -i hbar L", lambda c: cross(c.r_pi(), c.r_pi()),
                           lambda c: [L * (-1j * c.hbar) for L in c.ang()], "Eq. (14)")
    ids += _vec_identities("L x (r Pi) == i hbar r Pi", lambda c: lie_cross(c.ang(), c.r_pi()),
                           lambda c: [p * (1j * c.hbar) for p in c.r_pi()], "Eq. (14)")
    ids += _vec_identities("L(0) == r x (-i hbar grad)", lambda c: c.ang(),
                           lambda c: c._m(angular_momentum_canonical(c.params)), "Eq. (14)")
    return IdentitySuite("so31_flat", ids, [PhysicalParams.from_mu(0.0)], (None,),
                         "so(3,1) closure without monopole", fixed_params=True)


def _so3():
    ids = _vec_identities("L(A) x L(A) == i hbar L(A)", lambda c: cross(c.ang(), c.ang()),
                          lambda c: [L * (1j * c.hbar) for L in c.ang()], "Eq. (16)")
    return IdentitySuite("so3", ids, [PhysicalParams.from_mu(m) for m in DEFAULT_MU_SWEEP], DEFAULT_GAUGES,
                         "angular momentum algebra with monopole")


def _so31_monopole():
    ids = []
    ax = "xyz"
    for i in range(3):
        for j in range(i + 1, 3):
            ids.append(Identity(f"[L_{ax[i]}(A), L_{ax[j]}(A)] == i hbar eps L(A)",
                                lambda c, i=i, j=j: commutator(c.ang()[i], c.ang()[j]),
                                lambda c, i=i, j=j: _eps_rhs(c.ang(), i, j, 1j * c.hbar), "Eq. (16)"))
    for i in range(3):
        for j in range(3):
            ids.append(Identity(f"[L_{ax[i]}(A), Pi_{ax[j]}(A)] == i hbar eps Pi(A)",
                                lambda c, i=i, j=j: commutator(c.ang()[i], c.pi()[j]),
                                lambda c, i=i, j=j: _eps_rhs(c.pi(), i, j, 1j * c.hbar), "Eq. (20)"))
    for i in range(3):
        for j in range(i + 1, 3):
            ids.append(Identity(f"[Pi_{ax[i]}(A), Pi_{ax[j]}(A)] == -i hbar eps L(A) / r^2",
                                lambda c, i=i, j=j: commutator(c.pi()[i], c.pi()[j]),
                                lambda c, i=i, j=j: _eps_rhs(c.ang(), i, j, -1j * c.hbar)
                                .times(lambda k: k.inv_r * k.inv_r), "Eq. (21)"))
    return IdentitySuite("so31_monopole", ids, [PhysicalParams.from_mu(m) for m in DEFAULT_MU_SWEEP],
                         DEFAULT_GAUGES, "mixed commutators of L(A) and Pi(A)")


def _lz_forms():
    ids = [Identity("L_z(A) == -i hbar d_phi -+ mu", lambda c: c.ang()[2], lambda c: c.lz_closed(),
                    "Eq. (23), (26)", tolerance=1e-10)]
    return IdentitySuite("lz_forms", ids, [PhysicalParams.from_mu(m) for m in DEFAULT_MU_SWEEP],
                         DEFAULT_GAUGES, "simplified L_z in each patch")


def _gauge_covariance():
    overlap = GridSpec(domain="overlap")
    ids = [Identity("exp(i Lambda) Lz_south exp(-i Lambda) == Lz_north",
                    lambda c: conjugate(c.lz_closed("south"), lambda k: -gauge_function(c.params)(k)),
                    lambda c: c.lz_closed("north"), "Eq. (23), (26)", overlap, 1e-10)]
    ids += _vec_identities("exp(i Lambda) Pi_south(A) exp(-i Lambda) == Pi_north(A)",
                           lambda c: _conj_south(lambda k, g: k.pi(g), c), lambda c: c.pi("north"),
                           "Eq. (19), (23), (26)", grid=overlap, tolerance=1e-10)
    ids += _vec_identities("exp(i Lambda) L_south(A) exp(-i Lambda) == L_north(A)",
                           lambda c: _conj_south(lambda k, g: k.ang(g), c), lambda c: c.ang("north"),
                           "Eq. (19), (23), (26)", grid=overlap, tolerance=1e-10)
    ids += _vec_identities("(q/hbar c)(A_north - A_south) == grad Lambda",
                           lambda c: [_gauge_difference(c, i) for i in range(3)],
                           lambda c: [_grad_lambda(c, i) for i in range(3)], "Eq. (17), (18)",
                           grid=overlap, tolerance=1e-10)
    return IdentitySuite("gauge_covariance", ids, [PhysicalParams.from_mu(m) for m in DEFAULT_MU_SWEEP],
                         (None,), "the two patches are related by a phase on the overlap")


def _monopole_field():
    ids = [Identity("e_r.curl A == g / r^2", _curl_radial,
                    lambda c: multiplication(lambda k: k.inv_r * k.inv_r * c.params.g), "Eq. (17)",
                    tolerance=1e-9)]
    return IdentitySuite("monopole_field", ids, [PhysicalParams.from_mu(m) for m in DEFAULT_MU_SWEEP],
                         DEFAULT_GAUGES, "radial magnetic field of the potential")


_SUITE_FACTORIES = (_decomposition, _transversality, _r2_commutants, _so31_flat, _so3, _so31_monopole,
                    _lz_forms, _gauge_covariance, _monopole_field)


def builtin_suites() -> list:
    return [f() for f in _SUITE_FACTORIES]


def suite_names() -> list:
    return [s.name for s in builtin_suites()]


def get_suites(names) -> list:
    """Resolve suite names (or ``"all"``); unknown names raise :class:`SuiteError`."""
    suites = builtin_suites()
    if names is None or list(names) in ([], ["all"]):
        return suites
    by_name = {s.name: s for s in suites}
    unknown = [n for n in names if n not in by_name and n != "all"]
    if unknown:
        raise SuiteError(f"unknown suite(s): {', '.join(unknown)}; known: {', '.join(by_name)}")
    if "all" in names:
        return suites
    seen = []
    for n in names:
        if by_name[n] not in seen:
            seen.append(by_name[n])
    return seen
