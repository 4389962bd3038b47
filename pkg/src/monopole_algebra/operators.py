"""First-order differential operators ``d dr + a dtheta + b dphi + c``.

Coefficients are functions ``Coords -> Jet`` (``None`` means identically
zero), so every operator is evaluated exactly to jet order at the points of a
:class:`~monopole_algebra.fields.Coords` context. The class is closed under
linear combination, left multiplication by functions, commutators and phase
conjugation; products are only admitted through :class:`SecondOrderOperator`,
which checks that the second-order part cancels.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .fields import Coords, Grid, PointSet, as_pointset, make_grid
from .jets import Jet, JetError, JetSingularity

log = logging.getLogger(__name__)

SLOTS = ("r", "theta", "phi", "mult")
DERIV_SLOTS = SLOTS[:3]
DEFAULT_TOLERANCE = 1e-9

Coefficient = Optional[Callable[[Coords], Jet]]


class OperatorError(ValueError):
    pass


class NotFirstOrderError(OperatorError):
    """An operator product kept a non-vanishing second-order part."""


def _add(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def _mul(a, b):
    if a is None or b is None:
        return None
    return a * b


def _scale(a, s):
    return None if a is None else a * s


def _const_fn(value):
    return lambda c: c.const(value)


def as_coefficient(h) -> Coefficient:
    """Accept a coefficient function, a number, or ``None``."""
    if h is None or callable(h):
        return h
    return _const_fn(complex(h))


def _deriv_apply(coeffs, h: Optional[Jet], order: int, variables) -> Optional[Jet]:
    """sum_v coeffs[v] * d_v h, with ``h`` one order above ``order``."""
    if h is None:
        return None
    out = None
    for slot, a in zip(DERIV_SLOTS, coeffs[:3]):
        if a is None:
            continue
        if slot not in variables:
            raise OperatorError(f"operator differentiates along {slot!r}, absent from jet variables {variables}")
        out = _add(out, a.truncate(order) * h.diff(slot))
    return out


class FirstOrderOperator:
    """``coeff_r * d/dr + coeff_theta * d/dtheta + coeff_phi * d/dphi + coeff_mult``."""

    def __init__(self, r: Coefficient = None, theta: Coefficient = None, phi: Coefficient = None,
                 mult: Coefficient = None, label: str = ""):
        self._fns = tuple(as_coefficient(h) for h in (r, theta, phi, mult))
        self.label = label

    @property
    def coefficient_functions(self):
        return dict(zip(SLOTS, self._fns))

    def coefficients(self, coords: Coords):
        """Coefficient jets at ``coords`` as a 4-tuple (entries may be ``None``)."""
        key = ("op", id(self))
        hit = coords.cache.get(key)
        if hit is not None:
            return hit[1]
        out = tuple(None if f is None else f(coords) for f in self._fns)
        coords.cache[key] = (self, out)
        return out

    def with_label(self, label):
        return FirstOrderOperator(*self._fns, label=label)

    # -- linear structure ---------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, FirstOrderOperator):
            return NotImplemented
        fns = []
        for f, g in zip(self._fns, other._fns):
            if f is None or g is None:
                fns.append(f if g is None else g)
            else:
                fns.append(lambda c, f=f, g=g: f(c) + g(c))
        return FirstOrderOperator(*fns, label=f"({self.label} + {other.label})")

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        if not isinstance(other, FirstOrderOperator):
            return NotImplemented
        return self + (-other)

    def __mul__(self, s):
        if isinstance(s, FirstOrderOperator):
            raise TypeError("operator products are second order; use compose() or commutator()")
        s = complex(s)
        fns = [None if f is None else (lambda c, f=f: f(c) * s) for f in self._fns]
        return FirstOrderOperator(*fns, label=f"{_fmt(s)}*{self.label}")

    __rmul__ = __mul__

    def times(self, h, label=None) -> "FirstOrderOperator":
        """Left multiplication by the function ``h``: the operator ``h * O``."""
        h = as_coefficient(h)
        fns = [None if (f is None or h is None) else (lambda c, f=f: h(c) * f(c)) for f in self._fns]
        return FirstOrderOperator(*fns, label=label or f"h*{self.label}")

    def is_multiplication(self):
        return all(f is None for f in self._fns[:3])

    # -- action ---------------------------------------------------------------
    def apply_jet(self, g: Jet, coords: Coords | None = None) -> Jet:
        """Jet of ``O g``; the result has order ``g.order - 1``."""
        if g.order < 1:
            raise JetError("applying a first-order operator needs a jet of order >= 1")
        if coords is None:
            coords = Coords(g.base, g.order - 1, g.variables)
        return apply_coefficients(self.coefficients(coords), g)

    def __repr__(self):
        return f"FirstOrderOperator({self.label!r})"


def _fmt(s: complex):
    if s.imag == 0:
        return f"{s.real:g}"
    if s.real == 0:
        return f"{s.imag:g}i"
    return f"({s.real:g}{s.imag:+g}i)"


def apply_coefficients(coeffs, g: Jet) -> Jet:
    """Apply an operator given by coefficient jets (of order >= g.order - 1) to ``g``."""
    k = g.order - 1
    out = _deriv_apply(coeffs, g, k, g.variables)
    if coeffs[3] is not None:
        out = _add(out, coeffs[3].truncate(k) * g.truncate(k))
    return out if out is not None else g.truncate(k) * 0.0


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def zero_operator(label="0"):
    return FirstOrderOperator(label=label)


def multiplication(h, label="h") -> FirstOrderOperator:
    return FirstOrderOperator(mult=as_coefficient(h), label=label)


def partial(var: str, label=None) -> FirstOrderOperator:
    if var not in DERIV_SLOTS:
        raise OperatorError(f"unknown coordinate {var!r}")
    kw = {var: _const_fn(1.0)}
    return FirstOrderOperator(**kw, label=label or f"d_{var}")


# ---------------------------------------------------------------------------
# apply / commutator / conjugation
# ---------------------------------------------------------------------------

def apply(op: FirstOrderOperator, f, points, order: int, variables=None) -> Jet:
    """Jet of ``op f`` at ``points``, valid to ``order - 1``.

    ``f`` is a :class:`~monopole_algebra.fields.TestFunction` (or any object
    with a ``build(coords)`` method).
    """
    from .jets import VARIABLES_3D
    if order < 1:
        raise OperatorError("apply needs jet order K >= 1")
    variables = variables or VARIABLES_3D
    coords = Coords(points, order, variables)
    return op.apply_jet(f.build(coords), coords=Coords(coords.points, order - 1, variables))


def commutator(A: FirstOrderOperator, B: FirstOrderOperator, label=None) -> FirstOrderOperator:
    """Closed-form ``[A, B]``; coefficients are evaluated one jet order higher internally."""

    def slot_fn(i):
        def fn(c: Coords):
            up = c.raised()
            ca, cb = A.coefficients(up), B.coefficients(up)
            t1 = _deriv_apply(ca, cb[i], c.order, c.variables)
            t2 = _deriv_apply(cb, ca[i], c.order, c.variables)
            if t2 is not None:
                t1 = _add(t1, -t2)
            return t1 if t1 is not None else c.zero
        return fn

    return FirstOrderOperator(*(slot_fn(i) for i in range(4)),
                              label=label or f"[{A.label}, {B.label}]")


def conjugate(op: FirstOrderOperator, phase, label=None) -> FirstOrderOperator:
    """``exp(-i phase) op exp(i phase)``: the multiplicative part gains ``i op_deriv(phase)``."""
    phase = as_coefficient(phase)
    fns = list(op._fns)
    base_mult = fns[3]

    def mult(c: Coords):
        shift = _deriv_apply(op.coefficients(c.raised()), phase(c.raised()), c.order, c.variables)
        out = base_mult(c) if base_mult is not None else c.zero
        return out if shift is None else out + shift * 1j

    fns[3] = mult
    return FirstOrderOperator(*fns, label=label or f"conj({op.label})")


def compose_mult(op: FirstOrderOperator, h, label=None) -> FirstOrderOperator:
    """The first-order operator ``op o h`` (``h`` acting by multiplication first)."""
    h = as_coefficient(h)
    fns = [None if f is None else (lambda c, f=f: f(c) * h(c)) for f in op._fns[:3]]

    def mult(c: Coords):
        up = c.raised()
        ch = h(up)
        out = _deriv_apply(op.coefficients(up), ch, c.order, c.variables)
        if op._fns[3] is not None:
            out = _add(out, op._fns[3](c) * ch.truncate(c.order))
        return out if out is not None else c.zero

    return FirstOrderOperator(*fns, mult, label=label or f"{op.label}o h")


# ---------------------------------------------------------------------------
# products with second-order bookkeeping
# ---------------------------------------------------------------------------

_PAIRS = tuple((u, v) for i, u in enumerate(DERIV_SLOTS) for v in DERIV_SLOTS[i:])


class SecondOrderOperator:
    """Second-order part (symmetric, keyed by slot pairs) plus a first-order remainder.

    Only used to expand products; :meth:`first_order_part` certifies that the
    second-order coefficients vanish before handing back a first-order operator.
    """

    def __init__(self, second: dict, lower: FirstOrderOperator):
        self.second = {k: v for k, v in second.items() if v is not None}
        self.lower = lower

    def __add__(self, other):
        keys = set(self.second) | set(other.second)
        second = {}
        for k in keys:
            f, g = self.second.get(k), other.second.get(k)
            second[k] = f if g is None else g if f is None else (lambda c, f=f, g=g: f(c) + g(c))
        return SecondOrderOperator(second, self.lower + other.lower)

    def __mul__(self, s):
        s = complex(s)
        return SecondOrderOperator({k: (lambda c, f=f: f(c) * s) for k, f in self.second.items()},
                                   self.lower * s)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def second_order_residual(self, points) -> float:
        coords = Coords(points, 0)
        worst = 0.0
        for f in self.second.values():
            vals = np.abs(f(coords).value)
            vals = vals[np.isfinite(vals)]
            if vals.size:
                worst = max(worst, float(vals.max()))
        return worst

    def first_order_part(self, points=None, tol=1e-10) -> FirstOrderOperator:
        points = _default_check_points() if points is None else as_pointset(points)
        res = self.second_order_residual(points)
        if res > tol:
            raise NotFirstOrderError(f"product keeps a second-order part of size {res:.3e}")
        return self.lower


def compose(X: FirstOrderOperator, Y: FirstOrderOperator) -> SecondOrderOperator:
    """Expand the product ``X o Y`` by the product rule."""
    xf, yf = X._fns, Y._fns
    second = {}
    for u, v in _PAIRS:
        iu, iv = DERIV_SLOTS.index(u), DERIV_SLOTS.index(v)
        terms = [(xf[iu], yf[iv])]
        if u != v:
            terms.append((xf[iv], yf[iu]))
        terms = [(a, b) for a, b in terms if a is not None and b is not None]
        if terms:
            second[(u, v)] = (lambda c, terms=terms: _sum_products(c, terms))

    def slot_fn(i):
        def fn(c: Coords):
            up = c.raised()
            cx, cy = X.coefficients(up), Y.coefficients(up)
            out = _deriv_apply(cx, cy[i], c.order, c.variables)
            if i < 3:
                out = _add(out, _mul(_trunc(cx[3], c.order), _trunc(cy[i], c.order)))
                out = _add(out, _mul(_trunc(cy[3], c.order), _trunc(cx[i], c.order)))
            else:
                out = _add(out, _mul(_trunc(cx[3], c.order), _trunc(cy[3], c.order)))
            return out if out is not None else c.zero
        return fn

    lower = FirstOrderOperator(*(slot_fn(i) for i in range(4)), label=f"{X.label}{Y.label}")
    return SecondOrderOperator(second, lower)


def _trunc(j, order):
    return None if j is None else j.truncate(order)


def _sum_products(c, terms):
    out = None
    for a, b in terms:
        out = _add(out, a(c) * b(c))
    return out


def _default_check_points():
    return make_grid(5, 8, 0.3, "overlap").points


# ---------------------------------------------------------------------------
# vector operators
# ---------------------------------------------------------------------------

_EPS = {(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): 1, (0, 2, 1): -1, (2, 1, 0): -1, (1, 0, 2): -1}


def levi_civita(i, j, k) -> int:
    return _EPS.get((i, j, k), 0)


def cross(X, Y, check_points=None, tol=1e-10):
    """Literal ``(X x Y)_k = eps_kij X_i Y_j`` with operator order kept.

    Raises :class:`NotFirstOrderError` when the result is not first order (e.g.
    ``L x P`` taken literally), see :func:`lie_cross`.
    """
    out = []
    for k in range(3):
        acc = None
        for i in range(3):
            for j in range(3):
                e = levi_civita(k, i, j)
                if e:
                    term = compose(X[i], Y[j]) * e
                    acc = term if acc is None else acc + term
        out.append(acc.first_order_part(check_points, tol).with_label(f"({_vlabel(X)}x{_vlabel(Y)})_{'xyz'[k]}"))
    return out


def lie_cross(X, Y):
    """``(X x Y)_k = (1/2) eps_kij [X_i, Y_j]``.

    Coincides with :func:`cross` for ``X is Y``; for two different vector
    operators this is the commutator reading of ``X x Y``.
    """
    out = []
    for k in range(3):
        acc = None
        for i in range(3):
            for j in range(3):
                e = levi_civita(k, i, j)
                if e:
                    term = commutator(X[i], Y[j]) * (0.5 * e)
                    acc = term if acc is None else acc + term
        out.append(acc.with_label(f"({_vlabel(X)}x{_vlabel(Y)})_{'xyz'[k]}"))
    return out


def frame_dot(n, O, label=None) -> FirstOrderOperator:
    """``n . O + O . n`` for a vector of functions ``n`` and vector operator ``O``."""
    acc = None
    for ni, Oi in zip(n, O):
        term = Oi.times(ni) + compose_mult(Oi, ni)
        acc = term if acc is None else acc + term
    return acc.with_label(label or f"n.{_vlabel(O)}+{_vlabel(O)}.n")


def _vlabel(V):
    lab = getattr(V[0], "label", "V")
    return lab.rsplit("_", 1)[0] if "_" in lab else lab


# ---------------------------------------------------------------------------
# grid equality
# ---------------------------------------------------------------------------

@dataclass
class OperatorIdentityReport:
    identity_label: str
    max_abs_residual: float
    per_coefficient_residuals: dict
    grid_size: int
    tolerance: float
    n_excluded: int = 0
    paper_eq: str = ""
    params: dict = field(default_factory=dict)
    error: str = ""

    @property
    def passed(self) -> bool:
        return self.error == "" and self.max_abs_residual <= self.tolerance

    def to_dict(self):
        return {
            "label": self.identity_label,
            "paper_eq": self.paper_eq,
            "params": self.params,
            "residual": self.max_abs_residual,
            "per_coefficient": {k: self.per_coefficient_residuals.get(k, 0.0) for k in SLOTS},
            "tolerance": self.tolerance,
            "grid_size": self.grid_size,
            "n_excluded": self.n_excluded,
            "error": self.error,
            "pass": self.passed,
        }


def coefficient_values(op: FirstOrderOperator, points) -> dict:
    """Order-0 values of every coefficient at ``points`` (zeros for absent slots)."""
    pts = as_pointset(points)
    coords = Coords(pts, 0)
    vals = op.coefficients(coords)
    return {s: (np.zeros(len(pts), complex) if v is None else np.asarray(v.value))
            for s, v in zip(SLOTS, vals)}


def _pointwise_values(op, pts):
    rows = {s: np.full(len(pts), np.nan + 0j) for s in SLOTS}
    for i in range(len(pts)):
        try:
            vals = coefficient_values(op, pts.subset(np.arange(i, i + 1)))
        except (JetSingularity, FloatingPointError):
            continue
        for s in SLOTS:
            rows[s][i] = vals[s][0]
    return rows


def operator_equal(O1: FirstOrderOperator, O2: FirstOrderOperator, grid, tol: float = DEFAULT_TOLERANCE,
                   label: str | None = None) -> OperatorIdentityReport:
    """Compare all four coefficient functions of ``O1 - O2`` pointwise on ``grid``.

    Points where a coefficient is singular or undefined are excluded and
    counted in ``n_excluded`` rather than failing the whole comparison.
    """
    pts = grid.points if isinstance(grid, Grid) else as_pointset(grid)
    if len(pts) == 0:
        raise OperatorError("operator_equal needs a nonempty grid")
    diff = O1 - O2
    with np.errstate(divide="ignore", invalid="ignore"):
        try:
            vals = coefficient_values(diff, pts)
        except JetSingularity:
            vals = _pointwise_values(diff, pts)
    bad = np.zeros(len(pts), dtype=bool)
    for v in vals.values():
        bad |= ~np.isfinite(v)
    n_bad = int(bad.sum())
    if n_bad:
        log.warning("%s: %d of %d grid points excluded as singular", label or diff.label, n_bad, len(pts))
    good = ~bad
    per = {s: (float(np.max(np.abs(v[good]))) if good.any() else 0.0) for s, v in vals.items()}
    err = "" if good.any() else "every grid point is singular"
    return OperatorIdentityReport(
        identity_label=label or f"{O1.label} == {O2.label}",
        max_abs_residual=max(per.values()),
        per_coefficient_residuals=per,
        grid_size=int(good.sum()),
        tolerance=tol,
        n_excluded=n_bad,
        error=err,
    )
