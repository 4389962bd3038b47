"""Truncated multivariate Taylor arithmetic ("jets") over complex scalars.

A :class:`Jet` holds the Taylor coefficients of a function about a base point,
for every multi-index of total degree ``<= order``. Coefficients are stored in
a flat, graded layout (all degree-0 terms, then degree 1, ...), so truncating
to a lower order is a prefix slice. Any number of leading batch axes is
allowed; the last axis always indexes the multi-indices. Batching is how whole
evaluation grids are pushed through the operator algebra in one pass.
"""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

VARIABLES_3D = ("r", "theta", "phi")
VARIABLES_2D = ("theta", "phi")


class JetError(ValueError):
    """Incompatible jets or an undefined jet operation."""


class JetSingularity(JetError, ZeroDivisionError):
    """A composition is singular at the base value (e.g. 1/x at x = 0)."""


def n_terms(order: int, nvars: int) -> int:
    """Number of multi-indices of total degree <= ``order`` in ``nvars`` variables."""
    return math.comb(order + nvars, nvars)


@dataclass(frozen=True)
class _Tables:
    indices: tuple  # multi-indices in graded order
    lookup: dict
    mul_a: np.ndarray
    mul_b: np.ndarray
    mul_matrix: sparse.csr_matrix  # (n_terms, n_pairs) scatter-add
    diff_src: tuple  # per variable: source positions
    diff_dst: tuple  # per variable: destination positions in the order-1 jet
    diff_fac: tuple
    factorials: np.ndarray


def _graded_indices(order, nvars):
    out = []
    for degree in range(order + 1):
        level = [a for a in itertools.product(range(degree + 1), repeat=nvars) if sum(a) == degree]
        out.extend(sorted(level, reverse=True))
    return tuple(out)


@functools.lru_cache(maxsize=None)
def _tables(order: int, nvars: int) -> _Tables:
    indices = _graded_indices(order, nvars)
    lookup = {a: i for i, a in enumerate(indices)}
    ia, ib, ic = [], [], []
    for i, a in enumerate(indices):
        room = order - sum(a)
        for j, b in enumerate(indices):
            if sum(b) > room:
                break
            ia.append(i)
            ib.append(j)
            ic.append(lookup[tuple(x + y for x, y in zip(a, b))])
    n = len(indices)
    npairs = len(ia)
    mul_matrix = sparse.csr_matrix(
        (np.ones(npairs), (np.asarray(ic), np.arange(npairs))), shape=(n, npairs)
    )
    diff_src, diff_dst, diff_fac = [], [], []
    lower = {a: i for i, a in enumerate(indices) if sum(a) < order}
    for v in range(nvars):
        src, dst, fac = [], [], []
        for a, i in lower.items():
            up = list(a)
            up[v] += 1
            src.append(lookup[tuple(up)])
            dst.append(i)
            fac.append(up[v])
        diff_src.append(np.asarray(src, dtype=int))
        diff_dst.append(np.asarray(dst, dtype=int))
        diff_fac.append(np.asarray(fac, dtype=float))
    factorials = np.array([math.prod(math.factorial(k) for k in a) for a in indices], dtype=float)
    return _Tables(indices, lookup, np.asarray(ia), np.asarray(ib), mul_matrix,
                   tuple(diff_src), tuple(diff_dst), tuple(diff_fac), factorials)


def _same_base(a, b) -> bool:
    if a is b:
        return True
    try:
        return bool(a == b)
    except (TypeError, ValueError):
        return False


class Jet:
    """Truncated Taylor expansion of a complex function about a base point.

    Parameters
    ----------
    coeffs : array_like
        Complex coefficients, shape ``(*batch, n_terms(order, len(variables)))``.
    order : int
        Maximum total derivative order ``K``.
    variables : tuple of str
        Names of the expansion variables, e.g. ``("r", "theta", "phi")``.
    base : object
        The base point (or batch of points); only compared for equality.
    """

    __slots__ = ("coeffs", "order", "variables", "base")
    __array_ufunc__ = None

    def __init__(self, coeffs, order: int, variables=VARIABLES_3D, base=None):
        coeffs = np.asarray(coeffs, dtype=complex)
        n = n_terms(order, len(variables))
        if coeffs.shape[-1:] != (n,):
            raise JetError(f"expected {n} coefficients for order {order} in {len(variables)} variables, "
                           f"got trailing shape {coeffs.shape[-1:]}")
        self.coeffs = coeffs
        self.order = order
        self.variables = tuple(variables)
        self.base = base

    # -- construction -------------------------------------------------------
    @classmethod
    def constant(cls, value, order, variables=VARIABLES_3D, base=None):
        value = np.asarray(value, dtype=complex)
        coeffs = np.zeros(value.shape + (n_terms(order, len(variables)),), dtype=complex)
        coeffs[..., 0] = value
        return cls(coeffs, order, variables, base)

    def const_like(self, value) -> "Jet":
        value = np.broadcast_to(np.asarray(value, dtype=complex), self.batch_shape)
        return Jet.constant(value, self.order, self.variables, self.base)

    # -- inspection ---------------------------------------------------------
    @property
    def batch_shape(self):
        return self.coeffs.shape[:-1]

    @property
    def nvars(self) -> int:
        return len(self.variables)

    @property
    def value(self):
        return self.coeffs[..., 0]

    @property
    def multi_indices(self):
        return _tables(self.order, self.nvars).indices

    def _index(self, alpha):
        alpha = self._as_multi_index(alpha)
        try:
            return _tables(self.order, self.nvars).lookup[alpha]
        except KeyError:
            raise JetError(f"multi-index {alpha} exceeds order {self.order}") from None

    def _as_multi_index(self, alpha):
        if isinstance(alpha, dict):
            return tuple(int(alpha.get(v, 0)) for v in self.variables)
        alpha = tuple(int(k) for k in alpha)
        if len(alpha) != self.nvars:
            raise JetError(f"multi-index {alpha} has wrong length for variables {self.variables}")
        return alpha

    def coeff(self, alpha):
        """Taylor coefficient of multi-index ``alpha`` (tuple or ``{var: power}``)."""
        return self.coeffs[..., self._index(alpha)]

    def derivative(self, alpha):
        """Partial derivative ``d^alpha f`` at the base point, i.e. ``alpha! * coeff``."""
        i = self._index(alpha)
        return self.coeffs[..., i] * _tables(self.order, self.nvars).factorials[i]

    def coeff_dict(self):
        return {a: self.coeffs[..., i] for i, a in enumerate(self.multi_indices)}

    # -- structural ops -----------------------------------------------------
    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise JetError(f"cannot raise jet order {self.order} to {order}")
        if order == self.order:
            return self
        return Jet(self.coeffs[..., : n_terms(order, self.nvars)], order, self.variables, self.base)

    def diff(self, var) -> "Jet":
        """Jet of the partial derivative along ``var``; the order drops by one."""
        if self.order < 1:
            raise JetError("cannot differentiate an order-0 jet")
        v = self.variables.index(var) if isinstance(var, str) else int(var)
        t = _tables(self.order, self.nvars)
        out = np.zeros(self.batch_shape + (n_terms(self.order - 1, self.nvars),), dtype=complex)
        out[..., t.diff_dst[v]] = self.coeffs[..., t.diff_src[v]] * t.diff_fac[v]
        return Jet(out, self.order - 1, self.variables, self.base)

    def _check(self, other: "Jet"):
        if other.order != self.order:
            raise JetError(f"order mismatch: {self.order} vs {other.order}")
        if other.variables != self.variables:
            raise JetError(f"variable mismatch: {self.variables} vs {other.variables}")
        if not _same_base(self.base, other.base):
            raise JetError("jets expanded about different base points")

    def _coerce(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return other
        return None

    # -- arithmetic ---------------------------------------------------------
    def __neg__(self):
        return Jet(-self.coeffs, self.order, self.variables, self.base)

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            out = self.coeffs.copy()
            out[..., 0] = out[..., 0] + other
            return Jet(out, self.order, self.variables, self.base)
        return Jet(self.coeffs + o.coeffs, self.order, self.variables, self.base)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            scale = np.asarray(other, dtype=complex)
            return Jet(self.coeffs * scale[..., None], self.order, self.variables, self.base)
        return Jet(_mul_coeffs(self.coeffs, o.coeffs, self.order, self.nvars),
                   self.order, self.variables, self.base)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * reciprocal(self._coerce(other))
        scale = np.asarray(other, dtype=complex)
        if np.any(scale == 0):
            raise JetSingularity("division by zero scalar")
        return self * (1.0 / scale)

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, n):
        return power(self, n)

    def __repr__(self):
        return f"Jet(order={self.order}, variables={self.variables}, batch={self.batch_shape})"


def _mul_coeffs(a, b, order, nvars):
    t = _tables(order, nvars)
    prod = a[..., t.mul_a] * b[..., t.mul_b]
    shape = prod.shape[:-1]
    flat = prod.reshape(-1, prod.shape[-1])
    out = (t.mul_matrix @ flat.T).T
    return np.asarray(out).reshape(shape + (t.mul_matrix.shape[0],))


def jet_var(point, which: str, order: int, variables=VARIABLES_3D) -> Jet:
    """Jet of the coordinate function ``which`` expanded about ``point``.

    ``point`` needs ``r``, ``theta`` and ``phi`` attributes (scalars or arrays).
    """
    if order < 1:
        raise JetError("coordinate jets need order >= 1")
    if which not in ("r", "theta", "phi"):
        raise JetError(f"unsupported variable id {which!r}")
    value = np.asarray(getattr(point, which), dtype=complex)
    jet = Jet.constant(value, order, variables, base=point)
    if which in variables:
        unit = tuple(1 if v == which else 0 for v in variables)
        jet.coeffs[..., jet._index(unit)] = 1.0
    return jet


# ---------------------------------------------------------------------------
# elementary functions by Taylor composition
# ---------------------------------------------------------------------------

def compose(a: Jet, series) -> Jet:
    """Evaluate ``sum_k series[k] * (a - a.value)**k`` by Horner's rule.

    ``series[k]`` are the Taylor coefficients ``f^(k)(a0)/k!`` of the outer
    function about the base value, each broadcastable to ``a.batch_shape``.
    """
    axis = _single_axis(a)
    if axis is not None:
        return _compose_axis(a, series, axis)
    h = Jet(a.coeffs.copy(), a.order, a.variables, a.base)
    h.coeffs[..., 0] = 0.0
    out = a.const_like(series[a.order])
    for k in range(a.order - 1, -1, -1):
        out = out * h + np.broadcast_to(series[k], a.batch_shape)
    return out


@functools.lru_cache(maxsize=None)
def _axis_positions(order, nvars, v):
    lookup = _tables(order, nvars).lookup
    return np.array([lookup[tuple(k if i == v else 0 for i in range(nvars))] for k in range(order + 1)])


def _single_axis(a: Jet):
    """Index of the only variable ``a`` depends on, else ``None``."""
    if a.order == 0:
        return None
    for v in range(a.nvars):
        pos = _axis_positions(a.order, a.nvars, v)
        rest = np.ones(a.coeffs.shape[-1], dtype=bool)
        rest[pos] = False
        if not np.any(a.coeffs[..., rest]):
            return v
    return None


def _mul_1d(x, y):
    k = x.shape[-1]
    out = np.zeros(np.broadcast_shapes(x.shape, y.shape), dtype=complex)
    for i in range(k):
        out[..., i:] += x[..., i:i + 1] * y[..., : k - i]
    return out


def _compose_axis(a: Jet, series, v):
    """Composition for a jet that varies along one variable only (1-D Taylor arithmetic)."""
    pos = _axis_positions(a.order, a.nvars, v)
    h = a.coeffs[..., pos].copy()
    h[..., 0] = 0.0
    out = np.zeros_like(h)
    out[..., 0] = series[a.order]
    for k in range(a.order - 1, -1, -1):
        out = _mul_1d(out, h)
        out[..., 0] += series[k]
    coeffs = np.zeros(a.coeffs.shape, dtype=complex)
    coeffs[..., pos] = out
    return Jet(coeffs, a.order, a.variables, a.base)


def _inv_fact(k):
    return 1.0 / math.factorial(k)


def sin(a: Jet) -> Jet:
    x0 = a.value
    s, c = np.sin(x0), np.cos(x0)
    cycle = (s, c, -s, -c)
    return compose(a, [cycle[k % 4] * _inv_fact(k) for k in range(a.order + 1)])


def cos(a: Jet) -> Jet:
    x0 = a.value
    s, c = np.sin(x0), np.cos(x0)
    cycle = (c, -s, -c, s)
    return compose(a, [cycle[k % 4] * _inv_fact(k) for k in range(a.order + 1)])


def exp(a: Jet) -> Jet:
    e = np.exp(a.value)
    return compose(a, [e * _inv_fact(k) for k in range(a.order + 1)])


def reciprocal(a: Jet) -> Jet:
    x0 = a.value
    if np.any(x0 == 0):
        raise JetSingularity("reciprocal of a jet with zero value")
    inv = 1.0 / x0
    return compose(a, [(-1) ** k * inv ** (k + 1) for k in range(a.order + 1)])


def power(a: Jet, n: int) -> Jet:
    """Integer power; negative ``n`` goes through :func:`reciprocal`."""
    if int(n) != n:
        raise JetError("only integer powers are supported")
    n = int(n)
    if n < 0:
        return power(reciprocal(a), -n)
    out = a.const_like(1.0)
    base = a
    while n:
        if n & 1:
            out = out * base
        n >>= 1
        if n:
            base = base * base
    return out


def tan_half(a: Jet) -> Jet:
    """``tan(a/2) = (1 - cos a) / sin a``, the north-patch monopole profile."""
    return sin(a * 0.5) / cos(a * 0.5)


ELEMENTARY = {
    "sin": sin,
    "cos": cos,
    "exp": exp,
    "reciprocal": reciprocal,
    "tan_half": tan_half,
    "square": lambda a: power(a, 2),
    "cube": lambda a: power(a, 3),
    "inverse_square": lambda a: power(a, -2),
}


def jet_elementary(a: Jet, name: str) -> Jet:
    try:
        fn = ELEMENTARY[name]
    except KeyError:
        raise JetError(f"unknown elementary function {name!r}") from None
    return fn(a)
