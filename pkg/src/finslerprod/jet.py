"""Truncated multivariate Taylor arithmetic ("jets").

A :class:`Jet` carries every Taylor coefficient of a scalar field up to a
fixed total order about one evaluation point, so a single evaluation yields
all partial derivatives exactly (up to round-off). Jets are batched: the
coefficient array has shape ``(*batch, ncoef)`` and arithmetic broadcasts over
the batch axes like numpy arrays do.

Monomials are stored in graded order (by total degree, then a fixed order
inside each degree), so the basis of order ``p`` is a prefix of the basis of
any order ``q > p`` in the same variables. Truncation is a slice.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .errors import DomainError, OrderExceededError

MAX_ORDER = 6


def n_monomials(nvars: int, order: int) -> int:
    """Number of monomials of total degree <= order in ``nvars`` variables."""
    return math.comb(nvars + order, order)


class JetAlgebra:
    """Basis and product tables for jets in ``nvars`` variables up to ``order``."""

    def __init__(self, nvars: int, order: int):
        if nvars < 1:
            raise ValueError("a jet needs at least one variable")
        if not 0 <= order <= MAX_ORDER:
            raise ValueError(f"jet order must lie in [0, {MAX_ORDER}], got {order}")
        self.nvars = nvars
        self.order = order

        rows = []
        for deg in range(order + 1):
            for combo in combinations_with_replacement(range(nvars), deg):
                e = [0] * nvars
                for c in combo:
                    e[c] += 1
                rows.append(e)
        self.exponents = np.array(rows, dtype=np.int64).reshape(-1, nvars)
        self.degrees = self.exponents.sum(axis=1)
        self.size = len(rows)
        self.index = {tuple(e): i for i, e in enumerate(rows)}
        self.factorials = np.array(
            [math.prod(math.factorial(int(k)) for k in e) for e in rows], dtype=float
        )

        base = order + 1
        weights = base ** np.arange(nvars, dtype=np.int64)
        codes = self.exponents @ weights
        sorter = np.argsort(codes)

        def locate(c):
            return sorter[np.searchsorted(codes, c, sorter=sorter)]

        counts = np.array([n_monomials(nvars, order - int(d)) for d in self.degrees])
        left = np.repeat(np.arange(self.size), counts)
        right = np.concatenate([np.arange(c) for c in counts])
        target = locate(codes[left] + codes[right])
        perm = np.argsort(target, kind="stable")
        self.mul_i = np.ascontiguousarray(left[perm])
        self.mul_j = np.ascontiguousarray(right[perm])
        self.mul_starts = np.searchsorted(target[perm], np.arange(self.size)).astype(np.int64)

        # d/dv of the order-p basis lands in the order-(p-1) prefix
        self.diff_src = []
        self.diff_fac = []
        if order >= 1:
            lower = n_monomials(nvars, order - 1)
            for v in range(nvars):
                self.diff_src.append(locate(codes[:lower] + weights[v]))
                self.diff_fac.append(self.exponents[:lower, v] + 1.0)


@functools.lru_cache(maxsize=None)
def algebra(nvars: int, order: int) -> JetAlgebra:
    return JetAlgebra(nvars, order)


def _as_float_array(value) -> np.ndarray:
    return np.asarray(value, dtype=float)


def _map(fn: Callable[[float], float], values: np.ndarray) -> np.ndarray:
    # libm scalar routines keep order-0 jets bit-identical to plain-float evaluation
    if values.ndim == 0:
        return np.array(fn(float(values)))
    flat = [fn(v) for v in values.ravel().tolist()]
    return np.array(flat, dtype=float).reshape(values.shape)


class Jet:
    """Truncated Taylor expansion; ``coeffs[..., k]`` multiplies monomial ``k``."""

    __slots__ = ("coeffs", "nvars", "order")
    __array_ufunc__ = None

    def __init__(self, coeffs, nvars: int, order: int):
        coeffs = _as_float_array(coeffs)
        if coeffs.ndim == 0 or coeffs.shape[-1] != n_monomials(nvars, order):
            raise ValueError(
                f"expected {n_monomials(nvars, order)} coefficients for "
                f"{nvars} variables at order {order}, got shape {coeffs.shape}"
            )
        self.coeffs = coeffs
        self.nvars = nvars
        self.order = order

    @classmethod
    def _new(cls, coeffs: np.ndarray, nvars: int, order: int) -> "Jet":
        # trusted internal constructor: no shape validation
        jet = object.__new__(cls)
        jet.coeffs = coeffs
        jet.nvars = nvars
        jet.order = order
        return jet

    # construction -----------------------------------------------------------

    @classmethod
    def constant(cls, value, nvars: int, order: int) -> "Jet":
        value = _as_float_array(value)
        coeffs = np.zeros(value.shape + (n_monomials(nvars, order),))
        coeffs[..., 0] = value
        return cls(coeffs, nvars, order)

    @classmethod
    def variable(cls, value, var: int, nvars: int, order: int) -> "Jet":
        """The coordinate function ``x_var`` expanded about ``value``."""
        if not 0 <= var < nvars:
            raise IndexError(f"variable {var} out of range for {nvars} variables")
        jet = cls.constant(value, nvars, order)
        if order >= 1:
            jet.coeffs[..., 1 + var] = 1.0
        return jet

    # views --------------------------------------------------------------------

    @property
    def algebra(self) -> JetAlgebra:
        return algebra(self.nvars, self.order)

    @property
    def shape(self) -> tuple:
        return self.coeffs.shape[:-1]

    @property
    def value(self):
        v = self.coeffs[..., 0]
        return float(v) if v.ndim == 0 else v.copy()

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise OrderExceededError(f"cannot raise jet order {self.order} to {order}")
        if order == self.order:
            return self
        return Jet(self.coeffs[..., : n_monomials(self.nvars, order)], self.nvars, order)

    def __getitem__(self, key) -> "Jet":
        if not isinstance(key, tuple):
            key = (key,)
        if any(k is Ellipsis for k in key):
            raise IndexError("Ellipsis indexing is not supported on jets")
        return Jet(self.coeffs[key + (Ellipsis,)], self.nvars, self.order)

    def __len__(self) -> int:
        if not self.shape:
            raise TypeError("len() of unbatched jet")
        return self.shape[0]

    def sum(self, axis: int) -> "Jet":
        ndim = len(self.shape)
        if not -ndim <= axis < ndim:
            raise ValueError(f"axis {axis} out of range for batch shape {self.shape}")
        return Jet(self.coeffs.sum(axis=axis % ndim), self.nvars, self.order)

    def __repr__(self) -> str:
        return f"Jet(nvars={self.nvars}, order={self.order}, shape={self.shape}, value={self.coeffs[..., 0]!r})"

    # derivatives ----------------------------------------------------------------

    def diff(self, var: int) -> "Jet":
        """Partial derivative in variable ``var``; the result has order one lower."""
        if self.order < 1:
            raise OrderExceededError("cannot differentiate an order-0 jet")
        alg = self.algebra
        coeffs = self.coeffs[..., alg.diff_src[var]] * alg.diff_fac[var]
        return Jet._new(coeffs, self.nvars, self.order - 1)

    def coefficient(self, idx: Sequence[int]):
        alg = self.algebra
        idx = tuple(int(k) for k in idx)
        if len(idx) != self.nvars:
            raise ValueError(f"multi-index {idx} has wrong length for {self.nvars} variables")
        if any(k < 0 for k in idx):
            raise ValueError(f"multi-index {idx} has negative entries")
        if sum(idx) > self.order:
            raise OrderExceededError(f"degree {sum(idx)} exceeds jet order {self.order}")
        c = self.coeffs[..., alg.index[idx]]
        return float(c) if c.ndim == 0 else c.copy()

    # arithmetic -------------------------------------------------------------------

    def _peer(self, other: "Jet") -> tuple["Jet", "Jet"]:
        if other.order == self.order and other.nvars == self.nvars:
            return self, other
        if other.nvars != self.nvars:
            raise ValueError(f"jets over {self.nvars} and {other.nvars} variables do not mix")
        order = min(self.order, other.order)
        return self.truncate(order), other.truncate(order)

    def _add_constant(self, c) -> "Jet":
        if isinstance(c, float):
            coeffs = self.coeffs.copy()
            coeffs[..., 0] += c
            return Jet._new(coeffs, self.nvars, self.order)
        c = _as_float_array(c)
        shape = np.broadcast_shapes(self.shape, c.shape)
        coeffs = np.array(np.broadcast_to(self.coeffs, shape + self.coeffs.shape[-1:]))
        coeffs[..., 0] += c
        return Jet(coeffs, self.nvars, self.order)

    def __add__(self, other):
        if isinstance(other, Jet):
            a, b = self._peer(other)
            return Jet._new(a.coeffs + b.coeffs, a.nvars, a.order)
        return self._add_constant(other)

    __radd__ = __add__

    def __neg__(self):
        return Jet._new(-self.coeffs, self.nvars, self.order)

    def __pos__(self):
        return self

    def __sub__(self, other):
        if isinstance(other, Jet):
            a, b = self._peer(other)
            return Jet._new(a.coeffs - b.coeffs, a.nvars, a.order)
        return self._add_constant(-_as_float_array(other))

    def __rsub__(self, other):
        return (-self)._add_constant(other)

    def __mul__(self, other):
        if isinstance(other, Jet):
            a, b = self._peer(other)
            return _multiply(a, b)
        if isinstance(other, float):
            return Jet._new(self.coeffs * other, self.nvars, self.order)
        c = _as_float_array(other)
        return Jet(self.coeffs * c[..., None], self.nvars, self.order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            a, b = self._peer(other)
            q = _multiply(a, reciprocal(b))
            q.coeffs[..., 0] = a.coeffs[..., 0] / b.coeffs[..., 0]
            return q
        c = _as_float_array(other)
        if np.any(c == 0.0):
            raise DomainError("division by zero")
        return Jet(self.coeffs / c[..., None], self.nvars, self.order)

    def __rtruediv__(self, other):
        c = _as_float_array(other)
        q = reciprocal(self) * c
        q.coeffs[..., 0] = c / self.coeffs[..., 0]
        return q

    def __pow__(self, p):
        return power(self, p)


def stack(jets: Sequence[Jet], axis: int = 0) -> Jet:
    """Stack jets along a new batch axis (orders truncate to the lowest)."""
    if not jets:
        raise ValueError("need at least one jet to stack")
    nvars = jets[0].nvars
    if any(j.nvars != nvars for j in jets):
        raise ValueError("cannot stack jets over different variable counts")
    order = min(j.order for j in jets)
    parts = [j.truncate(order).coeffs for j in jets]
    shape = np.broadcast_shapes(*(p.shape for p in parts))
    parts = [np.broadcast_to(p, shape) for p in parts]
    ndim = len(shape) - 1
    if axis < 0:
        axis += ndim + 1
    return Jet(np.stack(parts, axis=axis), nvars, order)


def _flat_pair(a: Jet, b: Jet):
    size = a.coeffs.shape[-1]
    if a.coeffs.shape == b.coeffs.shape:
        shape = a.coeffs.shape[:-1]
        a2 = np.ascontiguousarray(a.coeffs).reshape(-1, size)
        b2 = np.ascontiguousarray(b.coeffs).reshape(-1, size)
        return a2, b2, shape
    shape = np.broadcast_shapes(a.shape, b.shape)
    a2 = np.ascontiguousarray(np.broadcast_to(a.coeffs, shape + (size,))).reshape(-1, size)
    b2 = np.ascontiguousarray(np.broadcast_to(b.coeffs, shape + (size,))).reshape(-1, size)
    return a2, b2, shape


def _multiply(a: Jet, b: Jet) -> Jet:
    alg = a.algebra
    a2, b2, shape = _flat_pair(a, b)
    out = _kernels.mul(a2, b2, alg.mul_i, alg.mul_j, alg.mul_starts)
    return Jet._new(out.reshape(shape + (alg.size,)), a.nvars, a.order)


def compose(x: Jet, taylor: np.ndarray) -> Jet:
    """Evaluate ``sum_k taylor[..., k] * (x - x0)**k`` for a univariate expansion.

    ``taylor[..., k]`` must hold ``h^(k)(x0) / k!`` for the outer function ``h``
    at the constant term ``x0`` of ``x``.
    """
    alg = x.algebra
    taylor = np.asarray(taylor, dtype=float)
    taylor = taylor[..., : x.order + 1]
    if taylor.shape[:-1] == x.shape:
        shape = x.shape
        u = x.coeffs.reshape(-1, alg.size).copy()
    else:
        shape = np.broadcast_shapes(x.shape, taylor.shape[:-1])
        u = np.array(np.broadcast_to(x.coeffs, shape + (alg.size,))).reshape(-1, alg.size)
        taylor = np.broadcast_to(taylor, shape + taylor.shape[-1:])
    u[:, 0] = 0.0
    t2 = np.ascontiguousarray(taylor).reshape(-1, x.order + 1)
    out = _kernels.compose(u, t2, alg.mul_i, alg.mul_j, alg.mul_starts)
    return Jet._new(out.reshape(shape + (alg.size,)), x.nvars, x.order)


# Taylor coefficients of the primitives about c ----------------------------------


def _series(c: np.ndarray, order: int) -> np.ndarray:
    return np.empty(c.shape + (order + 1,))


def _taylor_reciprocal(c: np.ndarray, order: int) -> np.ndarray:
    t = _series(c, order)
    t[..., 0] = _map(lambda v: 1.0 / v, c)
    for k in range(1, order + 1):
        t[..., k] = -t[..., k - 1] / c
    return t


def _taylor_exp(c: np.ndarray, order: int) -> np.ndarray:
    t = _series(c, order)
    e = _map(math.exp, c)
    for k in range(order + 1):
        t[..., k] = e / math.factorial(k)
    return t


def _taylor_log(c: np.ndarray, order: int) -> np.ndarray:
    t = _series(c, order)
    t[..., 0] = _map(math.log, c)
    for k in range(1, order + 1):
        t[..., k] = (-1.0) ** (k - 1) / (k * c**k)
    return t


def _taylor_power(c: np.ndarray, p: float, order: int, head=None) -> np.ndarray:
    t = _series(c, order)
    t[..., 0] = _map(head or (lambda v: v**p), c)
    binom = 1.0
    for k in range(1, order + 1):
        binom *= (p - k + 1) / k
        t[..., k] = binom * c ** (p - k)
    return t


def _taylor_sincos(c: np.ndarray, order: int, cosine: bool) -> np.ndarray:
    s = _map(math.sin, c)
    co = _map(math.cos, c)
    # derivatives cycle sin, cos, -sin, -cos (shifted by one for cos)
    cycle = [co, -s, -co, s] if cosine else [s, co, -s, -co]
    t = _series(c, order)
    for k in range(order + 1):
        t[..., k] = cycle[k % 4] / math.factorial(k)
    return t


def _taylor_tan(c: np.ndarray, order: int) -> np.ndarray:
    # t' = 1 + t^2 solved as a power series
    t = _series(c, order)
    t[..., 0] = _map(math.tan, c)
    for k in range(order):
        conv = sum(t[..., j] * t[..., k - j] for j in range(k + 1))
        t[..., k + 1] = ((1.0 if k == 0 else 0.0) + conv) / (k + 1)
    return t


# primitives accepting floats or jets ------------------------------------------------


def reciprocal(x):
    if isinstance(x, Jet):
        c = x.coeffs[..., 0]
        if np.any(c == 0.0):
            raise DomainError("division by zero (jet constant term is 0)")
        return compose(x, _taylor_reciprocal(c, x.order))
    if x == 0.0:
        raise DomainError("division by zero")
    return 1.0 / x


def divide(a, b):
    if isinstance(a, Jet) or isinstance(b, Jet):
        if not isinstance(b, Jet) and b == 0.0:
            raise DomainError("division by zero")
        return a / b
    if b == 0.0:
        raise DomainError("division by zero")
    return a / b


def sqrt(x):
    if isinstance(x, Jet):
        c = x.coeffs[..., 0]
        if np.any(c < 0.0):
            raise DomainError("sqrt of a negative value")
        if x.order >= 1 and np.any(c == 0.0):
            raise DomainError("sqrt is not differentiable at 0")
        return compose(x, _taylor_power(c, 0.5, x.order, head=math.sqrt))
    if x < 0.0:
        raise DomainError(f"sqrt of negative value {x!r}")
    return math.sqrt(x)


def exp(x):
    if isinstance(x, Jet):
        return compose(x, _taylor_exp(x.coeffs[..., 0], x.order))
    return math.exp(x)


def log(x):
    if isinstance(x, Jet):
        c = x.coeffs[..., 0]
        if np.any(c <= 0.0):
            raise DomainError("log of a non-positive value")
        return compose(x, _taylor_log(c, x.order))
    if x <= 0.0:
        raise DomainError(f"log of non-positive value {x!r}")
    return math.log(x)


def sin(x):
    if isinstance(x, Jet):
        return compose(x, _taylor_sincos(x.coeffs[..., 0], x.order, cosine=False))
    return math.sin(x)


def cos(x):
    if isinstance(x, Jet):
        return compose(x, _taylor_sincos(x.coeffs[..., 0], x.order, cosine=True))
    return math.cos(x)


def tan(x):
    if isinstance(x, Jet):
        c = x.coeffs[..., 0]
        if np.any(np.cos(c) == 0.0):
            raise DomainError("tan pole")
        return compose(x, _taylor_tan(c, x.order))
    return math.tan(x)


def ipow(x, n: int):
    """Integer power by repeated squaring; identical op sequence for floats and jets."""
    if n == 0:
        return x * 0.0 + 1.0
    if n < 0:
        return reciprocal(ipow(x, -n))
    result = None
    base = x
    while n:
        if n & 1:
            result = base if result is None else result * base
        n >>= 1
        if n:
            base = base * base
    return result


def power(x, p):
    """``x ** p``; integer-valued ``p`` uses repeated multiplication, otherwise ``x > 0``."""
    if isinstance(p, Jet):
        # exp(p log x), with the constant term taken from the float path so an
        # order-0 jet agrees bit for bit with plain evaluation
        u = p * log(x)
        base = x.coeffs[..., 0] if isinstance(x, Jet) else np.asarray(x, dtype=float)
        base, expo = np.broadcast_arrays(base, p.coeffs[..., 0])
        head = np.array([power(b, e) for b, e in zip(base.ravel().tolist(), expo.ravel().tolist())]).reshape(base.shape)
        t = _series(head, u.order)
        for k in range(u.order + 1):
            t[..., k] = head / math.factorial(k)
        return compose(u, t)
    p = float(p)
    if p.is_integer():
        return ipow(x, int(p))
    if isinstance(x, Jet):
        c = x.coeffs[..., 0]
        if np.any(c <= 0.0):
            raise DomainError("non-integer power of a non-positive base")
        return compose(x, _taylor_power(c, p, x.order))
    if x <= 0.0:
        raise DomainError(f"non-integer power {p!r} of non-positive base {x!r}")
    return x**p


# fields ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarField:
    """A scalar function of ``arity`` arguments evaluable on floats or jets."""

    arity: int
    evaluator: Callable[..., object]
    name: str = ""

    def __call__(self, *args):
        if len(args) != self.arity:
            raise TypeError(f"{self.name or 'field'} takes {self.arity} arguments, got {len(args)}")
        return self.evaluator(*args)


def seed_variables(point, order: int, active: Sequence[int] | None = None) -> list:
    """Jets for each coordinate of ``point`` (shape ``(n,)`` or ``(batch, n)``).

    Only the ``active`` coordinates become jet variables; the others are returned
    as floats (single point) or constant jets (batched points).
    """
    point = np.asarray(point, dtype=float)
    n = point.shape[-1]
    active = list(range(n)) if active is None else list(active)
    args: list = []
    for i in range(n):
        v = point[..., i]
        if i in active:
            args.append(Jet.variable(v, active.index(i), len(active), order))
        else:
            # batched constants ride along as jets so primitives see one type
            args.append(float(v) if v.ndim == 0 else Jet.constant(v, len(active), order))
    return args


def lift(field: ScalarField, point, order: int, active: Sequence[int] | None = None) -> Jet:
    """Taylor expansion of ``field`` about ``point`` up to ``order``.

    Coefficient ``alpha`` of the result equals ``d^alpha field / alpha!``.
    """
    point = np.asarray(point, dtype=float)
    if point.shape[-1] != field.arity:
        raise ValueError(f"point has {point.shape[-1]} coordinates, field arity is {field.arity}")
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"order must lie in [0, {MAX_ORDER}], got {order}")
    args = seed_variables(point, order, active)
    nvars = field.arity if active is None else len(active)
    out = field(*args)
    if not isinstance(out, Jet):
        out = Jet.constant(np.broadcast_to(_as_float_array(out), point.shape[:-1]), nvars, order)
    return out


def partial(jet: Jet, idx: Sequence[int]):
    """Raw partial derivative ``alpha! * coeffs[alpha]``."""
    idx = tuple(int(k) for k in idx)
    c = jet.coefficient(idx)
    return c * math.prod(math.factorial(k) for k in idx)
