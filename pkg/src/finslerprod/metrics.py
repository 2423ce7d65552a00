"""Metric zoo, squared-norm fields and the fundamental tensor.

Coordinates of an ``n``-dimensional metric are named ``x1..xn`` (base) and
``y1..yn`` (fiber). Every metric is evaluated through its squared norm
``F^2(x, y)``, a :class:`~finslerprod.jet.ScalarField` of arity ``2n`` that
accepts floats or jets.

The fundamental tensor ``g`` is half the fiber Hessian of ``F^2``; ``h = 2 g``
is the full Hessian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence, Union

import numpy as np

from . import jet as _jet
from .errors import DomainError
from .expr import Ast, compile_expr, evaluate, free_variables, parse
from .jet import Jet, ScalarField, lift
from .linalg import guarded_inverse, pivoted_cholesky

if TYPE_CHECKING:
    from .product import ProductFunction

Box = tuple  # ((lo, hi), ...) per base coordinate

DEFAULT_HALF_WIDTH = 0.5
DEFAULT_CONE = 0.05
HOMOGENEITY_LAMBDAS = (0.5, 2.0, 7.0)
HOMOGENEITY_RTOL = 1e-9
# a product sample is rejected when a factor's share of |y| drops below this
FIBER_SLIT_FRACTION = 0.05
# smallest |eigenvalue| / largest accepted for a product's g
NONDEGENERATE_RTOL = 1e-10


def coordinate_names(prefix: str, n: int) -> tuple[str, ...]:
    return tuple(f"{prefix}{i + 1}" for i in range(n))


@dataclass(frozen=True)
class Euclidean:
    dim: int
    domain: Box | None = None


@dataclass(frozen=True)
class Riemannian:
    """``a`` holds the upper triangle: ``a[i][j - i]`` is ``a_ij`` for ``j >= i``."""

    dim: int
    a: tuple
    domain: Box | None = None


@dataclass(frozen=True)
class Randers:
    dim: int
    a: tuple
    b: tuple
    domain: Box | None = None


@dataclass(frozen=True)
class Square:
    """Shen's square metric ``(alpha + beta)^2 / alpha``."""

    dim: int
    a: tuple
    b: tuple
    domain: Box | None = None


@dataclass(frozen=True)
class Product:
    left: "MetricSpec"
    right: "MetricSpec"
    f: "ProductFunction"

    @property
    def dim(self) -> int:
        return self.left.dim + self.right.dim

    @property
    def domain(self) -> Box:
        return domain_of(self.left) + domain_of(self.right)


MetricSpec = Union[Euclidean, Riemannian, Randers, Square, Product]


def _as_ast(entry) -> Ast:
    if isinstance(entry, str):
        return parse(entry)
    if isinstance(entry, (int, float)):
        return parse(repr(float(entry)))
    return entry


def upper_triangle(matrix: Sequence[Sequence]) -> tuple:
    """Convert a full symmetric matrix of expressions to upper-triangle storage.

    Entries below the diagonal may be ``None``; otherwise they must parse to
    the same tree as their mirror.
    """
    n = len(matrix)
    rows = []
    for i in range(n):
        if len(matrix[i]) != n:
            raise ValueError(f"row {i} of the coefficient matrix has {len(matrix[i])} entries, expected {n}")
        rows.append(tuple(_as_ast(matrix[i][j]) for j in range(i, n)))
        for j in range(i):
            lower = matrix[i][j]
            if lower is not None and _as_ast(lower) != rows[j][i - j]:
                raise ValueError(f"coefficient matrix is not symmetric at ({i}, {j})")
    return tuple(rows)


def vector_of(entries: Sequence) -> tuple:
    return tuple(_as_ast(e) for e in entries)


def riemannian(a: Sequence[Sequence], domain=None) -> Riemannian:
    return Riemannian(len(a), upper_triangle(a), _box(domain))


def randers(a: Sequence[Sequence], b: Sequence, domain=None) -> Randers:
    return Randers(len(a), upper_triangle(a), vector_of(b), _box(domain))


def square(a: Sequence[Sequence], b: Sequence, domain=None) -> Square:
    return Square(len(a), upper_triangle(a), vector_of(b), _box(domain))


def funk(dim: int = 2, domain=None) -> Randers:
    """Funk metric of the unit ball, written as a Randers metric.

    ``alpha^2 = ((1 - |x|^2)|y|^2 + <x, y>^2) / (1 - |x|^2)^2`` and
    ``beta = <x, y> / (1 - |x|^2)``; flag curvature is ``-1/4``.
    """
    xs = coordinate_names("x", dim)
    rho = "(1 - " + " - ".join(f"{x}^2" for x in xs) + ")"
    a = []
    for i in range(dim):
        row = []
        for j in range(dim):
            if j < i:
                row.append(None)
                continue
            delta = rho if i == j else "0"
            row.append(f"({delta} + {xs[i]}*{xs[j]}) / {rho}^2")
        a.append(row)
    b = [f"{x} / {rho}" for x in xs]
    if domain is None:
        domain = tuple((-0.5, 0.5) for _ in range(dim))
    return randers(a, b, domain)


def _box(domain) -> Box | None:
    if domain is None:
        return None
    return tuple((float(lo), float(hi)) for lo, hi in domain)


def domain_of(spec: MetricSpec) -> Box:
    if isinstance(spec, Product):
        return spec.domain
    if spec.domain is not None:
        return spec.domain
    return tuple((-DEFAULT_HALF_WIDTH, DEFAULT_HALF_WIDTH) for _ in range(spec.dim))


def check_coefficients(spec: MetricSpec) -> None:
    """Ensure coefficient expressions only use base coordinates ``x1..xn``."""
    if isinstance(spec, Product):
        check_coefficients(spec.left)
        check_coefficients(spec.right)
        return
    allowed = set(coordinate_names("x", spec.dim))
    entries = []
    if isinstance(spec, (Riemannian, Randers, Square)):
        if len(spec.a) != spec.dim or any(len(r) != spec.dim - i for i, r in enumerate(spec.a)):
            raise ValueError("coefficient matrix shape does not match dim")
        entries += [e for row in spec.a for e in row]
    if isinstance(spec, (Randers, Square)):
        if len(spec.b) != spec.dim:
            raise ValueError("1-form length does not match dim")
        entries += list(spec.b)
    for e in entries:
        extra = free_variables(e) - allowed
        if extra:
            raise ValueError(f"coefficient uses {sorted(extra)}; only {sorted(allowed)} are bound")


# squared norms ----------------------------------------------------------------


def _env(xs) -> dict:
    return {f"x{i + 1}": v for i, v in enumerate(xs)}


def _quadratic(a_rows: tuple, env: dict, ys: Sequence):
    total = 0.0
    n = len(ys)
    for i in range(n):
        for j in range(i, n):
            coef = evaluate(a_rows[i][j - i], env)
            if isinstance(coef, float) and coef == 0.0:
                continue
            term = ys[i] * ys[j] * coef
            total = total + (term if i == j else term * 2.0)
    return total


def _one_form(b: tuple, env: dict, ys: Sequence):
    total = 0.0
    for i, y in enumerate(ys):
        coef = evaluate(b[i], env)
        if isinstance(coef, float) and coef == 0.0:
            continue
        total = total + y * coef
    return total


def _alpha_beta(spec, xs, ys):
    env = _env(xs)
    alpha = _jet.sqrt(_quadratic(spec.a, env, ys))
    beta = _one_form(spec.b, env, ys)
    return alpha, beta


def squared_norm(spec: MetricSpec) -> ScalarField:
    n = spec.dim

    if isinstance(spec, Euclidean):

        def f2(*args):
            ys = args[n:]
            total = 0.0
            for y in ys:
                total = total + y * y
            return total

    elif isinstance(spec, Riemannian):

        def f2(*args):
            return _quadratic(spec.a, _env(args[:n]), args[n:])

    elif isinstance(spec, Randers):

        def f2(*args):
            alpha, beta = _alpha_beta(spec, args[:n], args[n:])
            F = alpha + beta
            return F * F

    elif isinstance(spec, Square):

        def f2(*args):
            alpha, beta = _alpha_beta(spec, args[:n], args[n:])
            s = alpha + beta
            F = s * s / alpha
            return F * F

    elif isinstance(spec, Product):
        left, right = squared_norm(spec.left), squared_norm(spec.right)
        m, k = spec.left.dim, spec.right.dim

        def f2(*args):
            xs, ys = args[:n], args[n:]
            K = left(*xs[:m], *ys[:m])
            H = right(*xs[m:], *ys[m:])
            return spec.f(K, H)

    else:
        raise TypeError(f"not a metric spec: {spec!r}")

    return ScalarField(2 * n, f2, name=type(spec).__name__)


@dataclass(frozen=True)
class EvaluatedMetric:
    """A metric ready for numerical work: its spec plus the ``F^2`` field."""

    spec: MetricSpec
    f2: ScalarField
    name: str = ""

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def is_product(self) -> bool:
        return isinstance(self.spec, Product)

    def factors(self) -> tuple["EvaluatedMetric", "EvaluatedMetric"]:
        if not self.is_product:
            raise TypeError(f"{self.name or 'metric'} is not a Minkowskian product")
        return evaluate_metric(self.spec.left), evaluate_metric(self.spec.right)


def evaluate_metric(spec: MetricSpec, name: str = "") -> EvaluatedMetric:
    check_coefficients(spec)
    return EvaluatedMetric(spec, squared_norm(spec), name)


def _as_metric(m) -> EvaluatedMetric:
    return m if isinstance(m, EvaluatedMetric) else evaluate_metric(m)


# pointwise quantities --------------------------------------------------------------


def coefficient_matrix(spec, x) -> np.ndarray:
    """``a_ij(x)`` as floats (identity for Euclidean)."""
    n = spec.dim
    if isinstance(spec, Euclidean):
        return np.eye(n)
    env = _env([float(v) for v in x])
    a = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            a[i, j] = a[j, i] = float(evaluate(spec.a[i][j - i], env))
    return a


def one_form(spec, x) -> np.ndarray:
    env = _env([float(v) for v in x])
    return np.array([float(evaluate(e, env)) for e in spec.b])


def one_form_norm(spec, x) -> float:
    """``||b||_alpha = sqrt(a^ij b_i b_j)`` at ``x``."""
    a = coefficient_matrix(spec, x)
    b = one_form(spec, x)
    return float(math.sqrt(max(b @ np.linalg.solve(a, b), 0.0)))


def f_squared(m, x, y) -> float:
    m = _as_metric(m)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (m.dim,) or y.shape != (m.dim,):
        raise ValueError(f"expected x and y of length {m.dim}")
    if not np.any(y):
        raise DomainError("F^2 is only smooth away from y = 0")
    value = float(m.f2(*x, *y))
    if not (math.isfinite(value) and value > 0.0):
        raise DomainError(f"F^2 = {value!r} is not positive at x={x.tolist()}, y={y.tolist()}")
    return value


def fiber_hessian(m: EvaluatedMetric, X, Y) -> np.ndarray:
    """Full fiber Hessian of ``F^2`` at a batch of points ``(B, n)`` -> ``(B, n, n)``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n = m.dim
    P = np.concatenate([X, Y], axis=1)
    J = lift(m.f2, P, 2, active=range(n, 2 * n))
    return hessian_from_jet(J)


def hessian_from_jet(J: Jet) -> np.ndarray:
    """Hessian in all variables of a jet of order >= 2."""
    v = J.nvars
    H = np.empty(J.shape + (v, v))
    for i in range(v):
        for j in range(i, v):
            idx = [0] * v
            idx[i] += 1
            idx[j] += 1
            H[..., i, j] = H[..., j, i] = _jet.partial(J, idx)
    return H


@dataclass
class FundamentalTensor:
    g: np.ndarray
    h: np.ndarray
    g_inv: np.ndarray

    def to_dict(self) -> dict:
        return {"g": self.g.tolist(), "h": self.h.tolist(), "g_inv": self.g_inv.tolist()}


def fundamental_tensor(m, x, y) -> FundamentalTensor:
    m = _as_metric(m)
    y = np.asarray(y, dtype=float)
    if not np.any(y):
        raise DomainError("the fundamental tensor is undefined at y = 0")
    h = fiber_hessian(m, x, y)[0]
    g = 0.5 * h
    return FundamentalTensor(g=g, h=h, g_inv=guarded_inverse(g, "fundamental tensor"))


# sampling -------------------------------------------------------------------------


def _antipodal_cone_ok(spec, x, y, cone: float) -> bool:
    # reject y within `cone` radians of -b^sharp, where alpha + beta is smallest
    a = coefficient_matrix(spec, x)
    b = one_form(spec, x)
    if not np.any(b):
        return True
    bsharp = np.linalg.solve(a, b)
    num = -(y @ a @ bsharp)
    den = math.sqrt(y @ a @ y) * math.sqrt(bsharp @ a @ bsharp)
    if den == 0.0:
        return False
    angle = math.acos(max(-1.0, min(1.0, num / den)))
    return angle > cone


def accepts(spec: MetricSpec, x, y, cone: float = DEFAULT_CONE) -> bool:
    """Whether ``(x, y)`` lies in the sampling domain of ``spec``."""
    if isinstance(spec, Product):
        m = spec.left.dim
        ny = float(np.linalg.norm(y))
        if ny == 0.0:
            return False
        yl, yr = y[:m], y[m:]
        if np.linalg.norm(yl) < FIBER_SLIT_FRACTION * ny or np.linalg.norm(yr) < FIBER_SLIT_FRACTION * ny:
            return False
        return accepts(spec.left, x[:m], yl, cone) and accepts(spec.right, x[m:], yr, cone)
    if not np.any(y):
        return False
    if isinstance(spec, (Randers, Square)):
        return _antipodal_cone_ok(spec, x, y, cone)
    return True


def sample_rng(seed: int, index: int) -> np.random.Generator:
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.random.default_rng([int(seed), int(index)])


def sample_point(spec: MetricSpec, rng: np.random.Generator, radius: float = 1.0, cone: float = DEFAULT_CONE, max_tries: int = 1000):
    box = np.array(domain_of(spec), dtype=float)
    n = spec.dim
    for _ in range(max_tries):
        x = rng.uniform(box[:, 0], box[:, 1])
        y = rng.standard_normal(n)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            continue
        y *= radius / norm
        if accepts(spec, x, y, cone):
            return x, y
    raise DomainError(f"could not draw a valid sample after {max_tries} tries")


def sample_points(spec: MetricSpec, count: int, seed: int, radius: float = 1.0, cone: float = DEFAULT_CONE, offset: int = 0):
    """``count`` samples ``(X, Y)``; sample ``i`` depends only on ``(seed, offset + i)``."""
    X = np.empty((count, spec.dim))
    Y = np.empty((count, spec.dim))
    for i in range(count):
        X[i], Y[i] = sample_point(spec, sample_rng(seed, offset + i), radius, cone)
    return X, Y


# validation ------------------------------------------------------------------------


@dataclass
class ValidationEntry:
    check: str
    sample: int
    value: float
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {"check": self.check, "sample": self.sample, "value": self.value, "passed": self.passed, "detail": self.detail}


@dataclass
class ValidationReport:
    subject: str
    entries: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def worst(self) -> dict:
        """Per check, the entry with the smallest margin (failing entries first)."""
        out: dict = {}
        for e in self.entries:
            cur = out.get(e.check)
            if cur is None or (cur.passed and not e.passed):
                out[e.check] = e
        return out

    def failures(self) -> list:
        return [e for e in self.entries if not e.passed]

    def to_dict(self) -> dict:
        return {
            "subject": self.subject,
            "passed": self.passed,
            "entries": [e.to_dict() for e in self.entries],
        }


def validate_metric(m, sample_count: int, seed: int = 0, radius: float = 1.0, cone: float = DEFAULT_CONE) -> ValidationReport:
    """Sample-based checks of the Finsler metric axioms; failures become report entries."""
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    m = _as_metric(m)
    spec = m.spec
    report = ValidationReport(m.name or type(spec).__name__)
    for i in range(sample_count):
        try:
            x, y = sample_point(spec, sample_rng(seed, i), radius, cone)
        except DomainError as exc:
            report.entries.append(ValidationEntry("sampling", i, math.nan, False, str(exc)))
            continue
        _validate_sample(m, spec, i, x, y, report)
    return report


def _norm_bound_entries(spec, i, x, report, prefix=""):
    if isinstance(spec, Product):
        m = spec.left.dim
        _norm_bound_entries(spec.left, i, x[:m], report, prefix + "left.")
        _norm_bound_entries(spec.right, i, x[m:], report, prefix + "right.")
    elif isinstance(spec, (Randers, Square)):
        nb = one_form_norm(spec, x)
        report.entries.append(ValidationEntry(prefix + "norm-bound", i, nb, nb < 1.0, "||b||_alpha < 1"))


def _validate_sample(m, spec, i, x, y, report):
    _norm_bound_entries(spec, i, x, report)
    try:
        base = float(m.f2(*x, *y))
    except DomainError as exc:
        report.entries.append(ValidationEntry("positivity", i, math.nan, False, str(exc)))
        return
    report.entries.append(ValidationEntry("positivity", i, base, math.isfinite(base) and base > 0.0))

    worst = 0.0
    for lam in HOMOGENEITY_LAMBDAS:
        try:
            scaled = float(m.f2(*x, *(lam * y)))
        except DomainError as exc:
            worst = math.inf
            break
        worst = max(worst, abs(scaled - lam * lam * base) / (lam * lam * abs(base)))
    report.entries.append(ValidationEntry("homogeneity", i, worst, worst < HOMOGENEITY_RTOL))

    try:
        g = 0.5 * fiber_hessian(m, x, y)[0]
    except DomainError as exc:
        report.entries.append(ValidationEntry("positive-definite", i, math.nan, False, str(exc)))
        return
    scale = float(np.max(np.abs(g)))
    if isinstance(spec, Product):
        # products are only required to be nondegenerate; f_t < 0 (e.g. K^2/H)
        # makes them indefinite whenever a factor has dimension >= 2
        eig = np.linalg.eigvalsh(g)
        ratio = float(np.min(np.abs(eig)) / np.max(np.abs(eig)))
        sig = f"signature ({int(np.sum(eig > 0))}, {int(np.sum(eig < 0))})"
        report.entries.append(ValidationEntry("nondegenerate", i, ratio, ratio > NONDEGENERATE_RTOL, sig))
        return
    _, _, min_pivot = pivoted_cholesky(g)
    ok = math.isfinite(min_pivot) and min_pivot > 1e-12 * scale
    report.entries.append(ValidationEntry("positive-definite", i, min_pivot, ok, "min pivot of pivoted Cholesky"))
