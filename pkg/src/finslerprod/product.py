"""Minkowskian products ``F = sqrt(f(K, H))`` and their closed-form tensor blocks.

``K`` and ``H`` are the squared norms of the left and right factors, and
``f(s, t)`` is a positively 1-homogeneous product function. The block formulas
here are built only from factor quantities (``K_a``, ``K_ab``, ``H_alpha``,
``H_alpha beta``) and partials of ``f``; they never differentiate the product
``F^2`` itself, which keeps them independent of the jet Hessian they are
checked against.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import DomainError, SingularMatrixError
from .expr import Ast, evaluate, free_variables, parse, to_string
from .jet import Jet, lift, seed_variables
from .linalg import SINGULAR_RTOL, check_nonsingular
from .metrics import (
    EvaluatedMetric,
    HOMOGENEITY_LAMBDAS,
    HOMOGENEITY_RTOL,
    Product,
    ValidationEntry,
    ValidationReport,
    evaluate_metric,
    hessian_from_jet,
)

NONZERO_ATOL = 1e-12


@dataclass(frozen=True)
class Linear:
    a: float
    b: float

    def __call__(self, s, t):
        return s * self.a + t * self.b

    def __str__(self) -> str:
        return f"linear({self.a!r},{self.b!r})"


@dataclass(frozen=True)
class RatioSquare:
    def __call__(self, s, t):
        return s * s / t

    def __str__(self) -> str:
        return "ratio_square"


@dataclass(frozen=True)
class Custom:
    ast: Ast

    def __post_init__(self):
        extra = free_variables(self.ast) - {"s", "t"}
        if extra:
            raise ValueError(f"product function may only use s and t, found {sorted(extra)}")

    def __call__(self, s, t):
        return evaluate(self.ast, {"s": s, "t": t})

    def __str__(self) -> str:
        return to_string(self.ast)


ProductFunction = Union[Linear, RatioSquare, Custom]

_LINEAR = re.compile(r"^\s*linear\s*\(\s*([^,]+?)\s*,\s*([^)]+?)\s*\)\s*$")


def parse_product_function(text: str) -> ProductFunction:
    """``"linear(a,b)"``, ``"ratio_square"`` or an expression in ``s`` and ``t``."""
    m = _LINEAR.match(text)
    if m:
        a, b = float(m.group(1)), float(m.group(2))
        if not (a > 0 and b > 0):
            raise ValueError("linear product function needs positive coefficients")
        return Linear(a, b)
    if text.strip() == "ratio_square":
        return RatioSquare()
    return Custom(parse(text))


@dataclass
class FPartials:
    """``f`` and its partials up to second order at ``(s, t) = (K, H)``."""

    f: np.ndarray
    f_s: np.ndarray
    f_t: np.ndarray
    f_ss: np.ndarray
    f_st: np.ndarray
    f_tt: np.ndarray

    @property
    def delta(self) -> np.ndarray:
        return self.f_s * self.f_t - 2.0 * self.f * self.f_st


def f_partials(f: ProductFunction, s, t) -> FPartials:
    """Exact partials of ``f`` through an order-2 jet; ``s``, ``t`` may be arrays."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    point = np.stack(np.broadcast_arrays(s, t), axis=-1)
    J = f(*seed_variables(point, 2))
    if not isinstance(J, Jet):
        raise ValueError("product function does not depend on s or t")
    c = lambda idx: J.coefficient(idx)
    return FPartials(
        f=np.asarray(c((0, 0))),
        f_s=np.asarray(c((1, 0))),
        f_t=np.asarray(c((0, 1))),
        f_ss=2.0 * np.asarray(c((2, 0))),
        f_st=np.asarray(c((1, 1))),
        f_tt=2.0 * np.asarray(c((0, 2))),
    )


def default_grid(points: int = 20, lo: float = 1e-2, hi: float = 1e2) -> list[tuple[float, float]]:
    axis = np.logspace(math.log10(lo), math.log10(hi), points)
    return [(float(s), float(t)) for s in axis for t in axis]


def validate_product_function(f: ProductFunction, grid: Sequence[tuple[float, float]] | None = None) -> ValidationReport:
    """Homogeneity, positivity, nonvanishing ``f_s``, ``f_t`` and ``Delta`` on ``grid``."""
    grid = default_grid() if grid is None else list(grid)
    if not grid:
        raise ValueError("grid must be non-empty")
    report = ValidationReport(str(f))
    for i, (s, t) in enumerate(grid):
        if not (s > 0 and t > 0):
            raise ValueError(f"grid point {(s, t)} is not strictly positive")
        try:
            base = float(f(s, t))
            fp = f_partials(f, s, t)
        except DomainError as exc:
            report.entries.append(ValidationEntry("evaluation", i, math.nan, False, str(exc)))
            continue
        worst = 0.0
        for lam in HOMOGENEITY_LAMBDAS:
            scaled = float(f(lam * s, lam * t))
            worst = max(worst, abs(scaled - lam * base) / max(abs(lam * base), 1e-300))
        report.entries.append(ValidationEntry("homogeneity", i, worst, worst < HOMOGENEITY_RTOL, f"(s,t)=({s!r},{t!r})"))
        report.entries.append(ValidationEntry("positivity", i, base, base > 0.0))
        for name, value in (("f_s", fp.f_s), ("f_t", fp.f_t), ("delta", fp.delta)):
            v = float(value)
            sign = "+" if v > 0 else ("-" if v < 0 else "0")
            report.entries.append(ValidationEntry(f"{name}-nonzero", i, v, abs(v) > NONZERO_ATOL, f"sign {sign}"))
    return report


def worst_margin(report: ValidationReport) -> dict:
    """Smallest ``|value|`` per nonvanishing check, largest residual for homogeneity."""
    out: dict = {}
    for e in report.entries:
        if e.check == "homogeneity":
            out[e.check] = max(out.get(e.check, 0.0), e.value)
        elif e.check.endswith("-nonzero") or e.check == "positivity":
            out[e.check] = min(out.get(e.check, math.inf), abs(e.value))
    return out


def product_metric(left, right, f: ProductFunction, name: str = "") -> EvaluatedMetric:
    """The Minkowskian product of two metrics (specs or evaluated metrics)."""
    lspec = left.spec if isinstance(left, EvaluatedMetric) else left
    rspec = right.spec if isinstance(right, EvaluatedMetric) else right
    return evaluate_metric(Product(lspec, rspec, f), name)


# closed-form blocks ------------------------------------------------------------------


@dataclass
class BlockTensor:
    """2x2 block matrix: ``ll`` is m x m (left factor), ``rr`` is n x n, ``lr``/``rl`` mixed."""

    ll: np.ndarray
    lr: np.ndarray
    rl: np.ndarray
    rr: np.ndarray

    def assemble(self) -> np.ndarray:
        top = np.concatenate([self.ll, self.lr], axis=-1)
        bottom = np.concatenate([self.rl, self.rr], axis=-1)
        return np.concatenate([top, bottom], axis=-2)

    def to_dict(self) -> dict:
        return {"G_ab": self.ll.tolist(), "G_a_beta": self.lr.tolist(), "G_alpha_b": self.rl.tolist(), "G_alpha_beta": self.rr.tolist()}


@dataclass
class FactorData:
    """Factor squared norms with fiber gradients and Hessians, batched over samples."""

    K: np.ndarray
    K_y: np.ndarray
    K_yy: np.ndarray
    H: np.ndarray
    H_y: np.ndarray
    H_yy: np.ndarray
    Y_left: np.ndarray
    Y_right: np.ndarray
    fp: FPartials


def _fiber_data(metric: EvaluatedMetric, X, Y):
    n = metric.dim
    J = lift(metric.f2, np.concatenate([X, Y], axis=1), 2, active=range(n, 2 * n))
    grad = np.stack([J.coefficient(tuple(int(k == i) for k in range(n))) for i in range(n)], axis=-1)
    return J.value, grad, hessian_from_jet(J)


def factor_data(p: EvaluatedMetric, X, Y) -> FactorData:
    if not p.is_product:
        raise TypeError("closed-form blocks need a Minkowskian product metric")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    m = p.spec.left.dim
    Yl, Yr = Y[:, :m], Y[:, m:]
    if np.any(~np.any(Yl, axis=1)) or np.any(~np.any(Yr, axis=1)):
        raise DomainError("both factor fiber components must be nonzero")
    left, right = p.factors()
    K, K_y, K_yy = _fiber_data(left, X[:, :m], Yl)
    H, H_y, H_yy = _fiber_data(right, X[:, m:], Yr)
    return FactorData(K, K_y, K_yy, H, H_y, H_yy, Yl, Yr, f_partials(p.spec.f, K, H))


def _outer(u, v):
    return u[..., :, None] * v[..., None, :]


def blocks_from_factors(d: FactorData) -> BlockTensor:
    fp = d.fp
    col = lambda a: a[..., None, None]
    return BlockTensor(
        ll=col(fp.f_s) * d.K_yy + col(fp.f_ss) * _outer(d.K_y, d.K_y),
        lr=col(fp.f_st) * _outer(d.K_y, d.H_y),
        rl=col(fp.f_st) * _outer(d.H_y, d.K_y),
        rr=col(fp.f_t) * d.H_yy + col(fp.f_tt) * _outer(d.H_y, d.H_y),
    )


def inverse_from_factors(d: FactorData) -> BlockTensor:
    fp = d.fp
    delta = fp.delta
    if np.any(np.abs(delta) <= NONZERO_ATOL):
        raise SingularMatrixError(f"Delta = f_K f_H - 2 f f_KH vanishes ({float(np.min(np.abs(delta))):.3g})")
    check_nonsingular(d.K_yy, "left factor Hessian")
    check_nonsingular(d.H_yy, "right factor Hessian")
    K_inv = np.linalg.inv(d.K_yy)
    H_inv = np.linalg.inv(d.H_yy)
    col = lambda a: a[..., None, None]
    return BlockTensor(
        ll=(K_inv - col(fp.f_t * fp.f_ss / delta) * _outer(d.Y_left, d.Y_left)) / col(fp.f_s),
        lr=-col(fp.f_st / delta) * _outer(d.Y_left, d.Y_right),
        rl=-col(fp.f_st / delta) * _outer(d.Y_right, d.Y_left),
        rr=(H_inv - col(fp.f_s * fp.f_tt / delta) * _outer(d.Y_right, d.Y_right)) / col(fp.f_t),
    )


def _single(block: BlockTensor) -> BlockTensor:
    return BlockTensor(block.ll[0], block.lr[0], block.rl[0], block.rr[0])


def closed_form_blocks(p: EvaluatedMetric, x, y) -> BlockTensor:
    """Full fiber Hessian of the product assembled from factor data."""
    return _single(blocks_from_factors(factor_data(p, x, y)))


def closed_form_inverse(p: EvaluatedMetric, x, y) -> BlockTensor:
    """Inverse of the full fiber Hessian from factor data and ``Delta``."""
    return _single(inverse_from_factors(factor_data(p, x, y)))


__all__ = [
    "BlockTensor",
    "Custom",
    "FPartials",
    "Linear",
    "ProductFunction",
    "RatioSquare",
    "SINGULAR_RTOL",
    "blocks_from_factors",
    "closed_form_blocks",
    "closed_form_inverse",
    "default_grid",
    "f_partials",
    "factor_data",
    "inverse_from_factors",
    "parse_product_function",
    "product_metric",
    "validate_product_function",
]
