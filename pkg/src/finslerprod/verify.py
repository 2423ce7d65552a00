"""Numerical checks of the product-metric identities over a test matrix.

Each ``check_*`` function samples one product metric and returns a
:class:`TheoremCheck`. Biconditionals are graded on the sampled evidence
only: a pass means the samples are consistent with the statement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .curvature import (
    curvature_batch,
    direction_samples,
    einstein_diagnostics,
    riemann_batch,
    spray_batch,
)
from .errors import DomainError, FinslerError, SingularMatrixError
from .metrics import EvaluatedMetric, fiber_hessian, sample_points
from .product import blocks_from_factors, f_partials, factor_data, inverse_from_factors

CHECK_IDS = (
    "eq-3.5-ricci-additivity",
    "prop-1.1-block-riemann",
    "prop-2.1-hessian-blocks",
    "prop-2.2-inverse-blocks",
    "thm-1.2-ricci-flat-iff",
    "thm-1.3-einstein-dichotomy",
    "thm-2.1-spray-split",
)

DEFAULT_TOLERANCES = {
    "eq-3.5-ricci-additivity": 1e-7,
    "prop-1.1-block-riemann": 1e-7,
    "prop-2.1-hessian-blocks": 1e-8,
    "prop-2.2-inverse-blocks": 1e-8,
    "thm-1.2-ricci-flat-iff": 1e-7,
    "thm-1.3-einstein-dichotomy": 1e-5,
    "thm-2.1-spray-split": 1e-9,
}

# f_KH below this counts as linear for the Einstein dichotomy
LINEARITY_TOL = 1e-8


@dataclass
class Sampling:
    count: int = 50
    seed: int = 0
    y_sphere_radius: float = 1.0
    einstein_points: int = 3
    einstein_directions: int = 8


@dataclass
class TheoremCheck:
    id: str
    tolerance: float
    samples: int = 0
    worst_residual: float = 0.0
    details: list = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return "pass" if self.worst_residual < self.tolerance else "fail"

    def record(self, residual: float, weight: int = 1, **info) -> None:
        self.samples += weight
        if not residual <= self.worst_residual:
            self.worst_residual = residual if not math.isnan(residual) else math.inf
        self.details.append({"residual": residual, **info})

    def skip(self, reason: str, **info) -> None:
        self.details.append({"skipped": reason, **info})

    def merge(self, other: "TheoremCheck") -> None:
        self.samples += other.samples
        self.worst_residual = max(self.worst_residual, other.worst_residual)
        self.details.extend(other.details)

    def to_dict(self) -> dict:
        return {
            "check_id": self.id,
            "verdict": self.verdict,
            "samples": self.samples,
            "worst_residual": self.worst_residual,
            "tolerance": self.tolerance,
            "details": self.details,
        }


def _tol(check_id: str, tolerances: dict | None) -> float:
    return (tolerances or {}).get(check_id, DEFAULT_TOLERANCES[check_id])


def _samples(p: EvaluatedMetric, sampling: Sampling):
    return sample_points(p.spec, sampling.count, sampling.seed, sampling.y_sphere_radius)


def _split(p: EvaluatedMetric, X, Y):
    m = p.spec.left.dim
    return m, (X[:, :m], Y[:, :m]), (X[:, m:], Y[:, m:])


def _rows(name, X, Y, values):
    for i, (x, y, r) in enumerate(zip(X, Y, values)):
        yield r, {"subject": name, "sample": i, "x": x.tolist(), "y": y.tolist()}


def check_hessian_blocks(p: EvaluatedMetric, sampling: Sampling = Sampling(), tolerances=None) -> TheoremCheck:
    chk = TheoremCheck("prop-2.1-hessian-blocks", _tol("prop-2.1-hessian-blocks", tolerances))
    X, Y = _samples(p, sampling)
    assembled = blocks_from_factors(factor_data(p, X, Y)).assemble()
    h = fiber_hessian(p, X, Y)
    resid = np.max(np.abs(assembled - h), axis=(1, 2)) / np.max(np.abs(h), axis=(1, 2))
    for r, info in _rows(p.name, X, Y, resid):
        chk.record(float(r), **info)
    return chk


def check_inverse_blocks(p: EvaluatedMetric, sampling: Sampling = Sampling(), tolerances=None) -> TheoremCheck:
    chk = TheoremCheck("prop-2.2-inverse-blocks", _tol("prop-2.2-inverse-blocks", tolerances))
    X, Y = _samples(p, sampling)
    try:
        inv = inverse_from_factors(factor_data(p, X, Y)).assemble()
    except SingularMatrixError as exc:
        chk.record(math.inf, subject=p.name, error=str(exc))
        return chk
    h = fiber_hessian(p, X, Y)
    eye = np.eye(p.dim)
    resid = np.max(np.abs(inv @ h - eye), axis=(1, 2))
    for r, info in _rows(p.name, X, Y, resid):
        chk.record(float(r), **info)
    return chk


def check_spray_split(p: EvaluatedMetric, sampling: Sampling = Sampling(), tolerances=None) -> TheoremCheck:
    chk = TheoremCheck("thm-2.1-spray-split", _tol("thm-2.1-spray-split", tolerances))
    X, Y = _samples(p, sampling)
    left, right = p.factors()
    _, (Xl, Yl), (Xr, Yr) = _split(p, X, Y)
    G = spray_batch(p, X, Y)
    split = np.concatenate([spray_batch(left, Xl, Yl), spray_batch(right, Xr, Yr)], axis=1)
    scale = np.maximum(1.0, np.max(np.abs(G), axis=1))
    resid = np.max(np.abs(G - split), axis=1) / scale
    for r, info in _rows(p.name, X, Y, resid):
        chk.record(float(r), **info)
    return chk


def check_block_structure(p: EvaluatedMetric, sampling: Sampling = Sampling(), tolerances=None) -> TheoremCheck:
    """Riemann curvature of the product is block diagonal with the factor curvatures."""
    chk = TheoremCheck("prop-1.1-block-riemann", _tol("prop-1.1-block-riemann", tolerances))
    X, Y = _samples(p, sampling)
    left, right = p.factors()
    m, (Xl, Yl), (Xr, Yr) = _split(p, X, Y)
    R = riemann_batch(p, X, Y)
    Rl = riemann_batch(left, Xl, Yl)
    Rr = riemann_batch(right, Xr, Yr)
    scale = np.maximum(1.0, np.max(np.abs(R), axis=(1, 2)))
    off = np.maximum(np.max(np.abs(R[:, :m, m:]), axis=(1, 2)), np.max(np.abs(R[:, m:, :m]), axis=(1, 2)))
    diag = np.maximum(np.max(np.abs(R[:, :m, :m] - Rl), axis=(1, 2)), np.max(np.abs(R[:, m:, m:] - Rr), axis=(1, 2)))
    for i, (r, info) in enumerate(_rows(p.name, X, Y, np.maximum(off, diag) / scale)):
        chk.record(float(r), off_diagonal=float(off[i]), diagonal_mismatch=float(diag[i]), **info)
    return chk


def _ricci_parts(p: EvaluatedMetric, sampling: Sampling):
    X, Y = _samples(p, sampling)
    left, right = p.factors()
    _, (Xl, Yl), (Xr, Yr) = _split(p, X, Y)
    cb = curvature_batch(p, X, Y)
    cl = curvature_batch(left, Xl, Yl)
    cr = curvature_batch(right, Xr, Yr)
    return X, Y, cb, cl, cr


def check_ricci_additivity(p: EvaluatedMetric, sampling: Sampling = Sampling(), tolerances=None) -> TheoremCheck:
    chk = TheoremCheck("eq-3.5-ricci-additivity", _tol("eq-3.5-ricci-additivity", tolerances))
    X, Y, cb, cl, cr = _ricci_parts(p, sampling)
    resid = np.abs(cb.ric - cl.ric - cr.ric) / np.maximum(1.0, np.abs(cb.ric))
    for i, (r, info) in enumerate(_rows(p.name, X, Y, resid)):
        chk.record(float(r), ric=float(cb.ric[i]), ric_left=float(cl.ric[i]), ric_right=float(cr.ric[i]), **info)
    return chk


def check_ricci_flat_iff(p: EvaluatedMetric, sampling: Sampling = Sampling(), tolerances=None) -> TheoremCheck:
    """Product Ricci-flat on the samples iff both factors are.

    Flatness is ``|Ric| / F^2`` below the tolerance. The residual is the
    flatness measure on the side that contradicts the other (so it reaches the
    tolerance exactly when the biconditional fails), the largest flatness when
    both sides are flat, and zero when neither is.
    """
    tol = _tol("thm-1.2-ricci-flat-iff", tolerances)
    chk = TheoremCheck("thm-1.2-ricci-flat-iff", tol)
    X, Y, cb, cl, cr = _ricci_parts(p, sampling)
    prod = float(np.max(np.abs(cb.ric) / cb.F2))
    fac = float(max(np.max(np.abs(cl.ric) / cl.F2), np.max(np.abs(cr.ric) / cr.F2)))
    prod_flat, fac_flat = prod < tol, fac < tol
    if prod_flat and fac_flat:
        residual = max(prod, fac)
    elif not prod_flat and not fac_flat:
        residual = 0.0
    else:
        residual = fac if prod_flat else prod
    chk.record(
        residual,
        weight=len(X),
        subject=p.name,
        product_ricci_flat=prod_flat,
        factors_ricci_flat=fac_flat,
        product_flatness=prod,
        factor_flatness=fac,
        statement="consistent with" if prod_flat == fac_flat else "inconsistent with",
    )
    return chk


def check_einstein_dichotomy(p: EvaluatedMetric, sampling: Sampling = Sampling(), tolerances=None) -> TheoremCheck:
    """An Einstein product is Ricci-flat, or has linear ``f`` and Einstein factors.

    For an Einstein product with ``Ric = mu F^2`` and ``f = aK + bH`` the
    factors must satisfy ``Ric_left = mu a K`` and ``Ric_right = mu b H``, so
    the residual compares ``lambda_left / f_K`` and ``lambda_right / f_H``
    (unnormalized) with ``mu``.
    """
    tol = _tol("thm-1.3-einstein-dichotomy", tolerances)
    flat_tol = _tol("thm-1.2-ricci-flat-iff", tolerances)
    chk = TheoremCheck("thm-1.3-einstein-dichotomy", tol)
    left, right = p.factors()
    m = p.spec.left.dim
    X, _ = sample_points(p.spec, sampling.einstein_points, sampling.seed, sampling.y_sphere_radius)
    for i, x in enumerate(X):
        Yp = direction_samples(p.spec, x, sampling.einstein_directions, sampling.seed + i, sampling.y_sphere_radius)
        dp = einstein_diagnostics(p, x, Yp, flat_tol=flat_tol)
        info = {
            "subject": p.name,
            "sample": i,
            "x": x.tolist(),
            "verdict": dp.verdict,
            "lambda_hat": dp.lambda_hat,
            "lambda_hat_unnormalized": dp.lambda_hat_unnormalized,
            "isotropy_spread": dp.isotropy_spread,
            "tensor_residual": dp.tensor_residual,
        }
        K = np.array([float(left.f2(*x[:m], *y[:m])) for y in Yp])
        H = np.array([float(right.f2(*x[m:], *y[m:])) for y in Yp])
        fp = f_partials(p.spec.f, K, H)
        f_kh = float(np.max(np.abs(fp.f_st)))
        info["max_abs_f_KH"] = f_kh
        if dp.verdict == "not-einstein":
            chk.record(0.0, case="vacuous: product is not Einstein", **info)
            continue
        dl = einstein_diagnostics(left, x[:m], direction_samples(p.spec.left, x[:m], sampling.einstein_directions, sampling.seed + i), flat_tol=flat_tol)
        dr = einstein_diagnostics(right, x[m:], direction_samples(p.spec.right, x[m:], sampling.einstein_directions, sampling.seed + i), flat_tol=flat_tol)
        info.update(left_verdict=dl.verdict, right_verdict=dr.verdict,
                    left_lambda_unnormalized=dl.lambda_hat_unnormalized,
                    right_lambda_unnormalized=dr.lambda_hat_unnormalized)
        if dp.verdict == "ricci-flat":
            both_flat = dl.verdict == "ricci-flat" and dr.verdict == "ricci-flat"
            chk.record(0.0 if both_flat else math.inf, case="ricci-flat", **info)
            continue
        linear = f_kh < LINEARITY_TOL
        factors_einstein = dl.verdict in ("einstein", "ricci-flat") and dr.verdict in ("einstein", "ricci-flat")
        if not (linear and factors_einstein):
            chk.record(math.inf, case="einstein", linear=linear, **info)
            continue
        mu = dp.lambda_hat_unnormalized
        a, b = float(np.mean(fp.f_s)), float(np.mean(fp.f_t))
        mismatch = max(abs(dl.lambda_hat_unnormalized / a - mu), abs(dr.lambda_hat_unnormalized / b - mu))
        chk.record(mismatch, case="einstein", linear=True, f_K=a, f_H=b, **info)
    return chk


CHECKS = {
    "eq-3.5-ricci-additivity": check_ricci_additivity,
    "prop-1.1-block-riemann": check_block_structure,
    "prop-2.1-hessian-blocks": check_hessian_blocks,
    "prop-2.2-inverse-blocks": check_inverse_blocks,
    "thm-1.2-ricci-flat-iff": check_ricci_flat_iff,
    "thm-1.3-einstein-dichotomy": check_einstein_dichotomy,
    "thm-2.1-spray-split": check_spray_split,
}


@dataclass
class Summary:
    checks: list
    seed: int

    @property
    def passed(self) -> bool:
        return all(c.verdict == "pass" for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
        }


def run_checks(products: list[EvaluatedMetric], sampling: Sampling, tolerances: dict | None = None) -> Summary:
    """Run every check over every product; one merged entry per check id."""
    merged = {cid: TheoremCheck(cid, _tol(cid, tolerances)) for cid in CHECK_IDS}
    for cid in CHECK_IDS:
        for p in products:
            try:
                merged[cid].merge(CHECKS[cid](p, sampling, tolerances))
            except (DomainError, SingularMatrixError) as exc:
                merged[cid].skip(str(exc), subject=p.name)
    return Summary([merged[cid] for cid in sorted(merged)], sampling.seed)


def run_all(scene, seed: int | None = None) -> Summary:
    """Validate the scene, then run the full harness over its products."""
    from .scene import validate_scene

    validate_scene(scene, seed)
    sampling = scene.sampling if seed is None else _with_seed(scene.sampling, seed)
    products = [scene.metric(p.name) for p in scene.products]
    return run_checks(products, sampling, scene.tolerances)


def _with_seed(s: Sampling, seed: int) -> Sampling:
    return Sampling(s.count, seed, s.y_sphere_radius, s.einstein_points, s.einstein_directions)


__all__ = [
    "CHECK_IDS",
    "DEFAULT_TOLERANCES",
    "FinslerError",
    "Sampling",
    "Summary",
    "TheoremCheck",
    "check_block_structure",
    "check_einstein_dichotomy",
    "check_hessian_blocks",
    "check_inverse_blocks",
    "check_ricci_additivity",
    "check_ricci_flat_iff",
    "check_spray_split",
    "run_all",
    "run_checks",
]
