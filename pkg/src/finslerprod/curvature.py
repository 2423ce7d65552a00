"""Spray coefficients, Riemann and Ricci curvature, Einstein diagnostics.

Everything is computed from one jet of ``F^2`` in all ``2n`` variables
``(x, y)``. The spray ``G^i`` is solved as a jet, so its derivatives needed by
the Riemann curvature come out exactly:

* order 2 on ``F^2`` gives ``G`` at the point,
* order 4 gives ``R^i_k`` at the point,
* order 6 gives ``R^i_k`` as an order-2 jet, hence the Ricci tensor
  ``Ric_ij = 1/2 d^2 Ric / dy^i dy^j``.

All entry points accept one point; the ``*_batch`` helpers take ``(B, n)``
arrays and share a single jet evaluation across the batch.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError
from .finite_diff import fd_partial
from .jet import Jet, ScalarField, algebra, partial, seed_variables, stack
from .linalg import check_nonsingular, guarded_inverse, solve_jets
from .metrics import EvaluatedMetric, _as_metric, accepts, sample_rng

RICCI_FLAT_TOL = 1e-7
ISOTROPY_TOL = 1e-6
TENSOR_TOL = 1e-5
MIN_EINSTEIN_SAMPLES = 8


def _points(X, Y):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape != Y.shape:
        raise ValueError(f"x and y batches differ in shape: {X.shape} vs {Y.shape}")
    if np.any(~np.any(Y, axis=1)):
        raise DomainError("spray and curvature are undefined at y = 0")
    return X, Y


@dataclass
class SprayJets:
    """Jets shared by the curvature pipeline (all batched over sample points)."""

    n: int
    F2: Jet
    g: Jet  # (B, n, n) half fiber Hessian
    G: Jet  # (B, n) spray coefficients
    y: Jet  # (B, n) fiber coordinates as jets


def spray_jets(m: EvaluatedMetric, X, Y, order: int) -> SprayJets:
    n = m.dim
    X, Y = _points(X, Y)
    args = seed_variables(np.concatenate([X, Y], axis=1), order)
    F2 = m.f2(*args)
    if not isinstance(F2, Jet):
        raise DomainError("F^2 does not depend on (x, y)")
    yv = stack(args[n:], axis=-1)
    Dy = stack([F2.diff(n + l) for l in range(n)], axis=-1)
    Dx = stack([F2.diff(k) for k in range(n)], axis=-1)
    Hyy = stack([Dy.diff(n + l) for l in range(n)], axis=-1)
    Dyx = stack([Dy.diff(k) for k in range(n)], axis=-1)  # [l, k] = d2F2/dy_l dx_k
    g = Hyy * 0.5
    check_nonsingular(g.coeffs[..., 0], "fundamental tensor")
    rhs = (Dyx * yv[:, None]).sum(-1) - Dx
    G = solve_jets(g, rhs) * 0.25
    return SprayJets(n, F2, g, G, yv)


def riemann_jet(s: SprayJets) -> Jet:
    """``R^i_k`` as a ``(B, n, n)`` jet of order ``order - 4``."""
    n, G, yv = s.n, s.G, s.y
    dGx = stack([G.diff(k) for k in range(n)], axis=-1)  # [i, k]
    dGy = stack([G.diff(n + j) for j in range(n)], axis=-1)  # [i, j]
    dGxy = stack([dGx.diff(n + k) for k in range(n)], axis=-1)  # [i, j, k]: dx_j dy_k
    dGyy = stack([dGy.diff(n + k) for k in range(n)], axis=-1)  # [i, j, k]: dy_j dy_k
    t1 = dGx * 2.0
    t2 = (dGxy * yv[:, None, :, None]).sum(2)
    t3 = (dGyy * G[:, None, :, None]).sum(2) * 2.0
    t4 = (dGy[:, :, :, None] * dGy[:, None, :, :]).sum(2)
    return t1 - t2 + t3 - t4


def trace_jet(R: Jet) -> Jet:
    n = R.shape[-1]
    idx = np.arange(n)
    return Jet(R.coeffs[..., idx, idx, :].sum(axis=-2), R.nvars, R.order)


# batched float results -----------------------------------------------------------------


def spray_batch(m, X, Y) -> np.ndarray:
    m = _as_metric(m)
    return spray_jets(m, X, Y, 2).G.coeffs[..., 0]


def riemann_batch(m, X, Y) -> np.ndarray:
    m = _as_metric(m)
    return riemann_jet(spray_jets(m, X, Y, 4)).coeffs[..., 0]


def ricci_batch(m, X, Y) -> np.ndarray:
    return np.trace(riemann_batch(m, X, Y), axis1=-2, axis2=-1)


@dataclass
class CurvatureBatch:
    F2: np.ndarray
    g: np.ndarray
    G: np.ndarray
    R: np.ndarray
    ric: np.ndarray
    ric_tensor: np.ndarray | None = None


def curvature_batch(m, X, Y, with_tensor: bool = False) -> CurvatureBatch:
    """Every curvature quantity at a batch of points from one jet evaluation."""
    m = _as_metric(m)
    n = m.dim
    s = spray_jets(m, X, Y, 6 if with_tensor else 4)
    R = riemann_jet(s)
    ric = trace_jet(R)
    tensor = None
    if with_tensor:
        tensor = np.empty(ric.shape + (n, n))
        for i in range(n):
            for j in range(i, n):
                idx = [0] * (2 * n)
                idx[n + i] += 1
                idx[n + j] += 1
                tensor[..., i, j] = tensor[..., j, i] = 0.5 * partial(ric, idx)
    return CurvatureBatch(
        F2=s.F2.coeffs[..., 0],
        g=s.g.coeffs[..., 0],
        G=s.G.coeffs[..., 0],
        R=R.coeffs[..., 0],
        ric=ric.coeffs[..., 0],
        ric_tensor=tensor,
    )


# single-point API ------------------------------------------------------------------------


@dataclass
class SprayCoefficients:
    G: np.ndarray


@dataclass
class RiemannCurvature:
    """``R[i, k]`` is ``R^i_k`` (upper index = row)."""

    R: np.ndarray


def spray_coefficients(m, x, y) -> SprayCoefficients:
    return SprayCoefficients(spray_batch(m, x, y)[0])


def riemann_curvature(m, x, y) -> RiemannCurvature:
    return RiemannCurvature(riemann_batch(m, x, y)[0])


def ricci_scalar(m, x, y) -> float:
    return float(ricci_batch(m, x, y)[0])


def ricci_tensor(m, x, y, mode: str = "jet", step: float | None = None) -> np.ndarray:
    """``Ric_ij = 1/2 d^2 Ric / dy^i dy^j``.

    ``mode="jet"`` differentiates exactly (order-6 jets on ``F^2``);
    ``mode="fd"`` applies central differences to :func:`ricci_scalar` in ``y``.
    """
    m = _as_metric(m)
    n = m.dim
    if mode == "jet":
        return curvature_batch(m, x, y, with_tensor=True).ric_tensor[0]
    if mode != "fd":
        raise ValueError(f"unknown ricci_tensor mode {mode!r}")
    x = np.asarray(x, dtype=float)
    field = ScalarField(n, lambda *ys: ricci_scalar(m, x, np.array(ys)), name="Ric")
    out = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            idx = [0] * n
            idx[i] += 1
            idx[j] += 1
            out[i, j] = out[j, i] = 0.5 * fd_partial(field, y, idx, step)
    return out


# Einstein diagnostics -----------------------------------------------------------------------


@dataclass
class EinsteinDiagnostics:
    ric: float
    lambda_hat_unnormalized: float
    lambda_hat: float
    tensor_residual: float
    isotropy_spread: float
    verdict: str
    flatness: float = 0.0
    ric_samples: list = field(default_factory=list)
    lambda_samples: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "ric": self.ric,
            "lambda_hat_unnormalized": self.lambda_hat_unnormalized,
            "lambda_hat": self.lambda_hat,
            "tensor_residual": self.tensor_residual,
            "isotropy_spread": self.isotropy_spread,
            "flatness": self.flatness,
            "verdict": self.verdict,
            "ric_samples": list(self.ric_samples),
            "lambda_samples": list(self.lambda_samples),
        }


def _check_directions(Y: np.ndarray) -> None:
    if Y.ndim != 2 or len(Y) == 0:
        raise ValueError("need a non-empty (count, n) array of sample directions")
    if Y.shape[1] == 1:
        # every 1-dim direction is parallel to every other; Ric vanishes identically
        return
    if len(Y) < MIN_EINSTEIN_SAMPLES:
        raise ValueError(f"need at least {MIN_EINSTEIN_SAMPLES} sample directions, got {len(Y)}")
    U = Y / np.linalg.norm(Y, axis=1, keepdims=True)
    cos = np.abs(U @ U.T)
    np.fill_diagonal(cos, 0.0)
    if np.any(cos > 1.0 - 1e-9):
        raise ValueError("sample directions must be pairwise non-parallel")


def einstein_diagnostics(
    m,
    x,
    y_samples: Sequence,
    flat_tol: float = RICCI_FLAT_TOL,
    isotropy_tol: float = ISOTROPY_TOL,
    tensor_tol: float = TENSOR_TOL,
) -> EinsteinDiagnostics:
    """Estimate ``lambda`` in ``Ric = (n-1) lambda F^2`` at ``x`` and grade the fit."""
    m = _as_metric(m)
    n = m.dim
    Y = np.asarray(y_samples, dtype=float)
    _check_directions(Y)
    X = np.broadcast_to(np.asarray(x, dtype=float), Y.shape).copy()
    cb = curvature_batch(m, X, Y, with_tensor=True)
    ratio = cb.ric / cb.F2
    norm = n - 1 if n > 1 else 1
    lam = ratio / norm
    lam_hat = float(np.mean(lam))
    scale = np.max(np.abs(cb.g), axis=(-2, -1))
    resid = np.max(np.abs(cb.ric_tensor - norm * lam_hat * cb.g), axis=(-2, -1)) / scale
    flatness = float(np.max(np.abs(cb.ric)) / np.max(cb.F2))
    spread = float(np.max(lam) - np.min(lam))
    residual = float(np.max(resid))
    if flatness < flat_tol:
        verdict = "ricci-flat"
    elif spread < isotropy_tol and residual < tensor_tol:
        verdict = "einstein"
    else:
        verdict = "not-einstein"
    return EinsteinDiagnostics(
        ric=float(cb.ric[0]),
        lambda_hat_unnormalized=float(np.mean(ratio)),
        lambda_hat=lam_hat,
        tensor_residual=residual,
        isotropy_spread=spread,
        verdict=verdict,
        flatness=flatness,
        ric_samples=[float(v) for v in cb.ric],
        lambda_samples=[float(v) for v in lam],
    )


def direction_samples(spec, x, count: int, seed: int, radius: float = 1.0) -> np.ndarray:
    """Deterministic fiber directions at ``x`` accepted by the metric's sampling domain."""
    x = np.asarray(x, dtype=float)
    out = []
    for i in range(count):
        rng = sample_rng(seed, i)
        for _ in range(1000):
            y = rng.standard_normal(spec.dim)
            y *= radius / np.linalg.norm(y)
            if accepts(spec, x, y):
                out.append(y)
                break
        else:
            raise DomainError("could not draw a valid fiber direction")
    return np.array(out)


# report ----------------------------------------------------------------------------------------


@dataclass
class CurvatureReport:
    x: np.ndarray
    y: np.ndarray
    F2: float
    g: np.ndarray
    g_inv: np.ndarray
    G: np.ndarray
    R: np.ndarray
    ric: float
    ric_tensor: np.ndarray
    einstein: EinsteinDiagnostics | None = None

    def to_dict(self) -> dict:
        out = {
            "x": self.x.tolist(),
            "y": self.y.tolist(),
            "F2": self.F2,
            "g": self.g.tolist(),
            "g_inv": self.g_inv.tolist(),
            "G": self.G.tolist(),
            "R": self.R.tolist(),
            "Ric": self.ric,
            "Ric_ij": self.ric_tensor.tolist(),
        }
        if self.einstein is not None:
            out["einstein"] = self.einstein.to_dict()
        return out


def curvature_report(m, x, y) -> CurvatureReport:
    m = _as_metric(m)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    cb = curvature_batch(m, x, y, with_tensor=True)
    g = cb.g[0]
    return CurvatureReport(
        x=x,
        y=y,
        F2=float(cb.F2[0]),
        g=g,
        g_inv=guarded_inverse(g, "fundamental tensor"),
        G=cb.G[0],
        R=cb.R[0],
        ric=float(cb.ric[0]),
        ric_tensor=cb.ric_tensor[0],
    )


@functools.lru_cache(maxsize=None)
def _hessian_index(nvars: int) -> tuple[np.ndarray, np.ndarray]:
    alg = algebra(nvars, 2)
    idx = np.empty((nvars, nvars), dtype=np.int64)
    scale = np.ones((nvars, nvars))
    for i in range(nvars):
        for j in range(i, nvars):
            e = [0] * nvars
            e[i] += 1
            e[j] += 1
            idx[i, j] = idx[j, i] = alg.index[tuple(e)]
        scale[i, i] = 2.0
    return idx, scale


def spray_at(m: EvaluatedMetric, x, y) -> np.ndarray:
    """Spray coefficients at one point with minimal overhead (used by integrators)."""
    n = m.dim
    p = np.concatenate([x, y])
    J = m.f2(*seed_variables(p, 2))
    if not isinstance(J, Jet):
        raise DomainError("F^2 does not depend on (x, y)")
    c = J.coeffs
    idx, scale = _hessian_index(2 * n)
    H = c[idx] * scale
    g = 0.5 * H[n:, n:]
    rhs = H[n:, :n] @ y - c[1 : 1 + n]
    check_nonsingular(g, "fundamental tensor")
    return 0.25 * np.linalg.solve(g, rhs)
