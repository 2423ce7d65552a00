"""Fixed-step RK4 geodesics of ``x'' + 2 G(x, x') = 0``."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .curvature import spray_at
from .errors import DomainError, SingularMatrixError
from .metrics import EvaluatedMetric, Product, _as_metric


@dataclass
class GeodesicTrace:
    times: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    speeds: np.ndarray
    max_speed_drift: float
    completed: bool = True
    stop_reason: str = ""

    @property
    def dim(self) -> int:
        return self.xs.shape[1]

    @property
    def endpoint(self) -> np.ndarray:
        return self.xs[-1]

    def header(self) -> list[str]:
        n = self.dim
        return ["t", *(f"x{i + 1}" for i in range(n)), *(f"y{i + 1}" for i in range(n)), "F"]

    def rows(self):
        for t, x, y, f in zip(self.times, self.xs, self.ys, self.speeds):
            yield [t, *x, *y, f]

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.header())
            for row in self.rows():
                w.writerow([format(float(v), ".17g") for v in row])


def read_csv(path) -> GeodesicTrace:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array(rows[1:], dtype=float)
    n = (len(header) - 2) // 2
    speeds = data[:, -1]
    return GeodesicTrace(
        times=data[:, 0],
        xs=data[:, 1 : 1 + n],
        ys=data[:, 1 + n : 1 + 2 * n],
        speeds=speeds,
        max_speed_drift=float(np.max(np.abs(speeds - speeds[0])) / speeds[0]),
    )


def declared_box(spec) -> np.ndarray:
    """``(n, 2)`` bounds from declared domains; undeclared coordinates are unbounded."""
    if isinstance(spec, Product):
        return np.vstack([declared_box(spec.left), declared_box(spec.right)])
    if spec.domain is None:
        return np.tile([-np.inf, np.inf], (spec.dim, 1))
    return np.array(spec.domain, dtype=float)


def _speed(m: EvaluatedMetric, x, y) -> float:
    f2 = float(m.f2(*x, *y))
    if not (math.isfinite(f2) and f2 > 0.0):
        raise DomainError(f"F^2 = {f2!r} left the validity domain")
    return math.sqrt(f2)


def integrate_geodesic(m, x0, y0, t_max: float, dt: float) -> GeodesicTrace:
    """Classic RK4 on ``x' = y, y' = -2 G(x, y)``.

    The last step is shortened to land on ``t_max``. Leaving the validity
    domain stops integration and returns the partial trace with
    ``completed=False``.
    """
    m = _as_metric(m)
    x = np.array(x0, dtype=float)
    y = np.array(y0, dtype=float)
    if x.shape != (m.dim,) or y.shape != (m.dim,):
        raise ValueError(f"expected initial data of length {m.dim}")
    if not np.any(y):
        raise DomainError("initial velocity must be nonzero")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not t_max >= dt:
        raise ValueError("t_max must be at least dt")

    def accel(x, y):
        return -2.0 * spray_at(m, x, y)

    box = declared_box(m.spec)

    def inside(x):
        return bool(np.all(x > box[:, 0]) and np.all(x < box[:, 1]))

    if not inside(x):
        raise DomainError("x0 lies outside the declared domain")
    steps = math.ceil(t_max / dt - 1e-9)
    times = [0.0]
    xs = [x.copy()]
    ys = [y.copy()]
    speeds = [_speed(m, x, y)]
    completed, reason = True, ""
    t = 0.0
    for k in range(steps):
        h = min(dt, t_max - k * dt)
        try:
            k1x, k1y = y, accel(x, y)
            k2x, k2y = y + 0.5 * h * k1y, accel(x + 0.5 * h * k1x, y + 0.5 * h * k1y)
            k3x, k3y = y + 0.5 * h * k2y, accel(x + 0.5 * h * k2x, y + 0.5 * h * k2y)
            k4x, k4y = y + h * k3y, accel(x + h * k3x, y + h * k3y)
            x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            y = y + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
            if not inside(x):
                raise DomainError(f"left the declared domain at x={x.tolist()}")
            speed = _speed(m, x, y)
        except (DomainError, SingularMatrixError) as exc:
            completed, reason = False, f"stopped at t={t!r}: {exc}"
            break
        t = t_max if k == steps - 1 else (k + 1) * dt
        times.append(t)
        xs.append(x.copy())
        ys.append(y.copy())
        speeds.append(speed)
    speeds = np.array(speeds)
    return GeodesicTrace(
        times=np.array(times),
        xs=np.array(xs),
        ys=np.array(ys),
        speeds=speeds,
        max_speed_drift=float(np.max(np.abs(speeds - speeds[0])) / speeds[0]),
        completed=completed,
        stop_reason=reason,
    )
