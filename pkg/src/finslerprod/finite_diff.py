"""Central finite differences with one Richardson step.

This is the independent oracle for the jet engine: it only ever evaluates the
field on plain floats.
"""

from __future__ import annotations

import itertools
import math
from typing import Sequence

import numpy as np

from .jet import ScalarField

# central stencils {offset: weight}, error O(h^2) for each derivative order
_STENCILS = {
    0: {0: 1.0},
    1: {1: 0.5, -1: -0.5},
    2: {1: 1.0, 0: -2.0, -1: 1.0},
    3: {2: 0.5, 1: -1.0, -1: 1.0, -2: -0.5},
    4: {2: 1.0, 1: -4.0, 0: 6.0, -1: -4.0, -2: 1.0},
}

# base step by total degree: the best balance of h^4 truncation against
# eps / h^degree round-off moves up with the degree
DEFAULT_STEPS = {0: 1e-4, 1: 1e-4, 2: 1e-3, 3: 2e-3, 4: 2e-2}


def default_step(degree: int) -> float:
    return DEFAULT_STEPS[degree]


def _central(field: ScalarField, point: np.ndarray, idx: Sequence[int], steps: np.ndarray) -> float:
    axes = [i for i, k in enumerate(idx) if k]
    stencils = [list(_STENCILS[idx[i]].items()) for i in axes]
    total = 0.0
    for combo in itertools.product(*stencils):
        x = point.copy()
        weight = 1.0
        for i, (offset, w) in zip(axes, combo):
            x[i] += offset * steps[i]
            weight *= w
        total += weight * float(field(*x))
    scale = math.prod(steps[i] ** idx[i] for i in axes)
    return total / scale


def fd_partial(field: ScalarField, point, idx: Sequence[int], step: float | None = None) -> float:
    """Estimate ``d^idx field`` at ``point``; truncation error is O(step**4).

    The step applied to coordinate ``i`` is ``step * max(1, |point[i]|)``.
    """
    point = np.asarray(point, dtype=float).copy()
    idx = [int(k) for k in idx]
    if len(idx) != point.size:
        raise ValueError(f"multi-index {idx} does not match point dimension {point.size}")
    degree = sum(idx)
    if any(k < 0 for k in idx) or degree > 4:
        raise ValueError(f"finite differences support degree <= 4, got {idx}")
    if step is None:
        step = default_step(degree)
    if step <= 0:
        raise ValueError("step must be positive")
    if degree == 0:
        return float(field(*point))
    steps = step * np.maximum(1.0, np.abs(point))
    coarse = _central(field, point, idx, steps)
    fine = _central(field, point, idx, steps / 2)
    return (4.0 * fine - coarse) / 3.0
