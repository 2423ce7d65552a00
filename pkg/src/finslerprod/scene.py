"""Scene files: named metrics, products, sampling and tolerances in strict JSON."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import DomainError, FinslerError, SceneError
from .expr import ParseError
from .metrics import (
    Euclidean,
    EvaluatedMetric,
    MetricSpec,
    Product,
    ValidationReport,
    check_coefficients,
    evaluate_metric,
    funk,
    randers,
    riemannian,
    square,
    validate_metric,
)
from .product import ProductFunction, parse_product_function, validate_product_function
from .verify import CHECK_IDS, Sampling

METRIC_FIELDS = {
    "euclidean": {"type", "dim", "domain"},
    "riemannian": {"type", "dim", "a", "domain"},
    "randers": {"type", "dim", "a", "b", "domain"},
    "square": {"type", "dim", "a", "b", "domain"},
    "funk": {"type", "dim", "domain"},
}
TOP_FIELDS = {"metrics", "products", "sampling", "tolerances"}
PRODUCT_FIELDS = {"name", "left", "right", "f"}
SAMPLING_FIELDS = {"count", "seed", "y_sphere_radius", "einstein_points", "einstein_directions"}
BUNDLED = "demo.json"


@dataclass
class ProductEntry:
    name: str
    left: str
    right: str
    f: ProductFunction


@dataclass
class Scene:
    metrics: dict = field(default_factory=dict)
    products: list = field(default_factory=list)
    sampling: Sampling = field(default_factory=Sampling)
    tolerances: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)

    def names(self) -> list[str]:
        return list(self.metrics) + [p.name for p in self.products]

    def spec(self, name: str) -> MetricSpec:
        if name in self.metrics:
            return self.metrics[name]
        for p in self.products:
            if p.name == name:
                return Product(self.spec(p.left), self.spec(p.right), p.f)
        raise SceneError("metric", f"unknown metric name {name!r}")

    def metric(self, name: str) -> EvaluatedMetric:
        if name not in self._cache:
            self._cache[name] = evaluate_metric(self.spec(name), name)
        return self._cache[name]


def _fail(path: str, message: str):
    raise SceneError(path, message)


def _strict(obj, allowed: set, path: str) -> None:
    if not isinstance(obj, dict):
        _fail(path, "expected an object")
    for key in obj:
        if key not in allowed:
            _fail(f"{path}.{key}" if path else key, "unknown field")


def _int(value, path: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(path, "expected an integer")
    if minimum is not None and value < minimum:
        _fail(path, f"must be at least {minimum}")
    return value


def _real(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        _fail(path, "expected a finite number")
    return float(value)


def _expr(value, path: str):
    if isinstance(value, bool) or not isinstance(value, (str, int, float)):
        _fail(path, "expected an expression string or number")
    return str(value) if not isinstance(value, str) else value


def _domain(value, dim: int, path: str):
    if value is None:
        return None
    if not isinstance(value, list) or len(value) != dim:
        _fail(path, f"expected {dim} [lo, hi] pairs")
    out = []
    for i, pair in enumerate(value):
        p = f"{path}[{i}]"
        if not isinstance(pair, list) or len(pair) != 2:
            _fail(p, "expected [lo, hi]")
        lo, hi = _real(pair[0], p + "[0]"), _real(pair[1], p + "[1]")
        if not lo < hi:
            _fail(p, "lo must be below hi")
        out.append((lo, hi))
    return out


def _matrix(value, path: str):
    if not isinstance(value, list) or not value:
        _fail(path, "expected a non-empty square matrix")
    n = len(value)
    rows = []
    for i, row in enumerate(value):
        if not isinstance(row, list) or len(row) != n:
            _fail(f"{path}[{i}]", f"expected a row of length {n}")
        rows.append([None if (e is None and j < i) else _expr(e, f"{path}[{i}][{j}]") for j, e in enumerate(row)])
    return rows


def _vector(value, n: int, path: str):
    if not isinstance(value, list) or len(value) != n:
        _fail(path, f"expected a list of length {n}")
    return [_expr(e, f"{path}[{i}]") for i, e in enumerate(value)]


def parse_metric(obj, path: str) -> MetricSpec:
    if not isinstance(obj, dict):
        _fail(path, "expected an object")
    kind = obj.get("type")
    if kind not in METRIC_FIELDS:
        _fail(f"{path}.type", f"expected one of {sorted(METRIC_FIELDS)}")
    _strict(obj, METRIC_FIELDS[kind], path)
    try:
        if kind in ("euclidean", "funk"):
            if "dim" not in obj:
                _fail(f"{path}.dim", "missing field")
            dim = _int(obj["dim"], f"{path}.dim", 1)
            domain = _domain(obj.get("domain"), dim, f"{path}.domain")
            spec = Euclidean(dim, None if domain is None else tuple(domain)) if kind == "euclidean" else funk(dim, domain)
        else:
            if "a" not in obj:
                _fail(f"{path}.a", "missing field")
            a = _matrix(obj["a"], f"{path}.a")
            dim = len(a)
            if "dim" in obj and _int(obj["dim"], f"{path}.dim", 1) != dim:
                _fail(f"{path}.dim", f"does not match the {dim}x{dim} coefficient matrix")
            domain = _domain(obj.get("domain"), dim, f"{path}.domain")
            if kind == "riemannian":
                spec = riemannian(a, domain)
            else:
                if "b" not in obj:
                    _fail(f"{path}.b", "missing field")
                b = _vector(obj["b"], dim, f"{path}.b")
                spec = (randers if kind == "randers" else square)(a, b, domain)
        check_coefficients(spec)
    except ParseError as exc:
        _fail(path, f"bad expression: {exc}")
    except (ValueError, DomainError) as exc:
        if isinstance(exc, SceneError):
            raise
        _fail(path, str(exc))
    return spec


def parse_scene(data) -> Scene:
    """Build a :class:`Scene` from decoded JSON, rejecting unknown fields."""
    _strict(data, TOP_FIELDS, "")
    metrics_obj = data.get("metrics") or {}
    if not isinstance(metrics_obj, dict):
        _fail("metrics", "expected an object")
    if not metrics_obj:
        _fail("metrics", "no metrics defined")
    scene = Scene()
    for name, obj in metrics_obj.items():
        scene.metrics[name] = parse_metric(obj, f"metrics.{name}")

    products_obj = data.get("products", [])
    if not isinstance(products_obj, list):
        _fail("products", "expected a list")
    known = set(scene.metrics)
    for i, obj in enumerate(products_obj):
        path = f"products[{i}]"
        _strict(obj, PRODUCT_FIELDS, path)
        for key in PRODUCT_FIELDS:
            if key not in obj:
                _fail(f"{path}.{key}", "missing field")
            if not isinstance(obj[key], str):
                _fail(f"{path}.{key}", "expected a string")
        if obj["name"] in known:
            _fail(f"{path}.name", f"duplicate name {obj['name']!r}")
        for side in ("left", "right"):
            if obj[side] not in known:
                _fail(f"{path}.{side}", f"unknown metric name {obj[side]!r}")
        try:
            f = parse_product_function(obj["f"])
        except (ParseError, ValueError) as exc:
            _fail(f"{path}.f", str(exc))
        scene.products.append(ProductEntry(obj["name"], obj["left"], obj["right"], f))
        known.add(obj["name"])

    s = data.get("sampling", {})
    _strict(s, SAMPLING_FIELDS, "sampling")
    d = Sampling()
    scene.sampling = Sampling(
        count=_int(s.get("count", d.count), "sampling.count", 1),
        seed=_int(s.get("seed", d.seed), "sampling.seed", 0),
        y_sphere_radius=_real(s.get("y_sphere_radius", d.y_sphere_radius), "sampling.y_sphere_radius"),
        einstein_points=_int(s.get("einstein_points", d.einstein_points), "sampling.einstein_points", 1),
        einstein_directions=_int(s.get("einstein_directions", d.einstein_directions), "sampling.einstein_directions", 8),
    )
    if not scene.sampling.y_sphere_radius > 0:
        _fail("sampling.y_sphere_radius", "must be positive")

    tol = data.get("tolerances", {})
    _strict(tol, set(CHECK_IDS), "tolerances")
    for key, value in tol.items():
        v = _real(value, f"tolerances.{key}")
        if not v > 0:
            _fail(f"tolerances.{key}", "must be positive")
        scene.tolerances[key] = v
    return scene


def bundled_path(name: str = BUNDLED) -> Path:
    return Path(str(resources.files("finslerprod") / "data" / name))


def resolve_path(path) -> Path:
    """A path on disk, falling back to the bundled data directory for bare names."""
    p = Path(path)
    if p.exists() or p.parent != Path("."):
        return p
    candidate = bundled_path(p.name)
    return candidate if candidate.exists() else p


def load_scene(path) -> Scene:
    p = resolve_path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise SceneError(str(path), f"cannot read scene: {exc.strerror or exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneError(str(path), f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_scene(data)


# validation -------------------------------------------------------------------------------


@dataclass
class SceneValidation:
    metrics: list  # ValidationReport per metric and product
    functions: list  # ValidationReport per product function

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.metrics + self.functions)

    def failures(self) -> list[ValidationReport]:
        return [r for r in self.metrics + self.functions if not r.passed]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "metrics": [r.to_dict() for r in self.metrics],
            "product_functions": [r.to_dict() for r in self.functions],
        }


def validation_reports(scene: Scene, seed: int | None = None) -> SceneValidation:
    seed = scene.sampling.seed if seed is None else seed
    count, radius = scene.sampling.count, scene.sampling.y_sphere_radius
    metrics = []
    for name in scene.names():
        metrics.append(validate_metric(scene.metric(name), count, seed, radius))
    functions, seen = [], set()
    for p in scene.products:
        key = str(p.f)
        if key not in seen:
            seen.add(key)
            functions.append(validate_product_function(p.f))
    return SceneValidation(metrics, functions)


class ValidationFailed(SceneError):
    def __init__(self, validation: SceneValidation):
        names = ", ".join(r.subject for r in validation.failures())
        super().__init__("metrics", f"validation failed for {names}")
        self.validation = validation


def validate_scene(scene: Scene, seed: int | None = None) -> SceneValidation:
    """Validate every metric and product function; raise :class:`ValidationFailed` on failure."""
    v = validation_reports(scene, seed)
    if not v.passed:
        raise ValidationFailed(v)
    return v


__all__ = [
    "FinslerError",
    "ProductEntry",
    "Scene",
    "SceneValidation",
    "ValidationFailed",
    "bundled_path",
    "load_scene",
    "parse_metric",
    "parse_scene",
    "resolve_path",
    "validate_scene",
    "validation_reports",
]
