"""Command-line driver: ``finslerprod <subcommand> <scene> ...``.

Exit codes: 0 success (all checks pass), 1 a check failed, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time

import numpy as np

from .curvature import curvature_report, direction_samples, einstein_diagnostics
from .errors import DomainError, FinslerError, SceneError, SingularMatrixError
from .geodesics import integrate_geodesic
from .metrics import fundamental_tensor
from .product import closed_form_blocks, closed_form_inverse, worst_margin
from .scene import ValidationFailed, load_scene, validation_reports
from .verify import run_all

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


# output ---------------------------------------------------------------------------------


def fmt(v: float) -> str:
    """17 significant digits; re-parsing gives back the same double."""
    return format(float(v), ".17g")


def to_json(obj) -> str:
    """JSON with every float rendered by :func:`fmt` (``Infinity``/``NaN`` for non-finite)."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {to_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(to_json(v) for v in obj) + "]"
    if isinstance(obj, np.ndarray):
        return to_json(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "NaN"
        if math.isinf(v):
            return "Infinity" if v > 0 else "-Infinity"
        return fmt(v)
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def format_matrix(a) -> str:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    cells = [[fmt(v) for v in row] for row in a]
    width = max(len(c) for row in cells for c in row)
    return "\n".join("  " + "  ".join(c.rjust(width) for c in row) for row in cells)


def format_vector(v) -> str:
    return "  " + "  ".join(fmt(x) for x in np.atleast_1d(v))


def _emit(args, data: dict, human) -> None:
    if args.json:
        print(to_json(data))
    else:
        human()


def _section(title: str, body: str) -> None:
    print(f"{title}:")
    print(body)


# argument helpers -----------------------------------------------------------------------


def parse_csv(text: str, name: str, dim: int | None = None) -> np.ndarray:
    try:
        values = np.array([float(p) for p in text.split(",")], dtype=float)
    except ValueError:
        raise InputError(f"{name}: malformed CSV vector {text!r}") from None
    if not np.all(np.isfinite(values)):
        raise InputError(f"{name}: values must be finite")
    if dim is not None and len(values) != dim:
        raise InputError(f"{name}: expected {dim} components, got {len(values)}")
    return values


def _metric(scene, name):
    try:
        return scene.metric(name)
    except SceneError:
        raise InputError(f"--metric: unknown metric name {name!r} (known: {', '.join(scene.names())})") from None


# subcommands ----------------------------------------------------------------------------


def cmd_validate(args, scene) -> int:
    v = validation_reports(scene, args.seed)
    data = v.to_dict()

    def human():
        for r in v.metrics + v.functions:
            print(f"{'PASS' if r.passed else 'FAIL'}  {r.subject}")
            for check, e in r.worst().items():
                mark = "ok " if e.passed else "BAD"
                print(f"    {mark} {check:<20} sample {e.sample:>3}  value {fmt(e.value)}  {e.detail}")
        for r in v.functions:
            print(f"margins {r.subject}: " + ", ".join(f"{k}={fmt(x)}" for k, x in worst_margin(r).items()))

    if args.json:
        print(to_json(data))
    else:
        human()
    return EXIT_OK if v.passed else EXIT_FAIL


def cmd_tensor(args, scene) -> int:
    m = _metric(scene, args.metric)
    x = parse_csv(args.x, "--x", m.dim)
    y = parse_csv(args.y, "--y", m.dim)
    ft = fundamental_tensor(m, x, y)
    data = {"metric": m.name, "x": x, "y": y, **ft.to_dict()}
    if m.is_product:
        data["closed_form_blocks"] = closed_form_blocks(m, x, y).to_dict()
        data["closed_form_inverse"] = closed_form_inverse(m, x, y).to_dict()

    def human():
        _section("g", format_matrix(ft.g))
        _section("h", format_matrix(ft.h))
        _section("g_inv", format_matrix(ft.g_inv))
        if m.is_product:
            _section("closed-form h", format_matrix(closed_form_blocks(m, x, y).assemble()))
            _section("closed-form h_inv", format_matrix(closed_form_inverse(m, x, y).assemble()))

    _emit(args, data, human)
    return EXIT_OK


def cmd_curvature(args, scene) -> int:
    m = _metric(scene, args.metric)
    x = parse_csv(args.x, "--x", m.dim)
    y = parse_csv(args.y, "--y", m.dim)
    rep = curvature_report(m, x, y)

    def human():
        _section("G", format_vector(rep.G))
        _section("R", format_matrix(rep.R))
        _section("Ric", "  " + fmt(rep.ric))
        _section("Ric_ij", format_matrix(rep.ric_tensor))

    _emit(args, {"metric": m.name, **rep.to_dict()}, human)
    return EXIT_OK


def cmd_einstein(args, scene) -> int:
    m = _metric(scene, args.metric)
    x = parse_csv(args.x, "--x", m.dim)
    if args.samples < 1:
        raise InputError("--samples: must be positive")
    Y = direction_samples(m.spec, x, args.samples, args.seed, scene.sampling.y_sphere_radius)
    try:
        d = einstein_diagnostics(m, x, Y)
    except ValueError as exc:
        if isinstance(exc, DomainError):
            raise
        raise InputError(f"--samples: {exc}") from None

    def human():
        for key in ("verdict", "lambda_hat", "lambda_hat_unnormalized", "isotropy_spread", "tensor_residual", "flatness", "ric"):
            v = getattr(d, key)
            print(f"{key:<24} {v if isinstance(v, str) else fmt(v)}")

    _emit(args, {"metric": m.name, "x": x, **d.to_dict()}, human)
    return EXIT_OK


def cmd_geodesic(args, scene) -> int:
    m = _metric(scene, args.metric)
    x0 = parse_csv(args.x0, "--x0", m.dim)
    y0 = parse_csv(args.y0, "--y0", m.dim)
    try:
        trace = integrate_geodesic(m, x0, y0, args.t_max, args.dt)
    except ValueError as exc:
        if isinstance(exc, DomainError):
            raise
        raise InputError(str(exc)) from None
    trace.write_csv(args.out)
    data = {
        "metric": m.name,
        "out": args.out,
        "steps": len(trace.times) - 1,
        "completed": trace.completed,
        "stop_reason": trace.stop_reason,
        "endpoint": trace.endpoint,
        "max_speed_drift": trace.max_speed_drift,
    }

    def human():
        print(f"wrote {len(trace.times)} rows to {args.out}")
        if not trace.completed:
            print(trace.stop_reason)
        _section("endpoint", format_vector(trace.endpoint))
        print(f"max speed drift {fmt(trace.max_speed_drift)}")

    _emit(args, data, human)
    return EXIT_OK if trace.completed else EXIT_FAIL


def cmd_verify(args, scene) -> int:
    start = time.perf_counter()
    try:
        summary = run_all(scene, args.seed)
    except ValidationFailed as exc:
        for r in exc.validation.failures():
            bad = r.failures()[0]
            print(f"{r.subject}: {bad.check} failed at sample {bad.sample} (value {fmt(bad.value)}) {bad.detail}", file=sys.stderr)
        raise InputError(str(exc)) from None
    elapsed = time.perf_counter() - start

    def human():
        for c in summary.checks:
            print(f"{c.verdict.upper():<5} {c.id:<28} samples {c.samples:>5}  worst {fmt(c.worst_residual)}  tol {fmt(c.tolerance)}")
        print(f"{'all checks pass' if summary.passed else 'FAILED'} ({elapsed:.1f} s)")

    _emit(args, summary.to_dict(), human)
    return EXIT_OK if summary.passed else EXIT_FAIL


# parser -----------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="finslerprod", description="Minkowskian product Finsler metrics: tensors, curvature, geodesics and checks.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help, func):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("scene", help="scene JSON file (bare 'demo.json' falls back to the bundled scene)")
        sp.add_argument("--json", action="store_true", help="structured JSON output")
        sp.set_defaults(func=func)
        return sp

    sp = add("validate", "metric and product-function validation report", cmd_validate)
    sp.add_argument("--seed", type=int, default=0, help="sampling seed (default: 0)")

    for name, helptext, func in (("tensor", "g, h, g^-1 and product closed forms", cmd_tensor),
                                 ("curvature", "spray, Riemann and Ricci quantities", cmd_curvature)):
        sp = add(name, helptext, func)
        sp.add_argument("--metric", required=True)
        sp.add_argument("--x", required=True, help="base point, comma separated")
        sp.add_argument("--y", required=True, help="fiber vector, comma separated")

    sp = add("einstein", "Einstein diagnostics at a base point", cmd_einstein)
    sp.add_argument("--metric", required=True)
    sp.add_argument("--x", required=True)
    sp.add_argument("--samples", type=int, default=8, help="number of fiber directions (default: 8)")
    sp.add_argument("--seed", type=int, default=0)

    sp = add("geodesic", "integrate a geodesic and write a CSV trace", cmd_geodesic)
    sp.add_argument("--metric", required=True)
    sp.add_argument("--x0", required=True)
    sp.add_argument("--y0", required=True)
    sp.add_argument("--t-max", type=float, required=True, dest="t_max")
    sp.add_argument("--dt", type=float, required=True)
    sp.add_argument("--out", required=True, help="output CSV path")

    sp = add("verify", "run the full check harness", cmd_verify)
    sp.add_argument("--seed", type=int, default=0)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        scene = load_scene(args.scene)
        return args.func(args, scene)
    except (SceneError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (DomainError, SingularMatrixError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FinslerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
