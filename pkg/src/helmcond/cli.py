"""Command-line entry point: ``helmcond {norms,lowk,convergence,modes} ...``.

Every subcommand writes one table. Exit status is 0 when all rows are clean,
2 when some row carries a flag (near-singular matrix, failed row) and 1 on a
hard failure such as invalid arguments.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import ETA_STRATEGIES, rate_annotations
from .experiments import (
    FORMATS,
    ExperimentSpec,
    quad_provenance,
    run_convergence,
    run_lowk,
    run_modes,
    run_norms,
)
from .geometry import SHAPE_KINDS, ShapeSpec
from .quadrature import QuadratureConfig

DEFAULT_K = "5,10,20,40,80,160"
EXTENDED_K = "5,10,20,40,80,160,320,640"


class CliError(Exception):
    pass


# -- argument parsing -----------------------------------------------------------------------


def _floats(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}") from exc


def _param(text: str) -> tuple[str, float]:
    key, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key.strip(), float(val)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"parameter {key!r} needs a numeric value") from exc


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=FORMATS, default="csv", dest="fmt")
    p.add_argument("--workers", type=int, default=1, help="worker processes, one row per task")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="helmcond", description="Conditioning experiments for 2D Helmholtz BEM operators.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("norms", help="norms of S, D, A and inv(A) over a list of wavenumbers")
    p.add_argument("--shape", choices=SHAPE_KINDS, required=True)
    p.add_argument("--param", type=_param, action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--k", type=_floats, default=None, help=f"wavenumbers (default {DEFAULT_K})")
    p.add_argument("--extended", action="store_true", help=f"use k = {EXTENDED_K}")
    p.add_argument("--eta", choices=ETA_STRATEGIES, default="eta_k")
    p.add_argument("--eppw", type=float, default=10.0, help="elements per wavelength")
    p.add_argument("--min-per-arc", type=int, default=1)
    p.add_argument("--operators", default="S,D,A", help="subset of S,D,A")
    _common(p)

    p = sub.add_parser("lowk", help="eta = k against eta* at small wavenumbers")
    p.add_argument("--shape", choices=("square", "rectangle", "circle", "ellipse", "kite"), required=True)
    p.add_argument("--param", type=_param, action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--k", type=_floats, default=[1e-2, 1e-3, 1e-4, 1e-5])
    p.add_argument("--per-arc", type=int, default=100, help="elements per side")
    p.add_argument(
        "--log-branch-max-k",
        type=float,
        default=None,
        help="use the logarithmic eta* branch for k up to this value instead of k R0 <= 1",
    )
    _common(p)

    p = sub.add_parser("convergence", help="norms at increasing mesh density")
    p.add_argument("--shape", choices=SHAPE_KINDS, default="circle")
    p.add_argument("--param", type=_param, action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--k", type=float, default=5.0)
    p.add_argument("--eppw", type=_floats, default=[10.0, 20.0])
    p.add_argument("--eta", choices=ETA_STRATEGIES, default="eta_k")
    _common(p)

    p = sub.add_parser("modes", help="bouncing-ball Dirichlet modes of an ellipse")
    p.add_argument("--a1", type=float, default=1.0)
    p.add_argument("--a2", type=float, default=0.5)
    p.add_argument("--m", type=_ints, default=[1, 4, 9, 14])
    p.add_argument("--nu0", type=float, default=math.pi / 4)
    p.add_argument("--grid-dir", default=None, help="directory for per-mode field grids (CSV)")
    p.add_argument("--grid", type=_ints, default=[201, 101], help="grid size nx,ny")
    _common(p)
    return parser


# -- output ------------------------------------------------------------------------------------


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _columns(rows: list[dict]) -> list[str]:
    cols: list[str] = []
    for row in rows:
        for key in row:
            if key not in cols:
                cols.append(key)
    if "flags" in cols:
        cols.remove("flags")
        cols.append("flags")
    return cols


def to_csv(rows: list[dict]) -> str:
    cols = _columns(rows)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in cols])
    return buf.getvalue()


def to_markdown(rows: list[dict], notes: dict | None = None) -> str:
    cols = _columns(rows)
    lines = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
    for row in rows:
        lines.append("| " + " | ".join(_cell(row.get(c)).replace("|", "\\|") for c in cols) + " |")
    if notes:
        lines.append("")
        for column, items in notes.items():
            for item in items:
                lines.append(f"- {column}: {item}")
    return "\n".join(lines) + "\n"


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, np.integer):
        return int(value)
    return value


def to_json(rows: list[dict], provenance: dict) -> str:
    doc = {"provenance": provenance, "rows": rows}
    return json.dumps(_jsonable(doc), indent=2) + "\n"


def render(rows: list[dict], fmt: str, provenance: dict, notes: dict | None = None) -> str:
    if fmt == "csv":
        return to_csv(rows)
    if fmt == "md":
        return to_markdown(rows, notes)
    return to_json(rows, provenance)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _status(rows: list[dict]) -> int:
    return 2 if any(row.get("flags") for row in rows) else 0


# -- commands ---------------------------------------------------------------------------------


def _cmd_norms(args) -> tuple[list[dict], dict, dict]:
    if args.k is not None and args.extended:
        raise CliError("--k and --extended are mutually exclusive")
    ks = args.k if args.k is not None else _floats(EXTENDED_K if args.extended else DEFAULT_K)
    spec = ExperimentSpec(
        shape=args.shape,
        k_values=tuple(ks),
        eta_strategy=args.eta,
        params=dict(args.param),
        eppw=args.eppw,
        min_per_arc=args.min_per_arc,
        operators=tuple(op.strip() for op in args.operators.split(",") if op.strip()),
        fmt=args.fmt,
        out=args.out,
        workers=args.workers,
    )
    quad = QuadratureConfig()
    rows = [r.as_dict() for r in run_norms(spec, quad)]
    prov = {
        "command": "norms",
        "shape": spec.shape_spec.kind,
        "params": spec.shape_spec.params,
        "eta_strategy": spec.eta_strategy,
        "eppw": spec.eppw,
        "min_per_arc": spec.min_per_arc,
        "quadrature": quad_provenance(quad),
        "mesh_sizes": [row["N"] for row in rows],
        "rates": rate_annotations(spec.shape_spec.kind),
    }
    return rows, prov, rate_annotations(spec.shape_spec.kind)


def _cmd_lowk(args):
    quad = QuadratureConfig()
    rows = run_lowk(
        args.shape,
        args.k,
        args.per_arc,
        dict(args.param),
        quad,
        args.workers,
        args.log_branch_max_k,
    )
    prov = {
        "command": "lowk",
        "shape": args.shape,
        "params": ShapeSpec.named(args.shape, **dict(args.param)).params,
        "per_arc": args.per_arc,
        "log_branch_max_k": args.log_branch_max_k,
        "quadrature": quad_provenance(quad),
        "mesh_sizes": [row.get("N") for row in rows],
    }
    return rows, prov, None


def _cmd_convergence(args):
    quad = QuadratureConfig()
    rows = run_convergence(args.shape, args.k, args.eppw, args.eta, dict(args.param), quad)
    prov = {
        "command": "convergence",
        "shape": args.shape,
        "params": ShapeSpec.named(args.shape, **dict(args.param)).params,
        "k": args.k,
        "eta_strategy": args.eta,
        "quadrature": quad_provenance(quad),
        "mesh_sizes": [row["N"] for row in rows],
    }
    return rows, prov, None


def _cmd_modes(args):
    if len(args.grid) != 2 or min(args.grid) < 2:
        raise CliError("--grid needs two sizes nx,ny >= 2")
    if args.grid_dir is not None:
        Path(args.grid_dir).mkdir(parents=True, exist_ok=True)
    rows = run_modes(args.a1, args.a2, args.m, args.nu0, args.grid_dir, tuple(args.grid), args.workers)
    prov = {
        "command": "modes",
        "a1": args.a1,
        "a2": args.a2,
        "nu0": args.nu0,
        "grid": list(args.grid),
        "grid_dir": args.grid_dir,
    }
    return rows, prov, None


_COMMANDS = {
    "norms": _cmd_norms,
    "lowk": _cmd_lowk,
    "convergence": _cmd_convergence,
    "modes": _cmd_modes,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; 2 is reserved for flagged rows here
        return 0 if exc.code == 0 else 1
    if getattr(args, "workers", 1) < 1:
        print("helmcond: error: --workers must be >= 1", file=sys.stderr)
        return 1
    try:
        rows, prov, notes = _COMMANDS[args.command](args)
        prov["version"] = __version__
        _emit(render(rows, args.fmt, prov, notes), args.out)
    except (CliError, ValueError, OSError) as exc:
        print(f"helmcond: error: {exc}", file=sys.stderr)
        return 1
    return _status(rows)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
