"""Experiment runners behind the command-line interface.

Each runner returns a list of flat row dicts with a stable column order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import bounds
from .ellipse_modes import (
    EllipseGeom,
    ModeSearchError,
    find_qm,
    localization_bound,
    localization_rho,
    mode_field,
    write_field_csv,
)
from .geometry import GeometryError, ShapeSpec, make_shape, mesh, mesh_from_counts, starlike_params
from .operators import assemble_layers, combine_A
from .quadrature import QuadratureConfig
from .spectral import NormReport, circle_fourier_reference, eoc_p, near_singular, op_norm, singular_extremes

FORMATS = ("csv", "json", "md")
STARLIKE = ("circle", "ellipse", "kite", "square", "rectangle")
POLYGONS = ("square", "rectangle", "rect_cavity")


@dataclass(frozen=True)
class ExperimentSpec:
    shape: str
    k_values: tuple
    eta_strategy: str = "eta_k"
    params: dict = field(default_factory=dict)
    eppw: float = 10.0
    min_per_arc: int = 1
    operators: tuple = ("S", "D", "A")
    fmt: str = "csv"
    out: str | None = None
    workers: int = 1

    def __post_init__(self):
        ks = list(self.k_values)
        if not ks or any(not k > 0 for k in ks):
            raise ValueError("k values must be positive")
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("k values must be strictly increasing")
        if self.fmt not in FORMATS:
            raise ValueError(f"format must be one of {FORMATS}")
        if not set(self.operators) <= {"S", "D", "A"}:
            raise ValueError("operators must be a subset of S, D, A")

    @property
    def shape_spec(self) -> ShapeSpec:
        return ShapeSpec.named(self.shape, **self.params)


def _eta_rule(spec: ShapeSpec, name: str, log_branch_max_k=None) -> bounds.EtaStrategy:
    R0 = None
    if name in ("eta_star_2d", "kress_3d_maxrule"):
        R0 = starlike_params(spec).R0
    return bounds.EtaStrategy(name, R0, log_branch_max_k)


def _bound_columns(spec: ShapeSpec, k: float, eta_value: float | None) -> dict:
    cols = {}
    kind = spec.kind
    if kind == "crack":
        cb = bounds.crack_S_bounds(spec.params["a"], k)
        cols["S_lower_crack"] = cb.lower
        cols["S_upper_crack"] = cb.upper
        return cols
    if kind == "circle":
        cols["S_lower_curvature"] = bounds.curvature_S_lower(spec.params["r"], k)
    if kind in POLYGONS:
        arcs = make_shape(spec)
        longest = max(arc.length for arc in arcs)
        cols["S_lower_line"] = bounds.crack_S_bounds(longest, k).lower
        if eta_value is not None:
            cols["A_lower_line"] = bounds.line_A_lower(longest, k, eta_value)
    if kind in STARLIKE and eta_value:
        cols["B"] = bounds.bound_B(starlike_params(spec), k, eta_value).value
    return cols


def _norm_row(args) -> NormReport:
    spec, k, quad = args
    sspec = spec.shape_spec
    arcs = make_shape(sspec)
    msh = mesh(arcs, k, spec.eppw, spec.min_per_arc)
    closed = msh.closed
    want = ["S"]
    if closed and ({"D", "A"} & set(spec.operators)):
        want.append("D")
    lay = assemble_layers(msh, k, quad, want=tuple(want))
    report = NormReport(sspec.label, k, None, None, msh.n)
    if "S" in spec.operators:
        report.norm_S = op_norm(lay["S"])
    if "D" in spec.operators and closed:
        report.norm_D = op_norm(lay["D"])
    eta_value = None
    if "A" in spec.operators and closed:
        eta_value = _eta_rule(sspec, spec.eta_strategy)(k)
        smax, smin = singular_extremes(combine_A(lay["S"], lay["D"], eta_value))
        report.eta_strategy, report.eta = spec.eta_strategy, eta_value
        report.norm_A = smax
        report.norm_Ainv = 1.0 / smin if smin > 0 else math.inf
        if near_singular(smax, smin):
            report.flags = ("near_singular",)
    report.bounds = _bound_columns(sspec, k, eta_value)
    return report


def _failed_report(spec: ExperimentSpec, k: float, exc: Exception) -> NormReport:
    return NormReport(spec.shape_spec.label, k, spec.eta_strategy, None, 0, flags=(f"error:{type(exc).__name__}: {exc}",))


def _safe(fn, args, on_error):
    try:
        return fn(args)
    except (GeometryError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return on_error(exc)


def _ordered_map(fn, items, workers: int):
    if workers <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _norm_task(args):
    spec = args[0]
    return _safe(_norm_row, args, lambda exc: _failed_report(spec, args[1], exc))


def attach_eoc(reports: list[NormReport], columns=("norm_S", "norm_D", "norm_A", "norm_Ainv")) -> None:
    """EOC exponent of each column relative to the previous row."""
    for prev, cur in zip(reports, reports[1:]):
        for col in columns:
            v1, v2 = getattr(prev, col), getattr(cur, col)
            if v1 and v2 and math.isfinite(v1) and math.isfinite(v2):
                cur.eoc[col] = eoc_p(prev.k, v1, cur.k, v2)


def run_norms(spec: ExperimentSpec, quad: QuadratureConfig | None = None) -> list[NormReport]:
    """One :class:`NormReport` per wavenumber, with EOC and bound columns."""
    quad = quad or QuadratureConfig()
    reports = _ordered_map(_norm_task, [(spec, k, quad) for k in spec.k_values], spec.workers)
    attach_eoc(reports)
    return reports


# -- low wavenumber -----------------------------------------------------------------------


def _lowk_row(args) -> dict:
    sspec, k, per_arc, quad, log_branch_max_k = args
    arcs = make_shape(sspec)
    msh = mesh_from_counts(arcs, [per_arc] * len(arcs))
    lay = assemble_layers(msh, k, quad, want=("S", "D"))
    row = {"shape": sspec.label, "k": k, "N": msh.n}
    flags = []
    star = _eta_rule(sspec, "eta_star_2d", log_branch_max_k)
    for tag, eta_value in (("kk", k), ("star", star(k))):
        smax, smin = singular_extremes(combine_A(lay["S"], lay["D"], eta_value))
        row[f"eta_{tag}"] = eta_value
        row[f"norm_A_{tag}"] = smax
        row[f"norm_Ainv_{tag}"] = 1.0 / smin if smin > 0 else math.inf
        row[f"cond_{tag}"] = smax / smin if smin > 0 else math.inf
        if near_singular(smax, smin):
            flags.append(f"near_singular_{tag}")
    row["flags"] = ";".join(flags)
    return row


def _lowk_task(args):
    return _safe(
        _lowk_row, args, lambda exc: {"shape": args[0].label, "k": args[1], "flags": f"error:{type(exc).__name__}: {exc}"}
    )


def run_lowk(
    shape: str,
    k_values,
    per_arc: int,
    params: dict | None = None,
    quad: QuadratureConfig | None = None,
    workers: int = 1,
    log_branch_max_k: float | None = None,
) -> list[dict]:
    """Paired ``eta = k`` and ``eta*`` columns at small wavenumbers, ``per_arc`` elements per side."""
    sspec = ShapeSpec.named(shape, **(params or {}))
    if not make_shape(sspec) or shape == "crack":
        raise ValueError("low-k runs need a closed shape")
    quad = quad or QuadratureConfig()
    ks = sorted(k_values)
    rows = _ordered_map(_lowk_task, [(sspec, k, per_arc, quad, log_branch_max_k) for k in ks], workers)
    for prev, cur in zip(rows, rows[1:]):
        for tag in ("kk", "star"):
            col = f"norm_Ainv_{tag}"
            if col in prev and col in cur and math.isfinite(prev[col]) and math.isfinite(cur[col]):
                cur[f"p_{col}"] = eoc_p(prev["k"], prev[col], cur["k"], cur[col])
    return rows


# -- convergence ------------------------------------------------------------------------------


def run_convergence(
    shape: str,
    k: float,
    eppw_values,
    eta_strategy: str = "eta_k",
    params: dict | None = None,
    quad: QuadratureConfig | None = None,
) -> list[dict]:
    """Norms at increasing mesh densities; for the unit circle, the Fourier reference too."""
    sspec = ShapeSpec.named(shape, **(params or {}))
    arcs = make_shape(sspec)
    quad = quad or QuadratureConfig()
    rows = []
    eta_value = _eta_rule(sspec, eta_strategy)(k)
    for eppw in eppw_values:
        msh = mesh(arcs, k, eppw)
        lay = assemble_layers(msh, k, quad, want=("S", "D"))
        smax, smin = singular_extremes(combine_A(lay["S"], lay["D"], eta_value))
        rows.append(
            {
                "shape": sspec.label,
                "k": k,
                "eta": eta_value,
                "eppw": eppw,
                "N": msh.n,
                "norm_S": op_norm(lay["S"]),
                "norm_D": op_norm(lay["D"]),
                "norm_A": smax,
                "norm_Ainv": 1.0 / smin,
            }
        )
    if shape == "circle" and sspec.params["r"] == 1.0:
        ref = circle_fourier_reference(k, eta_value)
        rows.append(
            {
                "shape": sspec.label,
                "k": k,
                "eta": eta_value,
                "eppw": "fourier",
                "N": len(ref.orders),
                "norm_S": ref.norm_S,
                "norm_D": ref.norm_D,
                "norm_A": ref.norm_A,
                "norm_Ainv": ref.norm_Ainv,
            }
        )
    base = rows[-1]
    for row in rows:
        row["rel_diff_A"] = abs(row["norm_A"] - base["norm_A"]) / base["norm_A"]
    return rows


# -- ellipse modes ------------------------------------------------------------------------------


def _mode_row(args) -> dict:
    geom, m, nu0, grid_dir, grid = args
    mode = find_qm(geom, m)
    rho = localization_rho(geom, mode, nu0)
    row = {
        "m": m,
        "q": mode.q,
        "k": mode.k,
        "a0": mode.ce0.a0,
        "zero_count": mode.zero_count,
        "rho": rho,
        "rho_bound": localization_bound(geom, mode.k, nu0),
        "flags": "",
    }
    if grid_dir is not None:
        fld = mode_field(geom, mode, *grid)
        write_field_csv(f"{grid_dir}/mode_m{m}.csv", fld)
    return row


def _mode_task(args):
    try:
        return _mode_row(args)
    except (ModeSearchError, ValueError) as exc:
        return {"m": args[1], "flags": f"error:{type(exc).__name__}: {exc}"}


def run_modes(
    a1: float,
    a2: float,
    m_values,
    nu0: float = np.pi / 4,
    grid_dir: str | None = None,
    grid: tuple = (201, 101),
    workers: int = 1,
) -> list[dict]:
    geom = EllipseGeom(a1, a2)
    return _ordered_map(_mode_task, [(geom, m, nu0, grid_dir, grid) for m in m_values], workers)


def quad_provenance(quad: QuadratureConfig) -> dict:
    return asdict(quad)
