"""Scatterer catalogue, boundary arcs and wavelength-proportional meshing.

Every boundary is a chain of smooth arcs. Each arc is parameterised over
``s in [0, 1]`` and oriented so that the boundary runs counter-clockwise around
the obstacle; the outward normal ``(y', -x') / |gamma'|`` then points into the
exterior domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

# Gauss-Legendre table used for arc-length integration
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_LENGTH_PANELS = 256

SHAPE_KINDS = (
    "circle",
    "ellipse",
    "kite",
    "crack",
    "square",
    "rectangle",
    "rect_cavity",
    "elliptic_cavity",
)

DEFAULT_PARAMS: dict[str, dict[str, float]] = {
    "circle": {"r": 1.0},
    "ellipse": {"a1": 2.0, "a2": 0.5},
    "kite": {"scale": 1.0},
    "crack": {"a": 1.0},
    "square": {"side": 2.0},
    "rectangle": {"width": 2.0, "height": 0.02},
    "rect_cavity": {"a": math.pi / 10, "c": 1.0},
    "elliptic_cavity": {
        "a1": 1.0,
        "a2": 0.5,
        "b1": 1.3,
        "b2": 0.6,
        "phi0": 0.7 * math.pi,
    },
}


class GeometryError(ValueError):
    """Invalid shape parameters or unsupported geometric query."""


@dataclass(frozen=True)
class ShapeSpec:
    """A catalogue shape: ``kind`` plus its named parameters."""

    kind: str
    params: dict[str, float] = field(default_factory=dict)

    @classmethod
    def named(cls, kind: str, **overrides: float) -> "ShapeSpec":
        if kind not in DEFAULT_PARAMS:
            raise GeometryError(f"unknown shape kind {kind!r}; choose from {SHAPE_KINDS}")
        unknown = set(overrides) - set(DEFAULT_PARAMS[kind])
        if unknown:
            raise GeometryError(f"unknown parameters for {kind}: {sorted(unknown)}")
        params = dict(DEFAULT_PARAMS[kind])
        params.update({key: float(val) for key, val in overrides.items()})
        return cls(kind, params)

    @property
    def label(self) -> str:
        extra = ",".join(
            f"{key}={val:g}"
            for key, val in sorted(self.params.items())
            if DEFAULT_PARAMS.get(self.kind, {}).get(key) != val
        )
        return f"{self.kind}({extra})" if extra else self.kind


class Arc:
    """A C-infinity boundary arc ``s -> gamma(s)``, ``s in [0, 1]``.

    Parameters
    ----------
    func, dfunc, ddfunc
        The curve and its first two derivatives in an underlying parameter
        ``t``; they must accept numpy arrays.
    t0, t1
        Parameter range; ``t1 < t0`` reverses the traversal direction.
    straight
        True for line segments, whose double-layer self-interaction vanishes.
    """

    def __init__(
        self,
        func: Callable,
        dfunc: Callable,
        ddfunc: Callable,
        t0: float,
        t1: float,
        straight: bool = False,
        exact_length: float | None = None,
    ):
        self._f, self._df, self._ddf = func, dfunc, ddfunc
        self.t0, self.t1 = float(t0), float(t1)
        self.straight = straight
        self._dt = self.t1 - self.t0
        self._build_length_table(exact_length)

    @classmethod
    def segment(cls, p, q) -> "Arc":
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        d = q - p

        def f(t):
            t = np.asarray(t, dtype=float)
            return p + t[..., None] * d

        def df(t):
            t = np.asarray(t, dtype=float)
            return np.broadcast_to(d, t.shape + (2,)).copy()

        def ddf(t):
            t = np.asarray(t, dtype=float)
            return np.zeros(t.shape + (2,))

        return cls(f, df, ddf, 0.0, 1.0, straight=True, exact_length=float(np.hypot(*d)))

    @classmethod
    def elliptic(cls, a: float, b: float, t0: float, t1: float, center=(0.0, 0.0)) -> "Arc":
        cx, cy = center

        def f(t):
            t = np.asarray(t, dtype=float)
            return np.stack([cx + a * np.cos(t), cy + b * np.sin(t)], axis=-1)

        def df(t):
            t = np.asarray(t, dtype=float)
            return np.stack([-a * np.sin(t), b * np.cos(t)], axis=-1)

        def ddf(t):
            t = np.asarray(t, dtype=float)
            return np.stack([-a * np.cos(t), -b * np.sin(t)], axis=-1)

        exact = abs(t1 - t0) * a if a == b else None
        return cls(f, df, ddf, t0, t1, exact_length=exact)

    # -- evaluation in the normalised parameter s ---------------------------------
    def point(self, s):
        return self._f(self.t0 + np.asarray(s, dtype=float) * self._dt)

    def deriv(self, s):
        return self._df(self.t0 + np.asarray(s, dtype=float) * self._dt) * self._dt

    def deriv2(self, s):
        return self._ddf(self.t0 + np.asarray(s, dtype=float) * self._dt) * self._dt**2

    def speed(self, s):
        d = self.deriv(s)
        return np.hypot(d[..., 0], d[..., 1])

    def normal(self, s):
        d = self.deriv(s)
        sp = np.hypot(d[..., 0], d[..., 1])
        return np.stack([d[..., 1] / sp, -d[..., 0] / sp], axis=-1)

    def curvature(self, s):
        """Signed curvature; positive where the obstacle is locally convex."""
        d1 = self.deriv(s)
        d2 = self.deriv2(s)
        cross = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
        return cross / np.hypot(d1[..., 0], d1[..., 1]) ** 3

    # -- arc length ----------------------------------------------------------------
    def _build_length_table(self, exact_length):
        edges = np.linspace(0.0, 1.0, _LENGTH_PANELS + 1)
        if self.straight:
            self._edges = edges
            self._cum = edges * exact_length
            self.length = float(exact_length)
            return
        h = np.diff(edges)
        nodes = edges[:-1, None] + 0.5 * h[:, None] * (_GL_NODES[None, :] + 1.0)
        pieces = 0.5 * h * (self.speed(nodes) * _GL_WEIGHTS).sum(axis=1)
        self._edges = edges
        self._cum = np.concatenate([[0.0], np.cumsum(pieces)])
        self.length = float(exact_length) if exact_length is not None else float(self._cum[-1])
        if exact_length is not None:
            self._cum *= exact_length / self._cum[-1]

    def length_between(self, sa, sb):
        """Arc length from ``sa`` to ``sb`` (vectorised, ``sa <= sb``)."""
        sa = np.atleast_1d(np.asarray(sa, dtype=float))
        sb = np.atleast_1d(np.asarray(sb, dtype=float))
        return self._length_to(sb) - self._length_to(sa)

    def _length_to(self, s):
        s = np.clip(s, 0.0, 1.0)
        if self.straight:
            return s * self.length
        idx = np.minimum((s * _LENGTH_PANELS).astype(int), _LENGTH_PANELS - 1)
        lo = self._edges[idx]
        half = 0.5 * (s - lo)
        nodes = lo[:, None] + half[:, None] * (_GL_NODES[None, :] + 1.0)
        partial = half * (self.speed(nodes) * _GL_WEIGHTS).sum(axis=1)
        return self._cum[idx] + partial

    def param_at_length(self, lengths):
        """Invert the arc-length map by Newton iteration."""
        lengths = np.atleast_1d(np.asarray(lengths, dtype=float))
        if self.straight:
            return lengths / self.length
        idx = np.clip(np.searchsorted(self._cum, lengths) - 1, 0, _LENGTH_PANELS - 1)
        frac = (lengths - self._cum[idx]) / np.maximum(self._cum[idx + 1] - self._cum[idx], 1e-300)
        s = self._edges[idx] + frac / _LENGTH_PANELS
        for _ in range(30):
            step = (self._length_to(s) - lengths) / self.speed(s)
            s = np.clip(s - step, 0.0, 1.0)
            if np.max(np.abs(step)) < 1e-15:
                break
        return s

    @property
    def start(self) -> np.ndarray:
        return self.point(np.array(0.0))

    @property
    def end(self) -> np.ndarray:
        return self.point(np.array(1.0))


# -- catalogue -----------------------------------------------------------------------


def _require_positive(spec: ShapeSpec, *names: str) -> None:
    for name in names:
        if name not in spec.params:
            raise GeometryError(f"{spec.kind}: missing parameter {name!r}")
        if not spec.params[name] > 0:
            raise GeometryError(f"{spec.kind}: parameter {name!r} must be positive")


def _polygon(vertices) -> list[Arc]:
    vertices = np.asarray(vertices, dtype=float)
    return [Arc.segment(vertices[i], vertices[(i + 1) % len(vertices)]) for i in range(len(vertices))]


def _kite(scale: float) -> list[Arc]:
    def f(t):
        t = np.asarray(t, dtype=float)
        return scale * np.stack([np.cos(t) + 0.65 * np.cos(2 * t) - 0.65, 1.5 * np.sin(t)], axis=-1)

    def df(t):
        t = np.asarray(t, dtype=float)
        return scale * np.stack([-np.sin(t) - 1.3 * np.sin(2 * t), 1.5 * np.cos(t)], axis=-1)

    def ddf(t):
        t = np.asarray(t, dtype=float)
        return scale * np.stack([-np.cos(t) - 2.6 * np.cos(2 * t), -1.5 * np.sin(t)], axis=-1)

    return [Arc(f, df, ddf, 0.0, 2 * np.pi)]


def _rect_cavity(a: float, c: float) -> list[Arc]:
    ell = c - a
    if not ell > 0:
        raise GeometryError("rect_cavity requires c > a")
    vertices = [
        (0.0, 0.0),
        (-c, 0.0),
        (-c, -ell),
        (ell, -ell),
        (ell, 2 * c - ell),
        (-c, 2 * c - ell),
        (-c, 2 * a),
        (0.0, 2 * a),
    ]
    return _polygon(vertices)


def _elliptic_cavity(a1, a2, b1, b2, phi0) -> list[Arc]:
    if not (b1 > a1 and b2 > a2):
        raise GeometryError("elliptic_cavity: outer ellipse must enclose the inner one")
    if not (0.5 * np.pi < phi0 < np.pi):
        raise GeometryError("elliptic_cavity: phi0 must lie in (pi/2, pi)")
    phi1 = math.acos(a1 * math.cos(phi0) / b1)
    outer = Arc.elliptic(b1, b2, -phi1, phi1)
    inner = Arc.elliptic(a1, a2, phi0, -phi0)  # clockwise: faces the cavity
    top = Arc.segment(outer.end, inner.start)
    bottom = Arc.segment(inner.end, outer.start)
    return [outer, top, inner, bottom]


def make_shape(spec: ShapeSpec) -> list[Arc]:
    """Boundary arcs of a catalogue shape, counter-clockwise, split at corners."""
    p = spec.params
    kind = spec.kind
    if kind == "circle":
        _require_positive(spec, "r")
        return [Arc.elliptic(p["r"], p["r"], 0.0, 2 * np.pi)]
    if kind == "ellipse":
        _require_positive(spec, "a1", "a2")
        if not p["a1"] > p["a2"]:
            raise GeometryError("ellipse requires a1 > a2")
        return [Arc.elliptic(p["a1"], p["a2"], 0.0, 2 * np.pi)]
    if kind == "kite":
        _require_positive(spec, "scale")
        return _kite(p["scale"])
    if kind == "crack":
        _require_positive(spec, "a")
        return [Arc.segment((0.0, 0.0), (0.0, p["a"]))]
    if kind == "square":
        _require_positive(spec, "side")
        h = 0.5 * p["side"]
        return _polygon([(-h, -h), (h, -h), (h, h), (-h, h)])
    if kind == "rectangle":
        _require_positive(spec, "width", "height")
        w, h = 0.5 * p["width"], 0.5 * p["height"]
        return _polygon([(-w, -h), (w, -h), (w, h), (-w, h)])
    if kind == "rect_cavity":
        _require_positive(spec, "a", "c")
        return _rect_cavity(p["a"], p["c"])
    if kind == "elliptic_cavity":
        _require_positive(spec, "a1", "a2", "b1", "b2", "phi0")
        return _elliptic_cavity(p["a1"], p["a2"], p["b1"], p["b2"], p["phi0"])
    raise GeometryError(f"unknown shape kind {kind!r}")


def is_closed(arcs: list[Arc], tol: float = 1e-12) -> bool:
    scale = max(1.0, max(float(np.abs(a.start).max()) for a in arcs))
    return bool(np.linalg.norm(arcs[-1].end - arcs[0].start) <= tol * scale)


# -- meshing ------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundaryMesh:
    """Piecewise-constant boundary mesh; element ``i`` lives on ``arcs[arc_id[i]]``.

    ``s_start``/``s_end`` are element endpoints in the arc's normalised
    parameter. Midpoints, normals and curvatures are sampled at the
    arc-length midpoint of each element.
    """

    arcs: tuple
    arc_id: np.ndarray
    s_start: np.ndarray
    s_end: np.ndarray
    lengths: np.ndarray
    midpoints: np.ndarray
    normals: np.ndarray
    curvature: np.ndarray
    per_arc: tuple
    closed: bool

    @property
    def n(self) -> int:
        return len(self.lengths)

    @property
    def total_length(self) -> float:
        return float(self.lengths.sum())

    @property
    def endpoints(self) -> np.ndarray:
        """Array of shape (N, 2, 2): start and end point of each element."""
        start = np.empty((self.n, 2))
        end = np.empty((self.n, 2))
        for j, arc in enumerate(self.arcs):
            sel = self.arc_id == j
            start[sel] = arc.point(self.s_start[sel])
            end[sel] = arc.point(self.s_end[sel])
        return np.stack([start, end], axis=1)


def elements_per_arc(length: float, k: float, elems_per_wavelength: float, min_per_arc: int) -> int:
    target = elems_per_wavelength * k * length / (2 * np.pi)
    # guard against ceil(50.000000000001) = 51 from rounding
    return max(int(math.ceil(target - 1e-9)), int(min_per_arc))


def mesh_from_counts(arcs: list[Arc], counts) -> BoundaryMesh:
    """Mesh each arc into the given number of equal-length elements."""
    arc_id, s0, s1, lens, mids, norms, curv = [], [], [], [], [], [], []
    for j, (arc, n) in enumerate(zip(arcs, counts)):
        if n < 1:
            raise GeometryError("each arc needs at least one element")
        targets = np.linspace(0.0, arc.length, n + 1)
        s_nodes = arc.param_at_length(targets)
        s_nodes[0], s_nodes[-1] = 0.0, 1.0
        s_mid = arc.param_at_length(0.5 * (targets[:-1] + targets[1:]))
        arc_id.append(np.full(n, j))
        s0.append(s_nodes[:-1])
        s1.append(s_nodes[1:])
        lens.append(np.full(n, arc.length / n))
        mids.append(arc.point(s_mid))
        norms.append(arc.normal(s_mid))
        curv.append(np.zeros(n) if arc.straight else arc.curvature(s_mid))
    return BoundaryMesh(
        arcs=tuple(arcs),
        arc_id=np.concatenate(arc_id),
        s_start=np.concatenate(s0),
        s_end=np.concatenate(s1),
        lengths=np.concatenate(lens),
        midpoints=np.concatenate(mids),
        normals=np.concatenate(norms),
        curvature=np.concatenate(curv),
        per_arc=tuple(int(n) for n in counts),
        closed=is_closed(arcs),
    )


def mesh(arcs: list[Arc], k: float, elems_per_wavelength: float = 10.0, min_per_arc: int = 1) -> BoundaryMesh:
    """Uniform mesh with ``ceil(eppw * k * L_j / 2pi)`` elements per arc (at least ``min_per_arc``)."""
    if not k > 0:
        raise GeometryError("mesh requires k > 0")
    counts = [elements_per_arc(arc.length, k, elems_per_wavelength, min_per_arc) for arc in arcs]
    return mesh_from_counts(arcs, counts)


# -- starlike parameters ---------------------------------------------------------------


@dataclass(frozen=True)
class StarlikeParams:
    R0: float
    delta_minus: float
    delta_plus: float
    delta_star: float
    d: int = 2


_STARLIKE_KINDS = ("circle", "ellipse", "kite", "square", "rectangle")


def _refine_extremum(arc: Arc, fn, s_best: float, maximise: bool, width: float) -> float:
    sign = -1.0 if maximise else 1.0
    lo, hi = max(0.0, s_best - width), min(1.0, s_best + width)
    res = optimize.minimize_scalar(
        lambda s: sign * fn(arc, np.array([s]))[0],
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-13},
    )
    sampled = sign * fn(arc, np.array([s_best]))[0]
    return sign * min(sampled, res.fun)


def _support(arc, s):
    return np.einsum("...i,...i->...", arc.point(s), arc.normal(s))


def _tangential(arc, s):
    x = arc.point(s)
    nu = arc.normal(s)
    xn = np.einsum("...i,...i->...", x, nu)
    return np.hypot(*(x - xn[..., None] * nu).T)


def _radius(arc, s):
    return np.hypot(*arc.point(s).T)


def _sampled_extremum(arcs, fn, maximise: bool, samples: int = 20001) -> float:
    best = -np.inf if maximise else np.inf
    s = np.linspace(0.0, 1.0, samples)
    for arc in arcs:
        vals = fn(arc, s)
        i = int(np.argmax(vals) if maximise else np.argmin(vals))
        v = _refine_extremum(arc, fn, s[i], maximise, 2.0 / (samples - 1))
        best = max(best, v) if maximise else min(best, v)
    return float(best)


def max_radius(arcs: list[Arc]) -> float:
    """``sup |x|`` over the boundary."""
    return _sampled_extremum(arcs, _radius, maximise=True)


def starlike_params(spec: ShapeSpec) -> StarlikeParams:
    """Starlike shape constants about the origin, by dense sampling plus refinement.

    The rectangle follows the corner-at-origin convention in which
    ``R0`` is the diagonal, ``delta_minus`` the short side and
    ``delta_plus = delta_star`` the long side.
    """
    if spec.kind not in _STARLIKE_KINDS:
        raise GeometryError(f"{spec.kind} is not starlike about the origin")
    if spec.kind == "rectangle":
        w, h = spec.params["width"], spec.params["height"]
        long_side, short_side = max(w, h), min(w, h)
        return StarlikeParams(math.hypot(w, h), short_side, long_side, long_side)
    arcs = make_shape(spec)
    R0 = max_radius(arcs)
    dminus = _sampled_extremum(arcs, _support, maximise=False)
    dplus = _sampled_extremum(arcs, _support, maximise=True)
    dstar = _sampled_extremum(arcs, _tangential, maximise=True)
    if not dminus > 0:
        raise GeometryError(f"{spec.kind} is not starlike about the origin (delta_- = {dminus:.3g})")
    return StarlikeParams(R0, dminus, dplus, dstar)
