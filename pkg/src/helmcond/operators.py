"""Galerkin matrices of the 2D Helmholtz layer potentials and their Laplace limits.

Conventions (kernels already carry the factor 2 of the operator definitions)::

    S  : (i/2) H0(k r)
    D  : (i k/2) H1(k r) (x - y).n_y / r      # = 2 dPhi/dn_y
    D' : (i k/2) H1(k r) (y - x).n_x / r      # = 2 dPhi/dn_x
    S0 : (1/pi) log(R0 / r)
    D0 : (1/pi) (x - y).n_y / r^2

The basis is the L2-orthonormal piecewise-constant one, so entry ``(i, j)`` is
``|G_i|^{-1/2} |G_j|^{-1/2}`` times the double integral of the kernel with
``x`` on element ``i`` and ``y`` on element ``j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import io as spio
from scipy import special

from .geometry import BoundaryMesh
from .quadrature import (
    QuadratureConfig,
    coincident_rule,
    gauss01,
    tensor_rule,
    touching_rule,
)
from .specfun import EULER_GAMMA, y0_regular

KIND_NAMES = ("S", "D", "Dprime", "A", "Aprime", "S0", "D0", "T", "A0")
_NEEDS_CLOSED = {"D", "Dprime", "A", "Aprime", "D0", "A0"}

# midpoint distance, in units of the larger element length, beyond which the
# plain far rule is used; between _PLAN_RATIO and _FAR_RATIO pairs go straight
# to the near rule, and only pairs closer than _PLAN_RATIO are classified
_FAR_RATIO = 8.0
_PLAN_RATIO = 2.5
# close pairs with gap >= this fraction of the larger element use near_order
_NEAR_GAP = 0.5
# removable double-layer singularity: below this fraction of the element
# length, use the curvature limit instead of the cancelling quotient
_DLP_CUTOFF = 1e-5
_MAX_SPLIT_DEPTH = 60
_CHUNK_POINTS = 1_500_000


class OperatorError(ValueError):
    """Unsupported operator/shape combination or invalid operator parameters."""


@dataclass(frozen=True)
class OperatorKind:
    """Which operator to assemble, with its parameters.

    ``R0`` is the length scale inside the Laplace single-layer logarithm and
    ``c0`` the coefficient of the rank-one term of ``A0 = I + D0 + i c0 T``.
    """

    name: str
    k: float = 0.0
    eta: float | None = None
    R0: float = 1.0
    c0: float = 0.0

    def __post_init__(self):
        if self.name not in KIND_NAMES:
            raise OperatorError(f"unknown operator kind {self.name!r}")
        if self.name in ("S", "D", "Dprime", "A", "Aprime") and not self.k > 0:
            raise OperatorError("Helmholtz kinds need k > 0")
        if self.name in ("A", "Aprime") and self.eta is None:
            raise OperatorError("A/Aprime need a coupling parameter eta")
        if self.name == "S0" and not self.R0 > 0:
            raise OperatorError("S0 needs R0 > 0")


@dataclass
class GalerkinMatrix:
    kind: OperatorKind
    mesh_id: str
    entries: np.ndarray
    quad: QuadratureConfig | None = None

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def transpose(self) -> "GalerkinMatrix":
        return GalerkinMatrix(self.kind, self.mesh_id, self.entries.T.copy(), self.quad)


def mesh_id(mesh: BoundaryMesh) -> str:
    return f"N={mesh.n};per_arc={','.join(map(str, mesh.per_arc))};L={mesh.total_length:.12g}"


# -- pointwise kernels -----------------------------------------------------------------


def _dist(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = x - y
    return diff, np.hypot(diff[..., 0], diff[..., 1])


def kernel_S(x, y, k: float):
    """Single-layer kernel ``(i/2) H0(k|x-y|)``; raises for coincident points."""
    _, r = _dist(x, y)
    if np.any(r == 0):
        raise OperatorError("single-layer kernel is singular at x = y")
    kr = k * r
    return 0.5j * special.j0(kr) - 0.5 * special.y0(kr)


def kernel_S_smooth(x, y, k: float):
    """Remainder ``kernel_S + (1/pi) log|x-y|``; continuous, finite at ``x = y``."""
    _, r = _dist(x, y)
    kr = k * r
    j0 = special.j0(kr)
    with np.errstate(divide="ignore", invalid="ignore"):
        logpart = np.where(r > 0, (1.0 - j0) * np.log(np.where(r > 0, r, 1.0)), 0.0)
    return logpart / np.pi - j0 * np.log(k) / np.pi + 0.5j * j0 - 0.5 * y0_regular(kr)


def kernel_S_diagonal_constant(k: float) -> complex:
    """Value of :func:`kernel_S_smooth` at ``x = y``."""
    return 0.5j - (np.log(k / 2) + EULER_GAMMA) / np.pi


def kernel_D(x, y, normal_y, curvature_y, k: float):
    """Double-layer kernel ``2 dPhi(x, y)/dn(y)``; at ``x = y`` returns ``-kappa_y/(2 pi)``."""
    diff, r = _dist(x, y)
    nd = np.einsum("...i,...i->...", diff, np.asarray(normal_y, dtype=float))
    return _dlp(k, r, nd, np.asarray(curvature_y, dtype=float), r == 0)


def kernel_Dprime(x, y, normal_x, curvature_x, k: float):
    """Adjoint double-layer kernel: :func:`kernel_D` with the roles of x and y exchanged."""
    return kernel_D(y, x, normal_x, curvature_x, k)


def kernel_S0(x, y, R0: float = 1.0):
    _, r = _dist(x, y)
    if np.any(r == 0):
        raise OperatorError("Laplace single-layer kernel is singular at x = y")
    return np.log(R0 / r) / np.pi


def kernel_D0(x, y, normal_y, curvature_y):
    diff, r = _dist(x, y)
    nd = np.einsum("...i,...i->...", diff, np.asarray(normal_y, dtype=float))
    return _dlp(0.0, r, nd, np.asarray(curvature_y, dtype=float), r == 0).real


def _dlp(k, r, nd, curv, use_limit):
    """``(ik/2) H1(kr) nd / r`` (or its k = 0 value) with the curvature limit where flagged."""
    rs = np.where(use_limit, 1.0, r)
    if k > 0:
        kr = k * rs
        val = 0.5j * k * (special.j1(kr) + 1j * special.y1(kr)) * nd / rs
    else:
        val = (nd / (np.pi * rs * rs)).astype(complex)
    return np.where(use_limit, -curv / (2 * np.pi), val)


# -- batched element-pair integration ----------------------------------------------------


def _eval_on_arcs(arcs, arc_id, sa, sb, local):
    """Points, normals, curvature and |ds| weight at local coordinates on sub-elements.

    ``arc_id``, ``sa``, ``sb`` have shape (P,), ``local`` shape (P, Q) or (Q,).
    """
    local = np.broadcast_to(local, (len(arc_id),) + np.shape(local)[-1:])
    s = sa[:, None] + local * (sb - sa)[:, None]
    pts = np.empty(s.shape + (2,))
    nrm = np.empty(s.shape + (2,))
    curv = np.zeros(s.shape)
    jac = np.empty(s.shape)
    for a in np.unique(arc_id):
        sel = arc_id == a
        arc = arcs[a]
        ss = s[sel]
        d = arc.deriv(ss)
        sp = np.hypot(d[..., 0], d[..., 1])
        pts[sel] = arc.point(ss)
        nrm[sel] = np.stack([d[..., 1] / sp, -d[..., 0] / sp], axis=-1)
        if not arc.straight:
            curv[sel] = arc.curvature(ss)
        jac[sel] = sp * np.abs(sb[sel] - sa[sel])[:, None]
    return pts, nrm, curv, jac


def _pair_kernels(k, laplace_R0, x, y, nx, ny, cx, cy, limit_mask, want):
    """Kernel values for every requested layer at matching node arrays."""
    diff = x - y
    r = np.hypot(diff[..., 0], diff[..., 1])
    zero = r == 0
    rs = np.where(zero, 1.0, r)
    out = {}
    if laplace_R0 is None:
        kr = k * rs
        if "S" in want:
            out["S"] = 0.5j * special.j0(kr) - 0.5 * special.y0(kr)
        if "D" in want or "Dprime" in want:
            h1 = 0.5j * k * (special.j1(kr) + 1j * special.y1(kr)) / rs
    else:
        if "S" in want:
            out["S"] = (np.log(laplace_R0 / rs) / np.pi).astype(complex)
        if "D" in want or "Dprime" in want:
            h1 = (1.0 / (np.pi * rs * rs)).astype(complex)
    if "D" in want:
        nd = np.einsum("...i,...i->...", diff, ny)
        out["D"] = np.where(limit_mask, -cy / (2 * np.pi), h1 * nd)
    if "Dprime" in want:
        nd = -np.einsum("...i,...i->...", diff, nx)
        out["Dprime"] = np.where(limit_mask, -cx / (2 * np.pi), h1 * nd)
    return out


@dataclass
class _Batch:
    rows: list = field(default_factory=list)
    cols: list = field(default_factory=list)
    ai: list = field(default_factory=list)
    sai: list = field(default_factory=list)
    sbi: list = field(default_factory=list)
    aj: list = field(default_factory=list)
    saj: list = field(default_factory=list)
    sbj: list = field(default_factory=list)
    hmin: list = field(default_factory=list)

    def add(self, row, col, pi, pj):
        self.rows.append(row)
        self.cols.append(col)
        self.ai.append(pi.arc)
        self.sai.append(pi.sa)
        self.sbi.append(pi.sb)
        self.aj.append(pj.arc)
        self.saj.append(pj.sa)
        self.sbj.append(pj.sb)
        self.hmin.append(min(pi.length, pj.length))

    def extend(self, rows, cols, mesh: BoundaryMesh):
        """Append whole mesh elements ``(rows[p], cols[p])`` in one go."""
        for lst, arr in (
            (self.rows, rows),
            (self.cols, cols),
            (self.ai, mesh.arc_id[rows]),
            (self.sai, mesh.s_start[rows]),
            (self.sbi, mesh.s_end[rows]),
            (self.aj, mesh.arc_id[cols]),
            (self.saj, mesh.s_start[cols]),
            (self.sbj, mesh.s_end[cols]),
            (self.hmin, np.minimum(mesh.lengths[rows], mesh.lengths[cols])),
        ):
            lst.extend(arr.tolist())


@dataclass(frozen=True)
class _Panel:
    arc: int
    sa: float
    sb: float
    length: float

    def flipped(self) -> "_Panel":
        return _Panel(self.arc, self.sb, self.sa, self.length)


class _Planner:
    """Sorts close element pairs into coincident / touching / near rule batches."""

    def __init__(self, mesh: BoundaryMesh):
        self.arcs = mesh.arcs
        scale = float(np.max(np.abs(mesh.midpoints))) + mesh.lengths.max()
        self.tol = 1e-12 * scale
        self.coincident = _Batch()
        self.touching = _Batch()
        self.near = _Batch()

    def _sub_length(self, arc, s0, s1):
        lo, hi = min(s0, s1), max(s0, s1)
        return float(self.arcs[arc].length_between(lo, hi)[0])

    def _panel(self, arc, sa, sb):
        return _Panel(arc, sa, sb, self._sub_length(arc, sa, sb))

    def _point(self, arc, s):
        return self.arcs[arc].point(np.array(s))

    def _gap(self, p: _Panel, q: _Panel) -> float:
        t = np.linspace(0.0, 1.0, 9)
        xp = self.arcs[p.arc].point(p.sa + t * (p.sb - p.sa))
        xq = self.arcs[q.arc].point(q.sa + t * (q.sb - q.sa))
        d = xp[:, None, :] - xq[None, :, :]
        return float(np.sqrt((d**2).sum(-1)).min())

    def _shared(self, p: _Panel, q: _Panel):
        """Re-orient so a shared vertex sits at local coordinate 0 on both panels."""
        ends_p = (self._point(p.arc, p.sa), self._point(p.arc, p.sb))
        ends_q = (self._point(q.arc, q.sa), self._point(q.arc, q.sb))
        for ip in (0, 1):
            for iq in (0, 1):
                if np.linalg.norm(ends_p[ip] - ends_q[iq]) <= self.tol:
                    return (p if ip == 0 else p.flipped()), (q if iq == 0 else q.flipped())
        return None

    def _cut(self, p: _Panel, length: float):
        """Split ``p`` (shared vertex at ``sa``) into a leading piece of given length and the rest."""
        arc = self.arcs[p.arc]
        base = float(arc.length_between(0.0, p.sa)[0])
        direction = 1.0 if p.sb > p.sa else -1.0
        s_cut = float(arc.param_at_length(base + direction * length)[0])
        return self._panel(p.arc, p.sa, s_cut), self._panel(p.arc, s_cut, p.sb)

    def _halves(self, p: _Panel):
        sm = 0.5 * (p.sa + p.sb)
        return self._panel(p.arc, p.sa, sm), self._panel(p.arc, sm, p.sb)

    def add_pair(self, row, col, p: _Panel, q: _Panel, depth: int = 0):
        if depth > _MAX_SPLIT_DEPTH:
            raise OperatorError("near-singular pair splitting did not terminate")
        touch = self._shared(p, q)
        if touch is not None:
            p, q = touch
            if p.length > 2.0 * q.length:
                head, rest = self._cut(p, q.length)
                self.touching.add(row, col, head, q)
                self.add_pair(row, col, rest, q, depth + 1)
            elif q.length > 2.0 * p.length:
                head, rest = self._cut(q, p.length)
                self.touching.add(row, col, p, head)
                self.add_pair(row, col, p, rest, depth + 1)
            else:
                self.touching.add(row, col, p, q)
            return
        if self._gap(p, q) >= _NEAR_GAP * max(p.length, q.length):
            self.near.add(row, col, p, q)
            return
        if p.length >= q.length:
            for half in self._halves(p):
                self.add_pair(row, col, half, q, depth + 1)
        else:
            for half in self._halves(q):
                self.add_pair(row, col, p, half, depth + 1)


def _integrate_batch(batch: _Batch, rule, arcs, k, laplace_R0, want, out):
    if not batch.rows:
        return
    sig, tau, w = rule
    ai = np.array(batch.ai)
    aj = np.array(batch.aj)
    sai, sbi = np.array(batch.sai), np.array(batch.sbi)
    saj, sbj = np.array(batch.saj), np.array(batch.sbj)
    rows, cols = np.array(batch.rows), np.array(batch.cols)
    smooth_same = (ai == aj) & np.array([not arcs[a].straight for a in ai])
    cutoff = _DLP_CUTOFF * np.array(batch.hmin)
    step = max(1, _CHUNK_POINTS // len(w))
    for lo in range(0, len(rows), step):
        sl = slice(lo, lo + step)
        x, nx, cx, jx = _eval_on_arcs(arcs, ai[sl], sai[sl], sbi[sl], sig)
        y, ny, cy, jy = _eval_on_arcs(arcs, aj[sl], saj[sl], sbj[sl], tau)
        diff = x - y
        r = np.hypot(diff[..., 0], diff[..., 1])
        limit = smooth_same[sl, None] & (r < cutoff[sl, None])
        vals = _pair_kernels(k, laplace_R0, x, y, nx, ny, cx, cy, limit, want)
        wt = jx * jy * w
        for name, v in vals.items():
            np.add.at(out[name], (rows[sl], cols[sl]), (v * wt).sum(axis=1))


def _far_field(mesh, k, laplace_R0, q, want):
    """Tensor-Gauss values for all pairs.

    Both elements use the same nodes, so one kernel evaluation serves entry
    (i, j) and its mirror: S is symmetric and D'(j, i) = D(i, j). Only the
    block upper triangle is evaluated.
    """
    n = mesh.n
    g, gw = gauss01(q)
    x, nx, cx, jx = _eval_on_arcs(mesh.arcs, mesh.arc_id, mesh.s_start, mesh.s_end, g)
    jw = jx * gw
    need = set(want)
    if need & {"D", "Dprime"}:
        need |= {"D", "Dprime"}
    out = {name: np.empty((n, n), dtype=complex) for name in need}
    step = max(1, _CHUNK_POINTS // (q * q * n))
    for lo in range(0, n, step):
        hi = min(n, lo + step)
        xi = x[lo:hi].reshape(-1, 2)
        xj = x[lo:].reshape(-1, 2)
        with np.errstate(all="ignore"):
            vals = _pair_kernels(
                k,
                laplace_R0,
                xi[:, None, :],
                xj[None, :, :],
                nx[lo:hi].reshape(-1, 2)[:, None, :],
                nx[lo:].reshape(-1, 2)[None, :, :],
                cx[lo:hi].reshape(-1)[:, None],
                cx[lo:].reshape(-1)[None, :],
                False,
                tuple(need),
            )
        w2 = jw[lo:hi].reshape(-1)[:, None] * jw[lo:].reshape(-1)[None, :]
        for name, v in vals.items():
            blk = (v * w2).reshape(hi - lo, q, n - lo, q).sum(axis=(1, 3))
            out[name][lo:hi, lo:] = blk
        mirror = {"S": "S", "D": "Dprime", "Dprime": "D"}
        for name in vals:
            out[mirror[name]][hi:, lo:hi] = out[name][lo:hi, hi:].T
    return {name: out[name] for name in want}


def assemble_layers(
    mesh: BoundaryMesh,
    k: float,
    quad: QuadratureConfig | None = None,
    want=("S", "D", "Dprime"),
    laplace_R0: float | None = None,
) -> dict[str, np.ndarray]:
    """Galerkin matrices of the requested layer potentials in one pass.

    With ``laplace_R0`` set, the Laplace kernels (S0, D0, D0') are used and
    ``k`` is ignored; the result keys stay ``"S"``, ``"D"``, ``"Dprime"``.
    """
    quad = quad or QuadratureConfig()
    want = tuple(want)
    if not set(want) <= {"S", "D", "Dprime"}:
        raise OperatorError(f"unknown layer names {want}")
    if laplace_R0 is None and not k > 0:
        raise OperatorError("Helmholtz layers need k > 0")
    if not mesh.closed and set(want) & {"D", "Dprime"}:
        raise OperatorError("double-layer operators are not defined on an open arc")
    n = mesh.n
    h = mesh.lengths
    kappa_h = float(np.max(np.abs(mesh.curvature) * h))
    q_far = quad.far_order_for(0.0 if laplace_R0 is not None else k, float(h.max()), kappa_h)
    out = _far_field(mesh, k, laplace_R0, q_far, want)

    mids = mesh.midpoints
    dist = np.hypot(mids[:, None, 0] - mids[None, :, 0], mids[:, None, 1] - mids[None, :, 1])
    hmax = np.maximum(h[:, None], h[None, :])
    close = dist < _FAR_RATIO * hmax
    for name in want:
        out[name][close] = 0.0

    planner = _Planner(mesh)
    panels = [
        _Panel(int(a), float(s0), float(s1), float(L))
        for a, s0, s1, L in zip(mesh.arc_id, mesh.s_start, mesh.s_end, h)
    ]
    plan = dist < _PLAN_RATIO * hmax
    planner.near.extend(*np.nonzero(close & ~plan), mesh)
    for i, j in zip(*np.nonzero(plan)):
        if i == j:
            planner.coincident.add(i, j, panels[i], panels[j])
        else:
            planner.add_pair(i, j, panels[i], panels[j])

    p = quad.grading
    qs = quad.singular_order
    rules = (
        (planner.coincident, coincident_rule(qs, p)),
        (planner.touching, touching_rule(qs, p)),
        (planner.near, tensor_rule(quad.near_order)),
    )
    for batch, rule in rules:
        _integrate_batch(batch, rule, mesh.arcs, k, laplace_R0, want, out)

    # same straight side: (x - y) is tangent, so the double layer vanishes identically
    straight = np.array([arc.straight for arc in mesh.arcs])[mesh.arc_id]
    same_side = (mesh.arc_id[:, None] == mesh.arc_id[None, :]) & straight[:, None]
    scale = 1.0 / np.sqrt(np.outer(h, h))
    for name in want:
        out[name] *= scale
        if name != "S":
            out[name][same_side] = 0.0
    return out


def rank_one_T(mesh: BoundaryMesh) -> np.ndarray:
    root = np.sqrt(mesh.lengths)
    return np.outer(root, root).astype(complex)


def combine_A(S: np.ndarray, D: np.ndarray, eta: float) -> np.ndarray:
    """``I + D - i eta S``."""
    return np.eye(S.shape[0]) + D - 1j * eta * S


def combine_A0(D0: np.ndarray, T: np.ndarray, c0: float) -> np.ndarray:
    """``I + D0 + i c0 T``."""
    return np.eye(D0.shape[0]) + D0 + 1j * c0 * T


def assemble(kind: OperatorKind, mesh: BoundaryMesh, quad: QuadratureConfig | None = None) -> GalerkinMatrix:
    """Galerkin matrix of one operator on ``mesh``."""
    quad = quad or QuadratureConfig()
    name = kind.name
    if not mesh.closed and name in _NEEDS_CLOSED:
        raise OperatorError(f"{name} is only supported on closed boundaries")
    if name == "T":
        entries = rank_one_T(mesh)
    elif name in ("S", "D", "Dprime"):
        entries = assemble_layers(mesh, kind.k, quad, want=(name,))[name]
    elif name in ("A", "Aprime"):
        layer = "D" if name == "A" else "Dprime"
        lay = assemble_layers(mesh, kind.k, quad, want=("S", layer))
        entries = combine_A(lay["S"], lay[layer], kind.eta)
    elif name == "S0":
        entries = assemble_layers(mesh, 0.0, quad, want=("S",), laplace_R0=kind.R0)["S"]
    elif name == "D0":
        entries = assemble_layers(mesh, 0.0, quad, want=("D",), laplace_R0=kind.R0)["D"]
    else:  # A0
        d0 = assemble_layers(mesh, 0.0, quad, want=("D",), laplace_R0=kind.R0)["D"]
        entries = combine_A0(d0, rank_one_T(mesh), kind.c0)
    if not np.all(np.isfinite(entries)):
        raise OperatorError("non-finite Galerkin entries")
    return GalerkinMatrix(kind, mesh_id(mesh), entries, quad)


def assemble_laplace_limit(
    mesh: BoundaryMesh,
    eta_rule,
    k_sequence,
    c0: float,
    R0: float = 1.0,
    quad: QuadratureConfig | None = None,
) -> list[float]:
    """Spectral norms ``||A_{k, eta_rule(k)} - A0||`` over ``k_sequence``.

    ``R0`` does not affect ``A0`` (the double layer has no length scale); it is
    accepted so callers can pass the same geometry constants everywhere.
    """
    quad = quad or QuadratureConfig()
    a0 = combine_A0(assemble_layers(mesh, 0.0, quad, want=("D",), laplace_R0=R0)["D"], rank_one_T(mesh), c0)
    diffs = []
    for k in k_sequence:
        lay = assemble_layers(mesh, k, quad, want=("S", "D"))
        a = combine_A(lay["S"], lay["D"], eta_rule(k))
        diffs.append(float(np.linalg.norm(a - a0, 2)))
    return diffs


def save_matrix(path, matrix: GalerkinMatrix | np.ndarray, comment: str = "") -> None:
    """Write a dense complex matrix in Matrix Market ``array complex general`` format."""
    entries = matrix.entries if isinstance(matrix, GalerkinMatrix) else np.asarray(matrix)
    if isinstance(matrix, GalerkinMatrix) and not comment:
        kd = matrix.kind
        comment = f"kind={kd.name} k={kd.k!r} eta={kd.eta!r} mesh={matrix.mesh_id}"
    spio.mmwrite(str(Path(path)), entries.astype(complex), comment=comment, precision=17)


def load_matrix(path) -> np.ndarray:
    return np.asarray(spio.mmread(str(Path(path))))
