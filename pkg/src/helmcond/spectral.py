"""Matrix norms, inverse norms and the unit-circle Fourier reference."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special
from scipy.sparse.linalg import LinearOperator, eigsh, svds

from .operators import GalerkinMatrix
from .quadrature import gauss01

DENSE_SVD_LIMIT = 4000
NEAR_SINGULAR_RTOL = 1e-13
ITERATIVE_TOL = 1e-9


class SingularMatrixError(ArithmeticError):
    """Raised when a matrix is exactly singular and has no inverse norm."""


def _entries(M) -> np.ndarray:
    return M.entries if isinstance(M, GalerkinMatrix) else np.asarray(M)


def singular_extremes(M) -> tuple[float, float]:
    """Largest and smallest singular value of a square matrix."""
    A = _entries(M)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    n = A.shape[0]
    if n <= DENSE_SVD_LIMIT:
        s = linalg.svdvals(A)
        return float(s[0]), float(s[-1])
    smax = float(svds(A, k=1, which="LM", tol=ITERATIVE_TOL, return_singular_vectors=False)[0])
    try:
        lu = linalg.lu_factor(A, check_finite=False)
    except linalg.LinAlgError as exc:  # pragma: no cover - exact singularity
        raise SingularMatrixError(str(exc)) from exc
    if np.any(np.diag(lu[0]) == 0):
        return smax, 0.0

    def inv_normal(v):
        # (A^H A)^{-1} v = A^{-1} A^{-H} v
        w = linalg.lu_solve(lu, v, trans=2, check_finite=False)
        return linalg.lu_solve(lu, w, check_finite=False)

    op = LinearOperator((n, n), matvec=inv_normal, dtype=complex)
    lam = eigsh(op, k=1, which="LM", tol=ITERATIVE_TOL, return_eigenvectors=False)[0]
    return smax, float(1.0 / np.sqrt(lam.real))


def op_norm(M) -> float:
    """Spectral norm (largest singular value)."""
    return singular_extremes(M)[0]


def inv_norm(M) -> float:
    """``1/sigma_min``; raises :class:`SingularMatrixError` if ``sigma_min == 0``."""
    smax, smin = singular_extremes(M)
    if smin == 0.0:
        raise SingularMatrixError("matrix is singular")
    return 1.0 / smin


def near_singular(smax: float, smin: float) -> bool:
    return smin < NEAR_SINGULAR_RTOL * smax


@dataclass
class NormReport:
    """Norms of S, D and A for one (shape, k, eta) run.

    ``norm_S`` or ``norm_D`` may be None when not requested; ``norm_A`` and
    ``norm_Ainv`` are None for runs without a combined operator (the crack).
    """

    shape: str
    k: float
    eta_strategy: str | None
    eta: float | None
    n: int
    norm_S: float | None = None
    norm_D: float | None = None
    norm_A: float | None = None
    norm_Ainv: float | None = None
    flags: tuple = ()
    eoc: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)

    @property
    def cond(self) -> float | None:
        if self.norm_A is None or self.norm_Ainv is None:
            return None
        return self.norm_A * self.norm_Ainv

    def as_dict(self) -> dict:
        out = {
            "shape": self.shape,
            "k": self.k,
            "eta_strategy": self.eta_strategy,
            "eta": self.eta,
            "N": self.n,
            "norm_S": self.norm_S,
            "norm_D": self.norm_D,
            "norm_A": self.norm_A,
            "norm_Ainv": self.norm_Ainv,
            "cond": self.cond,
        }
        out.update({f"p_{key}": val for key, val in self.eoc.items()})
        out.update(self.bounds)
        out["flags"] = ";".join(self.flags)
        return out


def combined_report(shape, k, eta_strategy, eta, S, D, A) -> NormReport:
    """Build a :class:`NormReport` from the three matrices, flagging near-singular A."""
    smax, smin = singular_extremes(A)
    flags = []
    if near_singular(smax, smin):
        flags.append("near_singular")
    return NormReport(
        shape=shape,
        k=k,
        eta_strategy=eta_strategy,
        eta=eta,
        n=_entries(A).shape[0],
        norm_S=op_norm(S) if S is not None else None,
        norm_D=op_norm(D) if D is not None else None,
        norm_A=smax,
        norm_Ainv=(1.0 / smin) if smin > 0 else float("inf"),
        flags=tuple(flags),
    )


def eoc_p(k1: float, v1: float, k2: float, v2: float) -> float:
    """Empirical growth exponent ``log(v2/v1) / log(k2/k1)``."""
    if k1 == k2:
        raise ValueError("eoc_p needs two distinct wavenumbers")
    if not (v1 > 0 and v2 > 0 and k1 > 0 and k2 > 0):
        raise ValueError("eoc_p needs positive wavenumbers and values")
    return float(np.log(v2 / v1) / np.log(k2 / k1))


# -- unit circle -------------------------------------------------------------------------


@dataclass(frozen=True)
class CircleReference:
    """Fourier-mode eigenvalues of S, D and A on the unit circle for ``n = 0..n_max``.

    Modes ``n`` and ``-n`` share the same eigenvalue.
    """

    k: float
    eta: float
    orders: np.ndarray
    eig_S: np.ndarray
    eig_D: np.ndarray
    eig_A: np.ndarray
    truncated: bool

    @property
    def sup(self) -> float:
        return float(np.abs(self.eig_A).max())

    @property
    def inf(self) -> float:
        return float(np.abs(self.eig_A).min())

    @property
    def norm_A(self) -> float:
        return self.sup

    @property
    def norm_Ainv(self) -> float:
        return 1.0 / self.inf

    @property
    def norm_S(self) -> float:
        return float(np.abs(self.eig_S).max())

    @property
    def norm_D(self) -> float:
        return float(np.abs(self.eig_D).max())


def _angle_rule(n_max: int, order: int, levels: int = 48):
    """Composite Gauss on (0, pi], geometric toward the logarithmic point 0."""
    x, w = gauss01(order)
    panels = max(16, 2 * n_max)
    edges = np.linspace(0.0, np.pi, panels + 1)
    first = edges[1] * 0.5 ** np.arange(levels + 1)[::-1]
    edges = np.concatenate([first, edges[2:]])
    a, b = edges[:-1], edges[1:]
    nodes = (a[:, None] + (b - a)[:, None] * x[None, :]).ravel()
    weights = ((b - a)[:, None] * w[None, :]).ravel()
    return nodes, weights


def circle_fourier_reference(k: float, eta: float, n_max: int | None = None, order: int = 20) -> CircleReference:
    """Eigenvalues of the circle operators on ``e^{i n theta}`` by periodic quadrature.

    On the unit circle the kernels depend only on ``phi = theta_x - theta_y``,
    with ``|x - y| = 2 sin(phi/2)`` and ``(x - y).n_y = -|x - y|^2 / 2``, so
    each eigenvalue is ``2 int_0^pi K(phi) cos(n phi) dphi``.
    """
    if not k > 0:
        raise ValueError("k must be positive")
    if n_max is None:
        n_max = int(np.ceil(k)) + 40
    phi, w = _angle_rule(n_max, order)
    r = 2.0 * np.sin(0.5 * phi)
    kr = k * r
    k_s = 0.5j * special.j0(kr) - 0.5 * special.y0(kr)
    k_d = 0.5j * k * (special.j1(kr) + 1j * special.y1(kr)) * (-0.5 * r)
    orders = np.arange(n_max + 1)
    basis = 2.0 * np.cos(np.outer(orders, phi)) * w
    eig_S = basis @ k_s
    eig_D = basis @ k_d
    eig_A = 1.0 + eig_D - 1j * eta * eig_S
    mags = np.abs(eig_A)
    truncated = bool(mags.argmax() == n_max)
    return CircleReference(k, eta, orders, eig_S, eig_D, eig_A, truncated)
