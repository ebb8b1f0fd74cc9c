"""Even Mathieu functions and the bouncing-ball Dirichlet eigenmodes of an ellipse.

Elliptic coordinates: ``x1 = a cosh(mu) cos(nu)``, ``x2 = a sinh(mu) sin(nu)``
with focal distance ``a = sqrt(a1^2 - a2^2)``; the boundary is ``mu = mu0``.
A mode ``u = Mc0(mu) ce0(nu)`` solves ``Delta u + k^2 u = 0`` with
``q = (k a / 2)^2``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg, optimize, special
from scipy.integrate import solve_ivp

from .quadrature import gauss01

_TAIL_TOL = 1e-14
_ODE_RTOL = 1e-12
_ODE_ATOL = 1e-14
_ZERO_GRID = 4001


class ModeSearchError(RuntimeError):
    """Raised when no bracket for the requested radial zero count is found."""


@dataclass(frozen=True)
class EllipseGeom:
    a1: float
    a2: float

    def __post_init__(self):
        if not (self.a1 > self.a2 > 0):
            raise ValueError("need a1 > a2 > 0")

    @property
    def a(self) -> float:
        return float(np.sqrt(self.a1**2 - self.a2**2))

    @property
    def eccentricity(self) -> float:
        return self.a / self.a1

    @property
    def mu0(self) -> float:
        return float(np.arctanh(self.a2 / self.a1))

    def q_from_k(self, k: float) -> float:
        return 0.25 * (k * self.a) ** 2

    def k_from_q(self, q: float) -> float:
        return 2.0 * np.sqrt(q) / self.a


@dataclass(frozen=True)
class CE0Solution:
    """``ce0(nu, q) = sum_r A_{2r} cos(2 r nu)``, normalised so its mean square over a period is 1/2."""

    q: float
    a0: float
    coeffs: np.ndarray
    truncation: int


def _ce0_matrix_eig(q: float, size: int):
    # cosine recurrence, symmetrised with B0 = sqrt(2) A0
    diag = (2.0 * np.arange(size)) ** 2
    off = np.full(size - 1, float(q))
    off[0] = np.sqrt(2.0) * q
    w, v = linalg.eigh_tridiagonal(diag, off, select="i", select_range=(0, 0))
    b = v[:, 0].copy()
    b[0] /= np.sqrt(2.0)
    return float(w[0]), b


def ce0_eigen(q: float) -> CE0Solution:
    """Lowest even pi-periodic Mathieu eigenpair ``(a0(q), ce0)`` from the tridiagonal cosine recurrence."""
    if q < 0:
        raise ValueError("q must be non-negative")
    if q == 0:
        return CE0Solution(0.0, 0.0, np.array([1.0 / np.sqrt(2.0)]), 1)
    size = int(max(24, 2 * np.sqrt(q) + 40))
    while True:
        a0, coeffs = _ce0_matrix_eig(q, size)
        amax = np.abs(coeffs).max()
        tail = np.abs(coeffs[-3:]).max()
        if tail < _TAIL_TOL * amax:
            break
        size *= 2
    # trim trailing negligible terms, keep sign with ce0(pi/2) > 0
    keep = int(np.nonzero(np.abs(coeffs) >= 1e-17 * amax)[0].max()) + 1
    coeffs = coeffs[:keep]
    if ce0_eval_coeffs(np.pi / 2, coeffs) < 0:
        coeffs = -coeffs
    norm = np.sqrt(2 * coeffs[0] ** 2 + np.sum(coeffs[1:] ** 2))
    return CE0Solution(float(q), a0, coeffs / norm, size)


def ce0_eval_coeffs(nu, coeffs):
    nu = np.asarray(nu, dtype=float)
    r = np.arange(len(coeffs))
    return np.cos(2.0 * np.multiply.outer(nu, r)) @ coeffs


def ce0_eval(nu, sol: CE0Solution):
    """Evaluate ``ce0(nu, q)`` from its cosine series."""
    return ce0_eval_coeffs(nu, sol.coeffs)


def ce0_deriv2(nu, sol: CE0Solution):
    r = np.arange(len(sol.coeffs))
    return -np.cos(2.0 * np.multiply.outer(np.asarray(nu, dtype=float), r)) @ (4.0 * r**2 * sol.coeffs)


def _radial_ode(q, a0):
    def rhs(mu, y):
        return [y[1], (a0 - 2.0 * q * np.cosh(2.0 * mu)) * y[0]]

    return rhs


def radial_solution(sol: CE0Solution, mu_max: float):
    """Dense ODE solution of ``M'' = (a0 - 2q cosh 2mu) M`` with ``M(0) = 1``, ``M'(0) = 0``."""
    return solve_ivp(
        _radial_ode(sol.q, sol.a0),
        (0.0, float(mu_max)),
        [1.0, 0.0],
        method="DOP853",
        rtol=_ODE_RTOL,
        atol=_ODE_ATOL,
        dense_output=True,
    )


def mc0_eval(mu, sol: CE0Solution):
    """Even radial solution ``Mc0(mu, q)`` normalised by ``Mc0(0) = 1``."""
    mu = np.abs(np.asarray(mu, dtype=float))
    top = float(mu.max()) if mu.size else 0.0
    if top == 0.0:
        return np.ones_like(mu)
    res = radial_solution(sol, top)
    return res.sol(mu)[0]


def mc0_bessel_series(mu, sol: CE0Solution):
    """Bessel-product series ``sum_l (-1)^l A_{2l} J_l(sqrt(q) e^-mu) J_l(sqrt(q) e^mu)``.

    Proportional to :func:`mc0_eval` (different normalisation); used as a cross-check.
    """
    mu = np.asarray(mu, dtype=float)
    h = np.sqrt(sol.q)
    ell = np.arange(len(sol.coeffs))
    sign = (-1.0) ** ell
    jm = special.jv(ell, h * np.exp(-mu)[..., None])
    jp = special.jv(ell, h * np.exp(mu)[..., None])
    return (sign * sol.coeffs * jm * jp).sum(axis=-1)


def radial_zero_count(sol: CE0Solution, mu0: float, res=None) -> int:
    """Number of sign changes of ``Mc0`` on the open interval ``(0, mu0)``."""
    res = res or radial_solution(sol, mu0)
    grid = np.linspace(0.0, mu0, _ZERO_GRID)[1:-1]
    vals = res.sol(grid)[0]
    return int(np.count_nonzero(np.signbit(vals[1:]) != np.signbit(vals[:-1])))


@dataclass
class ModeResult:
    """Bouncing-ball mode ``u_{m,0}``: ``m`` radial zeros, wavenumber ``k``."""

    m: int
    q: float
    k: float
    zero_count: int
    ce0: CE0Solution
    geom: EllipseGeom
    rho: dict = field(default_factory=dict)


def _boundary_value(geom: EllipseGeom, k: float):
    sol = ce0_eigen(geom.q_from_k(k))
    res = radial_solution(sol, geom.mu0)
    return float(res.y[0, -1]), sol, res


def find_qm(geom: EllipseGeom, m: int, k_step: float | None = None, k_max: float | None = None) -> ModeResult:
    """Locate ``q_m``: the Dirichlet root of ``Mc0(mu0, q)`` whose mode has ``m`` radial zeros.

    Scans ``k`` upward, halving the step whenever the zero count jumps by
    more than one, then polishes the bracket with Brent's method.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    mu0 = geom.mu0
    if k_step is None:
        k_step = min(0.5, 0.25 * np.pi / geom.a2)
    if k_max is None:
        k_max = (m + 2) * 2.0 * np.pi / geom.a2 + 50.0
    k_lo = k_step
    f_lo, sol, res = _boundary_value(geom, k_lo)
    count_lo = radial_zero_count(sol, mu0, res)
    if count_lo > m:
        raise ModeSearchError("initial k already past the requested mode")
    step = k_step
    while k_lo < k_max:
        k_hi = k_lo + step
        f_hi, sol, res = _boundary_value(geom, k_hi)
        count_hi = radial_zero_count(sol, mu0, res)
        if count_hi > count_lo + 1:
            step *= 0.5
            if step < 1e-8:
                raise ModeSearchError("zero count jumps; cannot bracket")
            continue
        if count_hi == m + 1 and count_lo == m and np.sign(f_lo) != np.sign(f_hi):
            k_root = optimize.brentq(lambda kk: _boundary_value(geom, kk)[0], k_lo, k_hi, xtol=1e-13, rtol=1e-14)
            q = geom.q_from_k(k_root)
            sol = ce0_eigen(q)
            # count on (0, mu0) with the boundary zero excluded
            inner = radial_zero_count(sol, mu0 * (1.0 - 1e-9))
            return ModeResult(m, q, k_root, inner, sol, geom)
        k_lo, f_lo, count_lo = k_hi, f_hi, count_hi
        step = k_step
    raise ModeSearchError(f"no bracket for m={m} below k={k_max}")


# -- localisation ---------------------------------------------------------------------------


def _composite_gauss(a: float, b: float, panels: int, order: int = 16):
    x, w = gauss01(order)
    edges = np.linspace(a, b, panels + 1)
    h = np.diff(edges)
    return (edges[:-1, None] + h[:, None] * x).ravel(), (h[:, None] * w).ravel()


def _rho_once(mode: ModeResult, nu0: float, panels: int) -> float:
    geom, sol = mode.geom, mode.ce0
    mu, wmu = _composite_gauss(0.0, geom.mu0, panels)
    M = mc0_eval(mu, sol)
    i0 = np.sum(wmu * M**2)
    i2 = np.sum(wmu * np.sinh(mu) ** 2 * M**2)

    def angular(upper):
        nu, wnu = _composite_gauss(0.0, upper, panels)
        c = ce0_eval(nu, sol)
        return np.sum(wnu * c**2), np.sum(wnu * np.sin(nu) ** 2 * c**2)

    j0_part, j2_part = angular(nu0)
    j0_full, j2_full = angular(np.pi / 2)
    part = i2 * j0_part + i0 * j2_part
    full = i2 * j0_full + i0 * j2_full
    return float(np.sqrt(part / full))


def localization_rho(geom: EllipseGeom, mode: ModeResult, nu0: float, rtol: float = 1e-6) -> float:
    """L2 fraction of the mode on ``{|nu| < nu0 or |pi - nu| < nu0}``, refined until ``rtol``-stable."""
    if not (0 < nu0 < np.pi / 2):
        raise ValueError("nu0 must lie in (0, pi/2)")
    if mode.geom != geom:
        raise ValueError("mode belongs to a different ellipse")
    panels = 32
    prev = _rho_once(mode, nu0, panels)
    for _ in range(6):
        panels *= 2
        cur = _rho_once(mode, nu0, panels)
        if abs(cur - prev) <= rtol * abs(cur):
            mode.rho[nu0] = cur
            return cur
        prev = cur
    mode.rho[nu0] = cur
    return cur


def localization_bound(geom: EllipseGeom, k: float, nu0: float) -> float:
    """Large-``m`` bound ``sqrt(2) pi e exp(-eps k a1 phi0 sin(phi0) / 4)`` with ``phi0 = pi/2 - nu0``."""
    phi0 = np.pi / 2 - nu0
    return float(
        np.sqrt(2.0) * np.pi * np.e * np.exp(-0.25 * geom.eccentricity * k * geom.a1 * phi0 * np.sin(phi0))
    )


def localization_rate(geom: EllipseGeom, nu0: float) -> float:
    """Decay rate in ``k`` of :func:`localization_bound`."""
    phi0 = np.pi / 2 - nu0
    return float(0.25 * geom.eccentricity * geom.a1 * phi0 * np.sin(phi0))


# -- mode fields -------------------------------------------------------------------------


def elliptic_coords(x1, x2, a: float):
    """``(mu, nu)`` with ``x1 + i x2 = a cosh(mu + i nu)``, ``mu >= 0``."""
    w = np.arccosh((np.asarray(x1) + 1j * np.asarray(x2)) / a)
    w = np.where(w.real < 0, -w, w)
    return w.real, w.imag


def mode_values(geom: EllipseGeom, mode: ModeResult, x1, x2):
    """``u_{m,0}`` at points (NaN outside the closed ellipse)."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    inside = (x1 / geom.a1) ** 2 + (x2 / geom.a2) ** 2 <= 1.0 + 1e-12
    mu, nu = elliptic_coords(x1, x2, geom.a)
    mu = np.minimum(mu, geom.mu0)
    out = np.full(x1.shape, np.nan)
    if np.any(inside):
        out[inside] = mc0_eval(mu[inside], mode.ce0) * ce0_eval(nu[inside], mode.ce0)
    return out


@dataclass
class ModeField:
    x1: np.ndarray
    x2: np.ndarray
    u: np.ndarray  # shape (len(x2), len(x1)); NaN outside the ellipse


def mode_field(geom: EllipseGeom, mode: ModeResult, nx: int = 201, ny: int = 101) -> ModeField:
    """Sample ``u_{m,0}`` on a Cartesian grid covering the bounding box of the ellipse."""
    x1 = np.linspace(-geom.a1, geom.a1, nx)
    x2 = np.linspace(-geom.a2, geom.a2, ny)
    X1, X2 = np.meshgrid(x1, x2)
    return ModeField(x1, x2, mode_values(geom, mode, X1, X2))


def write_field_csv(path, fld: ModeField) -> None:
    """Write ``x1,x2,u`` rows (points outside the ellipse omitted)."""
    path = Path(path)
    X1, X2 = np.meshgrid(fld.x1, fld.x2)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x1", "x2", "u"])
        for a, b, u in zip(X1.ravel(), X2.ravel(), fld.u.ravel()):
            if np.isfinite(u):
                writer.writerow([repr(float(a)), repr(float(b)), repr(float(u))])
