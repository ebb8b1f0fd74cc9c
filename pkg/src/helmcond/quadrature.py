"""Quadrature rules on the unit square for element-pair Galerkin integrals.

Each rule is a fixed node set ``(sigma, tau, weight)`` on ``[0, 1]^2``; the
geometry enters only through the integrand. ``sigma`` parameterises the test
element, ``tau`` the trial element.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class QuadratureConfig:
    """Orders for the element-pair rules.

    far_order
        Tensor Gauss order for well-separated pairs; raised to
        ``ceil(3 + k h)`` when elements are long compared to the wavelength
        and to ``4 + ceil(3 kappa h)`` on strongly curved elements.
    near_order
        Tensor Gauss order for close, non-touching pairs.
    singular_order
        Order of the Duffy-type rules for coincident and touching pairs.
    grading
        Polynomial grading exponent toward the singular point.
    target
        Intended per-entry accuracy (relative to the largest entry).
    """

    far_order: int = 4
    near_order: int = 10
    singular_order: int = 12
    grading: int = 4
    target: float = 1e-8

    def __post_init__(self):
        if min(self.far_order, self.near_order, self.singular_order) < 2:
            raise ValueError("quadrature orders must be >= 2")
        if self.grading < 1:
            raise ValueError("grading exponent must be >= 1")
        if not self.target > 0:
            raise ValueError("target tolerance must be positive")

    def doubled(self) -> "QuadratureConfig":
        return replace(
            self,
            far_order=2 * self.far_order,
            near_order=2 * self.near_order,
            singular_order=2 * self.singular_order,
        )

    def far_order_for(self, k: float, h: float, kappa_h: float = 0.0) -> int:
        return max(self.far_order, int(np.ceil(3 + k * h)), 4 + int(np.ceil(3 * kappa_h)))


@lru_cache(maxsize=None)
def gauss01(q: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(q)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def tensor_rule(q: int):
    x, w = gauss01(q)
    s, t = np.meshgrid(x, x, indexing="ij")
    return s.ravel(), t.ravel(), np.outer(w, w).ravel()


# geometric panels toward the singular end of the radial variable: ratio and
# count; the innermost panel [0, ratio^levels] keeps the polynomial grading
_GEOM_RATIO = 0.15
_GEOM_LEVELS = 4


@lru_cache(maxsize=None)
def radial_rule(q: int, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights on ``[0, 1]`` for integrands with a ``log`` singularity at 0."""
    x, w = gauss01(q)
    edges = _GEOM_RATIO ** np.arange(_GEOM_LEVELS, -1, -1.0)
    a, b = edges[:-1], edges[1:]
    nodes = [edges[0] * x**p]
    weights = [edges[0] * w * p * x ** (p - 1)]
    nodes.append((a[:, None] + (b - a)[:, None] * x).ravel())
    weights.append(((b - a)[:, None] * w).ravel())
    return np.concatenate(nodes), np.concatenate(weights)


@lru_cache(maxsize=None)
def coincident_rule(q: int, p: int):
    """Both elements identical; the singularity lies on the diagonal ``sigma = tau``."""
    x, w = gauss01(q)
    d, wd = radial_rule(q, p)
    # sigma in [d, 1]
    sig = d[:, None] + (1.0 - d[:, None]) * x[None, :]
    wts = (wd * (1.0 - d))[:, None] * w[None, :]
    sig = sig.ravel()
    wts = wts.ravel()
    tau = sig - np.repeat(d, q)
    return (
        np.concatenate([sig, tau]),
        np.concatenate([tau, sig]),
        np.concatenate([wts, wts]),
    )


@lru_cache(maxsize=None)
def touching_rule(q: int, p: int):
    """Elements sharing the vertex at ``sigma = tau = 0`` (Duffy split of the square)."""
    x, w = gauss01(q)
    u, wu = radial_rule(q, p)
    wu = wu * u  # Duffy Jacobian
    uu = np.repeat(u, q)
    vv = np.tile(x, len(u))
    ww = np.outer(wu, w).ravel()
    return (
        np.concatenate([uu, uu * vv]),
        np.concatenate([uu * vv, uu]),
        np.concatenate([ww, ww]),
    )
