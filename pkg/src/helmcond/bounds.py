"""Closed-form bounds on the layer-potential norms and coupling-parameter rules."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .geometry import StarlikeParams
from .specfun import EULER_GAMMA

ETA_STRATEGIES = ("eta_k", "eta_k23", "eta_star_2d", "kress_2d", "kress_3d_maxrule")
_NEEDS_R0 = {"eta_star_2d", "kress_3d_maxrule"}


@dataclass(frozen=True)
class EtaStrategy:
    """A named coupling-parameter rule ``k -> eta``; some rules need a length scale ``R0``.

    ``log_branch_max_k`` only affects ``eta_star_2d``: by default the
    logarithmic branch is used for ``k R0 <= 1``; setting it uses that branch
    for ``k <= log_branch_max_k`` instead.
    """

    name: str
    R0: float | None = None
    log_branch_max_k: float | None = None

    def __post_init__(self):
        if self.name not in ETA_STRATEGIES:
            raise ValueError(f"unknown eta strategy {self.name!r}; choose from {ETA_STRATEGIES}")
        if self.name in _NEEDS_R0 and not (self.R0 is not None and self.R0 > 0):
            raise ValueError(f"strategy {self.name} needs R0 > 0")

    def __call__(self, k: float) -> float:
        return eta(self, k)


def eta(strategy: EtaStrategy | str, k: float, R0: float | None = None) -> float:
    """Coupling parameter for wavenumber ``k`` under ``strategy``."""
    if isinstance(strategy, str):
        strategy = EtaStrategy(strategy, R0)
    if not k > 0:
        raise ValueError("k must be positive")
    name = strategy.name
    if name == "eta_k":
        return float(k)
    if name == "eta_k23":
        return float(k ** (2.0 / 3.0))
    if name == "eta_star_2d":
        kr = k * strategy.R0
        cap = strategy.log_branch_max_k
        use_log = kr <= 1.0 if cap is None else k <= cap
        return float(1.0 / (strategy.R0 * (1.0 - np.log(kr)))) if use_log else float(k)
    if name == "kress_2d":
        return float((np.pi**2 + 4.0 * (np.log(k / 2.0) + EULER_GAMMA) ** 2) ** -0.5)
    return float(max(1.0 / (2.0 * strategy.R0), k))


def laplace_c0(strategy: EtaStrategy | str, R0: float, log_factor: float = 1.0 / np.pi) -> float:
    """``lim_{k->0} eta(k) * log_factor * log(k R0)`` for a 2D strategy.

    With the factor-2 kernels used here, ``S_k - S_0`` behaves like
    ``-(1/pi) log(k R0) T`` as ``k -> 0``, so the default ``log_factor = 1/pi``
    gives the coefficient for which ``A_{k,eta} -> I + D0 + i c0 T``. Passing
    ``log_factor = 1/(2 pi)`` evaluates the same limit with a ``1/(2 pi)``
    prefactor.
    """
    name = strategy.name if isinstance(strategy, EtaStrategy) else strategy
    if name == "eta_star_2d":
        # eta log(kR0) = log(kR0) / (R0 (1 - log kR0)) -> -1/R0
        return -log_factor / R0
    if name == "kress_2d":
        # eta ~ 1/(2|log k|)
        return -0.5 * log_factor
    if name in ("eta_k", "eta_k23"):
        return 0.0
    raise ValueError(f"strategy {name} has no finite low-k limit in 2D")


@dataclass(frozen=True)
class BoundValue:
    name: str
    value: float
    validity: str = "all k > 0"


def bound_B(params: StarlikeParams, k: float, eta_value: float, d: int | None = None) -> BoundValue:
    """Upper bound on ``||A_{k,eta}^{-1}||`` for starlike scatterers."""
    if eta_value == 0:
        raise ValueError("eta must be non-zero")
    d = params.d if d is None else d
    R0, dm, dp, ds = params.R0, params.delta_minus, params.delta_plus, params.delta_star
    e = abs(eta_value)
    first = dp / dm + 4.0 * ds**2 / dm**2
    second = dp / dm * (k**2 / e**2 + 1.0) + (d - 2) / (dm * e) + ds**2 / dm**2
    tail = (1.0 + 2.0 * k * R0) ** 2 / (2.0 * dm**2 * e**2)
    return BoundValue("B", float(0.5 + np.sqrt(first * second + tail)))


def bound_B0(R0: float, k: float, eta_value: float, d: int = 2) -> BoundValue:
    """:func:`bound_B` for a circle or sphere of radius ``R0``."""
    e = abs(eta_value)
    inner = 1.0 + k**2 / e**2 + (d - 2) / (R0 * e) + (1.0 + 2.0 * k * R0) ** 2 / (2.0 * R0**2 * e**2)
    return BoundValue("B0", float(0.5 + np.sqrt(inner)))


def bound_theta(theta: float) -> float:
    """Bound ``1/2 + theta (4 + 13 theta + 4 theta^2)^{1/2}`` with ``theta = R0 / delta_-``."""
    if theta < 1:
        raise ValueError("theta must be >= 1")
    return float(0.5 + theta * np.sqrt(4.0 + 13.0 * theta + 4.0 * theta**2))


class CrackBounds(NamedTuple):
    lower: float
    upper: float


def crack_S_bounds(a: float, k: float) -> CrackBounds:
    """Leading-order lower and rigorous upper bound on ``||S_k||`` for a straight segment of length ``a``."""
    if not (a > 0 and k > 0):
        raise ValueError("a and k must be positive")
    base = float(np.sqrt(a / (np.pi * k)))
    return CrackBounds(base, 2.0 * base)


def curvature_S_lower(R: float, k: float) -> float:
    """Leading-order lower bound on ``||S_k||`` from a point with radius of curvature ``R``."""
    if not (R > 0 and k > 0):
        raise ValueError("R and k must be positive")
    return float(0.5 * (R / np.pi) ** (1.0 / 3.0) * (2.0 * k) ** (-2.0 / 3.0))


def line_A_lower(a: float, k: float, eta_value: float) -> float:
    """Lower bound on ``||A_{k,eta}||`` from a straight piece of length ``a``, clamped at 0."""
    if not (a > 0 and k > 0):
        raise ValueError("a and k must be positive")
    return float(max(abs(eta_value) * np.sqrt(a / (np.pi * k)) - 1.0, 0.0))


# Growth/decay rates whose constants are not known. Keys are report columns,
# values the exponent of k (or a note) and the geometric hypothesis.
RATE_ANNOTATIONS = {
    "lipschitz": {
        "norm_S": ("k^-1/2", "upper, any Lipschitz boundary"),
        "norm_D": ("k^1/2", "upper, any Lipschitz boundary"),
    },
    "straight_piece": {"norm_S": ("k^-1/2", "lower, boundary contains a segment")},
    "convex_curved_piece": {"norm_S": ("k^-2/3", "lower, C^2 piece with non-zero curvature")},
    "inflection": {"norm_D": ("k^1/4", "lower, tangent line meets the boundary again")},
    "parallel_walls": {"norm_Ainv": ("k^9/10", "lower along k = m pi / (2a), eta <= C k")},
    "elliptic_walls": {"norm_Ainv": ("exp(gamma k)", "lower along bouncing-ball wavenumbers")},
}

SHAPE_RATES = {
    "circle": ("lipschitz", "convex_curved_piece"),
    "ellipse": ("lipschitz", "convex_curved_piece"),
    "kite": ("lipschitz", "convex_curved_piece", "inflection"),
    "crack": ("lipschitz", "straight_piece"),
    "square": ("lipschitz", "straight_piece"),
    "rectangle": ("lipschitz", "straight_piece"),
    "rect_cavity": ("lipschitz", "straight_piece", "parallel_walls"),
    "elliptic_cavity": ("lipschitz", "convex_curved_piece", "elliptic_walls"),
}


def rate_annotations(shape_kind: str) -> dict[str, list[str]]:
    """Exponent annotations applicable to a catalogue shape, keyed by report column."""
    out: dict[str, list[str]] = {}
    for group in SHAPE_RATES.get(shape_kind, ()):
        for column, (rate, note) in RATE_ANNOTATIONS[group].items():
            out.setdefault(column, []).append(f"{rate} ({note})")
    return out
