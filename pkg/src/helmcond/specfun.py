"""Bessel and Hankel functions of real argument used by the layer-potential kernels.

Thin wrappers around the Cephes/AMOS routines in :mod:`scipy.special`, plus the
logarithmic split of ``Y0`` that the singular quadrature relies on.
"""

from __future__ import annotations

import numpy as np
from scipy import special

EULER_GAMMA = 0.57721566490153286061

# below this argument the Y0 regular part is summed from its ascending series
_Y0_SERIES_CUTOFF = 2.0
_Y0_SERIES_TERMS = 30


def bessel_j(n, x):
    """Bessel function of the first kind ``J_n(x)`` for integer ``n >= 0``."""
    return special.jv(n, x)


def bessel_y(n, x):
    """Bessel function of the second kind ``Y_n(x)`` for ``x > 0``."""
    return special.yv(n, x)


def hankel1(n: int, x):
    """Hankel function ``H_n^(1)(x) = J_n(x) + i Y_n(x)`` for ``n`` in {0, 1}.

    Raises
    ------
    ValueError
        If any argument is not strictly positive, or ``n`` is not 0 or 1.
    """
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError("hankel1 requires x > 0 (logarithmic singularity at 0)")
    if n == 0:
        out = special.j0(x) + 1j * special.y0(x)
    elif n == 1:
        out = special.j1(x) + 1j * special.y1(x)
    else:
        raise ValueError(f"hankel1 supports orders 0 and 1, got {n}")
    return out[()] if out.ndim == 0 else out


def y0_regular(x):
    """Analytic part of ``Y0``: ``Y0(x) - (2/pi) J0(x) log(x)``.

    Finite at ``x = 0`` where it equals ``(2/pi)(gamma - log 2)``.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < _Y0_SERIES_CUTOFF
    if np.any(small):
        xs = x[small]
        z = 0.25 * xs * xs
        term = np.ones_like(xs)
        harmonic = 0.0
        acc = np.zeros_like(xs)
        for m in range(1, _Y0_SERIES_TERMS):
            term = term * z / (m * m)
            harmonic += 1.0 / m
            acc += (-1) ** (m + 1) * harmonic * term
        out[small] = (2.0 / np.pi) * ((EULER_GAMMA - np.log(2.0)) * special.j0(xs) + acc)
    big = ~small
    if np.any(big):
        xb = x[big]
        out[big] = special.y0(xb) - (2.0 / np.pi) * special.j0(xb) * np.log(xb)
    return out[()] if out.ndim == 0 else out


def hankel0_log_split(x):
    """Split ``H0^(1)(x) = (2i/pi) J0(x) log(x) + regular(x)``; return ``regular``."""
    x = np.asarray(x, dtype=float)
    return special.j0(x) + 1j * y0_regular(x)
