"""Airy function and normalized Laguerre functions.

The Laguerre functions

    psi_k^a(x) = sqrt(k! / Gamma(k+a+1)) x^(a/2) exp(-x/2) L_k^a(x)

form an orthonormal basis of L^2(0, inf).  They are evaluated by the
normalized three-term recurrence with a running logarithmic scale, so that
neither the factorial ratio nor the exponential weight is ever formed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special as sps

from .errors import DomainError, RangeError

__all__ = [
    "AiryValue",
    "LaguerreEval",
    "airy",
    "airy_primitive",
    "laguerre_psi",
    "laguerre_psi_table",
    "phi_edge",
    "phi_prefactor",
]

AIRY_WINDOW = (-40.0, 200.0)
_GL_X, _GL_W = leggauss(32)


@dataclass(frozen=True)
class AiryValue:
    """``Ai`` and ``Ai'`` at one or more points."""

    ai: np.ndarray | float
    ai_prime: np.ndarray | float


@dataclass(frozen=True)
class LaguerreEval:
    k: int
    alpha: float
    value: np.ndarray | float


def _check_window(x):
    x = np.asarray(x, dtype=float)
    lo, hi = AIRY_WINDOW
    if np.any(~np.isfinite(x)) or np.any(x < lo) or np.any(x > hi):
        raise RangeError(f"argument outside the certified window [{lo}, {hi}]")
    return x


def airy(x) -> AiryValue:
    """Airy function of the first kind and its derivative.

    Parameters
    ----------
    x : float or array_like
        Points in ``[-40, 200]``.
    """
    x = _check_window(x)
    ai, aip, _, _ = sps.airy(x)
    if ai.ndim == 0:
        return AiryValue(float(ai), float(aip))
    return AiryValue(ai, aip)


def _gl_integral(f, a: float, b: float, width: float) -> float:
    n = max(1, int(np.ceil(abs(b - a) / width)))
    edges = np.linspace(a, b, n + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    t = mid[:, None] + half[:, None] * _GL_X
    return float(np.sum(half * (f(t) @ _GL_W)))


def _ai(t):
    return sps.airy(t)[0]


def airy_primitive(y):
    """``int_{-inf}^y Ai(t) dt``.

    For ``y >= 0`` this is ``1 - int_y^inf Ai``, with the decaying tail
    integrated on unit panels.  For ``y < 0`` it is ``2/3 - int_y^0 Ai``
    using ``int_{-inf}^0 Ai = 2/3``, with the oscillatory part on panels
    shorter than the local half-period.
    """
    y = _check_window(y)
    flat = np.atleast_1d(y).ravel()
    out = np.empty_like(flat)
    for i, v in enumerate(flat):
        if v >= 0:
            top = min(v + 40.0, AIRY_WINDOW[1])
            out[i] = 1.0 - _gl_integral(_ai, v, top, 1.0)
        else:
            out[i] = 2.0 / 3.0 - _gl_integral(_ai, v, 0.0, 0.5)
    return out.reshape(y.shape) if y.ndim else float(out[0])


def laguerre_psi_table(kmax: int, alpha: float, x) -> np.ndarray:
    """All normalized Laguerre functions ``psi_0^a .. psi_kmax^a`` at ``x``.

    Parameters
    ----------
    kmax : int
        Highest degree.
    alpha : float
        Parameter, ``alpha > -1``.  Use :func:`laguerre_psi` for ``alpha = -1``.
    x : array_like
        Non-negative points.

    Returns
    -------
    ndarray
        Shape ``(kmax + 1,) + x.shape``.
    """
    if alpha <= -1:
        raise DomainError("table requires alpha > -1")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(~np.isfinite(x)):
        raise DomainError("Laguerre functions need finite x >= 0")
    out = np.empty((kmax + 1,) + x.shape)
    # psi_0 = x^(a/2) e^(-x/2) / sqrt(Gamma(a+1)), kept as mantissa * exp(scale)
    with np.errstate(divide="ignore"):
        scale = sps.xlogy(0.5 * alpha, x) - 0.5 * x - 0.5 * sps.gammaln(alpha + 1.0)
    finite = np.isfinite(scale)
    scale = np.where(finite, scale, 0.0)
    prev = np.zeros_like(x)
    cur = np.where(finite, 1.0, 0.0)
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        out[0] = cur * np.exp(scale)
        for k in range(kmax):
            nxt = ((2 * k + alpha + 1 - x) * cur - np.sqrt(k * (k + alpha)) * prev) / np.sqrt(
                (k + 1) * (k + 1 + alpha)
            )
            prev, cur = cur, nxt
            big = np.maximum(np.abs(cur), np.abs(prev))
            rescale = (big > 1e100) | ((big < 1e-100) & (big > 0))
            if np.any(rescale):
                f = np.where(rescale, big, 1.0)
                cur = cur / f
                prev = prev / f
                scale = scale + np.log(f)
            out[k + 1] = cur * np.exp(scale)
    # alpha -> negative values give psi_0(0) = inf; keep that explicit
    if alpha < 0:
        out[:, x == 0] = np.inf
    return out


def laguerre_psi(k: int, alpha: float, x):
    """Normalized Laguerre function ``psi_k^alpha(x)``.

    ``alpha = -1`` is handled through ``psi_k^{-1} = -psi_{k-1}^{1}``
    (and ``psi_0^{-1} = 0``).
    """
    if k < 0 or alpha < -1:
        raise DomainError("need k >= 0 and alpha >= -1")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("Laguerre functions need x >= 0")
    if alpha == -1:
        val = np.zeros_like(x) if k == 0 else -laguerre_psi_table(k - 1, 1.0, x)[k - 1]
    else:
        val = laguerre_psi_table(k, alpha, x)[k]
    return val if val.ndim else float(val)


def phi_prefactor(n: int, alpha: float) -> float:
    """Common constant ``sqrt(sqrt(N (N + alpha)) / 2)`` of the edge functions."""
    return float(np.sqrt(np.sqrt(n * (n + alpha)) / 2.0))


def phi_edge(n: int, alpha: float, which: int, x):
    """Edge functions built from Laguerre functions of shifted parameter.

    ``which=1``: ``(-1)^N c psi_N^{alpha-1}(x) / sqrt(x)``;
    ``which=2``: ``(-1)^{N-1} c psi_{N-1}^{alpha+1}(x) / sqrt(x)``,
    with ``c = sqrt(sqrt(N(N+alpha))/2)``.  Both vanish for ``x < 0``.

    Raises
    ------
    DomainError
        At ``x = 0``, where the ``x**-1/2`` factor is singular; integrals
        touching 0 must use a substitution instead.
    """
    if n < 1:
        raise DomainError("need N >= 1")
    if which not in (1, 2):
        raise DomainError("which must be 1 or 2")
    if which == 1 and alpha < 0:
        raise DomainError("phi_1 needs alpha >= 0")
    x = np.asarray(x, dtype=float)
    if np.any(x == 0):
        raise DomainError("phi_edge is singular at x = 0")
    pos = x > 0
    xp = np.where(pos, x, 1.0)
    c = phi_prefactor(n, alpha)
    if which == 1:
        psi = np.asarray(laguerre_psi(n, alpha - 1.0, xp))
        val = (-1) ** n * c * psi / np.sqrt(xp)
    else:
        psi = laguerre_psi_table(n - 1, alpha + 1.0, xp)[n - 1]
        val = (-1) ** (n - 1) * c * psi / np.sqrt(xp)
    out = np.where(pos, val, 0.0)
    return out if out.ndim else float(out)
