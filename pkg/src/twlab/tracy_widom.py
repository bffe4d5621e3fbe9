"""Tracy–Widom distributions for beta = 1 and 2.

Two independent routes are provided.

* Painlevé II: the Hastings–McLeod solution ``q'' = s q + 2 q**3`` with
  ``q ~ Ai`` at ``+inf`` is integrated leftward from ``s = 8`` together with
  ``u = int_s q^2``, ``v = int_s (x-s) q^2`` and ``w = int_s q``.  Then
  ``F2 = exp(-v)`` and ``F1 = exp(-(v + w)/2)``.
* Fredholm determinants on Gauss–Legendre nodes: ``F2 = det(I - K_Airy)`` on
  ``[s, inf)`` and ``F1 = det(I - A_s)`` with ``A_s(x, y) = Ai(x + y + s)`` on
  ``[0, inf)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special as sps
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from .errors import DomainError, RangeError

__all__ = [
    "TWTable",
    "tw_cdf",
    "tw_pdf",
    "tw_quantile",
    "tw_table",
    "painleve_solution",
    "fredholm_tw1",
    "fredholm_tw2",
]

S_MIN, S_MAX = -10.0, 8.0
_S0 = 8.0


@dataclass(frozen=True)
class TWTable:
    """Distribution functions and densities on an ordered grid."""

    s_grid: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    pdf1: np.ndarray
    pdf2: np.ndarray


def _rhs(s, y):
    q, qp, u, v, w = y
    return [qp, s * q + 2 * q**3, -q * q, -u, -q]


@lru_cache(maxsize=1)
def painleve_solution():
    """Dense-output solution of the Hastings–McLeod system on ``[-10, 8]``.

    Returns a callable mapping ``s`` to the state ``(q, q', u, v, w)``.
    Initial data at ``s = 8`` come from the Airy function; the nonlinear term
    is ``O(Ai^3) ~ 1e-22`` there.
    """
    a, ap, _, _ = sps.airy(_S0)
    u0 = ap**2 - _S0 * a**2
    v0 = quad(lambda x: (x - _S0) * sps.airy(x)[0] ** 2, _S0, np.inf, epsabs=1e-30)[0]
    w0 = quad(lambda x: sps.airy(x)[0], _S0, np.inf, epsabs=1e-30)[0]
    sol = solve_ivp(
        _rhs,
        (_S0, S_MIN),
        [a, ap, u0, v0, w0],
        method="DOP853",
        rtol=1e-13,
        atol=1e-30,
        dense_output=True,
    )
    if sol.status != 0:
        raise RuntimeError("Painlevé integration failed: " + sol.message)
    return sol.sol


def _check(s, beta):
    if beta not in (1, 2):
        raise DomainError("beta must be 1 or 2")
    s = np.asarray(s, dtype=float)
    if np.any(~(s >= S_MIN)) or np.any(~(s <= S_MAX)):
        raise RangeError(f"s must lie in [{S_MIN}, {S_MAX}]")
    return s


def tw_cdf(s, beta: int = 2):
    """Tracy–Widom distribution function ``F_beta(s)`` for ``s`` in ``[-10, 8]``."""
    s = _check(s, beta)
    q, _, _, v, w = painleve_solution()(s.ravel())
    f = np.exp(-v) if beta == 2 else np.exp(-0.5 * (v + w))
    f = np.clip(f, 0.0, 1.0).reshape(s.shape)
    return f if f.ndim else float(f)


def tw_pdf(s, beta: int = 2):
    """Density ``F_beta'(s)``: ``F2 u`` for beta=2 and ``F1 (u + q)/2`` for beta=1."""
    s = _check(s, beta)
    q, _, u, v, w = painleve_solution()(s.ravel())
    if beta == 2:
        d = np.exp(-v) * u
    else:
        d = np.exp(-0.5 * (v + w)) * 0.5 * (u + q)
    d = d.reshape(s.shape)
    return d if d.ndim else float(d)


def tw_quantile(p, beta: int = 2):
    """Inverse distribution function by bracketed root finding."""
    if beta not in (1, 2):
        raise DomainError("beta must be 1 or 2")
    p_arr = np.asarray(p, dtype=float)
    if np.any(~(p_arr > 1e-6)) or np.any(~(p_arr < 1 - 1e-8)):
        raise DomainError("p must lie in (1e-6, 1 - 1e-8)")
    out = np.array(
        [brentq(lambda s, t=t: tw_cdf(s, beta) - t, S_MIN, S_MAX, xtol=1e-14, rtol=1e-14)
         for t in p_arr.ravel()]
    ).reshape(p_arr.shape)
    return out if out.ndim else float(out)


@lru_cache(maxsize=4)
def tw_table(step: float = 0.01, s_min: float = S_MIN, s_max: float = S_MAX) -> TWTable:
    """Tabulate both laws on a uniform grid (endpoints included)."""
    n = int(round((s_max - s_min) / step))
    s = np.round(s_min + step * np.arange(n + 1), 12)
    return TWTable(s, tw_cdf(s, 1), tw_cdf(s, 2), tw_pdf(s, 1), tw_pdf(s, 2))


def _nodes(m: int, shift: float):
    x, w = leggauss(m)
    th = np.pi * (x + 1) / 4
    z = shift + 10.0 * np.tan(th)
    dz = 10.0 * np.pi / 4 / np.cos(th) ** 2
    return z, w * dz


def fredholm_tw2(s: float, m: int = 64) -> float:
    """``det(I - K_Airy)`` on ``L^2(s, inf)`` by Nyström discretization."""
    z, w = _nodes(m, s)
    a, ap, _, _ = sps.airy(z)
    dz = z[:, None] - z[None, :]
    np.fill_diagonal(dz, 1.0)
    k = (a[:, None] * ap[None, :] - ap[:, None] * a[None, :]) / dz
    np.fill_diagonal(k, ap**2 - z * a**2)
    r = np.sqrt(w)
    return float(np.linalg.det(np.eye(m) - r[:, None] * k * r[None, :]))


def fredholm_tw1(s: float, m: int = 64) -> float:
    """``det(I - A_s)`` on ``L^2(0, inf)``, ``A_s(x, y) = Ai(x + y + s)``."""
    z, w = _nodes(m, 0.0)
    k = sps.airy(z[:, None] + z[None, :] + s)[0]
    r = np.sqrt(w)
    return float(np.linalg.det(np.eye(m) - r[:, None] * k * r[None, :]))
