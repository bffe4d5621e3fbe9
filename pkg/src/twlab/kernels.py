"""Laguerre correlation kernels, their soft-edge rescaling and Airy limits.

Coordinates for the finite-N kernels are those of ``N * lambda``, i.e. the
eigenvalues of ``W*W`` for a Gaussian matrix ``W`` with unit-variance
entries.  The unitary kernel is the Christoffel–Darboux sum

    K_{N,2}(x, y) = sum_{k<N} psi_k^a(x) psi_k^a(y),

and the orthogonal kernel (N even) adds a rank-one correction

    K_{N,1}(x, y) = K_{N,2}(x, y) + 1/2 phi_2(x) (sgn * phi_1)(y).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import AccuracyError, DomainError, UnsupportedError
from .special import airy, airy_primitive, laguerre_psi_table, phi_edge

__all__ = [
    "KernelContext",
    "KernelRateReport",
    "kernel_lue_sum",
    "kernel_lue_integral",
    "kernel_loe",
    "kernel_matrix",
    "sgn_convolution",
    "edge_kernel",
    "airy_kernel",
    "loe_limit_kernel",
    "kernel_rate_experiment",
    "phi_edge_error",
]

_ORDER = 64
_X64, _W64 = leggauss(64)
_X48, _W48 = leggauss(48)
# beyond this many edge units the phi envelope puts the integrand below 1e-12
_EDGE_CUTOFF = 14.0
_PANEL = 2.0


@dataclass(frozen=True)
class KernelContext:
    """Laguerre ensemble of size ``n`` with parameter ``alpha``.

    ``beta=2`` corresponds to ``M = N + alpha`` complex samples and
    ``beta=1`` to ``M = N + alpha + 1`` real samples.  The soft-edge
    constants use ``N- = N - 1/2`` and ``M- = M - 1/2``.
    """

    n: int
    alpha: float
    beta: int = 2
    m_rows: float = field(init=False)
    mu_tilde: float = field(init=False)
    sigma_tilde: float = field(init=False)

    def __post_init__(self):
        if self.beta not in (1, 2):
            raise DomainError("beta must be 1 or 2")
        if self.n < 1 or self.alpha < 0:
            raise DomainError("need N >= 1 and alpha >= 0")
        if self.beta == 1 and self.n % 2:
            raise UnsupportedError("the orthogonal kernel is implemented for even N only")
        m = self.n + self.alpha + (1 if self.beta == 1 else 0)
        nm, mm = np.sqrt(self.n - 0.5), np.sqrt(m - 0.5)
        object.__setattr__(self, "m_rows", float(m))
        object.__setattr__(self, "mu_tilde", float((mm + nm) ** 2))
        object.__setattr__(self, "sigma_tilde", float((mm + nm) * (1 / mm + 1 / nm) ** (1 / 3)))

    @classmethod
    def from_dims(cls, n: int, m: int, beta: int = 2) -> "KernelContext":
        """Context for an ``m x n`` data matrix of symmetry class ``beta``."""
        alpha = m - n - (1 if beta == 1 else 0)
        return cls(n, alpha, beta)

    def physical(self, x):
        """Map edge coordinates to ``N * lambda`` coordinates."""
        return self.mu_tilde + self.sigma_tilde * np.asarray(x, dtype=float)

    def psi(self, x) -> np.ndarray:
        """Rows ``psi_0 .. psi_{N-1}`` at ``x``."""
        return laguerre_psi_table(self.n - 1, self.alpha, x)

    def phi1(self, x):
        return phi_edge(self.n, self.alpha, 1, x)

    def phi2(self, x):
        return phi_edge(self.n, self.alpha, 2, x)

    @property
    def z_end(self) -> float:
        return self.mu_tilde + _EDGE_CUTOFF * self.sigma_tilde

    @cached_property
    def phi1_total(self) -> float:
        """``int_0^inf phi_1``."""
        return _integrate(self.phi1, 0.0, self.z_end)[0]


def _rule(lo: float, hi: float, nodes, weights):
    """Composite rule on ``[lo, hi]``; the panel touching 0 uses ``t = u**2``."""
    if hi <= lo:
        return np.empty(0), np.empty(0)
    ts, ws = [], []
    start = lo
    if lo < _PANEL:
        top = min(hi, _PANEL)
        ua, ub = np.sqrt(lo), np.sqrt(top)
        ue = np.linspace(ua, ub, 5)
        for a, b in zip(ue[:-1], ue[1:]):
            u = 0.5 * (a + b) + 0.5 * (b - a) * nodes
            ts.append(u * u)
            ws.append(0.5 * (b - a) * weights * 2 * u)
        start = top
    if hi > start:
        n = int(np.ceil((hi - start) / _PANEL))
        e = np.linspace(start, hi, n + 1)
        mid = 0.5 * (e[1:] + e[:-1])[:, None]
        half = 0.5 * np.diff(e)[:, None]
        ts.append((mid + half * nodes).ravel())
        ws.append((half * weights).ravel())
    return np.concatenate(ts), np.concatenate(ws)


def _integrate(f, lo: float, hi: float):
    """Integral with an embedded error estimate from two node counts."""
    t64, w64 = _rule(lo, hi, _X64, _W64)
    t48, w48 = _rule(lo, hi, _X48, _W48)
    i64 = float(f(t64) @ w64)
    i48 = float(f(t48) @ w48)
    return i64, abs(i64 - i48)


def _pairs(x, y):
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    if np.any(x < 0) or np.any(y < 0):
        raise DomainError("kernel arguments must be non-negative")
    return x, y


def kernel_lue_sum(ctx: KernelContext, x, y):
    """``K_{N,2}(x, y)`` by direct summation over Laguerre functions."""
    x, y = _pairs(x, y)
    val = np.einsum("k...,k...->...", ctx.psi(x), ctx.psi(y))
    return val if val.ndim else float(val)


def kernel_lue_integral(ctx: KernelContext, x, y, tol: float = 1e-9):
    """``K_{N,2}(x, y)`` from its integral representation

        int_0^inf phi_1(x+z) phi_2(y+z) + phi_2(x+z) phi_1(y+z) dz.

    Raises
    ------
    AccuracyError
        If the embedded error estimate exceeds ``tol * max(1, |K|)``.
    """
    x, y = _pairs(x, y)
    out = np.empty(x.shape)
    for idx in np.ndindex(x.shape):
        a, b = float(x[idx]), float(y[idx])
        lo = min(a, b)
        hi = max(ctx.z_end, lo + _PANEL)

        # integrate in t = min(x,y) + z so the u**2 substitution sits at t = 0
        def f(t, a=a, b=b, lo=lo):
            ta, tb = t + (a - lo), t + (b - lo)
            return ctx.phi1(ta) * ctx.phi2(tb) + ctx.phi2(ta) * ctx.phi1(tb)

        val, err = _integrate(f, lo, hi)
        if err > tol * max(1.0, abs(val)):
            raise AccuracyError(f"kernel quadrature reached only {err:.2e}", achieved=err)
        out[idx] = val
    return out if out.ndim else float(out)


def sgn_convolution(ctx: KernelContext, y):
    """``int_0^inf sgn(y - t) phi_1(t) dt``, equal to ``T - 2 int_y^inf phi_1``."""
    y = np.asarray(y, dtype=float)
    total = ctx.phi1_total
    out = np.empty(y.shape)
    for idx in np.ndindex(y.shape):
        v = float(y[idx])
        if v <= 0:
            out[idx] = -total
        elif v >= ctx.z_end:
            out[idx] = total
        else:
            out[idx] = total - 2.0 * _integrate(ctx.phi1, v, ctx.z_end)[0]
    return out if out.ndim else float(out)


def kernel_loe(ctx: KernelContext, x, y):
    """Orthogonal kernel ``K_{N,1}(x, y)`` for even N."""
    if ctx.beta != 1:
        raise DomainError("kernel_loe needs a beta=1 context")
    x, y = _pairs(x, y)
    p2 = np.where(x > 0, ctx.phi2(np.where(x > 0, x, 1.0)), 0.0)
    val = kernel_lue_sum(ctx, x, y) + 0.5 * p2 * sgn_convolution(ctx, y)
    return val if np.ndim(val) else float(val)


def kernel_matrix(ctx: KernelContext, xs, ys) -> np.ndarray:
    """Kernel of the context's class on the grid ``xs x ys`` (physical coordinates)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    k = ctx.psi(xs).T @ ctx.psi(ys)
    if ctx.beta == 1:
        k = k + 0.5 * np.outer(ctx.phi2(xs), sgn_convolution(ctx, ys))
    return k


def edge_kernel(ctx: KernelContext, x, y):
    """Edge-rescaled kernel ``sigma * K_{N,beta}(mu + sigma x, mu + sigma y)``."""
    px, py = ctx.physical(x), ctx.physical(y)
    if np.any(px < 0) or np.any(py < 0):
        raise DomainError("edge coordinates map below the hard edge")
    k = kernel_loe(ctx, px, py) if ctx.beta == 1 else kernel_lue_sum(ctx, px, py)
    return ctx.sigma_tilde * k


def airy_kernel(x, y):
    """Airy kernel ``(Ai(x)Ai'(y) - Ai'(x)Ai(y)) / (x - y)``.

    Within ``|x - y| <= 1e-4`` a second-order Taylor expansion about ``x``
    replaces the ratio, whose numerator cancels there.
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    if np.any(x < -40) or np.any(y < -40):
        raise DomainError("Airy kernel arguments must be >= -40")
    ax = airy(x)
    ay = airy(y)
    a, ap = np.asarray(ax.ai), np.asarray(ax.ai_prime)
    h = y - x
    near = np.abs(h) <= 1e-4
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (a * np.asarray(ay.ai_prime) - ap * np.asarray(ay.ai)) / (x - y)
    taylor = (ap**2 - x * a**2) - 0.5 * h * a**2 - h**2 / 6 * (a * ap + x**2 * a**2 - x * ap**2)
    val = np.where(near, taylor, ratio)
    return val if val.ndim else float(val)


def loe_limit_kernel(x, y):
    """Soft-edge limit of the orthogonal kernel, ``K_Airy(x,y) + Ai(x)/2 int_{-inf}^y Ai``."""
    val = airy_kernel(x, y) + 0.5 * np.asarray(airy(x).ai) * np.asarray(airy_primitive(y))
    return val if np.ndim(val) else float(val)


@dataclass
class KernelRateReport:
    """Weighted sup-errors of edge kernels against their limits, per N.

    ``sup_err[i] = max |K_edge - K_limit| * exp(x + y)`` over the grid.
    """

    beta: int
    n_list: list[int]
    sup_err: np.ndarray
    slope: float
    intercept: float

    def ratio(self, n_small: int, n_large: int) -> float:
        i, j = self.n_list.index(n_small), self.n_list.index(n_large)
        return float(self.sup_err[j] / self.sup_err[i])


def kernel_rate_experiment(beta: int, n_list, grid=None, m_of_n=None) -> KernelRateReport:
    """Measure how fast the edge kernel approaches its limit.

    Parameters
    ----------
    beta : {1, 2}
        Symmetry class.
    n_list : sequence of int
        Sizes; must be even for ``beta=1``.
    grid : array_like, optional
        Edge coordinates, default 29 points on ``[-3, 4]``.
    m_of_n : callable, optional
        Sample count as a function of N, default ``2N``.
    """
    grid = np.linspace(-3.0, 4.0, 29) if grid is None else np.asarray(grid, dtype=float)
    m_of_n = m_of_n or (lambda n: 2 * n)
    n_list = [int(n) for n in n_list]
    if beta == 1 and any(n % 2 for n in n_list):
        raise UnsupportedError("beta=1 needs even N")
    gx, gy = np.meshgrid(grid, grid, indexing="ij")
    limit = loe_limit_kernel(gx, gy) if beta == 1 else airy_kernel(gx, gy)
    weight = np.exp(gx + gy)
    errs = []
    for n in n_list:
        ctx = KernelContext.from_dims(n, m_of_n(n), beta)
        pts = ctx.physical(grid)
        if np.any(pts <= 0):
            raise DomainError("grid reaches below the hard edge")
        k = ctx.sigma_tilde * kernel_matrix(ctx, pts, pts)
        errs.append(float(np.max(np.abs(k - limit) * weight)))
    errs = np.asarray(errs)
    if len(n_list) >= 2:
        slope, intercept = np.polyfit(np.log(n_list), np.log(errs), 1)
    else:
        slope, intercept = np.nan, np.nan
    return KernelRateReport(beta, n_list, errs, float(slope), float(intercept))


def phi_edge_error(ctx: KernelContext, which: int = 2, grid=None) -> float:
    """``max |sigma phi_{N,which}(mu + sigma x) - Ai(x)/sqrt 2| e^x`` over ``grid``.

    The default grid is 141 points on ``[-3, 4]``.
    """
    grid = np.linspace(-3.0, 4.0, 141) if grid is None else np.asarray(grid, dtype=float)
    pts = ctx.physical(grid)
    if np.any(pts <= 0):
        raise DomainError("grid reaches below the hard edge")
    phi = ctx.phi1(pts) if which == 1 else ctx.phi2(pts)
    diff = ctx.sigma_tilde * np.asarray(phi) - np.asarray(airy(grid).ai) / np.sqrt(2.0)
    return float(np.max(np.abs(diff) * np.exp(grid)))
