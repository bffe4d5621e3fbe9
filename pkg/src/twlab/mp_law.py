"""Marchenko–Pastur law for the sample covariance matrix X*X.

The law is parametrized by the aspect ratio ``rho = M / N >= 1``.  It has
support ``[E-, E+]`` with ``E± = (1 ± sqrt(rho))**2`` and Stieltjes transform
``m(z)``, the root of ``z m**2 + (z + 1 - rho) m + 1 = 0`` with ``Im m > 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import DomainError

__all__ = [
    "AspectRatio",
    "MPModel",
    "SpectralPoint",
    "DomainParams",
    "DomainMembership",
    "ScalingReport",
    "edges",
    "mp_density",
    "mp_cdf",
    "stieltjes_mp",
    "classical_location",
    "classical_locations",
    "control_psi",
    "in_domain",
    "im_m_scaling_check",
]

_GL_NODES, _GL_WEIGHTS = leggauss(24)


@dataclass(frozen=True)
class AspectRatio:
    """Matrix dimensions with ``m_rows >= n_cols``.

    ``rho`` is kept as an exact fraction so that downstream formulas do not
    inherit a rounding of the stored ratio.
    """

    m_rows: int
    n_cols: int
    rho: Fraction = field(init=False)

    def __post_init__(self):
        if int(self.m_rows) != self.m_rows or int(self.n_cols) != self.n_cols:
            raise DomainError("dimensions must be integers")
        if self.n_cols < 1 or self.m_rows < 1:
            raise DomainError("dimensions must be positive")
        if self.m_rows < self.n_cols:
            raise DomainError(
                f"need m_rows >= n_cols, got M={self.m_rows}, N={self.n_cols}"
            )
        object.__setattr__(self, "rho", Fraction(int(self.m_rows), int(self.n_cols)))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.m_rows, self.n_cols)


def _as_rho(rho) -> float:
    if isinstance(rho, (AspectRatio, MPModel)):
        rho = rho.rho
    r = float(rho)
    if not r >= 1.0:
        raise DomainError(f"aspect ratio must satisfy rho >= 1, got {rho}")
    return r


def edges(rho) -> tuple[float, float]:
    """Lower and upper spectral edges ``((1-sqrt(rho))**2, (1+sqrt(rho))**2)``."""
    r = _as_rho(rho)
    s = np.sqrt(r)
    return (1.0 - s) ** 2, (1.0 + s) ** 2


def mp_density(x, rho):
    """Density of the law, ``sqrt((x-E-)(E+-x)) / (2 pi x)`` on the support.

    This is ``Im m(x + i0) / pi`` for the Stieltjes transform computed by
    :func:`stieltjes_mp`, and it has unit mass.
    """
    r = _as_rho(rho)
    lo, hi = edges(r)
    x = np.asarray(x, dtype=float)
    inside = (x > lo) & (x < hi)
    xs = np.where(inside, x, 0.5 * (lo + hi))
    val = np.sqrt((xs - lo) * (hi - xs)) / (2.0 * np.pi * xs)
    out = np.where(inside, val, 0.0)
    return out if out.ndim else float(out)


class _CDF:
    """Distribution function via the substitution x = E- + (E+ - E-) sin^2(theta).

    In the angle variable the integrand is smooth; its only nearby
    singularity is a pole at ``theta = i*sqrt(E- / (E+ - E-))``.  Panels are
    graded geometrically toward that pole so the Gauss–Legendre rule keeps
    full accuracy even for rho close to 1.
    """

    def __init__(self, rho: float):
        self.lo, self.hi = edges(rho)
        self.width = self.hi - self.lo
        delta = np.sqrt(self.lo / self.width)
        delta = min(max(delta, 1e-12), 2.0**-6)
        breaks = [0.0]
        b = delta
        while b < np.pi / 2:
            breaks.append(b)
            b *= 2.0
        breaks.append(np.pi / 2)
        self.breaks = np.asarray(breaks)
        full = [self._panel(a, c) for a, c in zip(self.breaks[:-1], self.breaks[1:])]
        self.cum = np.concatenate([[0.0], np.cumsum(full)])

    def _integrand(self, theta):
        s2 = np.sin(theta) ** 2
        c2 = np.cos(theta) ** 2
        x = self.lo + self.width * s2
        return self.width**2 * s2 * c2 / (np.pi * x)

    def _panel(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        t = mid[..., None] + half[..., None] * _GL_NODES
        return half * (self._integrand(t) @ _GL_WEIGHTS)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        u = np.clip((x - self.lo) / self.width, 0.0, 1.0)
        theta = np.arcsin(np.sqrt(u))
        k = np.clip(np.searchsorted(self.breaks, theta, side="right") - 1, 0, len(self.breaks) - 2)
        val = self.cum[k] + self._panel(self.breaks[k], theta)
        val = np.where(x >= self.hi, 1.0, np.where(x <= self.lo, 0.0, val))
        return np.clip(val, 0.0, 1.0)


def mp_cdf(x, rho):
    """Distribution function ``mu((-inf, x])`` of the law."""
    out = _CDF(_as_rho(rho))(x)
    return out if np.ndim(out) else float(out)


def stieltjes_mp(z, rho):
    """Stieltjes transform ``m(z)`` of the law.

    Parameters
    ----------
    z : complex or array_like
        Spectral parameter with ``Im z > 0``, or a real number outside the
        closed support.  The support endpoints themselves are allowed; there
        the two roots coincide.
    rho : float or Fraction or AspectRatio
        Aspect ratio, at least 1.

    Returns
    -------
    complex or ndarray
        The Herglotz root for ``Im z > 0``; for real ``z`` the real root of
        smaller magnitude, which is the analytic continuation decaying like
        ``-1/z`` at infinity.

    Notes
    -----
    The large-magnitude root ``q / z`` is formed first and the other root is
    obtained from the product of roots ``1/z``, which avoids cancellation.
    """
    r = _as_rho(rho)
    lo, hi = edges(r)
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag < 0):
        raise DomainError("need Im z >= 0")
    real = z.imag == 0
    on_support = real & (z.real > lo) & (z.real < hi)
    if np.any(on_support) or np.any(z == 0):
        raise DomainError("z lies on the real support of the law")
    b = z + 1.0 - r
    sq = np.sqrt(b * b - 4.0 * z)
    sq = np.where((np.conj(b) * sq).real < 0, -sq, sq)
    q = -0.5 * (b + sq)
    r1 = q / z
    r2 = 1.0 / q
    pick_r2 = np.where(real, np.abs(r2) <= np.abs(r1), r2.imag > r1.imag)
    m = np.where(pick_r2, r2, r1)
    m = np.where(real, m.real + 0j, m)
    return m if m.ndim else complex(m)


def classical_locations(n_cols: int, rho, j=None, tol: float = 1e-13):
    """Classical eigenvalue locations ``gamma_j``, solving ``j/N = CDF(gamma_j)``.

    Parameters
    ----------
    n_cols : int
        Number of eigenvalues N.
    rho : float
        Aspect ratio.
    j : array_like of int, optional
        Indices in ``1..N``; all indices when omitted.
    tol : float
        Bisection stops once the bracket is narrower than ``tol`` in energy.
    """
    r = _as_rho(rho)
    cdf = _CDF(r)
    j = np.arange(1, n_cols + 1) if j is None else np.asarray(j)
    if np.any(j < 1) or np.any(j > n_cols):
        raise DomainError("index j must lie in 1..N")
    target = j / n_cols
    lo = np.full(target.shape, cdf.lo)
    hi = np.full(target.shape, cdf.hi)
    for _ in range(200):
        if np.all(hi - lo <= tol):
            break
        mid = 0.5 * (lo + hi)
        below = cdf(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = np.where(target >= 1.0, cdf.hi, 0.5 * (lo + hi))
    return out


def classical_location(j: int, n_cols: int, rho) -> float:
    """Classical location of the ``j``-th smallest eigenvalue."""
    return float(classical_locations(n_cols, rho, np.array([j]))[0])


@dataclass(frozen=True)
class MPModel:
    """Edges and transforms of the law for one aspect ratio."""

    rho: float
    e_minus: float = field(init=False)
    e_plus: float = field(init=False)

    def __post_init__(self):
        r = _as_rho(self.rho)
        lo, hi = edges(r)
        object.__setattr__(self, "rho", r)
        object.__setattr__(self, "e_minus", lo)
        object.__setattr__(self, "e_plus", hi)

    @classmethod
    def from_dims(cls, dims: AspectRatio) -> "MPModel":
        return cls(float(dims.rho))

    def density(self, x):
        return mp_density(x, self.rho)

    def cdf(self, x):
        return mp_cdf(x, self.rho)

    def stieltjes(self, z):
        return stieltjes_mp(z, self.rho)

    def kappa(self, energy: float) -> float:
        return min(abs(energy - self.e_plus), abs(energy - self.e_minus))


@dataclass(frozen=True)
class SpectralPoint:
    """Spectral parameter ``z = E + i eta`` with its distance to the edges."""

    energy: float
    eta: float
    kappa: float

    def __post_init__(self):
        if not self.eta > 0:
            raise DomainError("eta must be positive")

    @classmethod
    def from_z(cls, z: complex, model: MPModel) -> "SpectralPoint":
        z = complex(z)
        return cls(z.real, z.imag, model.kappa(z.real))

    @property
    def z(self) -> complex:
        return complex(self.energy, self.eta)


def control_psi(z, n_cols: int, rho):
    """Control parameter ``sqrt(Im m(z) / (N eta)) + 1 / (N eta)``."""
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag <= 0):
        raise DomainError("control parameter needs Im z > 0")
    m = np.asarray(stieltjes_mp(z, rho))
    neta = n_cols * z.imag
    out = np.sqrt(m.imag / neta) + 1.0 / neta
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class DomainParams:
    """Constants of the bulk domain ``S(eps, c)`` and edge domain ``S_edge(eps, C1, C2)``."""

    eps: float = 0.1
    c: float = 0.1
    c1: float = 1.0
    c2: float = 1.0


@dataclass(frozen=True)
class DomainMembership:
    in_s: bool
    in_s_edge: bool


def _le(a: float, b: float) -> bool:
    # closed comparison tolerant to rounding in the boundary arithmetic
    return a <= b + 1e-12 * max(1.0, abs(a), abs(b))


def in_domain(z: complex, n_cols: int, rho, params: DomainParams | None = None) -> DomainMembership:
    """Membership of ``z`` in the spectral domains used by the local law.

    ``S`` requires ``|z| >= c``, ``kappa <= 1/c`` and ``N**(-1+eps) <= eta <= 1``.
    ``S_edge`` requires ``S`` together with
    ``-C1 N**(-2/3) <= E - E+ <= C2 N**(-2/3+eps)`` and
    ``eta <= N**(-2/3-eps)``.  All comparisons are closed.
    """
    p = params or DomainParams()
    model = MPModel(_as_rho(rho))
    z = complex(z)
    e, eta = z.real, z.imag
    n = float(n_cols)
    in_s = (
        _le(p.c, abs(z))
        and _le(model.kappa(e), 1.0 / p.c)
        and _le(n ** (-1 + p.eps), eta)
        and _le(eta, 1.0)
    )
    d = e - model.e_plus
    in_edge = (
        in_s
        and _le(-p.c1 * n ** (-2 / 3), d)
        and _le(d, p.c2 * n ** (-2 / 3 + p.eps))
        and _le(eta, n ** (-2 / 3 - p.eps))
    )
    return DomainMembership(bool(in_s), bool(in_edge))


@dataclass
class ScalingReport:
    """Ratios of ``Im m`` to its predicted size on an (E, eta) grid.

    Inside the support the comparison function is ``sqrt(kappa + eta)``;
    outside it is ``eta / sqrt(kappa + eta)``.  Entries of the ratio arrays
    are NaN where the other regime applies.
    """

    energies: np.ndarray
    etas: np.ndarray
    ratio_inside: np.ndarray
    ratio_outside: np.ndarray

    @staticmethod
    def _span(a):
        a = a[np.isfinite(a)]
        return (float(a.min()), float(a.max())) if a.size else (np.nan, np.nan)

    @property
    def inside_range(self) -> tuple[float, float]:
        return self._span(self.ratio_inside)

    @property
    def outside_range(self) -> tuple[float, float]:
        return self._span(self.ratio_outside)


def im_m_scaling_check(model: MPModel, energies, etas) -> ScalingReport:
    """Compare ``Im m(E + i eta)`` with ``sqrt(kappa+eta)`` or ``eta/sqrt(kappa+eta)``."""
    e = np.asarray(energies, dtype=float)[:, None]
    eta = np.asarray(etas, dtype=float)[None, :]
    ee, hh = np.broadcast_arrays(e, eta)
    im = np.asarray(stieltjes_mp(ee + 1j * hh, model.rho)).imag
    kappa = np.minimum(np.abs(ee - model.e_plus), np.abs(ee - model.e_minus))
    root = np.sqrt(kappa + hh)
    inside = (ee >= model.e_minus) & (ee <= model.e_plus)
    r_in = np.where(inside, im / root, np.nan)
    r_out = np.where(inside, np.nan, im / (hh / root))
    return ScalingReport(e[:, 0], eta[0], r_in, r_out)
