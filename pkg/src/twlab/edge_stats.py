"""Empirical distribution functions, truncated Kolmogorov distances and rate fits."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, NoiseGateError

__all__ = ["RateFit", "ecdf", "ks_sup", "ks_noise_floor", "rate_fit", "KS_FLOOR_CONSTANT"]

# E sup|B(t)| for a Brownian bridge: sqrt(pi/2) ln 2
KS_FLOOR_CONSTANT = float(np.sqrt(np.pi / 2) * np.log(2.0))


def ecdf(samples) -> Callable:
    """Right-continuous empirical distribution function of ``samples``."""
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    if s.size == 0:
        raise DomainError("ecdf needs at least one sample")
    n = s.size

    def f(x):
        v = np.searchsorted(s, np.asarray(x, dtype=float), side="right") / n
        return v if np.ndim(v) else float(v)

    return f


def ks_sup(samples, cdf: Callable, r0: float = -3.5) -> float:
    """``sup_{r >= r0} |F_n(r) - G(r)|`` for a continuous reference ``G``.

    The empirical function is constant between sample points, so the
    supremum over each gap is attained at its left end or as the limit from
    the left at its right end.  Both are checked, as is ``r0`` itself.
    """
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    n = s.size
    if n == 0:
        raise DomainError("ks_sup needs at least one sample")
    k0 = int(np.searchsorted(s, r0, side="left"))
    pts = s[k0:]
    g0 = float(cdf(r0))
    # value at r0, where F_n(r0) counts samples <= r0
    f0 = np.searchsorted(s, r0, side="right") / n
    best = abs(f0 - g0)
    if pts.size:
        g = np.asarray(cdf(pts), dtype=float)
        right = np.searchsorted(s, pts, side="right") / n
        left = np.searchsorted(s, pts, side="left") / n
        best = max(best, float(np.max(np.abs(right - g))), float(np.max(np.abs(left - g))))
    return float(best)


def ks_noise_floor(n: int) -> float:
    """Expected Kolmogorov distance of ``n`` samples against their own law."""
    return KS_FLOOR_CONSTANT / np.sqrt(n)


@dataclass
class RateFit:
    """Power-law fit ``KS ~ exp(intercept) * N**slope``."""

    n_list: np.ndarray
    ks_list: np.ndarray
    slope: float
    intercept: float
    slope_ci: tuple[float, float]

    def fitline(self, n) -> np.ndarray:
        return np.exp(self.intercept) * np.asarray(n, dtype=float) ** self.slope


def _wls(logn, logk, w):
    a = np.column_stack([np.ones_like(logn), logn])
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(a * sw[:, None], logk * sw, rcond=None)
    return coef[1], coef[0]


def rate_fit(n_list, ks_list, stderr_list, samples_list: Sequence | None = None,
             cdf: Callable | None = None, r0: float = -3.5, n_boot: int = 200,
             rng: np.random.Generator | None = None, gate: float = 3.0) -> RateFit:
    """Weighted least squares of ``log KS`` on ``log N``.

    Weights are inverse variances of ``log KS``, i.e. ``(KS / stderr)**2``.
    When the per-size samples and the reference ``cdf`` are given, the
    slope interval comes from ``n_boot`` resamples of the trials; otherwise
    it is the normal-theory 95% interval of the weighted fit.

    Raises
    ------
    DomainError
        Fewer than three sizes, or mismatched lengths.
    NoiseGateError
        Some KS value does not exceed ``gate`` times its standard error.
    """
    n = np.asarray(n_list, dtype=float)
    ks = np.asarray(ks_list, dtype=float)
    se = np.asarray(stderr_list, dtype=float)
    if not (n.size == ks.size == se.size):
        raise DomainError("n_list, ks_list and stderr_list must have equal length")
    if n.size < 3:
        raise DomainError("a rate fit needs at least three sizes")
    low = ks <= gate * se
    if np.any(low):
        raise NoiseGateError(
            f"KS values {ks[low].tolist()} at N={n[low].tolist()} do not clear {gate}x their standard error"
        )
    logn, logk = np.log(n), np.log(ks)
    w = (ks / se) ** 2
    slope, intercept = _wls(logn, logk, w)
    if samples_list is not None and cdf is not None:
        rng = rng or np.random.default_rng(0)
        boots = []
        for _ in range(n_boot):
            kb = np.array([ks_sup(rng.choice(s, size=len(s), replace=True), cdf, r0) for s in samples_list])
            boots.append(_wls(logn, np.log(kb), w)[0])
        ci = (float(np.percentile(boots, 2.5)), float(np.percentile(boots, 97.5)))
    else:
        resid = logk - (intercept + slope * logn)
        dof = max(n.size - 2, 1)
        s2 = float(np.sum(w * resid**2) / dof)
        xm = np.sum(w * logn) / np.sum(w)
        var = s2 / float(np.sum(w * (logn - xm) ** 2))
        half = 1.96 * np.sqrt(var)
        ci = (float(slope - half), float(slope + half))
    return RateFit(n, ks, float(slope), float(intercept), ci)
