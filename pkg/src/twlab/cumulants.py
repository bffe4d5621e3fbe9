"""Moments, cumulants and a Monte Carlo check of the cumulant expansion.

For a real standardized variate ``h`` and a smooth ``f``

    E[h f(h)] = sum_{p=0}^{l-1} c_{p+1} / p! E[f^(p)(h)] + R_{l+1}.

The remainder is bounded here with an explicit constant: Taylor expanding
``f`` and each ``f^(p)`` at 0 and using the moment-cumulant recursion, the
polynomial parts cancel, leaving

    |R| <= C_l (E|h|^{l+1} sup_{|x|<=M} |f^(l)| + E[|h|^{l+2} 1{|h|>M}] sup |f^(l)|)

with ``C_l = 1/l! + sum_p |c_{p+1}| / (p! (l-p)!)``, valid for ``M >= 1`` and
``E h^2 = 1`` (which gives ``E|h|^q <= E|h|^{l+1}`` for ``q <= l+1``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial

from .ensembles import EntryDistribution, get_distribution
from .errors import DomainError
from .streams import trial_stream

__all__ = [
    "CumulantVector",
    "cumulants_from_moments",
    "moments_from_cumulants",
    "decayed_cumulant",
    "TestFunction",
    "polynomial_test_function",
    "sin_gauss",
    "tanh_test_function",
    "TEST_FUNCTIONS",
    "ExpansionResult",
    "expansion_check",
    "remainder_constant",
    "CUTOFF",
]

P_MAX = 12
CUTOFF = 5.0


@dataclass(frozen=True)
class CumulantVector:
    """Cumulants ``c^(1) .. c^(p)`` stored from index 0."""

    values: tuple[float, ...]

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.values):
            raise DomainError("cumulants must be finite")

    def __getitem__(self, p: int) -> float:
        """``c^(p)`` with 1-based order."""
        if p < 1:
            raise IndexError("cumulant orders start at 1")
        return self.values[p - 1]

    def __len__(self) -> int:
        return len(self.values)

    @property
    def is_standardized(self) -> bool:
        return len(self) >= 2 and abs(self.values[0]) < 1e-12 and abs(self.values[1] - 1) < 1e-12


def cumulants_from_moments(moments) -> CumulantVector:
    """Cumulants from raw moments ``m_1 .. m_p`` (``p <= 12``)."""
    m = [1.0] + [float(v) for v in moments]
    p = len(m) - 1
    if p > P_MAX:
        raise DomainError(f"at most {P_MAX} moments are supported")
    c = [0.0] * (p + 1)
    for n in range(1, p + 1):
        c[n] = m[n] - sum(math.comb(n - 1, k - 1) * c[k] * m[n - k] for k in range(1, n))
    return CumulantVector(tuple(c[1:]))


def moments_from_cumulants(cumulants) -> np.ndarray:
    """Inverse of :func:`cumulants_from_moments`."""
    c = [0.0] + [float(v) for v in (cumulants.values if isinstance(cumulants, CumulantVector) else cumulants)]
    p = len(c) - 1
    if p > P_MAX:
        raise DomainError(f"at most {P_MAX} cumulants are supported")
    m = [1.0] + [0.0] * p
    for n in range(1, p + 1):
        m[n] = sum(math.comb(n - 1, k - 1) * c[k] * m[n - k] for k in range(1, n + 1))
    return np.array(m[1:])


def decayed_cumulant(s0: float, order: int, t: float) -> float:
    """Cumulant ``s0 exp(-order t / 2)`` of a flowed entry."""
    if order < 3:
        raise DomainError("order must be at least 3")
    if t < 0:
        raise DomainError("t must be non-negative")
    return s0 * math.exp(-order * t / 2)


def distribution_cumulants(dist, p: int) -> CumulantVector:
    d = get_distribution(dist)
    if d.is_complex or d.moment is None:
        raise DomainError("exact moments are available for real shipped laws only")
    return cumulants_from_moments([d.moment(k) for k in range(1, p + 1)])


# --- test functions ---------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """Smooth function with closed-form derivatives.

    ``derivs(x, k)`` returns an array of shape ``(k+1,) + x.shape`` with
    ``f, f', ..., f^(k)``.  ``sup(k, bound)`` bounds ``sup |f^(k)|`` over
    ``|x| <= bound`` (``bound=inf`` for the whole line).
    """

    __test__ = False  # not a pytest class

    name: str
    derivs: Callable[[np.ndarray, int], np.ndarray]
    sup: Callable[[int, float], float]


def polynomial_test_function(coef, name: str | None = None) -> TestFunction:
    """Polynomial ``sum coef[k] x^k`` (degree at most 6)."""
    p = Polynomial(coef).trim()
    if p.degree() > 6:
        raise DomainError("polynomial test functions have degree at most 6")

    def derivs(x, k):
        x = np.asarray(x, dtype=float)
        out, q = [], p
        for _ in range(k + 1):
            out.append(q(x) + 0.0 * x)
            q = q.deriv()
        return np.array(out)

    def sup(k, bound):
        q = p.deriv(k) if k else p
        if q.degree() <= 0 or not np.any(q.coef):
            return float(abs(q.coef[0])) if q.coef.size else 0.0
        if not math.isfinite(bound):
            return math.inf
        crit = [r.real for r in q.deriv().roots() if abs(r.imag) < 1e-12 and abs(r.real) <= bound]
        return float(np.max(np.abs(q(np.array([-bound, bound] + crit)))))

    return TestFunction(name or f"poly{p.degree()}", derivs, sup)


def _grid_sup(derivs, span: float, h: float = 1e-4):
    xs = np.arange(-span, span + h / 2, h)

    def sup(k, bound):
        b = min(bound, span)
        x = xs[np.abs(xs) <= b]
        vals = np.abs(derivs(x, k + 1))
        # Lipschitz correction: between nodes |f^(k)| grows by at most h/2 sup|f^(k+1)|
        return float(vals[k].max() + 0.5 * h * 1.01 * vals[k + 1].max())

    return sup


def _sin_gauss_derivs(x, k):
    x = np.asarray(x, dtype=float)
    e = np.exp(1j * x - x * x)
    poly = Polynomial([1.0 + 0j])
    out = []
    for _ in range(k + 1):
        out.append((e * poly(x)).imag)
        poly = poly.deriv() + Polynomial([1j, -2.0]) * poly
    return np.array(out)


def _tanh_derivs(x, k):
    t = np.tanh(np.asarray(x, dtype=float))
    poly = Polynomial([0.0, 1.0])
    one_minus = Polynomial([1.0, 0.0, -1.0])
    out = []
    for _ in range(k + 1):
        out.append(poly(t))
        poly = poly.deriv() * one_minus
    return np.array(out)


# the sup over the line is attained well inside these spans
sin_gauss = TestFunction("sin_gauss", _sin_gauss_derivs, _grid_sup(_sin_gauss_derivs, 12.0))
tanh_test_function = TestFunction("tanh", _tanh_derivs, _grid_sup(_tanh_derivs, 25.0))

TEST_FUNCTIONS: dict[str, TestFunction] = {
    "poly6": polynomial_test_function([0.3, -1.0, 0.5, 0.2, -0.1, 0.05, 0.01], "poly6"),
    "poly3": polynomial_test_function([0.0, 1.0, -0.5, 0.25], "poly3"),
    "sin_gauss": sin_gauss,
    "tanh": tanh_test_function,
}


def remainder_constant(cum: CumulantVector, l: int) -> float:
    """``1/l! + sum_{p<l} |c_{p+1}| / (p! (l-p)!)``."""
    return 1 / math.factorial(l) + sum(
        abs(cum[p + 1]) / (math.factorial(p) * math.factorial(l - p)) for p in range(l)
    )


@dataclass
class ExpansionResult:
    """Outcome of one distribution / test-function cell."""

    dist: str
    function: str
    l: int
    lhs: float
    rhs: float
    gap: float
    stderr: float
    bound: float
    samples: int

    def within_bound(self, slack: float = 5.0) -> bool:
        """``gap <= bound + slack * stderr``."""
        return self.gap <= self.bound + slack * self.stderr

    def within_noise(self, k: float = 5.0) -> bool:
        return self.gap <= k * self.stderr


def remainder_bound(d: EntryDistribution, f: TestFunction, l: int, cum: CumulantVector, cutoff: float = CUTOFF) -> float:
    if cutoff < 1:
        raise DomainError("the cutoff must be at least 1")
    c = remainder_constant(cum, l)
    local = f.sup(l, cutoff)
    tail_mass = d.tail_abs_moment(l + 2, cutoff)
    tail = 0.0 if tail_mass == 0 else tail_mass * f.sup(l, math.inf)
    return c * (d.abs_moment(l + 1) * local + tail)


def expansion_check(dist, f: TestFunction | str, l: int, samples: int, master_seed: int = 0,
                    chunk: int = 1_000_000) -> ExpansionResult:
    """Monte Carlo check of the cumulant expansion truncated at order ``l``.

    ``lhs`` and ``rhs`` are estimated on the same draws, so the gap and its
    standard error come from the per-sample difference.
    """
    d = get_distribution(dist)
    f = TEST_FUNCTIONS[f] if isinstance(f, str) else f
    if not 1 <= l <= 8:
        raise DomainError("truncation order l must be in 1..8")
    if samples < 2:
        raise DomainError("need at least two samples")
    cum = distribution_cumulants(d, l)
    coef = np.array([cum[p + 1] / math.factorial(p) for p in range(l)])
    s_l = s_r = s_d = s_dd = 0.0
    done, block = 0, 0
    while done < samples:
        n = min(chunk, samples - done)
        h = d.sample(trial_stream(master_seed, f"cumulant/{d.name}/{f.name}", block), n)
        der = f.derivs(h, l - 1)
        left = h * der[0]
        right = coef @ der
        diff = left - right
        s_l += left.sum()
        s_r += right.sum()
        s_d += diff.sum()
        s_dd += (diff * diff).sum()
        done += n
        block += 1
    mean_d = s_d / samples
    var = max(s_dd / samples - mean_d**2, 0.0) * samples / (samples - 1)
    return ExpansionResult(d.name, f.name, l, s_l / samples, s_r / samples, abs(mean_d),
                           math.sqrt(var / samples), remainder_bound(d, f, l, cum), samples)
