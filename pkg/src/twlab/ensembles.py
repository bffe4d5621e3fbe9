"""Data matrices, the Gaussian interpolation flow and eigenvalue extraction.

A data matrix X is ``M x N`` with independent entries ``h / sqrt(N)`` where
``h`` has mean 0 and variance 1.  Spectra always refer to the ``N x N``
matrix ``X* X``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal
from scipy.special import gamma, gammaincc

from .errors import DataError, DomainError
from .mp_law import AspectRatio
from .streams import block_stream, trial_stream

__all__ = [
    "EntryDistribution",
    "DISTRIBUTIONS",
    "get_distribution",
    "DataMatrix",
    "FlowState",
    "sample_matrix",
    "flow_matrix",
    "flow_coefficients",
    "gram_eigenvalues",
    "laguerre_bidiagonal",
    "laguerre_tridiagonal_eigs",
    "laguerre_tridiagonal_largest",
    "edge_scaling",
    "rescale_largest",
    "sample_largest",
    "TRIDIAGONAL_BLOCK",
]

TRIDIAGONAL_BLOCK = 1024


@dataclass(frozen=True)
class EntryDistribution:
    """Law of a standardized entry ``h``.

    Attributes
    ----------
    name : str
    is_complex : bool
        Complex laws satisfy ``E h^2 = 0`` and ``E |h|^2 = 1``.
    third_cumulant, fourth_cumulant : float
        Cumulants of a real ``h``; zero for the complex Gaussian.
    sampler : callable
        ``sampler(rng, shape)`` returns standardized variates.
    moment : callable or None
        ``moment(p)`` gives ``E h^p`` exactly (real laws only).
    abs_moment : callable or None
        ``abs_moment(q)`` gives ``E |h|^q`` exactly.
    tail_abs_moment : callable or None
        ``tail_abs_moment(q, cut)`` gives ``E |h|^q 1{|h| > cut}``.
    """

    name: str
    is_complex: bool
    third_cumulant: float
    fourth_cumulant: float
    sampler: Callable[[np.random.Generator, tuple], np.ndarray]
    moment: Callable[[int], float] | None = None
    abs_moment: Callable[[float], float] | None = None
    tail_abs_moment: Callable[[float, float], float] | None = None

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        return self.sampler(rng, tuple(np.atleast_1d(shape)) if np.ndim(shape) else (shape,))

    @property
    def beta(self) -> int:
        return 2 if self.is_complex else 1


def _gauss_moment(p: int) -> float:
    return 0.0 if p % 2 else float(math.prod(range(p - 1, 0, -2)))


def _gauss_abs(q: float) -> float:
    return 2 ** (q / 2) * gamma((q + 1) / 2) / math.sqrt(math.pi)


def _gauss_tail(q: float, cut: float) -> float:
    # E|h|^q 1{|h|>cut} = 2^(q/2) Gamma((q+1)/2, cut^2/2) / sqrt(pi)
    return _gauss_abs(q) * gammaincc((q + 1) / 2, cut * cut / 2)


def _bounded_tail(bound: float):
    def tail(q: float, cut: float) -> float:
        if cut >= bound:
            return 0.0
        raise DomainError("cutoff inside the support of a bounded law")

    return tail


_S3 = math.sqrt(3.0)
# two-point law: sqrt(3) with probability 1/4, -1/sqrt(3) with probability 3/4
_SKEW_P, _SKEW_A, _SKEW_B = 0.25, _S3, -1 / _S3


def _complex_gauss(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def _rademacher(rng, shape):
    return 2.0 * rng.integers(0, 2, size=shape).astype(float) - 1.0


def _uniform(rng, shape):
    return rng.uniform(-_S3, _S3, size=shape)


def _skewed(rng, shape):
    return np.where(rng.random(shape) < _SKEW_P, _SKEW_A, _SKEW_B)


DISTRIBUTIONS: dict[str, EntryDistribution] = {
    "gaussian": EntryDistribution(
        "gaussian", False, 0.0, 0.0,
        lambda rng, shape: rng.standard_normal(shape),
        _gauss_moment, _gauss_abs, _gauss_tail,
    ),
    "complex_gaussian": EntryDistribution("complex_gaussian", True, 0.0, 0.0, _complex_gauss),
    "rademacher": EntryDistribution(
        "rademacher", False, 0.0, -2.0, _rademacher,
        lambda p: float(p % 2 == 0), lambda q: 1.0, _bounded_tail(1.0),
    ),
    "uniform": EntryDistribution(
        "uniform", False, 0.0, -1.2, _uniform,
        lambda p: 0.0 if p % 2 else _S3**p / (p + 1),
        lambda q: _S3**q / (q + 1), _bounded_tail(_S3),
    ),
    "skewed": EntryDistribution(
        "skewed", False, 2 / _S3, -2 / 3, _skewed,
        lambda p: _SKEW_P * _SKEW_A**p + (1 - _SKEW_P) * _SKEW_B**p,
        lambda q: _SKEW_P * abs(_SKEW_A) ** q + (1 - _SKEW_P) * abs(_SKEW_B) ** q,
        _bounded_tail(_S3),
    ),
}


def get_distribution(name: str | EntryDistribution) -> EntryDistribution:
    if isinstance(name, EntryDistribution):
        return name
    try:
        return DISTRIBUTIONS[name]
    except KeyError:
        raise DomainError(f"unknown distribution {name!r}; choose from {sorted(DISTRIBUTIONS)}") from None


@dataclass(frozen=True)
class DataMatrix:
    """``M x N`` data matrix with entries ``h / sqrt(N)``."""

    entries: np.ndarray
    dims: AspectRatio

    def __post_init__(self):
        if self.entries.shape != self.dims.shape:
            raise DataError(f"entries shape {self.entries.shape} does not match {self.dims.shape}")


def sample_matrix(dims: AspectRatio, dist, stream: np.random.Generator) -> DataMatrix:
    """Draw one data matrix with independent standardized entries."""
    d = get_distribution(dist)
    h = d.sampler(stream, dims.shape)
    return DataMatrix(h / math.sqrt(dims.n_cols), dims)


def flow_coefficients(t: float) -> tuple[float, float]:
    """``(exp(-t/2), sqrt(1 - exp(-t)))`` for the interpolating flow."""
    if t < 0:
        raise DomainError("flow time must be non-negative")
    return math.exp(-t / 2), math.sqrt(-math.expm1(-t))


@dataclass(frozen=True)
class FlowState:
    """Initial matrix ``x0``, independent Gaussian ``w`` and time ``t``."""

    x0: DataMatrix
    w: DataMatrix
    t: float

    def __post_init__(self):
        if self.t < 0:
            raise DomainError("flow time must be non-negative")
        if self.x0.dims != self.w.dims:
            raise DataError("x0 and w must have equal dimensions")


def flow_matrix(state: FlowState) -> DataMatrix:
    """``X(t) = exp(-t/2) X0 + sqrt(1 - exp(-t)) W``; exactly ``X0`` at ``t = 0``."""
    if state.t == 0:
        return state.x0
    a, b = flow_coefficients(state.t)
    return DataMatrix(a * state.x0.entries + b * state.w.entries, state.x0.dims)


def gram_eigenvalues(x) -> np.ndarray:
    """Ascending eigenvalues of ``X* X`` as squared singular values of ``X``.

    Accepts a :class:`DataMatrix` or an array of shape ``(..., M, N)``.
    """
    a = x.entries if isinstance(x, DataMatrix) else np.asarray(x)
    if a.ndim < 2:
        raise DataError("need a matrix")
    if not np.all(np.isfinite(a)):
        raise DataError("matrix has non-finite entries")
    s = np.linalg.svd(a, compute_uv=False)
    return (s**2)[..., ::-1]


def laguerre_bidiagonal(n_cols: int, m_rows: int, beta: int, rng: np.random.Generator, size=None):
    """Diagonal and subdiagonal of the Dumitriu–Edelman bidiagonal model.

    Returns ``(a, b)`` with ``a_i ~ chi_{beta (M - i)}`` and
    ``b_i ~ chi_{beta (N - 1 - i)}``.  ``B B^T`` has the eigenvalue law of
    ``beta W* W`` for a Gaussian ``W`` of the corresponding class.
    """
    if beta not in (1, 2):
        raise DomainError("beta must be 1 or 2")
    if m_rows < n_cols:
        raise DomainError("need m_rows >= n_cols")
    shape = () if size is None else (size,)
    i = np.arange(n_cols)
    a = np.sqrt(rng.chisquare(beta * (m_rows - i), size=shape + (n_cols,)))
    b = np.sqrt(rng.chisquare(beta * (n_cols - 1 - i[:-1]), size=shape + (n_cols - 1,))) if n_cols > 1 else np.zeros(shape + (0,))
    return a, b


def _tridiagonal(a, b):
    d = a * a
    d[..., 1:] += b * b
    return d, a[..., :-1] * b


def laguerre_tridiagonal_eigs(n_cols: int, m_rows: int, beta: int, stream: np.random.Generator) -> np.ndarray:
    """One spectrum of the beta-Laguerre ensemble in the ``X* X`` normalization."""
    a, b = laguerre_bidiagonal(n_cols, m_rows, beta, stream)
    d, e = _tridiagonal(a, b)
    lam = eigvalsh_tridiagonal(d, e) if n_cols > 1 else d
    return np.sort(lam) / (beta * n_cols)


def laguerre_tridiagonal_largest(n_cols: int, m_rows: int, beta: int, stream: np.random.Generator, size: int) -> np.ndarray:
    """Largest eigenvalue for ``size`` independent tridiagonal samples."""
    a, b = laguerre_bidiagonal(n_cols, m_rows, beta, stream, size)
    d, e = _tridiagonal(a, b)
    out = np.empty(size)
    for k in range(size):
        if n_cols == 1:
            out[k] = d[k, 0]
        else:
            out[k] = eigvalsh_tridiagonal(d[k], e[k], select="i", select_range=(n_cols - 1, n_cols - 1))[0]
    return out / (beta * n_cols)


def edge_scaling(dims: AspectRatio, variant: str = "paper") -> tuple[float, float]:
    """Centering and scaling of ``N lambda_max``.

    ``paper``: ``mu = (sqrt M + sqrt N)^2``,
    ``sigma = (sqrt M + sqrt N)(1/sqrt M + 1/sqrt N)^(1/3)``.
    ``ma``: the same with ``M - 1/2`` and ``N - 1/2``.
    """
    m, n = float(dims.m_rows), float(dims.n_cols)
    if variant == "ma":
        m, n = m - 0.5, n - 0.5
    elif variant != "paper":
        raise DomainError("variant must be 'paper' or 'ma'")
    sm, sn = math.sqrt(m), math.sqrt(n)
    return (sm + sn) ** 2, (sm + sn) * (1 / sm + 1 / sn) ** (1 / 3)


def rescale_largest(lambda_max, dims: AspectRatio, variant: str = "paper"):
    """``r = (N lambda_max - mu) / sigma``."""
    lam = np.asarray(lambda_max, dtype=float)
    if np.any(lam < 0):
        raise DomainError("eigenvalues of X*X are non-negative")
    mu, sigma = edge_scaling(dims, variant)
    r = (dims.n_cols * lam - mu) / sigma
    return r if r.ndim else float(r)


def sample_largest(dims: AspectRatio, dist, trials: int, master_seed: int, path: str = "auto",
                   first_trial: int = 0) -> np.ndarray:
    """Largest eigenvalue of ``X* X`` for trials ``first_trial .. first_trial+trials-1``.

    Parameters
    ----------
    path : {"auto", "tridiagonal", "dense"}
        ``tridiagonal`` is exact for Gaussian laws and draws blocks of
        ``TRIDIAGONAL_BLOCK`` trials from one stream each; ``dense`` samples
        the full matrix per trial.  ``auto`` picks ``tridiagonal`` for
        Gaussian laws.
    """
    d = get_distribution(dist)
    gaussian = d.name in ("gaussian", "complex_gaussian")
    if path == "auto":
        path = "tridiagonal" if gaussian else "dense"
    if path == "tridiagonal":
        if not gaussian:
            raise DomainError("the tridiagonal sampler is exact only for Gaussian entries")
        if first_trial % TRIDIAGONAL_BLOCK:
            raise DomainError("tridiagonal runs must start on a block boundary")
        out = []
        start_block = first_trial // TRIDIAGONAL_BLOCK
        n_blocks = -(-trials // TRIDIAGONAL_BLOCK)
        for blk in range(start_block, start_block + n_blocks):
            rng = block_stream(master_seed, f"largest/{d.name}/{dims.m_rows}x{dims.n_cols}", blk)
            out.append(laguerre_tridiagonal_largest(dims.n_cols, dims.m_rows, d.beta, rng, TRIDIAGONAL_BLOCK))
        return np.concatenate(out)[:trials]
    if path != "dense":
        raise DomainError("path must be auto, tridiagonal or dense")
    out = np.empty(trials)
    for k in range(trials):
        rng = trial_stream(master_seed, f"matrix/{d.name}/{dims.m_rows}x{dims.n_cols}", first_trial + k)
        x = sample_matrix(dims, d, rng)
        out[k] = np.linalg.svd(x.entries, compute_uv=False)[0] ** 2
    return out
