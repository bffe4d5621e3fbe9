"""Linearized Green function and the diagnostics built on it.

For an ``M x N`` matrix X the linearization

    H(z) = [[-z I_N, X*], [X, -I_M]]

has inverse ``G = [[R, R X*], [X R, z Rc]]`` where ``R = (X*X - z)^-1`` and
``Rc = (X X* - z)^-1``.  Indices ``0..N-1`` are called Latin and
``N..N+M-1`` Greek.  Everything here is computed from one singular value
decomposition per matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ensembles import (
    DataMatrix,
    FlowState,
    flow_matrix,
    get_distribution,
    gram_eigenvalues,
    laguerre_tridiagonal_eigs,
    sample_matrix,
)
from .errors import ConditioningError, DomainError, ValidationError
from .mp_law import AspectRatio, MPModel, classical_locations, control_psi, mp_cdf, stieltjes_mp
from .streams import trial_stream

__all__ = [
    "GreenFunction",
    "green_function",
    "resolvent_trace",
    "resolvent_trace_from_eigs",
    "WardReport",
    "ward_check",
    "pi_matrix",
    "LocalLawResidual",
    "local_law_residual",
    "RigidityReport",
    "rigidity_check",
    "CountingObservable",
    "smoothed_counting",
    "observable_chi",
    "cutoff_f",
    "GFCRow",
    "gfc_experiment",
    "TermSpec",
    "TermEstimate",
    "TERM_REGISTRY",
    "term_average",
    "evaluate_term",
    "averaged_ward_constant",
]


def _entries(x) -> np.ndarray:
    return x.entries if isinstance(x, DataMatrix) else np.asarray(x)


def _check_z(z) -> complex:
    z = complex(z)
    if not z.imag > 0:
        raise DomainError("need Im z > 0")
    return z


@dataclass
class GreenFunction:
    """Green function of the linearization at one spectral parameter.

    Built from the thin SVD ``X = U diag(s) Vh``.  Blocks are formed on
    request.
    """

    z: complex
    u: np.ndarray
    s: np.ndarray
    vh: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.vh.shape[0]

    @property
    def m_rows(self) -> int:
        return self.u.shape[0]

    @property
    def d(self) -> np.ndarray:
        """``1 / (s_k^2 - z)``."""
        return 1.0 / (self.s**2 - self.z)

    @property
    def v(self) -> np.ndarray:
        return self.vh.conj().T

    @property
    def r_block(self) -> np.ndarray:
        """``R = (X*X - z)^-1``."""
        if "R" not in self._cache:
            self._cache["R"] = (self.v * self.d) @ self.vh
        return self._cache["R"]

    @property
    def x_star_companion(self) -> np.ndarray:
        """``X* Rc = R X*`` (``N x M``)."""
        return (self.v * (self.s * self.d)) @ self.u.conj().T

    @property
    def x_r(self) -> np.ndarray:
        """``X R = Rc X`` (``M x N``)."""
        return (self.u * (self.s * self.d)) @ self.vh

    @property
    def z_companion(self) -> np.ndarray:
        """``z Rc = X R X* - I`` (``M x M``)."""
        return (self.u * (self.s**2 * self.d)) @ self.u.conj().T - np.eye(self.m_rows)

    @property
    def companion(self) -> np.ndarray:
        """``Rc = (X X* - z)^-1``."""
        return self.z_companion / self.z

    @property
    def m(self) -> complex:
        """``Tr R / N``."""
        return complex(np.mean(self.d))

    @property
    def m_companion(self) -> complex:
        """``Tr Rc / M``, including the ``M - N`` zero eigenvalues of ``X X*``."""
        return complex((np.sum(self.d) - (self.m_rows - self.n) / self.z) / self.m_rows)

    def assemble(self) -> np.ndarray:
        """Full ``(N+M) x (N+M)`` matrix."""
        n = self.n
        g = np.empty((n + self.m_rows,) * 2, dtype=complex)
        g[:n, :n] = self.r_block
        g[:n, n:] = self.x_star_companion
        g[n:, :n] = self.x_r
        g[n:, n:] = self.z_companion
        return g

    def linearization(self, x) -> np.ndarray:
        a = _entries(x)
        n, m = self.n, self.m_rows
        h = np.zeros((n + m,) * 2, dtype=complex)
        h[:n, :n] = -self.z * np.eye(n)
        h[:n, n:] = a.conj().T
        h[n:, :n] = a
        h[n:, n:] = -np.eye(m)
        return h

    @property
    def diag_latin(self) -> np.ndarray:
        return (np.abs(self.v) ** 2) @ self.d

    @property
    def diag_greek(self) -> np.ndarray:
        return (np.abs(self.u) ** 2) @ (self.s**2 * self.d) - 1.0


def green_function(x, z) -> GreenFunction:
    """Green function of ``H(z)`` for the data matrix ``x``.

    Raises
    ------
    ConditioningError
        When ``z`` is so close to an eigenvalue that the inverse cannot be
        represented reliably in double precision.
    """
    z = _check_z(z)
    a = _entries(x)
    if not np.all(np.isfinite(a)):
        raise DomainError("matrix has non-finite entries")
    if a.shape[0] < a.shape[1]:
        raise DomainError("need M >= N")
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    gap = np.min(np.abs(s**2 - z))
    scale = max(1.0, float(s[0] ** 2), abs(z))
    if gap <= 1e3 * np.finfo(float).eps * scale:
        raise ConditioningError(f"z is within {gap:.1e} of the spectrum")
    return GreenFunction(z, u, s, vh)


def resolvent_trace_from_eigs(eigs, m_rows: int, z):
    """``(m_N, m_companion)`` from eigenvalues of ``X* X``.

    ``eigs`` may carry leading batch axes; ``z`` may be an array that
    broadcasts against them after a trailing axis is added.
    """
    lam = np.asarray(eigs, dtype=float)
    zz = np.asarray(z, dtype=complex)
    if np.any(zz.imag <= 0):
        raise DomainError("need Im z > 0")
    n = lam.shape[-1]
    if zz.ndim:
        tot = np.sum(1.0 / (lam[..., None, :] - zz[:, None]), axis=-1)
    else:
        tot = np.sum(1.0 / (lam - zz), axis=-1)
    m = tot / n
    mc = (tot - (m_rows - n) / zz) / m_rows
    return m, mc


def resolvent_trace(x, z):
    """Normalized traces ``m_N = Tr R / N`` and ``Tr Rc / M``."""
    _check_z(z)
    a = _entries(x)
    m, mc = resolvent_trace_from_eigs(gram_eigenvalues(a), a.shape[0], z)
    return complex(m), complex(mc)


@dataclass
class WardReport:
    """Outcome of the four Ward-type relations.

    ``relation1_error`` is the largest relative defect of the identity
    ``sum_{k<N} |G_bk|^2 = Im G_bb / eta``.  ``c2..c4`` are the smallest
    constants for which the three inequalities hold with the computed
    ``||X*X||``.
    """

    relation1_error: float
    c2: float
    c3: float
    c4: float
    norm: float
    skipped: bool = False
    note: str = ""


def ward_check(g: GreenFunction, c: float = 0.1, big_c: float = 10.0) -> WardReport:
    """Check the Ward identity and report constants for the three bounds."""
    z = g.z
    if not (c < abs(z) < big_c):
        return WardReport(np.nan, np.nan, np.nan, np.nan, np.nan, True,
                          f"|z|={abs(z):.3g} outside ({c}, {big_c})")
    eta = z.imag
    n = g.n
    full = g.assemble()
    norm = float(g.s[0] ** 2)
    lat = full[:n]
    gre = full[n:]
    s1 = np.sum(np.abs(lat[:, :n]) ** 2, axis=1)
    rhs1 = np.diag(lat[:, :n]).imag / eta
    rel1 = float(np.max(np.abs(s1 - rhs1) / np.abs(rhs1)))
    s2 = np.sum(np.abs(lat[:, n:]) ** 2, axis=1)
    c2 = float(np.max(s2 / (norm * s1)))
    t3 = np.sum(np.abs(gre[:, n:]) ** 2, axis=1)
    im_gre = np.diag(gre[:, n:]).imag / eta
    c3 = float(np.max(np.maximum(t3 - 2.0, 0.0) / (norm * im_gre)))
    t4 = np.sum(np.abs(gre[:, :n]) ** 2, axis=1)
    c4 = float(np.max(t4 / (norm * t3)))
    return WardReport(rel1, c2, c3, c4, norm)


def pi_matrix(z, n_cols: int, m_rows: int) -> np.ndarray:
    """Deterministic approximation ``diag(m, ..., -(1+m)^-1, ...)`` of ``G``."""
    m = stieltjes_mp(z, m_rows / n_cols)
    return np.diag(np.concatenate([np.full(n_cols, m), np.full(m_rows, -1.0 / (1.0 + m))]))


@dataclass
class LocalLawResidual:
    """Distances of random quantities from their deterministic limits."""

    trace_residual: float
    psi: float
    inv_n_eta: float
    entry_residual: float | None = None

    @property
    def trace_ratio(self) -> float:
        """``|m_N - m| * N eta``."""
        return self.trace_residual / self.inv_n_eta

    @property
    def entry_ratio(self) -> float | None:
        return None if self.entry_residual is None else self.entry_residual / self.psi


def local_law_residual(x, z, entrywise: bool = False, eigs=None) -> LocalLawResidual:
    """Residuals of the averaged and (optionally) entrywise local law.

    Parameters
    ----------
    x : DataMatrix or ndarray or AspectRatio
        The matrix; with precomputed ``eigs`` only its dimensions are used.
    entrywise : bool
        Also return ``max |G_ij - Pi_ij|`` (needs the full Green function).
    """
    z = _check_z(z)
    if isinstance(x, AspectRatio):
        m_rows, n = x.m_rows, x.n_cols
        if entrywise:
            raise DomainError("entrywise residual needs the matrix")
    else:
        m_rows, n = _entries(x).shape
    rho = m_rows / n
    mt = stieltjes_mp(z, rho)
    if eigs is None:
        eigs = gram_eigenvalues(_entries(x))
    m, _ = resolvent_trace_from_eigs(eigs, m_rows, z)
    entry = None
    if entrywise:
        g = green_function(x, z).assemble()
        entry = float(np.max(np.abs(g - pi_matrix(z, n, m_rows))))
    return LocalLawResidual(abs(complex(m) - mt), control_psi(z, n, rho), 1.0 / (n * z.imag), entry)


@dataclass
class RigidityReport:
    """Rescaled eigenvalue deviations and counting discrepancies."""

    max_rescaled: float
    rescaled: np.ndarray
    counting_max: float
    mesh: np.ndarray


def rigidity_check(eigs, model: MPModel | AspectRatio, c: float = 0.1, levels: int = 12) -> RigidityReport:
    """Compare eigenvalues with classical locations.

    Reports ``max_j |lambda_j - gamma_j| N^(2/3) min(j, N-j+1)^(1/3)`` over
    ``gamma_j >= c`` and ``max |N(E1, E2) - N mu([E1, E2])|`` over all pairs
    of a dyadic mesh that accumulates at the upper edge.
    """
    lam = np.sort(np.asarray(eigs, dtype=float))
    n = lam.size
    rho = float(model.rho)
    mp = model if isinstance(model, MPModel) else MPModel(rho)
    gam = classical_locations(n, rho)
    j = np.arange(1, n + 1)
    resc = np.abs(lam - gam) * n ** (2 / 3) * np.minimum(j, n - j + 1) ** (1 / 3)
    keep = gam >= c
    mesh_lo = max(c, mp.e_minus)
    span = mp.e_plus - mesh_lo
    mesh = np.concatenate([[mesh_lo], mp.e_plus - span * 2.0 ** -np.arange(1, levels + 1), [mp.e_plus],
                           mp.e_plus + span * 2.0 ** -np.arange(levels, 0, -1)])
    mesh = np.unique(mesh)
    counts = np.searchsorted(lam, mesh, side="right")
    cdf = np.asarray(mp_cdf(mesh, rho))
    diff = (counts[None, :] - counts[:, None]) - n * (cdf[None, :] - cdf[:, None])
    return RigidityReport(float(np.max(resc[keep])) if keep.any() else 0.0, resc, float(np.max(np.abs(diff))), mesh)


@dataclass(frozen=True)
class CountingObservable:
    """Lorentzian-smoothed number of eigenvalues in ``[e_low, e_high]``."""

    e_low: float
    e_high: float
    eta: float
    value: float


def _arctan_count(lam, lo, hi, eta):
    lam = np.asarray(lam, dtype=float)
    return np.sum(np.arctan((hi - lam) / eta) - np.arctan((lo - lam) / eta), axis=-1) / np.pi


def smoothed_counting(eigs, e_low: float, eta: float, eps: float = 0.1, model: MPModel | None = None) -> CountingObservable:
    """Smoothed count ``Tr (chi * theta_eta)(X*X)`` on ``[e_low, E_L]``.

    ``E_L = E+ + 4 N^(-2/3+eps)`` is the truncation energy; the closed form
    is a sum of arctangent differences.  ``model`` must describe the
    matrix the eigenvalues came from.
    """
    lam = np.asarray(eigs, dtype=float)
    n = lam.shape[-1]
    if model is None:
        raise DomainError("smoothed_counting needs the model of the matrix")
    e_l = model.e_plus + 4.0 * n ** (-2 / 3 + eps)
    if e_low > e_l:
        raise DomainError("e_low must not exceed the truncation energy")
    if not eta > 0:
        raise DomainError("eta must be positive")
    return CountingObservable(float(e_low), float(e_l), float(eta), float(_arctan_count(lam, e_low, e_l, eta)))


def observable_chi(eigs, kappa1: float, kappa2: float, eta: float, model: MPModel):
    """Smoothed count ``(N/pi) int_{kappa1}^{kappa2} Im m_N(E+ + x + i eta) dx``.

    Accepts a batch of spectra along leading axes.
    """
    if not kappa1 < kappa2:
        raise DomainError("need kappa1 < kappa2")
    if not eta > 0:
        raise DomainError("eta must be positive")
    val = _arctan_count(eigs, model.e_plus + kappa1, model.e_plus + kappa2, eta)
    return val if np.ndim(val) else float(val)


def _sigma(u):
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)


def cutoff_f(x):
    """Smooth even cut-off: 1 on ``|x| <= 1/9``, 0 on ``|x| >= 2/9``, monotone between."""
    ax = np.abs(np.asarray(x, dtype=float))
    u = (2.0 / 9.0 - ax) * 9.0
    a, b = _sigma(u), _sigma(1.0 - u)
    val = np.where(u >= 1, 1.0, np.where(u <= 0, 0.0, a / np.where(a + b > 0, a + b, 1.0)))
    return val if val.ndim else float(val)


def _stats(a: np.ndarray):
    return float(np.mean(a)), float(np.std(a, ddof=1) / math.sqrt(a.size))


@dataclass
class GFCRow:
    """Comparison at one flow time."""

    t: float
    im_m: tuple[float, float]
    re_m: tuple[float, float]
    f_chi: tuple[float, float]
    ref_im_m: tuple[float, float]
    ref_re_m: tuple[float, float]
    ref_f_chi: tuple[float, float]
    n13_im_m: float

    @staticmethod
    def _z(a, b):
        d = abs(a[0] - b[0])
        se = math.hypot(a[1], b[1])
        return d, (d / se if se > 0 else (0.0 if d == 0 else math.inf))

    @property
    def delta_im(self):
        return self._z(self.im_m, self.ref_im_m)

    @property
    def delta_re(self):
        return self._z(self.re_m, self.ref_re_m)

    @property
    def delta_f(self):
        return self._z(self.f_chi, self.ref_f_chi)

    @property
    def delta_m(self):
        """``|E m - E^W m|`` over the complex plane and its combined standard error."""
        d = math.hypot(self.im_m[0] - self.ref_im_m[0], self.re_m[0] - self.ref_re_m[0])
        se = math.sqrt(self.im_m[1] ** 2 + self.ref_im_m[1] ** 2 + self.re_m[1] ** 2 + self.ref_re_m[1] ** 2)
        return d, se


def default_edge_geometry(n: int, model: MPModel):
    """``z = E+ + i N^-0.75`` and window ``(-N^-2/3, N^(-2/3+0.05))``."""
    return complex(model.e_plus, n ** -0.75), (-(n ** (-2 / 3)), n ** (-2 / 3 + 0.05))


def gaussian_reference_eigs(dims: AspectRatio, beta: int, trials: int, master_seed: int, tag: str = "reference") -> np.ndarray:
    """Spectra of ``W*W`` from the tridiagonal sampler, one stream per trial."""
    out = np.empty((trials, dims.n_cols))
    for k in range(trials):
        rng = trial_stream(master_seed, f"{tag}/{beta}/{dims.m_rows}x{dims.n_cols}", k)
        out[k] = laguerre_tridiagonal_eigs(dims.n_cols, dims.m_rows, beta, rng)
    return out


def flow_eigs(dist, dims: AspectRatio, t_grid: Sequence[float], trials: int, master_seed: int) -> np.ndarray:
    """Spectra of ``X(t)* X(t)`` for every trial and time, shape ``(T, trials, N)``.

    ``X0`` and ``W`` are shared across times so the flow is coupled.
    """
    d = get_distribution(dist)
    gauss = get_distribution("complex_gaussian" if d.is_complex else "gaussian")
    out = np.empty((len(t_grid), trials, dims.n_cols))
    for k in range(trials):
        rng = trial_stream(master_seed, f"flow/{d.name}/{dims.m_rows}x{dims.n_cols}", k)
        x0 = sample_matrix(dims, d, rng)
        w = sample_matrix(dims, gauss, rng)
        for i, t in enumerate(t_grid):
            out[i, k] = gram_eigenvalues(flow_matrix(FlowState(x0, w, float(t))))
    return out


def gfc_experiment(dist, dims: AspectRatio, t_grid: Sequence[float], z=None, trials: int = 1000,
                   master_seed: int = 0, kappa=None) -> list[GFCRow]:
    """Monte Carlo comparison of ``X(t)`` statistics with the Gaussian ensemble.

    For each ``t`` the means of ``Im m_N(z)``, ``Re m_N(z)`` and
    ``F(chi)`` are compared with the same statistics of an independent
    Gaussian sample of equal size.  ``chi`` is :func:`observable_chi` on the
    window ``kappa`` with ``eta = Im z``.
    """
    if trials < 100:
        raise DomainError("at least 100 trials are needed for a usable noise floor")
    d = get_distribution(dist)
    model = MPModel.from_dims(dims)
    n = dims.n_cols
    z0, k0 = default_edge_geometry(n, model)
    z = z0 if z is None else _check_z(z)
    kappa = k0 if kappa is None else kappa
    eta = z.imag
    ref = gaussian_reference_eigs(dims, d.beta, trials, master_seed)
    rm, _ = resolvent_trace_from_eigs(ref, dims.m_rows, z)
    rf = cutoff_f(observable_chi(ref, kappa[0], kappa[1], eta, model))
    flows = flow_eigs(d, dims, t_grid, trials, master_seed)
    rows = []
    for i, t in enumerate(t_grid):
        m, _ = resolvent_trace_from_eigs(flows[i], dims.m_rows, z)
        f = cutoff_f(observable_chi(flows[i], kappa[0], kappa[1], eta, model))
        im = _stats(m.imag)
        rows.append(GFCRow(float(t), im, _stats(m.real), _stats(f), _stats(rm.imag), _stats(rm.real), _stats(rf),
                           n ** (1 / 3) * im[0]))
    return rows


# ---------------------------------------------------------------------------
# averaged products of Green function entries

LATIN, GREEK = "latin", "greek"


@dataclass(frozen=True)
class TermSpec:
    """Averaged product ``N^-#I sum_I c prod G_{x_i y_i}``.

    Attributes
    ----------
    name : str
    latin, greek : tuple of str
        Summation index names ranging over ``1..N`` and ``N+1..N+M``.
    factors : tuple of (str, str)
        Row and column index of each Green function factor; powers are
        written as repeated factors.
    order : int
        Order ``p+1`` of the cumulant weight ``s^(p+1)(t)``.
    printed_power : float
        Extra power of N in the conventional prefactor (for reporting).
    """

    name: str
    latin: tuple[str, ...]
    greek: tuple[str, ...]
    factors: tuple[tuple[str, str], ...]
    order: int
    printed_power: float = 0.0

    def __post_init__(self):
        names = self.latin + self.greek
        if len(set(names)) != len(names):
            raise ValidationError("index names must be distinct")
        if not self.factors:
            raise ValidationError("a term needs at least one factor")
        for f in self.factors:
            if len(f) != 2 or f[0] not in names or f[1] not in names:
                raise ValidationError(f"factor {f} uses an undeclared index")
        if self.order < 3:
            raise ValidationError("cumulant weight order must be at least 3")
        used = {i for f in self.factors for i in f}
        if used != set(names):
            raise ValidationError("every summation index must appear in some factor")

    def appearances(self) -> dict[str, int]:
        cnt = {i: 0 for i in self.latin + self.greek}
        for a, b in self.factors:
            cnt[a] += 1
            cnt[b] += 1
        return cnt

    @property
    def unmatched_indices(self) -> tuple[str, ...]:
        return tuple(i for i, c in self.appearances().items() if c % 2)

    @property
    def matched(self) -> bool:
        return not self.unmatched_indices

    @property
    def degree(self) -> int:
        return sum(a != b for a, b in self.factors)

    @property
    def n_indices(self) -> int:
        return len(self.latin) + len(self.greek)


_LGB = dict(latin=("v", "b"), greek=("a",))
TERM_REGISTRY: dict[str, TermSpec] = {
    "example_third": TermSpec("example_third", factors=(("v", "a"), ("b", "v"), ("a", "a"), ("b", "b")),
                              order=3, printed_power=1.5, **_LGB),
    "example_fourth": TermSpec("example_fourth", factors=(("v", "a"), ("a", "v"), ("a", "a"), ("b", "b"), ("b", "b")),
                               order=4, printed_power=1.0, **_LGB),
    "third_1": TermSpec("third_1", factors=(("v", "a"), ("b", "v"), ("a", "a"), ("b", "b")),
                        order=3, printed_power=1.5, **_LGB),
    "third_2": TermSpec("third_2", factors=(("v", "a"), ("a", "v"), ("a", "b"), ("b", "b")),
                        order=3, printed_power=1.5, **_LGB),
    "fourth_1": TermSpec("fourth_1", factors=(("v", "a"), ("a", "v"), ("a", "a"), ("b", "b"), ("b", "b")),
                         order=4, printed_power=1.0, **_LGB),
    "fourth_2": TermSpec("fourth_2", factors=(("v", "b"), ("b", "v"), ("a", "a"), ("a", "a"), ("b", "b")),
                         order=4, printed_power=1.0, **_LGB),
}


def _einsum_term(term: TermSpec, g: np.ndarray, n: int) -> complex:
    """Brute-force evaluation of ``sum_I prod G`` with one einsum."""
    role = {i: LATIN for i in term.latin} | {i: GREEK for i in term.greek}
    letters = {name: chr(ord("a") + k) for k, name in enumerate(term.latin + term.greek)}
    sl = {LATIN: slice(0, n), GREEK: slice(n, None)}
    ops, subs = [], []
    for x, y in term.factors:
        ops.append(g[sl[role[x]], sl[role[y]]])
        subs.append(letters[x] + letters[y])
    return complex(np.einsum(",".join(subs) + "->", *ops, optimize="greedy"))


def _spectral_parts(a: np.ndarray, z: complex):
    """Eigen-data of ``X^T X`` used by the fast evaluators (real ``X``)."""
    lam, v = np.linalg.eigh(a.T @ a)
    y = a @ v
    d = 1.0 / (lam - z)
    v2, y2 = v * v, y * y
    r = v2 @ d
    gdiag = y2 @ d - 1.0
    return v, y, d, v2, y2, r, gdiag


def _fast_sum(name: str, a: np.ndarray, z: complex) -> complex:
    v, y, d, v2, y2, r, g = _spectral_parts(a, z)
    if name in ("third_1", "example_third"):
        return complex(np.sum((v.T @ r) * d * d * (y.T @ g)))
    if name == "third_2":
        w = y2 @ (d * d)
        return complex(np.sum((y.T @ w) * d * (v.T @ r)))
    if name in ("fourth_1", "example_fourth"):
        w = y2 @ (d * d)
        return complex(np.sum(w * g) * np.sum(r * r))
    if name == "fourth_2":
        return complex(np.sum((v2 @ (d * d)) * r) * np.sum(g * g))
    raise KeyError(name)


def evaluate_term(term: TermSpec, x, z, method: str = "auto") -> complex:
    """``N^-#I sum_I prod G`` for one matrix (no cumulant weight).

    ``method="einsum"`` assembles the full Green function; ``"fast"`` uses
    closed spectral formulas available for registry terms and real ``X``.
    """
    a = _entries(x)
    z = _check_z(z)
    n = a.shape[1]
    fast_ok = term.name in TERM_REGISTRY and TERM_REGISTRY[term.name] == term and np.isrealobj(a)
    if method == "auto":
        method = "fast" if fast_ok else "einsum"
    if method == "fast":
        if not fast_ok:
            raise ValidationError("fast evaluation needs a registry term and a real matrix")
        val = _fast_sum(term.name, a, z)
    else:
        val = _einsum_term(term, green_function(a, z).assemble(), n)
    return val / n**term.n_indices


@dataclass
class TermEstimate:
    """Monte Carlo mean of a weighted averaged product.

    ``psi_power`` is ``Psi(z)**degree``, the size predicted by the local
    law; ``printed_scale`` is the conventional extra factor ``N**power``.
    """

    mean: complex
    stderr: float
    psi_power: float
    weight: float
    trials: int
    printed_scale: float


def term_average(term: TermSpec | str, dist, dims: AspectRatio, z, trials: int, master_seed: int = 0,
                 t: float = 0.0, strip_weight: bool = False, method: str = "auto") -> TermEstimate:
    """Estimate ``E[N^-#I sum_I s^(p+1)(t) prod G]`` at flow time ``t``.

    With ``strip_weight`` the cumulant weight is replaced by 1.  A vanishing
    weight gives exactly 0 without sampling.
    """
    if isinstance(term, str):
        if term not in TERM_REGISTRY:
            raise ValidationError(f"unknown term {term!r}")
        term = TERM_REGISTRY[term]
    z = _check_z(z)
    d = get_distribution(dist)
    if d.is_complex:
        raise DomainError("averaged products are evaluated for real entries")
    n = dims.n_cols
    psi = control_psi(z, n, float(dims.rho)) ** term.degree
    scale = float(n**term.printed_power)
    s0 = {3: d.third_cumulant, 4: d.fourth_cumulant}.get(term.order)
    if s0 is None:
        raise ValidationError("registry weights exist for orders 3 and 4")
    weight = 1.0 if strip_weight else s0 * math.exp(-term.order * t / 2)
    if weight == 0.0:
        return TermEstimate(0j, 0.0, float(psi), 0.0, trials, scale)
    if trials < 2:
        raise DomainError("need at least two trials")
    gauss = get_distribution("gaussian")
    vals = np.empty(trials, dtype=complex)
    for k in range(trials):
        rng = trial_stream(master_seed, f"term/{d.name}/{dims.m_rows}x{dims.n_cols}", k)
        x0 = sample_matrix(dims, d, rng)
        x = x0 if t == 0 else flow_matrix(FlowState(x0, sample_matrix(dims, gauss, rng), t))
        vals[k] = evaluate_term(term, x, z, method)
    vals = weight * vals
    se = math.sqrt((np.var(vals.real, ddof=1) + np.var(vals.imag, ddof=1)) / trials)
    return TermEstimate(complex(np.mean(vals)), se, float(psi), weight, trials, scale)


def averaged_ward_constant(g: GreenFunction) -> float:
    """Smallest ``C`` with ``N^-2 sum_ij |G_ij|^2 <= C (Im m / (N eta) + 1/N)``."""
    n = g.n
    lhs = float(np.sum(np.abs(g.assemble()) ** 2)) / n**2
    return lhs / (g.m.imag / (n * g.z.imag) + 1.0 / n)
