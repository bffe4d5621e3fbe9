"""
Bulk spectrum, Stieltjes transform and the local law at the upper edge
======================================================================

Run with ``python3 demos/01_spectrum_and_local_law.py``.
"""
# %%
# The limiting spectral law of X*X for M = 2N lives on [E-, E+].
import numpy as np

from twlab.ensembles import gram_eigenvalues, sample_matrix
from twlab.green import local_law_residual, rigidity_check
from twlab.mp_law import AspectRatio, MPModel, mp_cdf, stieltjes_mp
from twlab.streams import trial_stream

model = MPModel(2.0)
print(f"edges: E- = {model.e_minus:.6f}, E+ = {model.e_plus:.6f}")

# %%
# Compare the empirical distribution of one Rademacher sample with the limit.
n = 400
dims = AspectRatio(2 * n, n)
lam = gram_eigenvalues(sample_matrix(dims, "rademacher", trial_stream(1, "demo/spectrum", 0)))
grid = np.linspace(model.e_minus, model.e_plus, 9)
emp = np.searchsorted(lam, grid, side="right") / n
for x, e, f in zip(grid, emp, mp_cdf(grid, 2.0)):
    print(f"x={x:7.4f}  empirical={e:.4f}  limit={f:.4f}")

# %%
# The normalized trace follows m(z) down to eta just above 1/N.
for eta_exp in (0.5, 0.75, 0.9):
    z = complex(model.e_plus, n**-eta_exp)
    r = local_law_residual(dims, z, eigs=lam)
    print(f"eta=N^-{eta_exp}: |m_N - m| = {r.trace_residual:.2e}, N eta |m_N - m| = {r.trace_ratio:.3f}")
print("m at E+ + i/N:", stieltjes_mp(complex(model.e_plus, 1 / n), 2.0))

# %%
# Eigenvalues sit near their classical locations on the scale N^(-2/3) j^(-1/3).
rep = rigidity_check(lam, model)
print(f"max rescaled deviation {rep.max_rescaled:.2f}, worst counting error {rep.counting_max:.2f}")
