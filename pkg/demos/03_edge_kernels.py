"""
Correlation kernels near the soft edge
======================================
"""
# %%
import numpy as np

from twlab.kernels import KernelContext, airy_kernel, edge_kernel, kernel_rate_experiment, loe_limit_kernel

# %%
# The rescaled complex kernel approaches the Airy kernel.
for n in (25, 100, 400):
    c = KernelContext.from_dims(n, 2 * n, 2)
    print(f"N={n:4d}  K_edge(0,0)={edge_kernel(c, 0.0, 0.0):.6f}  K_Airy(0,0)={airy_kernel(0.0, 0.0):.6f}")

# %%
# The error decays roughly like N^(-1/3) for both symmetry classes.
for beta in (2, 1):
    rep = kernel_rate_experiment(beta, [20, 40, 80, 160])
    print(f"beta={beta}: sup errors {np.round(rep.sup_err, 5)}  slope {rep.slope:.3f}")
print("orthogonal limit at the origin", loe_limit_kernel(0.0, 0.0))
