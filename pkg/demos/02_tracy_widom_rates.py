"""
Largest eigenvalue fluctuations and the speed of convergence
============================================================

A reduced version of the rate experiments; the acceptance suite runs the
full trial counts.
"""
# %%
import numpy as np

from twlab.edge_stats import ks_noise_floor, ks_sup, rate_fit
from twlab.ensembles import rescale_largest, sample_largest
from twlab.mp_law import AspectRatio
from twlab.tracy_widom import tw_cdf, tw_quantile

print("TW1 median", tw_quantile(0.5, 1), " TW2 median", tw_quantile(0.5, 2))

# %%
# Gaussian data via the tridiagonal sampler, both centerings.
cdf = lambda r: tw_cdf(np.clip(r, -10, 8), 1)  # noqa: E731
trials = 20_000
n_list = [25, 50, 100, 200]
for variant in ("paper", "ma"):
    ks = []
    for n in n_list:
        dims = AspectRatio(2 * n, n)
        r = rescale_largest(sample_largest(dims, "gaussian", trials, 3), dims, variant)
        ks.append(ks_sup(r, cdf))
    print(variant, "KS:", np.round(ks, 4), " noise floor", round(ks_noise_floor(trials), 4))
    try:
        fit = rate_fit(n_list, ks, [ks_noise_floor(trials)] * len(ks))
        print(f"  slope {fit.slope:.3f}  95% interval {np.round(fit.slope_ci, 3)}")
    except Exception as e:  # the noise gate refuses fits it cannot support
        print("  no fit:", e)
