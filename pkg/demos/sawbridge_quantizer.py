# %% [markdown]
# # One bit for the stationary sawbridge
#
# Sawbridge paths are ramps of slope 1 with a single unit drop at a uniform
# location, shifted so the process is stationary on the circle.  The best
# one-bit quantizer just looks at the sign of the path average (its DC part)
# and reconstructs a constant +-1/4.

# %%
import numpy as np

from onebit import sawbridge as saw
from onebit import scalar_quant as sq
from onebit.rng import stream

n = 1024
rng = stream(20220101, 5)
u, v = saw.random_draws(rng, 4)
paths = saw.stationary_paths(u, v, n)
print("path means:", np.round(paths.mean(axis=1), 3), " bits:", saw.optimal_bits(paths))

# %% [markdown]
# The covariance kernel is circulant.  Its top eigenvalue is 1/12 (the DC
# mode); the rest come in pairs 1/(4 pi^2 k^2).

# %%
w = saw.discrete_eigs(n, 5)
print("discrete:", w)
print("exact:   ", [saw.kl_eigenvalue(k) for k in range(1, 6)])
print("trace:", np.trace(saw.kernel_matrix(n)), "vs 1/6")

# %% [markdown]
# The DC component is uniform on [-1/2, 1/2], so its best quantizer removes
# 1/16 of the energy, leaving MSE 1/6 - 1/16 = 5/48.

# %%
r = sq.vardrop_sweep(saw.dc_source())
print(r.quantizer, "vardrop", r.vardrop)
mean, se = saw.mc_mse(50_000, n, stream(20220101, 5, 1))
print(f"Monte Carlo MSE {mean:.5f} +- {se:.5f}   exact {5 / 48:.5f}")

# %% [markdown]
# Mixing in AC content never helps: any other direction loses to the DC one.

# %%
rep = saw.verify_theta_regimes(50, 20_000, stream(20220101, 5, 2), k_max=8, n=n)
for c in rep["checks"]:
    print(c["statistic"], c["value"], "pass" if c["pass"] else "FAIL")
