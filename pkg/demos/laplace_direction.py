# %% [markdown]
# # Picking a direction for a two-dimensional Laplace vector
#
# For a random vector, a one-bit quantizer projects onto a unit direction q
# and quantizes the scalar <q, X>.  With two i.i.d. Laplace coordinates the
# diagonal beats the axes, because the sum of two Laplace variables is closer
# to Gaussian and so more amenable.

# %%
import math

import numpy as np

from onebit import direction_search as ds
from onebit import sources
from onebit.rng import stream

src = ds.iid_laplace(2, 1.0)
diag = ds.UnitDirection(np.array([1.0, 1.0]) / math.sqrt(2))
axis = ds.UnitDirection(np.array([1.0, 0.0]))

print("E|<q,X>| on the diagonal:", sources.abs_mean(src.analytic_projection(diag.coords)), 3 / (2 * math.sqrt(2)))
print("vardrop diagonal:", ds.vardrop_along(src, diag))
print("vardrop axis:    ", ds.vardrop_along(src, axis))

# %% [markdown]
# A grid over angles in [0, pi) using samples only.

# %%
res = ds.grid_search_2d(src, 180, 200_000, stream(20220101, 3), estimator="empirical")
print("best angle (deg):", math.degrees(res.best_direction.angle))
angles = np.array([d.angle for d, _ in res.trace])
vals = np.array([v for _, v in res.trace])
for a in range(0, 180, 15):
    i = int(np.argmin(np.abs(np.degrees(angles) - a)))
    print(f"{a:4d} deg  {vals[i]:.4f}  " + "#" * int(60 * (vals[i] - vals.min()) / np.ptp(vals)))

# %% [markdown]
# Gradient ascent on the sphere reaches the same place from a random start.

# %%
asc = ds.ascent_search(src, n=50_000, rng=stream(20220101, 4), estimator="empirical")
print("ascent angle (deg):", math.degrees(asc.best_direction.angle), asc.status)
