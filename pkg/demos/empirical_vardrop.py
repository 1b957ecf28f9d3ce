# %% [markdown]
# # Variance drop from a data file
#
# Given samples in a one-column CSV, sweep every threshold and report the
# best one-bit quantizer with a standard error on the drop.

# %%
import tempfile
from pathlib import Path

import numpy as np

from onebit import harness
from onebit.rng import stream

x = stream(7).laplace(size=100_000)
path = Path(tempfile.mkdtemp()) / "laplace.csv"
np.savetxt(path, x, header="value", comments="")

# %% [markdown]
# Same thing the CLI does with
# `python3 -m onebit empirical-vardrop --input laplace.csv`.

# %%
cfg = harness.ExperimentConfig("empirical-vardrop", params={"input": str(path), "min_cell": 8})
rep = harness.cmd_empirical_vardrop(cfg)
for k in ("count", "variance", "vardrop", "vardrop_se", "threshold", "recons", "zeta_empirical"):
    print(f"{k:>15}: {rep[k]}")
print("Laplace zeta is 1/2")
