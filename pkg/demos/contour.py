# %% [markdown]
# # What the optimal bit looks like over the draw (U, V)
#
# Each stationary sawbridge path is fixed by a drop location U and a shift V.
# The optimal bit depends on U alone: it is 1 exactly when U > 1/2.

# %%
import numpy as np

from onebit import harness

u, v, bits = harness.contour_matrix(32, 512)
for i in range(0, 32, 2):
    print(f"u={u[i]:.3f}  " + "".join("#" if b else "." for b in bits[i]))

expected = np.repeat((u > 0.5)[:, None], bits.shape[1], axis=1)
print("mismatches against the U > 1/2 rule:", int(np.sum(bits != expected)))
