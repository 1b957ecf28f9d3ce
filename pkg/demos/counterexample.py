# %% [markdown]
# # The best one-bit quantizer need not be symmetric
#
# Three equally likely atoms at -1, 0, 1.  The source is symmetric, yet the
# optimal quantizer groups {0, 1} together and beats every symmetric one.

# %%
from onebit import scalar_quant as sq
from onebit import sources

three = sources.discrete([(-1.0, 1 / 3), (0.0, 1 / 3), (1.0, 1 / 3)])

best = sq.vardrop_sweep(three)
sym = sq.best_symmetric(three)
print("unconstrained:", best.quantizer, "mse", best.mse)   # 1/6
print("symmetric:    ", sym.quantizer, "mse", sym.mse)      # 2/9

# %% [markdown]
# The mirror image quantizer is just as good, so the optimum is not unique.

# %%
mirrored = sq.reflect(best.quantizer)
print(mirrored, sq.mse(three, mirrored))

# %% [markdown]
# Exhaustive search over every split of the atoms agrees, in exact arithmetic.

# %%
err, upper, lo, hi = sq.brute_force_discrete(three)
print("brute force:", err, sorted(upper), lo, hi)

# %% [markdown]
# Lloyd iterations land in either optimum depending on where they start.

# %%
for w0 in (-0.25, 0.25):
    q = sq.lloyd_max(three, w0)
    print(f"start {w0:+.2f} ->", q)
