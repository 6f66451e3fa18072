# %% [markdown]
# How much the variance bound shrinks
#
# psi(gamma, N) multiplies the single-step bound on Q variance.  It equals one
# for N=1 and falls towards (1-gamma)/(1+gamma) as the window grows.

# %%
from lnss.variance import psi, psi_limit, psi_table

for gamma in (0.9, 0.99, 0.999):
    row = "  ".join(f"N={N}: {psi(gamma, N):.4f}" for N in (1, 5, 20, 50, 100, 500))
    print(f"gamma={gamma}  {row}  limit={psi_limit(gamma):.5f}")

# %% [markdown]
# A crude text plot of the curve for gamma=0.99.

# %%
table = [p for g, N, p in psi_table([0.99], 200)]
for N in (1, 2, 5, 10, 20, 50, 100, 200):
    bar = "#" * int(round(60 * table[N - 1]))
    print(f"{N:4d} {table[N - 1]:.4f} {bar}")

# %% [markdown]
# Going from N=1 to N=100 shrinks the factor about ninety-fold; doubling again
# to N=200 buys less than another factor of two.

# %%
print(f"psi(100)/psi(200) = {table[99] / table[199]:.3f}")
