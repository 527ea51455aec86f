# Choosing the number of components with BIC
# ==========================================

# %%
import numpy as np

from dogr import Dataset, FitConfig, SyntheticSpec, generate_synthetic, sweep

d = generate_synthetic(SyntheticSpec(seed=100))
res = sweep(d, range(1, 5), FitConfig(seed=0))
for row in res.table():
    print(row)
print("best K on two-line data:", res.best_k)

# %% [markdown]
# On data from a single line, the extra parameters of larger K are not worth
# their penalty.

# %%
rng = np.random.default_rng(300)
X = rng.normal(size=(500, 2))
lin = Dataset(X, 1.0 + X @ [2.0, -1.0] + rng.normal(size=500), ("a", "b"))
print("best K on one-line data:", sweep(lin, range(1, 5), FitConfig(seed=0)).best_k)
