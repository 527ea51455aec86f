# A trend that flips when you split the data
# ==========================================
#
# Three groups each slope downward, but groups further right sit higher.
# Pooled, the trend points up. The per-component coefficient report flags
# the components whose sign disagrees with the pooled fit.

# %%
import numpy as np

from dogr import Dataset, FitConfig, coefficient_report, fit, radar_export, wls_fit

rng = np.random.default_rng(8)
xs, ys = [], []
for cx, b0 in [(0.0, 0.0), (10.0, 30.0), (20.0, 60.0)]:
    x = cx + rng.normal(size=200)
    xs.append(x)
    ys.append(b0 - x + 0.3 * rng.normal(size=200))
d = Dataset(np.concatenate(xs)[:, None], np.concatenate(ys), ("x",))

# %%
pooled = wls_fit(d.features, d.outcome, np.ones(d.n))
print("pooled slope:", pooled.coefficients[1])

# %%
m = fit(d, FitConfig(n_components=3, seed=1, n_restarts=3))
(rep,) = coefficient_report(m, pooled)
for row in rep.per_component:
    print(f"component {row.component}: beta={row.beta:+.3f}  p={row.p_value:.2g}  reversal={row.reversal_flag}")

# %% [markdown]
# The radar export scales each component mean by the largest mean for that
# feature, which is handy for comparing component profiles.

# %%
for c in radar_export(m)["components"]:
    print(c)
