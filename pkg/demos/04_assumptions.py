"""
Screening ensembles for the moment and correlation conditions
=============================================================

Each check returns a statistic per n and a verdict.  Exact answers come from
the covariance oracle where one exists.
"""

# %%
from circlaw.assumptions import check_a1, check_a2_order1, check_a2_order_k, check_a3
from circlaw.ensembles import EnsembleSpec

ensembles = {
    "ginibre": EnsembleSpec("ginibre", seed=1),
    "sphere_rows": EnsembleSpec("sphere_rows", seed=1),
    "bernoulli_pm": EnsembleSpec("bernoulli_pm", seed=1),
    "AR(1) rho=0.5": EnsembleSpec("correlated_gaussian", rho=0.5, seed=1),
    "whitened AR(1)": EnsembleSpec("correlated_bernoulli_pm", rho=0.5, whiten=True, seed=1),
    "bernoulli01": EnsembleSpec("bernoulli01", seed=1),
    "2x scaled": EnsembleSpec("ginibre", scale=2.0, seed=1),
}

# %%
print(f"{'ensemble':16s} {'A1 (k=4)':22s} {'A2 order 1':22s} {'A3':22s}")
for name, spec in ensembles.items():
    a1 = check_a1(spec, 4, [32, 128], 4)
    a2 = check_a2_order1(spec, [64, 256])
    a3 = check_a3(spec, [64, 256], 0.5, 2)
    print(f"{name:16s} {a1.verdict:22s} {a2.verdict:22s} {a3.verdict:22s}")

# %% [markdown]
# Second order correlations: zero for Gaussian rows, positive once the
# entries are given a common shift.

# %%
for name, spec in [("ginibre", EnsembleSpec("ginibre")), ("shift 0.5", EnsembleSpec("ginibre", shift=0.5))]:
    r = check_a2_order_k(spec, 32, trials=40)
    print(f"{name:10s} statistic {r.statistic[0]:8.4f} +/- {r.se[0]:.4f}  {r.verdict}")
