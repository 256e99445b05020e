"""
Moments of the shifted Gram matrix
==================================

The k-th moment of H_n(z) tends to a polynomial in |z|^2 with integer
coefficients.  They are counted here by enumerating closed walk graphs up to
relabelling, then checked against a brute force count and against simulation.
"""

# %%
import time

from circlaw.ensembles import EnsembleSpec
from circlaw.moments import (
    GammaTree,
    brute_force_moment_polynomial,
    catalan,
    class_table,
    empirical_trace_moments,
    moment_polynomial,
    xi_n_estimate,
)

# %%
for k in range(1, 7):
    t0 = time.perf_counter()
    p = moment_polynomial(k)
    print(f"k={k}  coefficients {p.coefficients}  Catalan {catalan(k)}  ({time.perf_counter() - t0:.2f}s)")

# %% [markdown]
# The brute force count scans every index pair and is only feasible for k <= 4.

# %%
for k in range(1, 5):
    assert brute_force_moment_polynomial(k) == moment_polynomial(k)
print("brute force agrees for k <= 4")

# %% [markdown]
# Classes grouped by number of skew edges S and up edges.

# %%
print("k  S  UP  count")
for row in class_table(3):
    print("%d %2d %3d %6d" % row)

# %% [markdown]
# Simulation at n = 256 for a Gaussian and a dependent ensemble.

# %%
for kind in ("ginibre", "sphere_rows"):
    spec = EnsembleSpec(kind, seed=3)
    for z in (0.0, 0.5):
        emp = empirical_trace_moments(spec, 256, range(1, 5), z, 10)
        line = "  ".join(f"k={k}: {m:7.3f} vs {moment_polynomial(k)(z * z):7.3f}" for k, (m, _) in emp.items())
        print(f"{kind:12s} z={z}: {line}")

# %% [markdown]
# The normalised tree sum for a path with three edges creeps towards 1.

# %%
path = GammaTree(4, ((0, 1), (2, 1), (2, 3)))
for n in (32, 64, 128, 256):
    r = xi_n_estimate(path, EnsembleSpec("ginibre", seed=4), n, 10)
    print(f"n={n:4d}  xi = {r['mean']:.4f} +/- {r['se']:.4f}")
