"""
How likely is a random row to sit near a subspace?
==================================================

The tube functional |f|_{W, delta, 1} averages a row density over the
delta-neighbourhood of a subspace W.  It is bounded for smooth laws, blows up
for laws concentrated near a hyperplane, and is only an average for atomic
laws, which can put mass far closer to W than any lattice spacing suggests.
"""

# %%
import numpy as np

from circlaw.assumptions import sigma_min_experiment
from circlaw.ensembles import EnsembleSpec, sample_rows
from circlaw.geometry import orthonormalize
from circlaw.norms import (
    distinguished_subspace,
    estimate_norm_d_delta,
    estimate_norm_fixed_W,
    norm_d_delta_2,
    radial_example_closed_form,
    scan_family,
)

# %% [markdown]
# A radial law with a power singularity at the subspace has a closed form.

# %%
for n, d, alpha in [(4, 1, 1.0), (6, 2, 2.0), (8, 1, 0.5)]:
    spec = EnsembleSpec("radial_example", d=d, alpha=alpha, seed=5)
    est = estimate_norm_fixed_W(spec, distinguished_subspace(n, d), d, 0.1, 400_000)
    print(f"n={n} d={d} alpha={alpha}: MC {est.probability:.4f} +/- {est.standard_error * 0.2:.4f}, "
          f"closed form {radial_example_closed_form(n, d, alpha, 0.1):.4f}")

# %% [markdown]
# For Gaussian rows the functional does not depend on W at all.

# %%
est = estimate_norm_d_delta(EnsembleSpec("ginibre", seed=6), 8, 1, 0.05, 30, 5000)
print(f"Gaussian, W spanned by rows: {est.value:.4f} +/- {est.standard_error:.4f}; "
      f"radial bound {norm_d_delta_2(EnsembleSpec('ginibre'), 8, 1, 0.05)['value']:.4f}")

# %% [markdown]
# A slab law of width eps gives a value near 1/(2 eps).

# %%
scan = scan_family(lambda e: EnsembleSpec("slab", eps=e, seed=7), [0.4, 0.2, 0.1, 0.05], 8, 1, 0.01, 20000)
print(f"slab family: log-log slope {scan['slope']:.2f}, unbounded = {scan['unbounded']}")

# %% [markdown]
# {0, 1} rows: distances to a hyperplane spanned by 15 other rows.

# %%
n, rng = 16, np.random.default_rng(8)
spec = EnsembleSpec("bernoulli01")
dist = []
for _ in range(100):
    V = orthonormalize(sample_rows(spec, n, n - 1, rng), n)
    if V.dim == n - 1:
        dist.append(np.abs(sample_rows(spec, n, 500, rng) @ V.complement().basis[0]))
dist = np.concatenate(dist)
pos = dist[dist > 1e-9]
print(f"exact hits {np.mean(dist <= 1e-9):.4f}; within 1/(2n) but nonzero {np.mean((dist > 1e-9) & (dist <= 1 / (2 * n))):.4f}; "
      f"smallest positive distance {pos.min():.2e}")

# %% [markdown]
# Least singular value against the threshold n^(-5/2)/log n.

# %%
for kind in ("ginibre", "sphere_rows"):
    r = sigma_min_experiment(EnsembleSpec(kind, seed=9), [64], 100, delta_grid=[1e-4, 1e-3, 1e-2])[0]
    print(f"{kind:12s} min sigma {r['sigma_min_min']:.2e}  threshold {r['threshold']:.2e}  "
          f"violations {r['violations']}  tail bound holds {r['bound_holds']}")
    for t in r["tail"]:
        print(f"    delta={t['delta']:.0e}: P(sigma <= delta) = {t['p_emp']:.3f}, bound {t['bound']:.3f}")
