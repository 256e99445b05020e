"""
Eigenvalues of nonsymmetric random matrices
===========================================

Ginibre rows against rows drawn uniformly from the sphere of radius sqrt(n).
The entries of a sphere row are dependent, yet both spectra fill the unit
disk once the matrix is scaled by 1/sqrt(n).

Run with ``python3 demos/01_spectra.py``.
"""

# %%
import numpy as np

from circlaw.ensembles import EnsembleSpec, sample_matrix
from circlaw.spectra import (
    circular_law_distance,
    esd_distance,
    mp_ks,
    polar_grid_discrepancy,
    shifted_gram,
    spectral_sample,
)

n = 512
specs = {"ginibre": EnsembleSpec("ginibre", seed=1), "sphere_rows": EnsembleSpec("sphere_rows", seed=1)}

# %% [markdown]
# Radial and angular KS distances to the uniform disk law.

# %%
eigs = {}
for name, spec in specs.items():
    eigs[name] = spectral_sample(sample_matrix(spec, n).entries).eigenvalues
    d = circular_law_distance(eigs[name])
    print(f"{name:12s} radial KS {d['radial_ks']:.4f}  angular KS {d['angular_ks']:.4f}  "
          f"polar grid {polar_grid_discrepancy(eigs[name]):.4f}  max |lambda| {np.abs(eigs[name]).max():.3f}")

# %% [markdown]
# A crude text histogram of |lambda|^2, which should be flat on [0, 1].

# %%
counts, edges = np.histogram(np.abs(eigs["sphere_rows"]) ** 2, bins=10, range=(0, 1.2))
for c, lo in zip(counts, edges):
    print(f"{lo:4.2f} {'#' * (c // 4)}")

# %% [markdown]
# Squared singular values of A/sqrt(n) follow the Marchenko-Pastur law with
# y = 1, and the shifted Gram matrices of the two ensembles agree.

# %%
for name, spec in specs.items():
    A = sample_matrix(spec, n).entries
    print(f"{name:12s} MP KS {mp_ks(np.linalg.eigvalsh(A @ A.T / n), 1.0):.4f}")

z = 0.5 + 0.5j
H = [np.linalg.eigvalsh(shifted_gram(sample_matrix(s, n).entries, z)) for s in specs.values()]
print(f"shifted Gram ESD distance at z={z}: {esd_distance(*H):.4f}")
