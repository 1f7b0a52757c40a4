# coding: utf-8

# # States, partial operations and divergences
#
# Operators are plain numpy arrays. A `SiteStructure` records how the total
# space splits into sites, optionally with an A x B split of every site.

import math

import numpy as np

from qstein.divergences import dmax, dmin, fidelity, rel_entropy, renyi_sandwiched
from qstein.tensor import (SiteStructure, maximally_entangled, partial_trace, partial_transpose,
                           random_density, tensor)

phi = maximally_entangled(2)
bell = np.outer(phi, phi.conj())
print("reduced state of a Bell pair:\n", partial_trace(bell, (2, 2), keep=[0]).real)

# The partial transpose of an entangled pair has a negative eigenvalue.

print("spectrum after transposing B:", np.linalg.eigvalsh(partial_transpose(bell, [1], (2, 2))))

# Two bipartite sites, laid out as (A1 B1)(A2 B2).

s = SiteStructure.bipartite(2, 2, n=2)
print("two-site structure:", s.dims, s.bipartition, "total dimension", s.total)

# ## Divergences (natural logarithms throughout)

rho, sigma = random_density(2, seed=1), random_density(2, seed=2)
print(f"D(rho||sigma)       = {rel_entropy(rho, sigma):.6f}")
print(f"D_min(rho||sigma)   = {dmin(rho, sigma):.6f}")
print(f"D_max(rho||sigma)   = {dmax(rho, sigma):.6f}")
for alpha in (1.01, 2.0, 10.0, 100.0):
    print(f"sandwiched Renyi a={alpha:<6} {renyi_sandwiched(rho, sigma, alpha):.6f}")

# The sandwiched family increases in alpha, from D near 1 up to D_max.
# Relative entropy is additive on tensor powers:

print("D on three copies / 3:", rel_entropy(tensor([rho] * 3), tensor([sigma] * 3)) / 3)
print("fidelity:", fidelity(rho, sigma), " a state with itself:", fidelity(rho, rho))
print("D(rho||I/2) = log 2 - S(rho):", rel_entropy(rho, np.eye(2) / 2),
      math.log(2) + np.sum(np.log(np.linalg.eigvalsh(rho)) * np.linalg.eigvalsh(rho)))
