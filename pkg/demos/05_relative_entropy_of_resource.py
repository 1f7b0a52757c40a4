# coding: utf-8

# # Relative entropy of entanglement over the PPT set
#
# `ree_frank_wolfe` returns a value together with a Frank-Wolfe gap, so that
# `value - gap` is a certified lower bound.

import math

import numpy as np

from qstein.resource import (PPTSet, continuity_bound, continuity_check, is_member,
                             ree_frank_wolfe, regularized_sequence, smoothing_channel)
from qstein.tensor import maximally_entangled, random_density

ppt = PPTSet.qubits(1)
phi = maximally_entangled(2)
bell = np.outer(phi, phi.conj())
res = ree_frank_wolfe(bell, ppt)
print(f"Bell pair: {res.value:.8f} (log 2 = {math.log(2):.8f}), gap {res.gap:.1e}")
print("optimizer is PPT:", is_member(ppt, res.sigma, tol=1e-8))

# Isotropic states have a closed form to compare with.

for F in (0.4, 0.7, 0.9):
    P = bell
    rho = F * P + (1 - F) * (np.eye(4) - P) / 3
    closed = math.log(2) + F * math.log(F) + (1 - F) * math.log(1 - F) if F > 0.5 else 0.0
    print(f"F={F}: computed {ree_frank_wolfe(rho, ppt).value:.6f}, closed form {closed:.6f}")

# ## Continuity in the Wasserstein distance

rho = random_density(4, seed=9)
rho2 = 0.85 * rho + 0.15 * bell
print(continuity_check(rho, rho2, ppt, ppt.sites))
print("bound at eps=0.1, d=4, lambda_min=1/4:", continuity_bound(0.1, 4, 0.25))

# The smoothing channel mixes every site towards I/4 and keeps PPT states PPT.

two = PPTSet.qubits(2)
member = np.kron(np.eye(4) / 4, np.kron(random_density(2, seed=1), random_density(2, seed=2)))
print("still PPT after smoothing:", is_member(two, smoothing_channel(0.5, two.omega, two.sites)(member)))

# Per-copy values on one and two copies of a Bell pair:

for n, v, best in regularized_sequence(bell, PPTSet.qubits, 2):
    print(f"n={n} value/n={v:.6f} running inf={best:.6f}")
