# coding: utf-8

# # Almost-iid states
#
# An almost-iid state on n sites lives in the span of product vectors that
# differ from a reference vector theta on at most r sites.

import math

import numpy as np

from qstein.almostiid import (almost_iid_basis, dmax_pinched_vs_iid, pinch_to_blocks,
                              random_ensemble, rotation_unitary, sym_projector_rank,
                              sym_subspace_projector)
from qstein.tensor import canonical_purification, random_density, random_pure, tensor
from qstein.wasserstein import w1_distance

sigma = random_density(2, seed=8)
theta = canonical_purification(sigma)          # a vector on A x E
vectors, labels = almost_iid_basis(theta, 4, 1)
print("basis size for n=4, r=1:", len(labels), labels[:3])

# A random ensemble: Wishart coefficients on that basis, averaged over site permutations.

for n in (3, 4, 5):
    for r in (0, 1, 2):
        e = random_ensemble(theta, (2, 2), n, r, seed=10 * n + r)
        w1, _ = w1_distance(e.marginal_a(), tensor([sigma] * n), (2,) * n)
        print(f"n={n} r={r}  W1/n={w1 / n:.4f}  2 sqrt(r/n)={2 * math.sqrt(r / n):.4f}")

# ## Pinching
#
# Dropping the off-diagonal coefficients costs at most the basis size as an operator factor.

e = random_ensemble(theta, (2, 2), 4, 1, seed=1)
pinched, card = pinch_to_blocks(e)
print("min eig of |T| pinched - state:", np.linalg.eigvalsh(card * pinched - e.state)[0])
lam = np.linalg.eigvalsh(sigma)[0]
print("pinched D_max / n:", dmax_pinched_vs_iid(e, sigma), " defect bound:", e.r / e.n * math.log(1 / lam))

# ## Symmetric subspace projectors and rotations

P = sym_subspace_projector(random_pure(3, seed=2), 3, 1)
print("rank:", round(np.trace(P).real), " type count:", sym_projector_rank(3, 3, 1))
xi, th = random_pure(3, seed=3), random_pure(3, seed=4)
U = rotation_unitary(xi, th)
print("|U xi - theta| =", np.abs(U @ xi - th).max())
