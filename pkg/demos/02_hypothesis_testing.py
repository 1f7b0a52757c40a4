# coding: utf-8

# # Hypothesis testing
#
# `dh(rho, sigma, eps)` is -log of the smallest type-II error `tr[sigma M]`
# over tests with type-I error `tr[rho (I - M)] <= eps`.

import math

import numpy as np

from qstein.hyptest import (beta_eps, buscemi_sandwich_check, dh, dh_classical_iid, dh_sdp,
                            smooth_dmax)
from qstein.tensor import random_density, tensor

rho, sigma = random_density(2, seed=3), random_density(2, seed=4)
beta, test = beta_eps(rho, sigma, 0.2)
print("optimal type-II error:", beta)
print("type-I error of the returned test:", 1 - np.vdot(rho, test).real)

# The same number from the semidefinite program over tests:

print("Neyman-Pearson route:", dh(rho, sigma, 0.2), " SDP route:", dh_sdp(rho, sigma, 0.2))

# ## Many copies
#
# For commuting pairs the optimal test only depends on type classes, so large n is cheap.

p, q = [0.7, 0.3], [0.4, 0.6]
target = sum(a * math.log(a / b) for a, b in zip(p, q))
for n in (10, 100, 1000, 10000):
    v = dh_classical_iid(p, q, n, 0.5) / n
    print(f"n={n:<6} dh/n={v:.6f}  gap to D={v - target:+.6f}")

# Non-commuting pairs form the tensor power explicitly.

for n in (1, 2, 4, 6):
    print(f"n={n} dh/n={dh(tensor([rho] * n), tensor([sigma] * n), 0.3) / n:.6f}")

# ## Smooth max-relative entropy
#
# Both sides of the sandwich between D_H and smooth D_max are checked together.

print("smooth D_max at 0.3:", smooth_dmax(rho, sigma, 0.3))
rep = buscemi_sandwich_check(rho, sigma, 0.1, 0.1)
print({k: round(v, 6) if isinstance(v, float) else v for k, v in rep.items()})
