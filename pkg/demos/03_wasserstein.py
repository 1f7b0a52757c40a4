# coding: utf-8

# # Order-1 Wasserstein distance between many-qubit states
#
# The distance is a semidefinite program; for permutation-invariant inputs the
# program is reduced to the symmetric sector automatically.

import numpy as np

from qstein.tensor import random_density, tensor
from qstein.wasserstein import w1_bracket, w1_distance, w1_upper_bound_telescope

a, b = random_density(2, seed=5), random_density(2, seed=6)
w1, cert = w1_distance(a, b, (2,))
print("one site: W1 =", w1, " half trace distance =", np.abs(np.linalg.eigvalsh(a - b)).sum() / 2)

# States that differ on one site are at distance at most one, whatever the number of sites.

c = random_density(2, seed=7)
w1, _ = w1_distance(tensor([a, c, c]), tensor([b, c, c]), (2, 2, 2))
print("three sites, one changed:", w1)

# Between tensor powers the distance grows linearly.

for n in (1, 2, 3, 4):
    w1, _ = w1_distance(tensor([a] * n), tensor([b] * n), (2,) * n)
    print(f"n={n} W1/n = {w1 / n:.6f}")

# Beyond the exact limit a cheap bracket is available. The telescope bound
# compares an n-site state with a tensor power of a single-site state.

x, y = tensor([a] * 3), tensor([b] * 3)
print("bracket:", w1_bracket(x, y, (2, 2, 2), sigma=b), " telescope:", w1_upper_bound_telescope(x, b, (2, 2, 2)))
