# coding: utf-8

# # Batch experiments and CSV output
#
# Every experiment returns rows (dicts); `write_rows` stamps them with the
# configuration hash and seed so that reruns can be compared byte for byte.
# The same experiments are available from the command line, e.g.
#
#     qstein stein --p 0.7,0.3 --q 0.4,0.6 --eps 0.5 --n 100,1000 --out stein.csv
#     qstein schedule --check-trend

import tempfile
from pathlib import Path

import numpy as np

from qstein.lab import (ExperimentConfig, gsl_converse_check, robust_stein_table, schedule_eval,
                        stein_table, superadd_table, write_rows)
from qstein.resource import PPTSet
from qstein.tensor import maximally_entangled, random_density

p, q = np.diag([0.7, 0.3]), np.diag([0.4, 0.6])
rows = stein_table(p, q, 0.5, [10, 100, 1000, 10000])
for r in rows:
    print(r["n"], r["path"], round(r["dh_per_n"], 6), round(r["gap"], 6))

out = Path(tempfile.mkdtemp()) / "stein.csv"
write_rows(rows, out, ExperimentConfig("stein", eps=0.5, n_grid=[10, 100, 1000, 10000]))
print(out.read_text().splitlines()[0])

# ## Sampled almost-iid pairs
#
# Each row carries the sampled dh/n, the iid value and a lower-bound chain built
# from smooth D_max, the defect term and the basis size.

rho, sigma = random_density(2, seed=11), random_density(2, seed=12)
for r in robust_stein_table(rho, sigma, 0.3, [2, 3, 4], seeds=[0, 1]):
    print(r["n"], r["seed"], round(r["dh_per_n"], 4), round(r["iid_dh_per_n"], 4),
          round(r["chain_lower"], 4), r["pass"])

# ## Converse with sandwiched Renyi divergences

phi = maximally_entangled(2)
rep = gsl_converse_check(np.outer(phi, phi.conj()), PPTSet.qubits(1), 0.3, 1)
print("tightest alpha:", rep["tightest_alpha"], "dh:", rep["dh_per_n"], "bound:", rep["tightest_rhs"])

# ## Proof-parameter schedules
#
# With r = ceil(n^(2/3)) the exponent grows with n over this range, so xi_n
# does not decrease; the trend statistic reports it.

rep = schedule_eval([10**3, 10**4, 10**5, 10**6], "two-thirds", 0.1, 2)
for r in rep.rows:
    print(r["n"], r["r"], round(r["exponent"], 1), r["admissible"])
print(rep.trend())

# ## Two copies with equal marginals
#
# Crossed-pair states have maximally mixed single-copy marginals, yet are
# entangled across the two-copy cut once p exceeds 1/5.

for r in superadd_table(range(4)):
    print(f"p={r['p']:.3f} half REE2={r['half_ree2']:.4f} REE1={round(r['ree1'], 4) + 0.0:.4f} "
          f"holds={r['pass']}")
