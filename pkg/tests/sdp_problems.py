"""Random SDPs that are strictly feasible on both sides by construction."""
import numpy as np

from qstein import sdp


def random_hermitian(d, rng):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (g + g.conj().T) / 2


def random_pd(d, rng):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return g @ g.conj().T / d + 0.1 * np.eye(d)


def random_feasible_problem(seed, max_dim=32, max_blocks=3, max_m=24):
    """b = A(X0) and C = S0 + A^*(y0) with X0, S0 positive definite."""
    rng = np.random.default_rng(seed)
    nblocks = int(rng.integers(1, max_blocks + 1))
    dims = [int(rng.integers(1, max_dim + 1)) for _ in range(nblocks)]
    m = int(rng.integers(1, max_m + 1))
    F = [np.array([random_hermitian(d, rng) for _ in range(m)]) for d in dims]
    X0 = [random_pd(d, rng) for d in dims]
    S0 = [random_pd(d, rng) for d in dims]
    y0 = rng.standard_normal(m)
    b = sum(np.einsum("kij,ji->k", f, x).real for f, x in zip(F, X0))
    C = [s + np.tensordot(y0, f, axes=1) for s, f in zip(S0, F)]
    return sdp.lmi_problem(b, list(zip(C, F))), F


def certify(p, F, sol):
    """Independent residuals, gap and cone membership of a returned solution."""
    X, y = sol.X, sol.y
    ax = sum(np.einsum("kij,ji->k", f, x).real for f, x in zip(F, X))
    primal_res = np.linalg.norm(ax - p.b) / (1 + np.linalg.norm(p.b))
    S = [c - np.tensordot(y, f, axes=1) for c, f in zip(p.C, F)]
    pobj = sum(np.vdot(c, x).real for c, x in zip(p.C, X))
    dobj = float(p.b @ y)
    min_x = min(np.linalg.eigvalsh((x + x.conj().T) / 2)[0] for x in X)
    min_s = min(np.linalg.eigvalsh((s + s.conj().T) / 2)[0] for s in S)
    return {"primal_residual": primal_res, "rel_gap": abs(pobj - dobj) / (1 + abs(pobj)),
            "min_x": min_x, "min_s": min_s, "pobj": pobj, "dobj": dobj}
