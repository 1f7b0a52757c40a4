"""Dense multipartite linear algebra.

Operators are plain complex ``numpy`` arrays. Site layouts are described by
:class:`SiteStructure` (or any sequence of local dimensions), with the first
listed site being the most significant tensor factor.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Sequence

import numpy as np

MAX_DIM = 2**14
SUPPORT_TOL = 1e-10


class CapacityError(ValueError):
    """Raised when an operator would exceed the configured total dimension."""


@dataclass(frozen=True)
class SiteStructure:
    """Ordered local dimensions, optionally with an (A, B) split of every site."""

    dims: tuple[int, ...]
    bipartition: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if not self.dims or any(d < 2 for d in self.dims):
            raise ValueError(f"site dimensions must be >= 2, got {self.dims}")
        if self.bipartition is not None:
            bp = tuple((int(a), int(b)) for a, b in self.bipartition)
            if len(bp) != len(self.dims):
                raise ValueError("bipartition needs one (a, b) pair per site")
            for (a, b), d in zip(bp, self.dims):
                if a * b != d:
                    raise ValueError(f"bipartition {a}x{b} does not match site dim {d}")
            object.__setattr__(self, "bipartition", bp)

    @property
    def n(self) -> int:
        return len(self.dims)

    @property
    def total(self) -> int:
        return prod(self.dims)

    @classmethod
    def uniform(cls, d: int, n: int) -> "SiteStructure":
        return cls((d,) * n)

    @classmethod
    def bipartite(cls, da: int, db: int, n: int = 1) -> "SiteStructure":
        return cls((da * db,) * n, ((da, db),) * n)

    def flat(self) -> tuple[tuple[int, ...], list[int], list[int]]:
        """Split every bipartite site into its A and B factors.

        Returns the refined dims and the refined indices of the A and B factors.
        """
        if self.bipartition is None:
            raise ValueError("no bipartition recorded")
        dims, a_sites, b_sites = [], [], []
        for a, b in self.bipartition:
            a_sites.append(len(dims))
            b_sites.append(len(dims) + 1)
            dims += [a, b]
        return tuple(dims), a_sites, b_sites


def site_dims(s) -> tuple[int, ...]:
    if isinstance(s, SiteStructure):
        return s.dims
    return tuple(int(d) for d in s)


def check_capacity(dim: int, limit: int | None = None):
    limit = MAX_DIM if limit is None else limit
    if dim > limit:
        raise CapacityError(f"total dimension {dim} exceeds the capacity limit {limit}")


def hermitian(m, tol: float = 1e-10) -> np.ndarray:
    """Validate a Hermitian matrix and return its exact Hermitian part."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    scale = 1.0 + (np.abs(m).max() if m.size else 0.0)
    if m.size and np.abs(m - m.conj().T).max() > tol * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    return (m + m.conj().T) / 2


def density(m, tol: float = 1e-9) -> np.ndarray:
    """Validate a density operator (PSD, unit trace)."""
    m = hermitian(m)
    if abs(np.trace(m).real - 1) > tol:
        raise ValueError(f"trace {np.trace(m).real!r} is not 1")
    if np.linalg.eigvalsh(m)[0] < -tol:
        raise ValueError("density operator has a negative eigenvalue")
    return m


def pure(v, tol: float = 1e-10) -> np.ndarray:
    v = np.asarray(v, dtype=complex).ravel()
    if abs(np.linalg.norm(v) - 1) > tol:
        raise ValueError("state vector is not normalized")
    return v


def proj(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).ravel()
    return np.outer(v, v.conj())


def tensor(*ops, limit: int | None = None) -> np.ndarray:
    """Kronecker product in argument order (a single list argument is also accepted)."""
    if len(ops) == 1 and isinstance(ops[0], (list, tuple)):
        ops = tuple(ops[0])
    check_capacity(prod(np.shape(o)[0] for o in ops), limit)
    out = np.ones((1, 1), dtype=complex)
    for o in ops:
        out = np.kron(out, o)
    return out


def _sites(sites, n: int) -> list[int]:
    sites = sorted({int(i) for i in sites})
    if any(i < 0 or i >= n for i in sites):
        raise ValueError(f"site index out of range for {n} sites: {sites}")
    return sites


def partial_trace(op, s, keep=None, drop=None) -> np.ndarray:
    """Trace out sites; give exactly one of ``keep`` or ``drop``."""
    dims = site_dims(s)
    n = len(dims)
    if (keep is None) == (drop is None):
        raise ValueError("give exactly one of keep or drop")
    if keep is None:
        dropped = _sites(drop, n)
        keep = [i for i in range(n) if i not in dropped]
    keep = _sites(keep, n)
    drop = [i for i in range(n) if i not in keep]
    op = np.asarray(op)
    t = op.reshape(dims + dims)
    t = t.transpose(keep + drop + [n + i for i in keep] + [n + i for i in drop])
    dk = prod(dims[i] for i in keep)
    dd = prod(dims[i] for i in drop)
    return np.einsum("aibi->ab", t.reshape(dk, dd, dk, dd))


def permute_sites(op, perm: Sequence[int], s) -> np.ndarray:
    """Conjugate by the permutation unitary that moves site ``k`` to position ``perm[k]``.

    With this convention ``permute_sites(x, compose(p, q)) == permute_sites(permute_sites(x, q), p)``
    where ``compose(p, q)[k] = p[q[k]]``.
    """
    dims = site_dims(s)
    n = len(dims)
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(n)):
        raise ValueError(f"not a permutation of {n} sites: {perm}")
    src = [0] * n
    for k, p in enumerate(perm):
        src[p] = k
    new_dims = tuple(dims[k] for k in src)
    op = np.asarray(op)
    if op.ndim == 1:
        return op.reshape(dims).transpose(src).reshape(-1)
    t = op.reshape(dims + dims).transpose(src + [n + k for k in src])
    d = prod(new_dims)
    return t.reshape(d, d)


def partial_transpose(op, sites, s) -> np.ndarray:
    dims = site_dims(s)
    n = len(dims)
    sites = _sites(sites, n)
    axes = list(range(2 * n))
    for i in sites:
        axes[i], axes[n + i] = n + i, i
    op = np.asarray(op)
    return op.reshape(dims + dims).transpose(axes).reshape(op.shape)


def eigh(op) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in ascending order and the unitary of eigenvectors."""
    return np.linalg.eigh(np.asarray(op))


def support_threshold(w: np.ndarray) -> float:
    return SUPPORT_TOL * max(float(np.max(np.abs(w))) if w.size else 0.0, 1e-300)


def matrix_function(op, f, alpha: float | None = None) -> np.ndarray:
    """Apply ``log``, ``sqrt``, ``inv`` or ``power`` (with ``alpha``) to a Hermitian operator.

    Singular functions act on the support only (eigenvalues above
    ``SUPPORT_TOL * lambda_max``) and map the kernel to zero. ``f`` may also be a
    callable acting on the array of eigenvalues.
    """
    w, u = np.linalg.eigh(op)
    on = w > support_threshold(w)
    fw = np.zeros_like(w)
    if callable(f):
        fw = f(w)
    elif f == "log":
        fw[on] = np.log(w[on])
    elif f == "sqrt":
        fw[on] = np.sqrt(w[on])
    elif f == "inv":
        fw[on] = 1 / w[on]
    elif f == "power":
        if alpha is None:
            raise ValueError("power needs alpha")
        fw[on] = w[on] ** alpha
    else:
        raise ValueError(f"unknown matrix function {f!r}")
    return (u * fw) @ u.conj().T


def trace_norm(x) -> float:
    return float(np.abs(np.linalg.eigvalsh(x)).sum())


def op_norm(x) -> float:
    return float(np.abs(np.linalg.eigvalsh(x)).max())


def canonical_purification(rho) -> np.ndarray:
    """The vector sum_k sqrt(lambda_k) |u_k> (x) |u_k*>, i.e. the row-major vec of sqrt(rho)."""
    w, u = np.linalg.eigh(rho)
    root = (u * np.sqrt(np.clip(w, 0, None))) @ u.conj().T
    return root.reshape(-1)


def random_density(dim: int, rank: int | None = None, seed=None) -> np.ndarray:
    rank = dim if rank is None else rank
    if not 1 <= rank <= dim:
        raise ValueError(f"rank {rank} outside [1, {dim}]")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    rho = (rho + rho.conj().T) / 2
    return rho / np.trace(rho).real


def random_pure(dim: int, seed=None) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def maximally_entangled(d: int) -> np.ndarray:
    return np.eye(d, dtype=complex).reshape(-1) / np.sqrt(d)
