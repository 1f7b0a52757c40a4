"""Order-1 quantum Wasserstein distance, quantum Lipschitz constants and related bounds."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import sdp
from .tensor import (CapacityError, partial_trace, permute_sites, site_dims, tensor,
                     trace_norm)

EXACT_LIMIT = 64


@dataclass
class W1Certificate:
    value: float
    lower: float
    blocks: list[np.ndarray] | None = None
    observable: np.ndarray | None = None
    pairing: float | None = None
    status: str = sdp.OPTIMAL


def _local_hermitian_basis(d: int) -> list[np.ndarray]:
    rows = sdp.hermitian_basis_rows(d).toarray()
    return [r.conj().reshape(d, d) for r in rows]


def embed(x, site: int, dims) -> np.ndarray:
    """x acting on every site except ``site``, tensored with the identity on ``site``."""
    dims = tuple(dims)
    n = len(dims)
    others = [k for k in range(n) if k != site]
    full = np.kron(x, np.eye(dims[site]))
    # site order of ``full`` is (others..., site); move each back into place
    order = others + [site]
    return permute_sites(full, order, [dims[k] for k in order])


def is_permutation_invariant(x, dims, tol: float = 1e-12) -> bool:
    dims = tuple(dims)
    n = len(dims)
    if len(set(dims)) != 1:
        return False
    scale = 1 + np.abs(x).max()
    for k in range(n - 1):
        perm = list(range(n))
        perm[k], perm[k + 1] = k + 1, k
        if np.abs(permute_sites(x, perm, dims) - x).max() > tol * scale:
            return False
    return True


def _check(omega, tau, s):
    dims = site_dims(s)
    omega, tau = np.asarray(omega), np.asarray(tau)
    d = math.prod(dims)
    if omega.shape != (d, d) or tau.shape != (d, d):
        raise ValueError("operators do not match the site structure")
    return omega, tau, dims


def w1_distance(omega, tau, s, symmetric: bool | None = None, **solver) -> tuple[float, W1Certificate]:
    """Exact W1 distance by semidefinite programming.

    When both inputs are invariant under site permutations (auto-detected unless
    ``symmetric`` is given) the dual program is restricted to permutation
    invariant observables, which is exact and much smaller.
    """
    omega, tau, dims = _check(omega, tau, s)
    if math.prod(dims) > EXACT_LIMIT:
        raise CapacityError(
            f"exact W1 is limited to total dimension {EXACT_LIMIT}; use w1_bracket for bounds")
    delta = omega - tau
    if symmetric is None:
        symmetric = len(dims) > 1 and is_permutation_invariant(delta, dims)
    if symmetric:
        return _w1_symmetric(delta, dims, **solver)
    return _w1_general(delta, dims, **solver)


def _w1_general(delta, dims, **solver):
    n, D = len(dims), math.prod(dims)
    b = sdp.SDPBuilder()
    pos, neg = [], []
    for i in range(n):
        pos.append(b.add_block(D))
        neg.append(b.add_block(D))
        b.set_objective(pos[-1], np.eye(D) / 2)
        b.set_objective(neg[-1], np.eye(D) / 2)
    eye = sdp.lin_identity(D)
    b.add_matrix([(pos[i], eye) for i in range(n)] + [(neg[i], -eye) for i in range(n)], delta)
    for i in range(n):
        tr_i = sdp.lin_partial_trace(dims, [i])
        rest = D // dims[i]
        b.add_matrix([(pos[i], tr_i), (neg[i], -tr_i)], np.zeros((rest, rest)))
    sol = sdp.solve(b.build(), **solver)
    blocks = [sol.X[pos[i]] - sol.X[neg[i]] for i in range(n)]
    coords = sol.y[:D * D]
    H = (sdp.hermitian_basis_rows(D).conj().T @ coords).reshape(D, D)
    H = (H + H.conj().T) / 2
    cert = W1Certificate(sol.primal_objective, sol.dual_objective, blocks=blocks, observable=H,
                         pairing=float(np.vdot(H, delta).real), status=sol.status)
    return sol.primal_objective, cert


@lru_cache(maxsize=16)
def symmetric_basis(d: int, n: int) -> tuple[np.ndarray, ...]:
    """Orthonormal-free spanning set of permutation invariant Hermitian operators on n sites."""
    local = _local_hermitian_basis(d)
    out = []
    for combo in itertools.combinations_with_replacement(range(d * d), n):
        acc = 0
        for arrangement in set(itertools.permutations(combo)):
            acc = acc + tensor([local[k] for k in arrangement])
        out.append(acc / np.linalg.norm(acc))
    return tuple(out)


def _w1_symmetric(delta, dims, **solver):
    n, d, D = len(dims), dims[0], math.prod(dims)
    hb = symmetric_basis(d, n)
    yb = [embed(y, 0, dims) for y in symmetric_basis(d, n - 1)] if n > 1 else [np.eye(D)]
    F = np.array(list(hb) + [-y for y in yb])
    rhs = np.concatenate([[np.vdot(h, delta).real for h in hb], np.zeros(len(yb))])
    half = np.eye(D) / 2
    sol = sdp.solve(sdp.lmi_problem(rhs, [(half, F), (half, -F)]), **solver)
    H = np.tensordot(sol.y[:len(hb)], np.array(hb), axes=1)
    cert = W1Certificate(sol.primal_objective, sol.dual_objective, observable=H,
                         pairing=float(np.vdot(H, delta).real), status=sol.status)
    return sol.primal_objective, cert


def w1_upper_bound_telescope(rho, sigma, s) -> float:
    """Half the sum over i of ||rho_{1..i} - rho_{1..i-1} (x) sigma||_1."""
    dims = site_dims(s)
    n = len(dims)
    total = 0.0
    prev = np.ones((1, 1))
    for i in range(1, n + 1):
        cur = partial_trace(rho, dims, keep=range(i)) if i < n else np.asarray(rho)
        total += trace_norm(cur - np.kron(prev, sigma)) / 2
        prev = cur
    return total


def w1_bracket(omega, tau, s, sigma=None) -> tuple[float, float]:
    """Certified (lower, upper) bounds on W1 without solving the full program.

    The lower bound is the best pairing with sums of single-site observables of
    operator norm at most 1/2, which equals half the sum of marginal trace
    distances. The upper bound is n times half the trace distance, improved by
    the telescoping bound when ``tau`` is the product of the reference ``sigma``.
    """
    omega, tau, dims = _check(omega, tau, s)
    n = len(dims)
    lower = sum(trace_norm(partial_trace(omega - tau, dims, keep=[i])) / 2 for i in range(n))
    upper = n * trace_norm(omega - tau) / 2
    if sigma is not None:
        upper = min(upper, w1_upper_bound_telescope(omega, sigma, dims))
    return lower, max(lower, upper)


def lipschitz_constant(H, s, **solver) -> float:
    """2 max_i min_X ||H - X (x) I_i||_inf, each inner problem solved as an SDP."""
    dims = site_dims(s)
    H = np.asarray(H, dtype=complex)
    D = math.prod(dims)
    if D > EXACT_LIMIT * 4:
        raise CapacityError(f"Lipschitz constant limited to total dimension {EXACT_LIMIT * 4}")
    best = 0.0
    for i in range(len(dims)):
        rest = D // dims[i]
        xs = [embed(e, i, dims) for e in _local_hermitian_basis(rest)] if len(dims) > 1 \
            else [np.eye(D)]
        eye = np.eye(D)
        F1 = np.array([-eye] + [-x for x in xs])
        F2 = np.array([-eye] + list(xs))
        rhs = np.zeros(len(xs) + 1)
        rhs[0] = -1
        sol = sdp.solve(sdp.lmi_problem(rhs, [(-H, F1), (H, F2)]), **solver)
        best = max(best, -sol.dual_objective)
    return 2 * best


def w1_dual_pairing_check(omega, tau, H, s, tol: float = 1e-6) -> dict:
    omega, tau, dims = _check(omega, tau, s)
    pairing = float(np.vdot(np.asarray(H), omega - tau).real)
    w1, _ = w1_distance(omega, tau, dims)
    lip = lipschitz_constant(H, dims)
    return {"pairing": pairing, "w1": w1, "lipschitz": lip,
            "slack": w1 * lip - pairing, "pass": pairing <= w1 * lip + tol}
