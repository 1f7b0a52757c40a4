"""Entropic divergences and distances, all in nats."""
from __future__ import annotations

import math

import numpy as np
from scipy.special import logsumexp

from .tensor import support_threshold

INF = math.inf


def _same_shape(rho, sigma):
    rho, sigma = np.asarray(rho), np.asarray(sigma)
    if rho.shape != sigma.shape:
        raise ValueError(f"dimension mismatch: {rho.shape} vs {sigma.shape}")
    return rho, sigma


def _support(sigma):
    w, u = np.linalg.eigh(sigma)
    on = w > support_threshold(w)
    return w, u, on


def _leaks(rho, u, on, tol=1e-10) -> bool:
    """True when rho has weight outside the span of ``u[:, on]``."""
    if on.all():
        return False
    k = u[:, ~on]
    return float(np.trace(k.conj().T @ rho @ k).real) > tol


def _inv_sqrt(sigma):
    w, u, on = _support(sigma)
    f = np.zeros_like(w)
    f[on] = w[on] ** -0.5
    return (u * f) @ u.conj().T, u, on


def entropy(rho) -> float:
    w = np.linalg.eigvalsh(rho)
    w = w[w > support_threshold(w)]
    return float(-(w * np.log(w)).sum())


def rel_entropy(rho, sigma) -> float:
    """tr[rho (log rho - log sigma)], or +inf when supp(rho) is not inside supp(sigma)."""
    rho, sigma = _same_shape(rho, sigma)
    w, u, on = _support(sigma)
    if _leaks(rho, u, on):
        return INF
    diag = np.einsum("ij,ik,kj->j", u.conj(), rho, u).real
    cross = float((diag[on] * np.log(w[on])).sum())
    value = -entropy(rho) - cross
    # exact ties (rho == sigma) can round to a tiny negative number
    return 0.0 if -1e-12 < value < 0 else value


def binary_entropy(x: float) -> float:
    if not 0 <= x <= 1:
        raise ValueError(f"binary entropy needs x in [0, 1], got {x}")
    if x in (0, 1):
        return 0.0
    return -x * math.log(x) - (1 - x) * math.log1p(-x)


def _sqrtm(rho):
    w, u = np.linalg.eigh(rho)
    return (u * np.sqrt(np.clip(w, 0, None))) @ u.conj().T


def fidelity(rho, sigma) -> float:
    """Squared fidelity ||sqrt(rho) sqrt(sigma)||_1^2."""
    rho, sigma = _same_shape(rho, sigma)
    s = np.linalg.svd(_sqrtm(rho) @ _sqrtm(sigma), compute_uv=False).sum()
    return float(min(max(s * s, 0.0), 1.0))


def purified_distance(rho, sigma) -> float:
    return math.sqrt(max(0.0, 1 - fidelity(rho, sigma)))


def dmax(rho, sigma) -> float:
    rho, sigma = _same_shape(rho, sigma)
    root, u, on = _inv_sqrt(sigma)
    if _leaks(rho, u, on):
        return INF
    top = np.linalg.eigvalsh(root @ rho @ root)[-1]
    return math.log(top) if top > 0 else -INF


def dmin(rho, sigma) -> float:
    f = fidelity(rho, sigma)
    return -math.log(f) if f > 0 else INF


def renyi_sandwiched(rho, sigma, alpha: float) -> float:
    """Sandwiched Renyi divergence for alpha in [1/2, 1) or (1, inf)."""
    if not (0.5 <= alpha < 1 or alpha > 1):
        raise ValueError(f"alpha must lie in [1/2, 1) or (1, inf), got {alpha}")
    rho, sigma = _same_shape(rho, sigma)
    w, u, on = _support(sigma)
    if alpha > 1 and _leaks(rho, u, on):
        return INF
    g = (1 - alpha) / (2 * alpha)
    f = np.zeros_like(w)
    f[on] = w[on] ** g
    side = (u * f) @ u.conj().T
    inner = np.linalg.eigvalsh(side @ rho @ side)
    inner = inner[inner > 0]
    if inner.size == 0:
        return INF
    # log-sum-exp keeps large alpha finite
    return float(logsumexp(alpha * np.log(inner))) / (alpha - 1)


def uhlmann_extension(rho_ab, sigma_a, s) -> np.ndarray:
    """An extension sigma_AB of sigma_A with F(rho_AB, sigma_AB) = F(rho_A, sigma_A).

    ``s`` gives the two local dimensions (d_A, d_B). Both states are purified on
    A (x) K with K = B (x) AB and the purification of sigma_A is rotated by the
    polar unitary of the overlap of the two purifications.
    """
    da, db = (int(d) for d in (s.dims if hasattr(s, "dims") else s))
    rho_ab, sigma_a = np.asarray(rho_ab), np.asarray(sigma_a)
    if rho_ab.shape != (da * db, da * db) or sigma_a.shape != (da, da):
        raise ValueError("shapes do not match the (d_A, d_B) structure")
    dk = db * da * db
    # purification of rho_AB on AB (x) AB, regrouped as A x (B, AB)
    psi = _sqrtm(rho_ab).reshape(da, dk)
    w, u = np.linalg.eigh(sigma_a)
    phi = np.zeros((da, dk), dtype=complex)
    phi[:, :da] = u * np.sqrt(np.clip(w, 0, None))
    left, _, right = np.linalg.svd(psi.conj().T @ phi)
    phi = phi @ (right.conj().T @ left.conj().T)
    tail = phi.reshape(da, db, da * db)
    out = np.einsum("abk,cdk->abcd", tail, tail.conj()).reshape(da * db, da * db)
    return (out + out.conj().T) / 2
