"""Hypothesis-testing relative entropy and smooth max-relative entropy.

Convention: ``dh(rho, sigma, eps) = -log beta_eps`` where ``beta_eps`` is the
smallest type-II error ``tr[sigma M]`` over tests ``0 <= M <= I`` with type-I
error ``tr[rho (I - M)] <= eps``.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln, logsumexp

from . import sdp
from .divergences import INF, dmax


def _check_eps(eps):
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")


def _excess(lam, rho, sigma, eps):
    """tr[rho P+] - (1 - eps) for the positive-part projector P+ of lam rho - sigma.

    Minus the slope of the concave dual ``lam (1-eps) - tr(lam rho - sigma)_+``,
    hence nondecreasing in lam.
    """
    w, u = np.linalg.eigh(lam * rho - sigma)
    v = u[:, w > 0]
    return float(np.einsum("ij,ik,kj->", v.conj(), rho, v).real) - (1 - eps)


def _greedy_test(lam, rho, sigma, eps):
    """Fill the eigenvectors of lam rho - sigma in decreasing order until tr[rho M] = 1 - eps."""
    w, u = np.linalg.eigh(lam * rho - sigma)
    order = np.argsort(-w, kind="stable")
    a = np.einsum("ij,ik,kj->j", u.conj(), rho, u).real
    weights = np.zeros(len(w))
    need = 1 - eps
    for k in order:
        if need <= 0:
            break
        if a[k] <= 1e-15:
            continue
        take = min(1.0, need / a[k])
        weights[k] = take
        need -= take * a[k]
    return (u * weights) @ u.conj().T


def beta_eps(rho, sigma, eps: float) -> tuple[float, np.ndarray]:
    """Optimal type-II error and an optimal test.

    The Lagrange dual ``max_lam lam (1-eps) - tr(lam rho - sigma)_+`` is concave in
    ``lam`` and lives on [0, 1/eps]. Its maximizer is where the slope changes sign,
    located by bisection to machine precision (maximizing the flat dual directly
    would only resolve lam to the square root of it). The test is the
    Neyman-Pearson projector there, with a fractional fill on the boundary.
    """
    _check_eps(eps)
    rho, sigma = np.asarray(rho, dtype=complex), np.asarray(sigma, dtype=complex)
    if rho.shape != sigma.shape:
        raise ValueError("dimension mismatch")
    lo, hi = 0.0, 1 / eps
    if _excess(lo, rho, sigma, eps) >= 0:
        hi = lo
    # when part of rho sits in the kernel of sigma the root is lam = 0 and only
    # the iteration cap stops the halving
    for _ in range(200):
        mid = (lo + hi) / 2
        if hi - lo <= 4 * np.finfo(float).eps * hi or not lo < mid < hi:
            break
        if _excess(mid, rho, sigma, eps) >= 0:
            hi = mid
        else:
            lo = mid
    test = _greedy_test(hi, rho, sigma, eps)
    return max(float(np.vdot(sigma, test).real), 0.0), test


def dh(rho, sigma, eps: float) -> float:
    beta, _ = beta_eps(rho, sigma, eps)
    return -math.log(beta) if beta > 1e-300 else INF


def dh_sdp(rho, sigma, eps: float, **solver) -> float:
    """The same quantity from the semidefinite program over tests (cross-check route)."""
    _check_eps(eps)
    d = len(rho)
    b = sdp.SDPBuilder()
    m = b.add_block(d)
    rest = b.add_block(d)
    slack = b.add_block(1)
    b.set_objective(m, sigma)
    b.add_matrix([(m, sdp.lin_identity(d)), (rest, sdp.lin_identity(d))], np.eye(d))
    b.add_scalar([(m, rho), (slack, [[-1.0]])], 1 - eps)
    solver.setdefault("gap_tol", 1e-10)
    solver.setdefault("feas_tol", 1e-10)
    sol = sdp.solve(b.build(), **solver)
    beta = sol.primal_objective
    return -math.log(beta) if beta > 1e-300 else INF


def dh_classical_iid(p, q, n: int, eps: float) -> float:
    """dh for p^(x)n against q^(x)n, exact over type classes in the log domain."""
    _check_eps(eps)
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError("p and q must be probability vectors of equal length")
    if np.any(p < 0) or np.any(q < 0) or abs(p.sum() - 1) > 1e-12 or abs(q.sum() - 1) > 1e-12:
        raise ValueError("p and q must be probability vectors")
    types = _compositions(n, len(p))
    with np.errstate(divide="ignore"):
        lp, lq = np.log(p), np.log(q)
    logmult = gammaln(n + 1) - gammaln(types + 1).sum(axis=1)
    with np.errstate(invalid="ignore"):
        logp = logmult + np.where(types > 0, types * lp, 0.0).sum(axis=1)
        logq = logmult + np.where(types > 0, types * lq, 0.0).sum(axis=1)
    keep = np.isfinite(logp)
    logp, logq = logp[keep], logq[keep]
    ratio = logp - logq
    order = np.lexsort((logq, -ratio))
    pmass = np.exp(logp[order])
    cum = np.cumsum(pmass)
    need = 1 - eps
    # the relative slack absorbs rounding in the running sum of type masses
    k = min(int(np.searchsorted(cum, need * (1 - 1e-13))), len(cum) - 1)
    before = cum[k - 1] if k else 0.0
    frac = min(1.0, max(0.0, (need - before) / pmass[k])) if pmass[k] > 0 else 1.0
    taken_log = list(logq[order[:k]])
    if frac > 0:
        taken_log.append(logq[order[k]] + math.log(frac))
    taken_log = [v for v in taken_log if v > -np.inf]
    if not taken_log:
        return INF
    return -float(logsumexp(taken_log))


def _compositions(n: int, k: int) -> np.ndarray:
    if k == 1:
        return np.array([[n]])
    if k == 2:
        j = np.arange(n + 1)
        return np.stack([n - j, j], axis=1)
    rows = []
    for first in range(n, -1, -1):
        for rest in _compositions(n - first, k - 1):
            rows.append([first, *rest])
    return np.array(rows)


def dmax_sdp(rho, sigma, **solver) -> float:
    """log of min t subject to t sigma - rho >= 0 (cross-check route for ``dmax``)."""
    rho, sigma = np.asarray(rho, dtype=complex), np.asarray(sigma, dtype=complex)
    sol = sdp.solve(sdp.lmi_problem([-1.0], [(-rho, -sigma[None])]), **solver)
    if sol.status == sdp.INFEASIBLE or not math.isfinite(sol.dual_objective):
        return INF
    t = -sol.dual_objective
    return math.log(t) if t > 0 else -INF


def smooth_dmax(rho, sigma, eps: float, **solver) -> float:
    """min of dmax(rho', sigma) over normalized rho' with purified distance <= eps.

    The fidelity constraint is expressed through the block matrix
    [[rho, X], [X^H, rho']] >= 0 with Re tr X >= sqrt(1 - eps^2).
    """
    if not 0 <= eps < 1:
        raise ValueError(f"eps must lie in [0, 1), got {eps}")
    if eps == 0:
        return dmax(rho, sigma)
    rho, sigma = np.asarray(rho, dtype=complex), np.asarray(sigma, dtype=complex)
    d = len(rho)
    b = sdp.SDPBuilder()
    z = b.add_block(2 * d)
    t = b.add_block(d)
    m = b.add_block(1)
    s = b.add_block(1)
    b.set_objective(m, [[1.0]])
    b.add_matrix([(z, sdp.lin_corner(2 * d, 0, d))], rho)
    lower = np.zeros((2 * d, 2 * d))
    lower[d:, d:] = np.eye(d)
    b.add_scalar([(z, lower)], 1.0)
    b.add_matrix([(t, sdp.lin_identity(d)), (z, sdp.lin_corner(2 * d, d, d)),
                  (m, sdp.lin_scalar(-sigma))], np.zeros((d, d)))
    cross = np.zeros((2 * d, 2 * d))
    cross[:d, d:] = np.eye(d) / 2
    cross[d:, :d] = np.eye(d) / 2
    b.add_scalar([(z, cross), (s, [[-1.0]])], math.sqrt(1 - eps * eps))
    sol = sdp.solve(b.build(), **solver)
    if sol.status == sdp.INFEASIBLE:
        return INF
    value = sol.primal_objective
    return math.log(value) if value > 0 else -INF


def buscemi_sandwich_check(rho, sigma, eps: float, nu: float, tol: float = 1e-6) -> dict:
    """D_H^{1-eps} >= D_max^{sqrt eps} - log 1/(1-eps) >= D_H^{1-eps-nu} - log 4/nu^2."""
    _check_eps(eps)
    if not 0 < nu < 1 - eps:
        raise ValueError(f"nu must lie in (0, 1 - eps), got {nu}")
    lhs = dh(rho, sigma, 1 - eps)
    mid = smooth_dmax(rho, sigma, math.sqrt(eps)) - math.log(1 / (1 - eps))
    rhs = dh(rho, sigma, 1 - eps - nu) - math.log(4 / nu**2)
    upper_slack = lhs - mid if not (lhs == INF and mid == INF) else 0.0
    lower_slack = mid - rhs if not (mid == INF and rhs == INF) else 0.0
    return {"lhs": lhs, "mid": mid, "rhs": rhs, "upper_slack": upper_slack,
            "lower_slack": lower_slack, "pass": upper_slack >= -tol and lower_slack >= -tol}
