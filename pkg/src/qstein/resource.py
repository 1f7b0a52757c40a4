"""Relative entropy of resource over computable convex sets, and the continuity machinery.

Two resource sets are provided: the single point ``{sigma^(x)n}`` and the PPT
relaxation of the separable states, where every site is split into A and B
factors and positivity is required after transposing all B factors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq

from . import sdp
from .divergences import INF, binary_entropy, entropy, rel_entropy
from .tensor import (SiteStructure, partial_trace, partial_transpose, permute_sites, site_dims,
                     tensor, trace_norm)

# the maximally mixed atom never loses all of its weight, keeping iterates full rank
_MIXED_FLOOR = 1e-9


@dataclass(frozen=True)
class SingleIID:
    """The set ``{sigma^(x)n}`` for a full-rank single-site state sigma."""

    sigma: np.ndarray
    n: int = 1

    def __post_init__(self):
        w = np.linalg.eigvalsh(self.sigma)
        if w[0] <= 0:
            raise ValueError("the reference state must be full rank")

    @property
    def dim(self) -> int:
        return len(self.sigma) ** self.n

    @property
    def omega(self) -> np.ndarray:
        return np.asarray(self.sigma, dtype=complex)

    @property
    def lambda_min(self) -> float:
        return float(np.linalg.eigvalsh(self.sigma)[0])

    def member(self) -> np.ndarray:
        return tensor([self.sigma] * self.n)


@dataclass(frozen=True)
class PPTSet:
    """States with positive partial transpose across the A:B cut of every site."""

    sites: SiteStructure

    def __post_init__(self):
        if self.sites.bipartition is None:
            raise ValueError("the PPT set needs a bipartition of every site")

    @classmethod
    def qubits(cls, n: int = 1) -> "PPTSet":
        return cls(SiteStructure.bipartite(2, 2, n))

    @property
    def dim(self) -> int:
        return self.sites.total

    @property
    def site_dim(self) -> int:
        return self.sites.dims[0]

    @property
    def omega(self) -> np.ndarray:
        d = self.site_dim
        return np.eye(d, dtype=complex) / d

    @property
    def lambda_min(self) -> float:
        return 1 / self.site_dim

    def transpose_b(self, op) -> np.ndarray:
        dims, _, b_sites = self.sites.flat()
        return partial_transpose(op, b_sites, dims)


def is_member(rset, tau, tol: float | None = None) -> bool:
    tau = np.asarray(tau, dtype=complex)
    if tau.shape != (rset.dim, rset.dim):
        raise ValueError(f"operator shape {tau.shape} does not match the set dimension {rset.dim}")
    if isinstance(rset, SingleIID):
        return trace_norm(tau - rset.member()) <= (1e-8 if tol is None else tol)
    w = np.linalg.eigvalsh(rset.transpose_b(tau))
    return bool(w[0] >= -(1e-9 if tol is None else tol))


@dataclass
class REEResult:
    value: float
    sigma: np.ndarray
    gap: float
    iterations: int
    status: str = "converged"
    history: list[float] = field(default_factory=list, repr=False)

    @property
    def lower(self) -> float:
        return self.value - self.gap


def _objective(rho, sigma, neg_entropy) -> float:
    w, u = np.linalg.eigh(sigma)
    if w[0] <= 0:
        return INF
    diag = np.einsum("ij,ik,kj->j", u.conj(), rho, u).real
    return neg_entropy - float((diag * np.log(w)).sum())


def log_derivative_kernel(w: np.ndarray) -> np.ndarray:
    """First divided differences of log at the eigenvalues ``w`` (diagonal 1/w)."""
    lw = np.log(w)
    dw = w[:, None] - w[None, :]
    close = np.abs(dw) <= 1e-12 * w.max()
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.where(close, 0.0, (lw[:, None] - lw[None, :]) / np.where(close, 1.0, dw))
    mean = 2 / (w[:, None] + w[None, :])
    return np.where(close, mean, k)


def ree_gradient(rho, sigma) -> np.ndarray:
    """Gradient of sigma -> D(rho||sigma): minus the adjoint derivative of log at sigma, applied to rho."""
    w, u = np.linalg.eigh(sigma)
    r = u.conj().T @ rho @ u
    g = -(u @ (log_derivative_kernel(w) * r) @ u.conj().T)
    return (g + g.conj().T) / 2


class _PPTOracle:
    """Linear minimization over PPT states by semidefinite programming.

    Besides the minimizer it returns a rigorous lower bound on the minimum:
    the dual value corrected by the negative part of the dual slacks, each
    weighted by the trace (one) of the corresponding primal block.
    """

    def __init__(self, rset: PPTSet):
        dims, _, b_sites = rset.sites.flat()
        D = rset.dim
        self.D = D
        self.pt = sdp.lin_partial_transpose(dims, b_sites)
        self.rset = rset

    def __call__(self, G):
        D = self.D
        b = sdp.SDPBuilder()
        t = b.add_block(D)
        p = b.add_block(D)
        b.set_objective(t, G)
        b.add_matrix([(p, sdp.lin_identity(D)), (t, -self.pt)], np.zeros((D, D)))
        b.add_scalar([(t, np.eye(D))], 1.0)
        prob = b.build()
        sol = sdp.solve(prob, gap_tol=1e-10, feas_tol=1e-10)
        tau = sol.X[t]
        tau = (tau + tau.conj().T) / 2
        # the solver's iterate is feasible only up to residuals; project onto
        # the unit-trace PPT states by mixing in a little of I/D
        tau = _repair(self.rset, tau / np.trace(tau).real)
        slacks = sdp.dual_slacks(prob, sol.y)
        lower = float(prob.b @ sol.y) + sum(min(0.0, float(np.linalg.eigvalsh(s)[0])) for s in slacks)
        return tau, min(lower, float(np.vdot(G, tau).real))


def _repair(rset: PPTSet, tau) -> np.ndarray:
    D = len(tau)
    lo = min(float(np.linalg.eigvalsh(tau)[0]), float(np.linalg.eigvalsh(rset.transpose_b(tau))[0]))
    if lo >= 0:
        return tau
    # tau + s I/D has both spectra shifted by s/D; renormalize afterwards
    s = -lo * D
    return (tau + s * np.eye(D) / D) / (1 + s)


def _slope(rho, sigma, direction) -> float:
    w, u = np.linalg.eigh(sigma)
    if w[0] <= 0:
        return INF
    r = u.conj().T @ rho @ u
    dd = u.conj().T @ direction @ u
    return -float(np.vdot(log_derivative_kernel(w) * r, dd).real)


def _line_search(rho, sigma, direction, hi, neg_entropy) -> tuple[float, float]:
    """Exact minimization of the convex map g -> D(rho || sigma + g direction) on [0, hi].

    Brent's method on the derivative; the far end is pulled in slightly because
    the atoms may be singular.
    """
    top = hi * (1 - 1e-12)
    if _slope(rho, sigma, direction) >= 0:
        return 0.0, _objective(rho, sigma, neg_entropy)
    end = _slope(rho, sigma + top * direction, direction)
    if end <= 0:
        step = top
    else:
        step = brentq(lambda g: _slope(rho, sigma + g * direction, direction), 0.0, top,
                      xtol=1e-15 * max(hi, 1e-300), rtol=1e-12)
    return step, _objective(rho, sigma + step * direction, neg_entropy)


def _prune(atoms, weights):
    keep = weights > 1e-15 * weights.max()
    keep[0] = True
    weights = weights[keep]
    return [a for a, kp in zip(atoms, keep) if kp], weights / weights.sum()


def _combine(atoms, weights):
    sigma = sum(w * a for w, a in zip(weights, atoms))
    return (sigma + sigma.conj().T) / 2


def _hull_descent(rho, atoms, weights, neg_entropy, tol, max_steps):
    """Pairwise Frank-Wolfe restricted to the convex hull of the current atoms.

    Each step moves weight from the worst active atom to the best one; on a
    polytope this converges linearly, and it needs no oracle calls.
    """
    sigma = _combine(atoms, weights)
    value = _objective(rho, sigma, neg_entropy)
    for _ in range(max_steps):
        G = ree_gradient(rho, sigma)
        scores = np.array([float(np.vdot(G, a).real) for a in atoms])
        best = int(np.argmin(scores))
        floor = np.where(np.arange(len(atoms)) == 0, _MIXED_FLOOR, 0.0)
        movable = weights > floor
        if not movable.any():
            break
        worst = int(np.argmax(np.where(movable, scores, -np.inf)))
        if scores[worst] - scores[best] <= tol or worst == best:
            break
        hi = weights[worst] - floor[worst]
        direction = atoms[best] - atoms[worst]
        step, new_value = _line_search(rho, sigma, direction, hi, neg_entropy)
        if not new_value < value:
            break
        weights = weights.copy()
        weights[best] += step
        weights[worst] -= step
        if hi - step <= 1e-14:
            weights[worst] = floor[worst]
        atoms, weights = _prune(atoms, weights)
        sigma = _combine(atoms, weights)
        value = _objective(rho, sigma, neg_entropy)
    return atoms, weights, sigma, value


def log_second_difference(w: np.ndarray) -> np.ndarray:
    """Second divided differences of log, ``f2[i, k, j] = log[w_i, w_k, w_j]``.

    Each triple uses its most separated pair as the denominator; nearly equal
    triples use the Taylor expansion around their mean.
    """
    a = w[:, None, None] + 0 * w[None, :, None] + 0 * w[None, None, :]
    b = w[None, :, None] + 0 * a
    c = w[None, None, :] + 0 * a
    trip = np.sort(np.stack([a, b, c]), axis=0)
    lo, mid, hi = trip
    m = (lo + mid + hi) / 3
    spread = hi - lo
    near = spread <= 1e-3 * hi
    d = trip - m
    h2 = (d[0] ** 2 + d[1] ** 2 + d[2] ** 2 + d[0] * d[1] + d[0] * d[2] + d[1] * d[2])
    taylor = -1 / (2 * m**2) - h2 / (4 * m**4)
    with np.errstate(divide="ignore", invalid="ignore"):
        f_hm = _log_first(hi, mid)
        f_ml = _log_first(mid, lo)
        split = (f_hm - f_ml) / np.where(near, 1.0, spread)
    return np.where(near, taylor, split)


def _log_first(x, y):
    """log[x, y] = (log x - log y) / (x - y), stable for x close to y."""
    u = (x - y) / y
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log1p(u) / (x - y)
    small = np.abs(u) < 1e-8
    return np.where(small, (1 - u / 2) / y, out)


class _BarrierProblem:
    """Newton steps on D(rho||sigma) - mu log det sigma - mu log det sigma^T_B over tr sigma = 1."""

    def __init__(self, rho, rset: PPTSet):
        D = rset.dim
        self.rho = rho
        self.rset = rset
        self.D = D
        rows = sdp.hermitian_basis_rows(D)
        self.E = np.asarray(rows.conj().toarray()).reshape(D * D, D, D)
        self.PE = np.array([rset.transpose_b(e) for e in self.E])
        self.tr = np.einsum("aii->a", self.E).real
        self.neg_entropy = -entropy(rho)

    def barrier(self, sigma, mu) -> float:
        ws = np.linalg.eigvalsh(sigma)
        wp = np.linalg.eigvalsh(self.rset.transpose_b(sigma))
        if ws[0] <= 0 or wp[0] <= 0:
            return INF
        f = _objective(self.rho, sigma, self.neg_entropy)
        return f - mu * (np.log(ws).sum() + np.log(wp).sum())

    def newton_direction(self, sigma, mu):
        E, PE, D = self.E, self.PE, self.D
        m = D * D
        w, u = np.linalg.eigh(sigma)
        r = u.conj().T @ self.rho @ u
        grad_f = -(u @ (log_derivative_kernel(w) * r) @ u.conj().T)
        s_inv = (u / w) @ u.conj().T
        P = self.rset.transpose_b(sigma)
        wp, up = np.linalg.eigh(P)
        q_inv = (up / wp) @ up.conj().T
        grad = grad_f - mu * s_inv - mu * self.rset.transpose_b(q_inv)
        g = np.einsum("aij,ji->a", E, grad).real
        # Hessian of the relative entropy term in the eigenbasis of sigma
        Et = u.conj().T[None] @ E @ u[None]
        T = log_second_difference(w) * r.T[:, None, :]
        Z = np.einsum("ikj,aik->akj", T, Et).reshape(m, m)
        B = Z @ Et.reshape(m, m).T
        H = -(B + B.T).real
        for inv, basis in ((s_inv, E), (q_inv, PE)):
            SE = (inv[None] @ basis).reshape(m, m)
            SEt = (inv[None] @ basis).transpose(0, 2, 1).reshape(m, m)
            H += mu * (SE @ SEt.T).real
        K = np.zeros((m + 1, m + 1))
        K[:m, :m] = (H + H.T) / 2
        K[:m, m] = K[m, :m] = self.tr
        rhs = np.append(-g, 0.0)
        # K is nonsingular (barrier Hessian positive definite, trace row nonzero);
        # the SVD-based least squares can fail to converge on the highly
        # degenerate iterates of symmetric states, so solve directly
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            sol = sla.lstsq(K, rhs, lapack_driver="gelsy")[0]
        dx = sol[:m]
        direction = np.tensordot(dx, E, axes=1)
        return (direction + direction.conj().T) / 2, float(g @ dx)


def _barrier_path(rho, rset: PPTSet, tol: float, max_newton: int = 400):
    """Follow the central path until the barrier's duality bound 2 D mu is below tol / 4."""
    prob = _BarrierProblem(rho, rset)
    D = rset.dim
    sigma = np.eye(D, dtype=complex) / D
    mu = 1.0
    steps = 0
    while steps < max_newton:
        value = prob.barrier(sigma, mu)
        direction, slope = prob.newton_direction(sigma, mu)
        steps += 1
        if -slope / 2 <= 1e-10 * (1 + abs(value)):
            if 2 * D * mu <= tol / 4:
                break
            mu *= 0.1
            continue
        t = 1.0
        while t > 1e-12:
            trial = sigma + t * direction
            new = prob.barrier(trial, mu)
            if new <= value + 0.25 * t * slope:
                break
            t /= 2
        else:
            mu *= 0.1
            continue
        sigma = (trial + trial.conj().T) / 2
        sigma = sigma / np.trace(sigma).real
    return sigma, steps


def _frank_wolfe(rho, rset, tol: float, max_iter: int, inner_steps: int = 200) -> REEResult:
    """Frank-Wolfe with hull re-optimization.

    The iterate is a convex combination of atoms returned by the linear
    minimization oracle, started from the maximally mixed state. After every
    oracle call the weights are re-optimized over the atoms found so far by
    pairwise steps. The stopping rule uses a certified gap: tr[G sigma] minus a
    rigorous lower bound on the oracle's minimum, which bounds the
    suboptimality of the current value. ``max_iter`` counts oracle calls.
    """
    D = rset.dim
    neg_entropy = -entropy(rho)
    oracle = _PPTOracle(rset)
    atoms = [np.eye(D, dtype=complex) / D]
    weights = np.array([1.0])
    sigma = atoms[0].copy()
    value = _objective(rho, sigma, neg_entropy)
    history = [value]
    gap = INF
    status = "max-iter"
    k = 0
    for k in range(max_iter + 1):
        G = ree_gradient(rho, sigma)
        tau, lower = oracle(G)
        gap = max(float(np.vdot(G, sigma).real) - lower, 0.0)
        if gap <= tol:
            status = "converged"
            break
        if k == max_iter:
            break
        direction = tau - sigma
        step, new_value = _line_search(rho, sigma, direction, 1.0, neg_entropy)
        if not new_value < value:
            step = 2 / (k + 2)
        atoms = atoms + [tau]
        weights = np.append(weights * (1 - step), step)
        atoms, weights, sigma, new_value = _hull_descent(
            rho, atoms, weights, neg_entropy, tol / 10, inner_steps)
        if not new_value < value:
            status = "stalled"
            break
        value = new_value
        history.append(value)
    return REEResult(value, sigma, gap, k, status, history)


def ree_frank_wolfe(rho, rset, tol: float = 1e-4, max_iter: int = 5000,
                    method: str = "barrier") -> REEResult:
    """min over the set of D(rho||sigma), certified by the Frank-Wolfe gap.

    ``method="barrier"`` follows the central path of a log-det barrier for the
    PPT constraints with Newton steps and then evaluates the Frank-Wolfe gap
    once; ``method="fw"`` runs plain (hull re-optimizing) Frank-Wolfe. Either
    way ``gap`` is tr[G sigma] minus a rigorous lower bound on the linear
    minimum, so ``value - gap`` is a certified lower bound on the minimum.
    """
    rho = np.asarray(rho, dtype=complex)
    if isinstance(rset, SingleIID):
        return REEResult(rel_entropy(rho, rset.member()), rset.member(), 0.0, 0)
    if rho.shape != (rset.dim, rset.dim):
        raise ValueError("state does not match the set dimension")
    if method == "fw":
        return _frank_wolfe(rho, rset, tol, max_iter)
    if method != "barrier":
        raise ValueError(f"unknown method {method!r}")
    oracle = _PPTOracle(rset)
    neg_entropy = -entropy(rho)
    target = tol
    total = 0
    for _ in range(4):
        sigma, steps = _barrier_path(rho, rset, target)
        total += steps
        G = ree_gradient(rho, sigma)
        _, lower = oracle(G)
        gap = max(float(np.vdot(G, sigma).real) - lower, 0.0)
        value = _objective(rho, sigma, neg_entropy)
        if gap <= tol:
            return REEResult(value, sigma, gap, total, "converged", [value])
        target /= 10
    return REEResult(value, sigma, gap, total, "max-iter", [value])


def replacer_channel(omega, i: int, s):
    """X -> tr_i[X] with omega put back at site i."""
    dims = site_dims(s)
    n = len(dims)
    omega = np.asarray(omega, dtype=complex)
    if omega.shape != (dims[i], dims[i]):
        raise ValueError("omega does not match the replaced site")

    def apply(x):
        rest = partial_trace(x, dims, drop=[i])
        full = np.kron(rest, omega)
        order = [k for k in range(n) if k != i] + [i]
        # site at position p of ``full`` is order[p]; send it back to order[p]
        return permute_sites(full, order, [dims[k] for k in order])
    return apply


def smoothing_channel(t: float, omega, s, sites=None):
    """Per-site map X -> e^-t X + (1 - e^-t) tr[X] omega, applied on ``sites`` (default all)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    dims = site_dims(s)
    sites = range(len(dims)) if sites is None else sites
    keep = math.exp(-t)

    def apply(x):
        x = np.asarray(x, dtype=complex)
        for i in sites:
            x = keep * x + (1 - keep) * replacer_channel(omega, i, dims)(x)
        return x
    return apply


def continuity_bound(eps: float, d: int, lambda_min: float) -> float:
    """3 h(eps) + 6 eps log(d / lambda_min), valid for eps in [0, 1/2]."""
    if not 0 <= eps <= 0.5:
        raise ValueError(f"eps must lie in [0, 1/2], got {eps}")
    return 3 * binary_entropy(eps) + 6 * eps * math.log(d / lambda_min)


def almostiid_continuity_bound(n: int, r: int, d: int, lambda_min: float) -> float:
    """3 h(2 sqrt(r/n)) + 12 sqrt(r/n) log(d / lambda_min), valid when 16 r <= n."""
    if 16 * r > n:
        raise ValueError(f"the bound needs 16 r <= n, got r={r}, n={n}")
    x = math.sqrt(r / n)
    return 3 * binary_entropy(2 * x) + 12 * x * math.log(d / lambda_min)


def continuity_check(rho, rho_prime, rset, s, tol: float = 1e-4) -> dict:
    """|REE(rho) - REE(rho')| / n against the continuity bound at eps = W1 / n."""
    from .wasserstein import EXACT_LIMIT, w1_bracket, w1_distance
    dims = site_dims(s)
    n = len(dims)
    if math.prod(dims) <= EXACT_LIMIT:
        w1, _ = w1_distance(rho, rho_prime, dims)
    else:
        w1 = w1_bracket(rho, rho_prime, dims)[1]
    eps = max(w1 / n, 0.0)
    report = {"eps_n": eps}
    if eps > 0.5:
        report.update(status="outside-hypothesis", **{"pass": True})
        return report
    a = ree_frank_wolfe(rho, rset, tol=tol)
    b = ree_frank_wolfe(rho_prime, rset, tol=tol)
    delta = abs(a.value - b.value) / n
    bound = continuity_bound(eps, dims[0], rset.lambda_min)
    report.update(ree=a.value / n, ree_prime=b.value / n, delta_ree=delta, bound=bound,
                  status="checked", **{"pass": delta <= bound + 2 * tol})
    return report


def rer_upper_bound_check(rho_n, rset, n: int = 1, tol: float = 1e-4) -> dict:
    """(1/n) REE <= log(1/lambda_min(omega)) + tol."""
    res = ree_frank_wolfe(rho_n, rset, tol=tol)
    cap = math.log(1 / rset.lambda_min)
    return {"ree_per_n": res.value / n, "cap": cap, "gap": res.gap,
            "pass": res.value / n <= cap + tol}


def regularized_sequence(rho, set_family, n_max: int, tol: float = 1e-4) -> list[tuple[int, float, float]]:
    """(n, REE(rho^(x)n)/n, running infimum) for n = 1..n_max.

    ``set_family(n)`` returns the set on n copies.
    """
    rho = np.asarray(rho, dtype=complex)
    out, best = [], INF
    for n in range(1, n_max + 1):
        rset = set_family(n)
        # copies of a bipartite site are laid out as (A1 B1)(A2 B2)...
        v = ree_frank_wolfe(tensor([rho] * n), rset, tol=tol).value / n
        best = min(best, v)
        out.append((n, v, best))
    return out
