"""Almost-iid states: defect-pattern bases, symmetrization, pinching and type-class states.

An ensemble lives on n sites, each carrying a joint system AE of dimension
``d_a * d_e``. Basis vectors are products of a local orthonormal basis whose
element 0 is the reference vector ``theta``; a label tuple records which local
vector sits on each site, and at most ``r`` labels are nonzero (the defects).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .divergences import dmax, fidelity
from .tensor import (CapacityError, canonical_purification, check_capacity, partial_trace,
                     permute_sites, proj, site_dims, support_threshold, tensor)

SYMMETRIZE_MAX_SITES = 8


def orthonormal_completion(theta) -> np.ndarray:
    """Unitary whose first column is ``theta`` (normalized)."""
    theta = np.asarray(theta, dtype=complex).ravel()
    theta = theta / np.linalg.norm(theta)
    d = len(theta)
    q, _ = np.linalg.qr(np.column_stack([theta, np.eye(d, dtype=complex)]))
    q = q[:, :d]
    # QR fixes the first column only up to a phase
    q[:, 0] = theta
    rest = q[:, 1:] - np.outer(theta, theta.conj() @ q[:, 1:])
    q[:, 1:], _ = np.linalg.qr(rest)
    return q


def defect_labels(n: int, r: int, d: int) -> list[tuple[int, ...]]:
    """Label tuples with at most ``r`` nonzero entries in ``1..d-1``, in a fixed order."""
    if not 0 <= r <= n:
        raise ValueError(f"need 0 <= r <= n, got r={r}, n={n}")
    out = []
    for k in range(r + 1):
        for pattern in itertools.combinations(range(n), k):
            for values in itertools.product(range(1, d), repeat=k):
                labels = [0] * n
                for site, v in zip(pattern, values):
                    labels[site] = v
                out.append(tuple(labels))
    return out


def _product_vectors(local: np.ndarray, labels) -> np.ndarray:
    cols = []
    for lab in labels:
        v = np.ones(1, dtype=complex)
        for x in lab:
            v = np.kron(v, local[:, x])
        cols.append(v)
    return np.array(cols).T


def almost_iid_basis(theta, n: int, r: int, local=None) -> tuple[np.ndarray, list[tuple[int, ...]]]:
    """Orthonormal vectors spanning the defect space, as columns, with their label tuples.

    ``local`` optionally fixes the site basis; its first column must be ``theta``.
    """
    theta = np.asarray(theta, dtype=complex).ravel()
    d = len(theta)
    check_capacity(d**n)
    local = orthonormal_completion(theta) if local is None else np.asarray(local, dtype=complex)
    if local.shape != (d, d) or np.abs(local[:, 0] - theta).max() > 1e-10:
        raise ValueError("local basis must be a d x d unitary with theta as first column")
    labels = defect_labels(n, r, d)
    return _product_vectors(local, labels), labels


def symmetrize(op, s) -> np.ndarray:
    """Average of ``pi op pi^dagger`` over all site permutations."""
    dims = site_dims(s)
    n = len(dims)
    if n > SYMMETRIZE_MAX_SITES:
        raise CapacityError(f"symmetrization enumerates n! permutations; n <= {SYMMETRIZE_MAX_SITES}")
    if len(set(dims)) != 1:
        raise ValueError("symmetrization needs equal site dimensions")
    op = np.asarray(op, dtype=complex)
    acc = np.zeros_like(op)
    for perm in itertools.permutations(range(n)):
        acc += permute_sites(op, perm, dims)
    return acc / math.factorial(n)


def symmetrize_coefficients(beta, labels) -> np.ndarray:
    """Symmetrization carried out on the coefficient matrix over label tuples.

    The defect family is closed under site permutations, so permuting sites only
    relabels basis vectors.
    """
    beta = np.asarray(beta, dtype=complex)
    index = {lab: k for k, lab in enumerate(labels)}
    n = len(labels[0])
    acc = np.zeros_like(beta)
    for perm in itertools.permutations(range(n)):
        # site k moves to position perm[k]
        target = np.array([index[tuple(lab[perm.index(j)] for j in range(n))] for lab in labels])
        moved = np.zeros_like(beta)
        moved[np.ix_(target, target)] = beta
        acc += moved
    return acc / math.factorial(n)


@dataclass
class AlmostIIDEnsemble:
    """A state ``sum beta_tt' |Psi_t><Psi_t'|`` on n AE sites."""

    theta: np.ndarray
    site: tuple[int, int]
    n: int
    r: int
    vectors: np.ndarray
    labels: list[tuple[int, ...]]
    beta: np.ndarray
    # site basis behind ``vectors`` (first column theta), when known
    local: np.ndarray | None = None

    @property
    def card(self) -> int:
        return len(self.labels)

    @property
    def ae_dims(self) -> tuple[int, ...]:
        return (self.site[0] * self.site[1],) * self.n

    @cached_property
    def state(self) -> np.ndarray:
        v = self.vectors
        return v @ self.beta @ v.conj().T

    def marginal_a(self, op=None) -> np.ndarray:
        """Trace out every E factor of ``op`` (default: the ensemble state)."""
        da, de = self.site
        n = self.n
        if op is None:
            # work with the isometry to avoid forming the full AE state
            w = self.vectors.reshape((da, de) * n + (self.card,))
            order = [2 * i for i in range(n)] + [2 * i + 1 for i in range(n)] + [2 * n]
            w = w.transpose(order).reshape(da**n * de**n, self.card)
            x = (w @ self.beta).reshape(da**n, de**n * self.card)
            return x @ w.conj().reshape(da**n, de**n * self.card).T
        dims = (da, de) * n
        return partial_trace(op, dims, keep=[2 * i for i in range(n)])

    def support_residual(self, op=None) -> float:
        op = self.state if op is None else op
        v = self.vectors
        return float(np.abs(op - v @ (v.conj().T @ op)).max())


def random_ensemble(theta, site: tuple[int, int], n: int, r: int, seed=None,
                    local=None) -> AlmostIIDEnsemble:
    """Wishart coefficients on the defect basis, symmetrized over site permutations."""
    theta = np.asarray(theta, dtype=complex).ravel()
    if len(theta) != site[0] * site[1]:
        raise ValueError("theta does not live on the given A x E site")
    local = orthonormal_completion(theta) if local is None else np.asarray(local, dtype=complex)
    vectors, labels = almost_iid_basis(theta, n, r, local)
    k = len(labels)
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
    beta = g @ g.conj().T
    beta = symmetrize_coefficients(beta / np.trace(beta).real, labels)
    beta = (beta + beta.conj().T) / 2
    return AlmostIIDEnsemble(theta, tuple(site), n, r, vectors, labels, beta, local)


def random_almost_iid(theta, site: tuple[int, int], n: int, r: int, seed=None,
                      tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """(rho on A^n E^n, rho on A^n) for a random almost-iid ensemble."""
    e = random_ensemble(theta, site, n, r, seed)
    rho = e.state
    resid = e.support_residual(rho)
    if resid > tol:
        raise RuntimeError(f"state leaves the defect span (residual {resid:.3g})")
    return rho, e.marginal_a()


def pinch_to_blocks(e: AlmostIIDEnsemble, tol: float = 1e-8) -> tuple[np.ndarray, int]:
    """The diagonal part of the ensemble in its own basis, and the basis size.

    The operator inequality ``|T| sigma_pinched >= sigma`` is verified in basis
    coordinates, where it reads ``|T| diag(beta) - beta >= 0``.
    """
    slack = pinching_min_eigenvalue(e)
    if slack < -tol:
        raise ArithmeticError(f"pinching inequality fails: min eigenvalue {slack:.3g}")
    v = e.vectors
    pinched = (v * np.diag(e.beta).real) @ v.conj().T
    return pinched, e.card


def pinching_min_eigenvalue(e: AlmostIIDEnsemble) -> float:
    b = e.beta
    return float(np.linalg.eigvalsh(e.card * np.diag(np.diag(b)) - b)[0])


def dmax_pinched_vs_iid(e: AlmostIIDEnsemble, sigma_site, tol: float = 1e-7) -> float:
    """(1/n) D_max of the A-marginal of the pinched ensemble against sigma^(x)n.

    Checked against the defect bound ``(r/n) log(1/lambda_min(sigma))``.
    """
    sigma_site = np.asarray(sigma_site, dtype=complex)
    lam = np.linalg.eigvalsh(sigma_site)[0]
    if lam <= support_threshold(np.linalg.eigvalsh(sigma_site)):
        return math.inf
    pinched, _ = pinch_to_blocks(e)
    # sigma^(x)n is full rank but lam^n can fall below any generic support cut,
    # and whitening the assembled marginal amplifies rounding by lam^-n; the
    # pinched state is diagonal in a product basis, so whiten factor by factor
    w, u = np.linalg.eigh(sigma_site)
    s_half = (u / np.sqrt(w)) @ u.conj().T
    if e.local is not None:
        da, de = e.site
        factors = []
        for col in e.local.T:
            m = col.reshape(da, de)
            factors.append(s_half @ (m @ m.conj().T) @ s_half)
        white = sum(float(b) * tensor([factors[x] for x in lab])
                    for b, lab in zip(np.diag(e.beta).real, e.labels))
    else:
        inv_half = tensor([s_half] * e.n)
        white = inv_half @ e.marginal_a(pinched) @ inv_half
    top = np.linalg.eigvalsh(white)[-1]
    value = math.log(top) / e.n
    bound = e.r / e.n * math.log(1 / lam)
    if value > bound + tol:
        raise ArithmeticError(f"pinched D_max {value:.6g} exceeds defect bound {bound:.6g}")
    return value


def type_counts(ell: int, d: int) -> list[tuple[int, ...]]:
    """All count vectors of length d summing to ell."""
    return [tuple(c) for c in _compositions(ell, d)]


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first, *rest)


def type_state(ell: int, d: int, counts, basis=None) -> np.ndarray:
    """Uniform superposition over all strings with the given symbol counts."""
    counts = tuple(int(c) for c in counts)
    if len(counts) != d or any(c < 0 for c in counts) or sum(counts) != ell:
        raise ValueError(f"counts {counts} are not a type of length {ell} over {d} symbols")
    check_capacity(d**ell)
    basis = np.eye(d, dtype=complex) if basis is None else np.asarray(basis, dtype=complex)
    word = [x for x, c in enumerate(counts) for _ in range(c)]
    strings = set(itertools.permutations(word))
    v = np.zeros(d**ell, dtype=complex)
    for s in strings:
        w = np.ones(1, dtype=complex)
        for x in s:
            w = np.kron(w, basis[:, x])
        v += w
    return v / math.sqrt(len(strings))


def sym_subspace_projector(theta, ell: int, r: int) -> np.ndarray:
    """Projector onto symmetric vectors with theta on at least ell - r sites.

    Sums the type states whose count of the reference symbol is at least
    ``ell - r``, in a site basis that has ``theta`` as its first element.
    """
    theta = np.asarray(theta, dtype=complex).ravel()
    d = len(theta)
    if not 0 <= r <= ell:
        raise ValueError(f"need 0 <= r <= ell, got r={r}, ell={ell}")
    basis = orthonormal_completion(theta)
    P = np.zeros((d**ell, d**ell), dtype=complex)
    for counts in type_counts(ell, d):
        if counts[0] >= ell - r:
            v = type_state(ell, d, counts, basis)
            P += np.outer(v, v.conj())
    return P


def sym_subspace_projector_rotated(theta, ell: int, r: int, xi=None) -> np.ndarray:
    """The same projector built at a fixed reference and carried over by a rotation.

    Uses the computational basis around ``xi`` (default ``|0>``) and conjugates by
    ``U^(x)ell`` where ``U`` rotates ``xi`` onto ``theta``.
    """
    theta = np.asarray(theta, dtype=complex).ravel()
    d = len(theta)
    xi = np.eye(d, dtype=complex)[0] if xi is None else np.asarray(xi, dtype=complex).ravel()
    ref = sym_subspace_projector(xi, ell, r)
    U = tensor([rotation_unitary(xi, theta)] * ell)
    return U @ ref @ U.conj().T


def sym_projector_rank(ell: int, d: int, r: int) -> int:
    """Number of types with at least ell - r copies of the reference symbol."""
    if d == 1:
        return 1
    return sum(math.comb(j + d - 2, d - 2) for j in range(min(r, ell) + 1))


def rotation_unitary(xi, theta) -> np.ndarray:
    """A unitary taking xi to theta that rotates only within span{xi, theta}.

    theta's phase is first aligned so that <xi|theta> >= 0, the rotation is built
    from the closed form and the phase is put back as a global factor.
    """
    xi = np.asarray(xi, dtype=complex).ravel()
    theta = np.asarray(theta, dtype=complex).ravel()
    if xi.shape != theta.shape:
        raise ValueError("xi and theta must have the same dimension")
    overlap = np.vdot(xi, theta)
    phase = overlap / abs(overlap) if abs(overlap) > 1e-15 else 1.0
    t = theta / phase
    c = float(np.vdot(xi, t).real)
    A = np.outer(t, xi.conj()) - np.outer(xi, t.conj())
    U = np.eye(len(xi), dtype=complex) + A + (A @ A) / (1 + c)
    return phase * U


def fidelity_almost_iid_check(omega_n, e: AlmostIIDEnsemble, rho_site=None,
                              tol: float = 1e-7) -> dict:
    """F(omega_n, rho_n) <= F(omega_{n-r}, rho^(x)(n-r)) |T|^2 for permutation-invariant omega_n."""
    da, de = e.site
    n, r = e.n, e.r
    if rho_site is None:
        rho_site = partial_trace(proj(e.theta), (da, de), keep=[0])
    rho_n = e.marginal_a()
    lhs = fidelity(omega_n, rho_n)
    if r < n:
        omega_rest = partial_trace(omega_n, (da,) * n, keep=range(n - r))
        base = fidelity(omega_rest, tensor([rho_site] * (n - r)))
    else:
        base = 1.0
    rhs = base * e.card**2
    return {"lhs": lhs, "rhs": rhs, "rhs_clamped": min(rhs, 1.0), "card": e.card,
            "slack": rhs - lhs, "pass": lhs <= rhs + tol}


def purification_overlap_report(rho_n, rho_site, n: int, tol: float = 1e-9) -> dict:
    """Compare the canonical purifications' overlap with the fidelity F(rho_n, rho^(x)n).

    Both purifications are taken of n-site operators, so they share the site order
    (A_1..A_n, A'_1..A'_n). Equality is expected for commuting pairs; otherwise
    the overlap is only a lower bound and is reported as such.
    """
    rho_n = np.asarray(rho_n, dtype=complex)
    rho_site = np.asarray(rho_site, dtype=complex)
    iid = tensor([rho_site] * n)
    F = fidelity(rho_n, iid)
    psi = canonical_purification(rho_n)
    phi = canonical_purification(iid)
    overlap = abs(np.vdot(phi, psi)) ** 2
    commuting = bool(np.abs(rho_n @ iid - iid @ rho_n).max() <= tol * (1 + np.abs(rho_n).max()))
    achieved = abs(overlap - F) <= 1e-8
    return {"fidelity": F, "overlap": overlap, "commuting": commuting, "achieved": achieved,
            "pass": achieved if commuting else overlap <= F + 1e-8}
