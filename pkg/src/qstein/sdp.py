"""Primal-dual interior-point solver for block Hermitian semidefinite programs.

Standard form::

    minimize    sum_j tr[C_j X_j]
    subject to  sum_j tr[A_kj X_j] = b_k      (k = 1..m)
                X_j >= 0

with dual ``maximize b.y`` subject to ``S_j = C_j - sum_k y_k A_kj >= 0``.

Constraint data for block ``j`` is an ``m x d_j**2`` matrix (dense or scipy
sparse) whose row ``k`` is ``conj(vec(A_kj))`` with row-major ``vec``, so that
``tr[A_kj X] = Re(row_k . vec(X))``.

The iteration is an infeasible-start path-following method using the
HKM search direction with a Mehrotra predictor-corrector.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

OPTIMAL, INFEASIBLE, MAX_ITER = "optimal", "infeasible", "max-iter"

# when set to a list, every solve appends its per-iteration records to it
TRACE_SINK: list | None = None


@dataclass
class SDPProblem:
    block_dims: list[int]
    C: list[np.ndarray]
    A: list
    b: np.ndarray
    hermitian: list[bool] = None

    def __post_init__(self):
        if self.hermitian is None:
            self.hermitian = [True] * len(self.block_dims)
        self.b = np.asarray(self.b, dtype=float)
        m = len(self.b)
        for d, c, a in zip(self.block_dims, self.C, self.A):
            if c.shape != (d, d) or a.shape != (m, d * d):
                raise ValueError("block data has inconsistent shape")

    @property
    def m(self) -> int:
        return len(self.b)


@dataclass
class SDPSolution:
    X: list[np.ndarray]
    y: np.ndarray
    S: list[np.ndarray]
    primal_objective: float
    dual_objective: float
    status: str
    iterations: int
    primal_residual: float
    dual_residual: float
    trace: list[dict] = field(default_factory=list, repr=False)

    @property
    def gap(self) -> float:
        return self.primal_objective - self.dual_objective

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


# ---------------------------------------------------------------------------
# linear maps on row-major vectorized matrices (sparse, shape d_out^2 x d_in^2)


def lin_identity(d: int):
    return sp.identity(d * d, dtype=complex, format="csr")


def lin_corner(d_in: int, start: int, size: int):
    """X -> X[start:start+size, start:start+size]."""
    r = np.arange(size)
    rows = (r[:, None] * size + r[None, :]).ravel()
    cols = ((start + r)[:, None] * d_in + (start + r)[None, :]).ravel()
    return sp.csr_matrix((np.ones(rows.size, dtype=complex), (rows, cols)), shape=(size * size, d_in * d_in))


def lin_offdiag(d_in: int, rows0: int, cols0: int, size: int):
    """X -> X[rows0:rows0+size, cols0:cols0+size] (not Hermiticity preserving on its own)."""
    r = np.arange(size)
    rows = (r[:, None] * size + r[None, :]).ravel()
    cols = ((rows0 + r)[:, None] * d_in + (cols0 + r)[None, :]).ravel()
    return sp.csr_matrix((np.ones(rows.size, dtype=complex), (rows, cols)), shape=(size * size, d_in * d_in))


def lin_scalar(m):
    """A 1x1 block x -> x * m."""
    return sp.csr_matrix(np.asarray(m, dtype=complex).reshape(-1, 1))


def lin_partial_trace(dims, drop):
    dims = tuple(dims)
    n, d = len(dims), math.prod(dims)
    drop = sorted(set(drop))
    keep = [i for i in range(n) if i not in drop]
    idx = np.array(np.unravel_index(np.arange(d), dims))
    dk = math.prod(dims[i] for i in keep)
    kidx = np.ravel_multi_index(idx[keep], [dims[i] for i in keep]) if keep else np.zeros(d, int)
    didx = np.ravel_multi_index(idx[drop], [dims[i] for i in drop]) if drop else np.zeros(d, int)
    order = np.lexsort((kidx, didx))
    groups = order.reshape(-1, dk)
    rows, cols = [], []
    for g in groups:
        rows.append((kidx[g][:, None] * dk + kidx[g][None, :]).ravel())
        cols.append((g[:, None] * d + g[None, :]).ravel())
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    return sp.csr_matrix((np.ones(rows.size, dtype=complex), (rows, cols)), shape=(dk * dk, d * d))


def lin_partial_transpose(dims, sites):
    dims = tuple(dims)
    n, d = len(dims), math.prod(dims)
    sites = set(sites)
    i, j = np.divmod(np.arange(d * d), d)
    mi = np.array(np.unravel_index(i, dims))
    mj = np.array(np.unravel_index(j, dims))
    si, sj = mi.copy(), mj.copy()
    for s in sites:
        si[s], sj[s] = mj[s], mi[s]
    src = np.ravel_multi_index(si, dims) * d + np.ravel_multi_index(sj, dims)
    return sp.csr_matrix((np.ones(d * d, dtype=complex), (np.arange(d * d), src)), shape=(d * d, d * d))


@lru_cache(maxsize=64)
def hermitian_basis_rows(d: int):
    """Sparse matrix whose row k is conj(vec(E_k)) for an orthonormal Hermitian basis E_k."""
    rows, cols, vals = [], [], []
    k = 0
    s = 1 / math.sqrt(2)
    for p in range(d):
        rows.append(k), cols.append(p * d + p), vals.append(1.0)
        k += 1
    for p in range(d):
        for q in range(p + 1, d):
            rows += [k, k]
            cols += [p * d + q, q * d + p]
            vals += [s, s]
            k += 1
            # E = i(e_pq - e_qp)/sqrt2, conj(vec) = -i at (p,q), +i at (q,p)
            rows += [k, k]
            cols += [p * d + q, q * d + p]
            vals += [-1j * s, 1j * s]
            k += 1
    return sp.csr_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(d * d, d * d))


class SDPBuilder:
    """Assemble a standard-form problem from blocks and (matrix) equality constraints."""

    def __init__(self):
        self.block_dims: list[int] = []
        self.herm: list[bool] = []
        self.C: list[np.ndarray] = []
        self._pieces: list[tuple[int, int, object]] = []
        self.b: list[float] = []

    def add_block(self, dim: int, hermitian: bool = True) -> int:
        self.block_dims.append(int(dim))
        self.herm.append(hermitian)
        self.C.append(np.zeros((dim, dim), dtype=complex))
        return len(self.block_dims) - 1

    def set_objective(self, block: int, c):
        self.C[block] = np.asarray(c, dtype=complex).reshape(self.block_dims[block], -1)

    def add_scalar(self, terms, rhs: float):
        """sum over (block, A) of tr[A X_block] = rhs."""
        k = len(self.b)
        for blk, a in terms:
            a = np.asarray(a, dtype=complex)
            self._pieces.append((k, blk, sp.csr_matrix(a.conj().reshape(1, -1))))
        self.b.append(float(rhs))

    def add_matrix(self, terms, rhs):
        """sum over (block, L) of L(X_block) = rhs, L a sparse map on vectorized matrices."""
        rhs = np.asarray(rhs, dtype=complex)
        d = rhs.shape[0]
        basis = hermitian_basis_rows(d)
        k = len(self.b)
        for blk, lin in terms:
            self._pieces.append((k, blk, (basis @ lin).tocsr()))
        self.b.extend((basis @ rhs.reshape(-1)).real.tolist())

    def build(self) -> SDPProblem:
        m = len(self.b)
        A = []
        for j, d in enumerate(self.block_dims):
            mats = []
            for k, blk, piece in self._pieces:
                if blk == j:
                    coo = piece.tocoo()
                    mats.append(sp.csr_matrix((coo.data, (coo.row + k, coo.col)), shape=(m, d * d)))
            a = sum(mats[1:], mats[0]) if mats else sp.csr_matrix((m, d * d), dtype=complex)
            A.append(_compact(a.tocsr()))
        return SDPProblem(list(self.block_dims), list(self.C), A, np.array(self.b), list(self.herm))


def _compact(a):
    # small or dense constraint matrices are faster as dense arrays
    size = a.shape[0] * a.shape[1]
    if size <= 40000 or a.nnz > 0.05 * size:
        return a.toarray()
    return a


def lmi_problem(b, blocks) -> SDPProblem:
    """maximize b.y subject to C_j - sum_k y_k F_kj >= 0 for every (C_j, F_j).

    ``F_j`` is an array of shape (m, d_j, d_j) of Hermitian matrices.
    """
    b = np.asarray(b, dtype=float)
    dims, C, A = [], [], []
    for c, f in blocks:
        c = np.asarray(c, dtype=complex)
        f = np.asarray(f, dtype=complex)
        d = c.shape[0]
        dims.append(d)
        C.append(c)
        a = f.conj().reshape(len(b), d * d)
        A.append(_compact(sp.csr_matrix(a)))
    return SDPProblem(dims, C, A, b)


# ---------------------------------------------------------------------------
# solver


def _herm(x):
    return (x + x.conj().T) / 2


def _a_op(A, Ys):
    out = 0.0
    for a, y in zip(A, Ys):
        out = out + (a @ y.reshape(-1)).real
    return out


def _a_adj(AH, y, dims):
    return [_herm(np.asarray(ah @ y).reshape(d, d)) for ah, d in zip(AH, dims)]


def _independent_rows(A, b):
    """Drop linearly dependent constraint rows; report whether b is consistent with them."""
    m = len(b)
    if m == 0:
        return np.arange(0), True
    G = np.zeros((m, m))
    for a in A:
        g = a @ a.conj().T
        G += np.asarray(g.todense() if sp.issparse(g) else g).real
    scale = max(float(np.max(np.diag(G))), 1e-300)
    c, piv, rank, _ = sla.lapack.dpstrf(G, tol=1e-10 * scale, lower=1)
    piv = piv - 1
    if rank == m:
        return np.arange(m), True
    ind, dep = np.sort(piv[:rank]), piv[rank:]
    coef = np.linalg.lstsq(G[np.ix_(ind, ind)], G[np.ix_(ind, dep)], rcond=None)[0]
    resid = b[dep] - coef.T @ b[ind]
    ok = np.linalg.norm(resid) <= 1e-8 * (1 + np.linalg.norm(b))
    return ind, bool(ok)


def _max_step(X, dX):
    try:
        L = np.linalg.cholesky(X)
        Li = sla.solve_triangular(L, np.eye(len(X)), lower=True)
        lam = np.linalg.eigvalsh(_herm(Li @ dX @ Li.conj().T))[0]
    except np.linalg.LinAlgError:
        w, u = np.linalg.eigh(X)
        w = np.clip(w, 1e-300, None)
        r = u / np.sqrt(w)
        lam = np.linalg.eigvalsh(_herm(r.conj().T @ dX @ r))[0]
    return math.inf if lam >= 0 else -1.0 / lam


def _inverse(S):
    """S^-1 and a factor P with S^-1 = P P^H."""
    try:
        L = np.linalg.cholesky(S)
        Li = sla.solve_triangular(L, np.eye(len(S)), lower=True)
        return _herm(Li.conj().T @ Li), Li.conj().T
    except np.linalg.LinAlgError:
        w, u = np.linalg.eigh(S)
        w = np.clip(w, 1e-300, None)
        return _herm((u / w) @ u.conj().T), u / np.sqrt(w)


def _schur(A, X, Sinv_factor, Sinv):
    """M_kl = Re tr[A_k X A_l S^-1], summed over blocks."""
    m = A[0].shape[0]
    M = np.zeros((m, m))
    for a, x, p, si in zip(A, X, Sinv_factor, Sinv):
        d = len(x)
        if sp.issparse(a):
            T = np.asarray(a @ np.kron(x, si.T))
            M += np.asarray((a.conj() @ T.T).T).real
        else:
            # with X = L L^H and S^-1 = P P^H the entry is <L^H A_k P, L^H A_l P>
            L = np.linalg.cholesky(x) if d > 1 else np.sqrt(x)
            g = (L.conj().T @ a.conj().reshape(m, d, d) @ p).reshape(m, d * d)
            M += (g.conj() @ g.T).real
    return (M + M.T) / 2


def _factor(M):
    diag = np.diag(M)
    shift = 0.0
    for _ in range(8):
        try:
            return sla.cho_factor(M + shift * np.eye(len(M)) if shift else M, check_finite=False), shift
        except (np.linalg.LinAlgError, sla.LinAlgError):
            shift = max(shift * 100, 1e-14 * max(float(np.max(np.abs(diag))), 1e-300))
    return None, shift


def solve(p: SDPProblem, gap_tol: float = 1e-8, feas_tol: float = 1e-8, max_iter: int = 200,
          keep_trace: bool = False) -> SDPSolution:
    dims = list(p.block_dims)
    m_full = p.m
    keep, consistent = _independent_rows(p.A, p.b)
    dtype = [complex if h else float for h in p.hermitian]
    C = [np.asarray(c, dtype=t) for c, t in zip(p.C, dtype)]
    if not consistent:
        X = [np.zeros((d, d), dtype=t) for d, t in zip(dims, dtype)]
        return SDPSolution(X, np.zeros(m_full), [c.copy() for c in C], math.nan, math.nan,
                           INFEASIBLE, 0, math.inf, math.inf)
    A = [a[keep] for a in p.A]
    A = [a if t is complex else (a.real if not sp.issparse(a) else a.real.tocsr()) for a, t in zip(A, dtype)]
    AH = [a.conj().T.tocsr() if sp.issparse(a) else a.conj().T.copy() for a in A]
    b = p.b[keep]
    m = len(b)
    nb = 1 + np.linalg.norm(b)
    nc = 1 + max((np.linalg.norm(c) for c in C), default=0.0)

    X, S = [], []
    for a, c, d, t in zip(A, C, dims, dtype):
        rn = np.sqrt(np.asarray(abs(a).power(2).sum(axis=1)).ravel()) if sp.issparse(a) \
            else np.linalg.norm(a, axis=1)
        xi = max(10.0, math.sqrt(d), d * float(np.max((1 + np.abs(b)) / (1 + rn))) if m else 0.0)
        eta = max(10.0, math.sqrt(d), 1 + max(float(rn.max()) if m else 0.0, float(np.linalg.norm(c))))
        X.append(xi * np.eye(d, dtype=t))
        S.append(eta * np.eye(d, dtype=t))
    y = np.zeros(m)
    nvar = sum(dims)
    records, status = [], MAX_ITER
    scale0 = max(max(np.abs(x).max() for x in X), max(np.abs(s).max() for s in S))

    it = 0
    for it in range(max_iter + 1):
        Rp = b - _a_op(A, X) if m else np.zeros(0)
        Aty = _a_adj(AH, y, dims) if m else [np.zeros_like(c) for c in C]
        Rd = [c - aty - s for c, aty, s in zip(C, Aty, S)]
        pobj = float(sum(np.vdot(c, x).real for c, x in zip(C, X)))
        dobj = float(b @ y)
        pinf = float(np.linalg.norm(Rp)) / nb
        dinf = math.sqrt(sum(np.linalg.norm(r) ** 2 for r in Rd)) / nc
        relgap = abs(pobj - dobj) / (1 + abs(pobj))
        mu = sum(np.vdot(x, s).real for x, s in zip(X, S)) / nvar
        rec = {"iter": it, "primal": pobj, "dual": dobj, "gap": pobj - dobj, "rel_gap": relgap,
               "primal_residual": pinf, "dual_residual": dinf, "mu": mu}
        records.append(rec)
        if relgap <= gap_tol and pinf <= feas_tol and dinf <= feas_tol:
            status = OPTIMAL
            break
        size = max(max(np.abs(x).max() for x in X), max(np.abs(s).max() for s in S),
                   float(np.abs(y).max()) if m else 0.0)
        if size > 1e12 * max(scale0, 1.0) or not math.isfinite(size):
            status = INFEASIBLE
            break
        if it == max_iter:
            break

        inv = [_inverse(s) for s in S]
        Sinv = [v[0] for v in inv]
        if m:
            try:
                fac, _ = _factor(_schur(A, X, [v[1] for v in inv], Sinv))
            except np.linalg.LinAlgError:
                fac = None
            if fac is None:
                # a singular Schur complement near the optimum is a numerical
                # breakdown, not evidence of infeasibility
                break

        def direction(Rc):
            if m:
                T = [(rc - x @ rd) @ si for rc, x, rd, si in zip(Rc, X, Rd, Sinv)]
                dy = sla.cho_solve(fac, Rp - _a_op(A, T), check_finite=False)
                dS = [rd - aty for rd, aty in zip(Rd, _a_adj(AH, dy, dims))]
            else:
                dy = np.zeros(0)
                dS = [rd.copy() for rd in Rd]
            dX = [_herm((rc - x @ ds) @ si) for rc, x, ds, si in zip(Rc, X, dS, Sinv)]
            return dX, dy, dS

        # past the attainable accuracy the Newton system degenerates; keep the
        # last iterate and let the tolerance check below classify it
        try:
            with np.errstate(all="ignore"):
                dX, dy, dS = direction([-x @ s for x, s in zip(X, S)])
                ap = min(1.0, min(_max_step(x, dx) for x, dx in zip(X, dX)))
                ad = min(1.0, min(_max_step(s, ds) for s, ds in zip(S, dS)))
                mu_aff = sum(np.vdot(x + ap * dx, s + ad * ds).real
                             for x, dx, s, ds in zip(X, dX, S, dS)) / nvar
                sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3 if mu > 0 else 0.0
                Rc = [sigma * mu * np.eye(len(x)) - x @ s - dx @ ds
                      for x, s, dx, ds in zip(X, S, dX, dS)]
                dX, dy, dS = direction(Rc)
                ap = min(1.0, 0.98 * min(_max_step(x, dx) for x, dx in zip(X, dX)))
                ad = min(1.0, 0.98 * min(_max_step(s, ds) for s, ds in zip(S, dS)))
        except np.linalg.LinAlgError:
            break
        if not all(np.all(np.isfinite(v)) for v in (*dX, *dS, dy)):
            break
        rec["step_primal"], rec["step_dual"] = ap, ad
        X = [x + ap * dx for x, dx in zip(X, dX)]
        S = [s + ad * ds for s, ds in zip(S, dS)]
        y = y + ad * dy

    if status == MAX_ITER:
        last = records[-1]
        loose = max(math.sqrt(feas_tol), 1e-4)
        if last["primal_residual"] > loose or last["dual_residual"] > loose:
            status = INFEASIBLE
    y_full = np.zeros(m_full)
    y_full[keep] = y
    last = records[-1]
    sol = SDPSolution(X, y_full, S, last["primal"], last["dual"], status, it,
                      last["primal_residual"], last["dual_residual"], records if keep_trace else [])
    if TRACE_SINK is not None:
        TRACE_SINK.extend(records)
    return sol


def dual_slacks(p: SDPProblem, y) -> list[np.ndarray]:
    """S_j = C_j - sum_k y_k A_kj for an arbitrary multiplier vector ``y``."""
    y = np.asarray(y, dtype=float)
    out = []
    for a, c, d in zip(p.A, p.C, p.block_dims):
        aty = np.asarray(a.conj().T @ y).reshape(d, d)
        out.append(_herm(np.asarray(c, dtype=complex) - aty))
    return out
