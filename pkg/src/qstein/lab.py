"""Batch experiments: Stein-exponent tables, robust variants, converse checks,
proof-parameter schedules and two-copy subadditivity instances.

Every table is a list of dict rows; ``emit_csv`` writes them deterministically.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .almostiid import dmax_pinched_vs_iid, random_ensemble
from .divergences import INF, binary_entropy, rel_entropy, renyi_sandwiched
from .hyptest import buscemi_sandwich_check, dh, dh_classical_iid, smooth_dmax
from .resource import (PPTSet, SingleIID, almostiid_continuity_bound, ree_frank_wolfe)
from .tensor import (SiteStructure, canonical_purification, check_capacity, maximally_entangled,
                     partial_trace, permute_sites, tensor)

GENERIC_LIMIT = 2**12
SANDWICH_LIMIT = 16
CHAIN_MAX_N = 4


# ---------------------------------------------------------------------------
# configuration and output

R_RULES = ("constant", "sqrt", "two-thirds")


def r_schedule(rule: str, n: int, r0: int = 1) -> int:
    """Defect count for n sites: ``r0``, ceil(sqrt n) or ceil(n^(2/3))."""
    if rule == "constant":
        r = r0
    elif rule == "sqrt":
        r = math.isqrt(n - 1) + 1 if n > 0 else 0
    elif rule == "two-thirds":
        r = _ceil_root(n, 2, 3)
    else:
        raise ValueError(f"unknown r rule {rule!r}; choose from {R_RULES}")
    if r > n:
        raise ValueError(f"r rule {rule!r} gives r={r} > n={n}")
    return r


def _ceil_root(n: int, p: int, q: int) -> int:
    # smallest integer r with r^q >= n^p, by bisection in exact integers
    target = n**p
    lo, hi = 0, 1
    while hi**q < target:
        hi *= 2
    while lo < hi:
        mid = (lo + hi) // 2
        if mid**q >= target:
            hi = mid
        else:
            lo = mid + 1
    return lo


@dataclass
class ExperimentConfig:
    kind: str
    eps: float = 0.5
    n_grid: list[int] = field(default_factory=lambda: [1])
    r_rule: str = "constant"
    r0: int = 1
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.n_grid:
            raise ValueError("the n grid must be nonempty")
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if self.r_rule not in R_RULES:
            raise ValueError(f"unknown r rule {self.r_rule!r}")

    def hash(self) -> str:
        text = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"), default=_jsonable)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return [[float(z.real), float(z.imag)] for z in x.ravel()] if np.iscomplexobj(x) \
            else x.tolist()
    if isinstance(x, (np.integer, np.floating)):
        return x.item()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def format_value(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.12g}"
    return str(x)


def emit_csv(rows: list[dict], path, columns: list[str] | None = None):
    """Write rows with a header; columns default to first-seen key order."""
    if columns is None:
        columns = []
        for row in rows:
            columns += [k for k in row if k not in columns]
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(columns)
            for row in rows:
                w.writerow([format_value(row.get(c)) for c in columns])
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def stamp(rows: list[dict], cfg: ExperimentConfig) -> list[dict]:
    h = cfg.hash()
    return [{**row, "config_hash": h, "seed": row.get("seed", cfg.seed)} for row in rows]


def failing(rows: list[dict]) -> list[dict]:
    return [r for r in rows if r.get("pass") is False]


def run_tasks(fn, tasks: list, workers: int = 1) -> list:
    """Map ``fn`` over tasks, optionally in worker processes, keeping task order."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


# ---------------------------------------------------------------------------
# iid Stein tables

def simultaneous_spectra(rho, sigma, tol: float = 1e-12):
    """Eigenvalue vectors (p, q) in a common eigenbasis, or None if rho and sigma do not commute."""
    rho, sigma = np.asarray(rho, dtype=complex), np.asarray(sigma, dtype=complex)
    scale = 1 + np.abs(rho).max() + np.abs(sigma).max()
    if np.abs(rho @ sigma - sigma @ rho).max() > tol * scale:
        return None
    # a generic combination separates the joint eigenspaces
    _, u = np.linalg.eigh(rho + (math.pi / 7) * sigma)
    a, b = u.conj().T @ rho @ u, u.conj().T @ sigma @ u
    off = max(np.abs(a - np.diag(np.diag(a))).max(), np.abs(b - np.diag(np.diag(b))).max())
    if off > 1e-10 * scale:
        return None
    p = np.clip(np.diag(a).real, 0, None)
    q = np.clip(np.diag(b).real, 0, None)
    return p / p.sum(), q / q.sum()


def stein_row(rho, sigma, eps: float, n: int, force_generic: bool = False,
              sandwich_limit: int = SANDWICH_LIMIT, nu: float | None = None) -> dict:
    rho, sigma = np.asarray(rho, dtype=complex), np.asarray(sigma, dtype=complex)
    target = rel_entropy(rho, sigma)
    spectra = None if force_generic else simultaneous_spectra(rho, sigma)
    row = {"n": n, "eps": eps}
    if spectra is not None:
        value = dh_classical_iid(*spectra, n, eps)
        row["path"] = "classical"
    else:
        dim = len(rho) ** n
        check_capacity(dim, GENERIC_LIMIT)
        rn, sn = tensor([rho] * n), tensor([sigma] * n)
        value = dh(rn, sn, eps)
        row["path"] = "generic"
    row.update(dh_per_n=value / n, rel_entropy=target, gap=value / n - target)
    ok = True
    if spectra is None and len(rho) ** n <= sandwich_limit:
        # the sandwich is stated for D_H^{1-e}; here e = 1 - eps
        nu = min(0.1, eps / 2) if nu is None else nu
        chk = buscemi_sandwich_check(rn, sn, 1 - eps, nu)
        row.update(sandwich_upper_slack=chk["upper_slack"], sandwich_lower_slack=chk["lower_slack"])
        ok = chk["pass"]
    row["pass"] = ok
    return row


def _stein_task(args):
    return stein_row(*args)


def stein_table(rho, sigma, eps: float, n_grid, workers: int = 1, **kw) -> list[dict]:
    """Rows (n, dh/n, D(rho||sigma), gap) for rho^(x)n against sigma^(x)n.

    Commuting inputs use the exact type-class computation; others form the
    n-fold tensor powers (total dimension at most 2^12) and, when small enough,
    also check the smooth max-relative entropy sandwich.
    """
    tasks = [(rho, sigma, eps, n, kw.get("force_generic", False),
              kw.get("sandwich_limit", SANDWICH_LIMIT), kw.get("nu")) for n in n_grid]
    return run_tasks(_stein_task, tasks, workers)


# ---------------------------------------------------------------------------
# robust (almost-iid) Stein tables

def _ensemble_seed(seed: int, n: int, which: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, n, which])


def robust_stein_row(rho, sigma, eps: float, n: int, r1: int, r2: int, seed: int,
                     chain_max_n: int = CHAIN_MAX_N, tol: float = 1e-7) -> dict:
    rho, sigma = np.asarray(rho, dtype=complex), np.asarray(sigma, dtype=complex)
    d = len(rho)
    e_rho = random_ensemble(canonical_purification(rho), (d, d), n, r1, _ensemble_seed(seed, n, 1))
    e_sig = random_ensemble(canonical_purification(sigma), (d, d), n, r2, _ensemble_seed(seed, n, 2))
    rho_n, sigma_n = e_rho.marginal_a(), e_sig.marginal_a()
    iid = tensor([sigma] * n)
    value = dh(rho_n, sigma_n, eps) / n
    iid_value = dh(tensor([rho] * n), iid, eps) / n
    target = rel_entropy(rho, sigma)
    lam = float(np.linalg.eigvalsh(sigma)[0])
    row = {"n": n, "r1": r1, "r2": r2, "seed": seed, "eps": eps, "dh_per_n": value,
           "iid_dh_per_n": iid_value, "rel_entropy": target, "gap": value - target,
           "min_dh_per_n": min(value, iid_value)}
    # the set minimum includes the iid pair
    ok = row["min_dh_per_n"] <= iid_value + 1e-9
    if 16 * r1 <= n:
        prox = abs(rel_entropy(rho_n, iid) / n - target)
        bound = almostiid_continuity_bound(n, r1, d, lam)
        row.update(proximity=prox, proximity_bound=bound)
        ok &= prox <= bound + 1e-6
    if n <= chain_max_n:
        smooth = smooth_dmax(rho_n, iid, math.sqrt(1 - eps)) / n
        pinched = dmax_pinched_vs_iid(e_sig, sigma)
        defect = r2 / n * math.log(1 / lam)
        card = math.log(e_sig.card) / n
        eps_term = math.log(1 / eps) / n
        chain = smooth - defect - card - eps_term
        row.update(smooth_dmax_per_n=smooth, pinched_dmax_per_n=pinched, defect_term=defect,
                   card_term=card, eps_term=eps_term, chain_lower=chain,
                   chain_lower_pinched=smooth - pinched - card - eps_term,
                   chain_slack=value - chain)
        ok &= value >= chain - tol
    row["pass"] = bool(ok)
    return row


def _robust_task(args):
    return robust_stein_row(*args)


def robust_stein_table(rho, sigma, eps: float, n_grid, seeds, r1_rule: str = "constant",
                       r2_rule: str = "constant", r1: int = 1, r2: int = 1,
                       chain_max_n: int = CHAIN_MAX_N, workers: int = 1) -> list[dict]:
    """Per (n, seed): dh/n of a sampled almost-iid pair against the iid value and D(rho||sigma).

    The pair is drawn along the canonical purifications of rho and sigma with
    r1 and r2 defects. For n <= ``chain_max_n`` the row also carries the
    lower-bound chain dh/n >= smooth D_max(rho_n||sigma^(x)n)/n
    - (r2/n) log(1/lambda_min) - log|T|/n - log(1/eps)/n.
    """
    tasks = [(rho, sigma, eps, n, r_schedule(r1_rule, n, r1), r_schedule(r2_rule, n, r2), s,
              chain_max_n) for n in n_grid for s in seeds]
    return run_tasks(_robust_task, tasks, workers)


# ---------------------------------------------------------------------------
# converse with Renyi divergences

def _set_on_copies(rset, n: int):
    if isinstance(rset, SingleIID):
        return SingleIID(rset.sigma, n)
    (da, db), = set(rset.sites.bipartition)
    return PPTSet(SiteStructure.bipartite(da, db, n * rset.sites.n))


def gsl_converse_check(rho, rset, eps: float, n: int, alpha_grid=(1.5, 2.0, 3.0),
                       tol: float = 1e-4) -> dict:
    """(1/n) D_H^eps(rho^n||sigma_n) <= (1/n) D_alpha(rho^n||sigma_n) + alpha/(alpha-1) log(1/(1-eps))/n.

    ``sigma_n`` is the relative-entropy minimizer over the set on n copies;
    ``D_alpha`` is the sandwiched Renyi divergence, alpha > 1.
    """
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    rho = np.asarray(rho, dtype=complex)
    big = _set_on_copies(rset, n)
    check_capacity(big.dim, 2**4 if isinstance(big, PPTSet) else GENERIC_LIMIT)
    rho_n = tensor([rho] * n)
    res = ree_frank_wolfe(rho_n, big, tol=tol)
    sigma_n = res.sigma
    lhs = dh(rho_n, sigma_n, eps) / n
    rows = []
    for alpha in alpha_grid:
        if alpha <= 1:
            raise ValueError("alpha must exceed 1")
        slack_term = alpha / (alpha - 1) * math.log(1 / (1 - eps)) / n
        rhs = renyi_sandwiched(rho_n, sigma_n, alpha) / n + slack_term
        rows.append({"n": n, "eps": eps, "alpha": alpha, "dh_per_n": lhs,
                     "renyi_per_n": rhs - slack_term, "slack_term": slack_term, "rhs": rhs,
                     "slack": rhs - lhs, "ree_per_n": res.value / n, "ree_gap": res.gap,
                     "pass": lhs <= rhs + 1e-9})
    best = min(rows, key=lambda r: r["rhs"])
    return {"rows": rows, "tightest_alpha": best["alpha"], "tightest_rhs": best["rhs"],
            "dh_per_n": lhs, "pass": all(r["pass"] for r in rows)}


# ---------------------------------------------------------------------------
# proof-parameter schedules

@dataclass
class ScheduleReport:
    rows: list[dict]

    def column(self, key: str) -> list:
        return [r[key] for r in self.rows]

    def trend(self) -> dict:
        """Monotonicity of log xi, m/n and r'/n along the grid and the exponent drop."""
        log_xi = self.column("log_xi")
        expo = self.column("exponent")
        m_frac = [r["m"] / r["n"] for r in self.rows]
        rp_frac = [r["r_prime"] / r["n"] if r["r_prime"] is not None else math.nan
                   for r in self.rows]
        def down(v, strict):
            return all((b < a) if strict else (b <= a) for a, b in zip(v, v[1:]))
        return {"xi_strictly_decreasing": down(log_xi, True),
                "exponent_drop": expo[0] - expo[-1],
                "m_over_n_decreasing": down(m_frac, False),
                "r_prime_over_n_decreasing": down(rp_frac, False),
                "all_admissible": all(r["admissible"] for r in self.rows)}


def schedule_row(n: int, r: int, eps: float, d: int) -> dict:
    if not 0 <= r <= n:
        raise ValueError(f"need 0 <= r <= n, got r={r}, n={n}")
    nu = math.log(1 / eps) + 2 * n * binary_entropy(r / n) + 4 * r * math.log(d)
    m = math.sqrt(r * n)
    if r == 0:
        gamma = r_prime = None
        drift = 0.0
    else:
        ratio = n / r
        gamma = math.sqrt(math.sqrt(ratio) / math.log(ratio)) if ratio > 1 else math.inf
        r_prime = m * math.log(ratio) * gamma if ratio > 1 else math.nan
        drift = m * r_prime / (n - r) if n > r else math.inf
    exponent = -drift + nu
    log_xi = 0.5 * math.log(2) + exponent / 2
    xi = math.exp(log_xi) if log_xi < 700 else math.inf
    admissible = m <= n - r and (r_prime is None or r_prime <= n - r - m)
    return {"n": n, "r": r, "nu": nu, "gamma": gamma, "m": m, "r_prime": r_prime, "xi": xi,
            "log_xi": log_xi, "exponent": exponent, "exponent_sign": int(np.sign(exponent)),
            "admissible": admissible}


def schedule_eval(n_grid, r_rule: str, eps: float, d: int, r0: int = 1) -> ScheduleReport:
    return ScheduleReport([schedule_row(int(n), r_schedule(r_rule, int(n), r0), eps, d)
                           for n in n_grid])


def log_grid(lo: int, hi: int, points: int) -> list[int]:
    return sorted({int(round(x)) for x in np.geomspace(lo, hi, points)})


# ---------------------------------------------------------------------------
# two-copy subadditivity

def two_copy_marginals(rho2, s=None) -> tuple[np.ndarray, np.ndarray]:
    s = SiteStructure.bipartite(2, 2, 2) if s is None else s
    dims = s.dims
    return partial_trace(rho2, dims, keep=[0]), partial_trace(rho2, dims, keep=[1])


def superadditivity_check(rho2, s=None, tol: float = 1e-4) -> dict:
    """(1/2) REE(rho2 over PPT(A1A2:B1B2)) <= REE(marginal over PPT(A:B)) + 2 tol.

    Also reports ``certified_excess``: the certified lower bound on the two-copy
    value per copy minus the single-copy value. A positive excess beyond 2 tol
    is a certified violation.
    """
    s = SiteStructure.bipartite(2, 2, 2) if s is None else s
    if s.n != 2 or s.bipartition is None:
        raise ValueError("need a bipartite two-site structure")
    first, second = two_copy_marginals(rho2, s)
    mismatch = float(np.abs(np.linalg.eigvalsh(first - second)).sum())
    if mismatch > 1e-8:
        raise ValueError(f"marginals differ (trace distance {mismatch:.3g})")
    (da, db), _ = s.bipartition
    two = ree_frank_wolfe(rho2, PPTSet(s), tol=tol)
    one = ree_frank_wolfe(first, PPTSet(SiteStructure.bipartite(da, db, 1)), tol=tol)
    half = two.value / 2
    excess = two.lower / 2 - one.value
    return {"half_ree2": half, "ree1": one.value, "gap2": two.gap, "gap1": one.gap,
            "certified_excess": excess, "certified_violation": excess > 2 * tol,
            "pass": half <= one.value + 2 * tol}


def _random_unitary(d: int, rng) -> np.ndarray:
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def crossed_pair_state(p: float, ua=None, vb=None) -> np.ndarray:
    """p |Psi><Psi| + (1-p) I/16 on (A1 B1)(A2 B2), where Psi pairs A1 with B2 and A2 with B1.

    Optional local unitaries act identically on both copies, so the two
    single-copy marginals stay equal (both are I/4).
    """
    phi = maximally_entangled(2)
    # factor order A1 B2 A2 B1 -> A1 B1 A2 B2
    psi = np.kron(phi, phi)
    psi = permute_sites(np.outer(psi, psi.conj()), [0, 3, 2, 1], (2, 2, 2, 2))
    if ua is not None or vb is not None:
        ua = np.eye(2) if ua is None else ua
        vb = np.eye(2) if vb is None else vb
        u = tensor([ua, vb, ua, vb])
        psi = u @ psi @ u.conj().T
    return p * psi + (1 - p) * np.eye(16) / 16


def crossed_pair_ree_oracle(p: float) -> float:
    """Closed-form PPT relative entropy of the crossed-pair state across A1A2:B1B2.

    Up to local unitaries it is an isotropic state of local dimension 4 with
    singlet fraction F = p + (1-p)/16.
    """
    d = 4
    F = p + (1 - p) / d**2
    if F <= 1 / d:
        return 0.0
    return math.log(d) + F * math.log(F) + (1 - F) * math.log((1 - F) / (d - 1))


def superadd_instance(seed: int) -> tuple[float, np.ndarray]:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 5]))
    p = float(rng.uniform())
    return p, crossed_pair_state(p, _random_unitary(2, rng), _random_unitary(2, rng))


def _superadd_task(args):
    seed, tol = args
    p, rho2 = superadd_instance(seed)
    rep = superadditivity_check(rho2, tol=tol)
    return {"seed": seed, "p": p, **rep, "oracle_half_ree2": crossed_pair_ree_oracle(p) / 2}


def superadd_table(seeds, tol: float = 1e-4, workers: int = 1) -> list[dict]:
    return run_tasks(_superadd_task, [(s, tol) for s in seeds], workers)


def write_rows(rows: list[dict], path, cfg: ExperimentConfig):
    emit_csv(stamp(rows, cfg), Path(path))
