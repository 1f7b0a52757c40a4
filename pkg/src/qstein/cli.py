"""Command line entry point: ``qstein <subcommand> ...``.

Library subcommands print a value (or a CSV row); experiment subcommands write
CSV tables and exit nonzero, listing the failing rows, when an asserted check fails.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import math
import sys
from pathlib import Path

import numpy as np

from . import divergences, hyptest, lab, resource, sdp, wasserstein
from .almostiid import random_almost_iid
from .stateio import read_state, write_state
from .tensor import SiteStructure, canonical_purification, partial_trace, proj, tensor


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def _num(x) -> str:
    return lab.format_value(float(x))


def _emit(rows, args, cfg, columns=None):
    rows = lab.stamp(rows, cfg)
    if args.out:
        lab.emit_csv(rows, args.out, columns)
    else:
        buf = io.StringIO()
        cols = columns or list(dict.fromkeys(k for r in rows for k in r))
        w = csv.writer(buf)
        w.writerow(cols)
        for r in rows:
            w.writerow([lab.format_value(r.get(c)) for c in cols])
        sys.stdout.write(buf.getvalue())


def _report_failures(rows, label_keys) -> int:
    bad = lab.failing(rows)
    if not bad:
        return 0
    print(f"{len(bad)} failing row(s):", file=sys.stderr)
    for r in bad:
        print("  " + ", ".join(f"{k}={lab.format_value(r.get(k))}" for k in label_keys), file=sys.stderr)
    return 1


# ---------------------------------------------------------------------------
# library subcommands

def cmd_divergence(args) -> int:
    rho, _ = read_state(args.rho)
    sigma, _ = read_state(args.sigma)
    kind = args.kind
    if kind == "rel":
        v = divergences.rel_entropy(rho, sigma)
    elif kind == "dmax":
        v = divergences.dmax(rho, sigma)
    elif kind == "dmin":
        v = divergences.dmin(rho, sigma)
    elif kind == "renyi":
        if args.alpha is None:
            raise SystemExit("--alpha is required for --kind renyi")
        v = divergences.renyi_sandwiched(rho, sigma, args.alpha)
    else:
        v = divergences.fidelity(rho, sigma)
    print(_num(v))
    return 0


def cmd_dh(args) -> int:
    rows = []
    if args.classical:
        if not (args.p and args.q and args.n):
            raise SystemExit("--classical needs --p, --q and --n")
        p, q = np.array(_floats(args.p)), np.array(_floats(args.q))
        for n in _ints(args.n):
            v = hyptest.dh_classical_iid(p, q, n, args.eps)
            rows.append({"n": n, "eps": args.eps, "beta_log": -v, "dh_per_n": v / n})
        params = {"p": args.p, "q": args.q}
    else:
        if not (args.rho and args.sigma):
            raise SystemExit("need --rho and --sigma (or --classical)")
        rho, _ = read_state(args.rho)
        sigma, _ = read_state(args.sigma)
        v = hyptest.dh(rho, sigma, args.eps)
        rows.append({"n": 1, "eps": args.eps, "beta_log": -v, "dh_per_n": v})
        params = {"rho": _file_digest(args.rho), "sigma": _file_digest(args.sigma)}
    cfg = lab.ExperimentConfig("dh", eps=args.eps, n_grid=[r["n"] for r in rows], params=params)
    _emit(rows, args, cfg, ["n", "eps", "beta_log", "dh_per_n", "config_hash", "seed"])
    return 0


def cmd_w1(args) -> int:
    omega, s = read_state(args.omega)
    tau, s2 = read_state(args.tau)
    if s.dims != s2.dims:
        raise SystemExit("omega and tau have different site structures")
    if args.mode == "exact":
        v, _ = wasserstein.w1_distance(omega, tau, s)
        print(_num(v))
    else:
        lo, hi = wasserstein.w1_bracket(omega, tau, s)
        print(f"{_num(lo)},{_num(hi)}")
    return 0


def _theta_from_file(path) -> tuple[np.ndarray, tuple[int, int]]:
    """A pure state on an A x E site is used as is; a mixed state is purified canonically."""
    m, s = read_state(path)
    if s.n != 1:
        raise SystemExit("theta file must describe a single site")
    w, u = np.linalg.eigh(m)
    if w[-2] <= 1e-10 * w[-1] and s.bipartition is not None:
        return u[:, -1], s.bipartition[0]
    d = s.dims[0]
    return canonical_purification(m), (d, d)


def cmd_almostiid(args) -> int:
    theta, site = _theta_from_file(args.theta)
    rho_ae, rho_a = random_almost_iid(theta, site, args.n, args.r, seed=args.seed)
    if args.emit == "state":
        s = SiteStructure((site[0] * site[1],) * args.n, (site,) * args.n)
        if not args.out:
            raise SystemExit("--emit state needs --out")
        write_state(args.out, rho_ae, s)
        return 0
    sigma = partial_trace(proj(theta), site, keep=[0])
    iid = tensor([sigma] * args.n)
    dims = (site[0],) * args.n
    if np.prod(dims) <= wasserstein.EXACT_LIMIT:
        w1, _ = wasserstein.w1_distance(rho_a, iid, dims)
    else:
        w1 = wasserstein.w1_bracket(rho_a, iid, dims, sigma=sigma)[1]
    bound = 2 * math.sqrt(args.r / args.n)
    row = {"n": args.n, "r": args.r, "w1_over_n": w1 / args.n, "bound": bound,
           "pass": w1 / args.n <= bound + 1e-6}
    cfg = lab.ExperimentConfig("almostiid", n_grid=[args.n], r0=args.r, seed=args.seed,
                               params={"theta": _file_digest(args.theta)})
    _emit([row], args, cfg)
    return _report_failures([row], ["n", "r", "w1_over_n", "bound"])


def _resource_set(args, rho_s: SiteStructure):
    if args.set == "ppt":
        if rho_s.bipartition is None:
            raise SystemExit("the PPT set needs a state file with a bipartition")
        return resource.PPTSet(rho_s)
    if not args.sigma:
        raise SystemExit("--set iid needs --sigma")
    sigma, s = read_state(args.sigma)
    n = rho_s.n // s.n if rho_s.n % s.n == 0 else 0
    if n == 0 or len(sigma) ** n != rho_s.total:
        raise SystemExit("sigma does not tile the state's sites")
    return resource.SingleIID(sigma, n)


def cmd_ree(args) -> int:
    rho, s = read_state(args.rho)
    res = resource.ree_frank_wolfe(rho, _resource_set(args, s), tol=args.tol)
    print("value,gap")
    print(f"{_num(res.value)},{_num(res.gap)}")
    return 0 if res.gap <= args.tol else 1


def cmd_continuity(args) -> int:
    rho, s = read_state(args.rho)
    rho2, s2 = read_state(args.rhoprime)
    if s.dims != s2.dims:
        raise SystemExit("the two states have different site structures")
    rep = resource.continuity_check(rho, rho2, _resource_set(args, s), s, tol=args.tol)
    row = {k: rep.get(k) for k in ("eps_n", "delta_ree", "bound", "pass")}
    row["status"] = rep["status"]
    cfg = lab.ExperimentConfig("continuity", params={"rho": _file_digest(args.rho),
                                                     "rhoprime": _file_digest(args.rhoprime)})
    _emit([row], args, cfg)
    return _report_failures([row], ["eps_n", "delta_ree", "bound"])


# ---------------------------------------------------------------------------
# experiment subcommands

def _pair(args) -> tuple[np.ndarray, np.ndarray, dict]:
    if args.p and args.q:
        return np.diag(_floats(args.p)), np.diag(_floats(args.q)), {"p": args.p, "q": args.q}
    if args.rho and args.sigma:
        rho, _ = read_state(args.rho)
        sigma, _ = read_state(args.sigma)
        return rho, sigma, {"rho": _file_digest(args.rho), "sigma": _file_digest(args.sigma)}
    raise SystemExit("give either --p/--q or --rho/--sigma")


def cmd_stein(args) -> int:
    rho, sigma, params = _pair(args)
    grid = _ints(args.n)
    cfg = lab.ExperimentConfig("stein", eps=args.eps, n_grid=grid, seed=args.seed,
                               params={**params, "generic": args.generic})
    rows = lab.stein_table(rho, sigma, args.eps, grid, workers=args.workers,
                           force_generic=args.generic)
    _emit(rows, args, cfg)
    return _report_failures(rows, ["n", "dh_per_n", "path"])


def cmd_robust_stein(args) -> int:
    rho, sigma, params = _pair(args)
    grid = _ints(args.n)
    seeds = list(range(args.seed, args.seed + args.samples))
    cfg = lab.ExperimentConfig("robust-stein", eps=args.eps, n_grid=grid, r_rule=args.r_rule,
                               r0=args.r1, seed=args.seed,
                               params={**params, "r2": args.r2, "r2_rule": args.r2_rule,
                                       "samples": args.samples, "chain_max_n": args.chain_max_n})
    rows = lab.robust_stein_table(rho, sigma, args.eps, grid, seeds, args.r_rule, args.r2_rule,
                                  args.r1, args.r2, args.chain_max_n, workers=args.workers)
    _emit(rows, args, cfg)
    return _report_failures(rows, ["n", "r1", "r2", "seed", "dh_per_n", "chain_lower"])


def cmd_gsl_converse(args) -> int:
    rho, s = read_state(args.rho)
    rset = _resource_set(args, s)
    alphas = _floats(args.alpha)
    cfg = lab.ExperimentConfig("gsl-converse", eps=args.eps, n_grid=[args.n], seed=args.seed,
                               params={"rho": _file_digest(args.rho), "set": args.set,
                                       "alpha": alphas, "tol": args.tol})
    rep = lab.gsl_converse_check(rho, rset, args.eps, args.n, alphas, tol=args.tol)
    rows = [{**r, "tightest": r["alpha"] == rep["tightest_alpha"]} for r in rep["rows"]]
    _emit(rows, args, cfg)
    return _report_failures(rows, ["n", "alpha", "dh_per_n", "rhs"])


def cmd_schedule(args) -> int:
    grid = _ints(args.n) if args.n else lab.log_grid(args.n_min, args.n_max, args.points)
    cfg = lab.ExperimentConfig("schedule", eps=args.eps, n_grid=grid, r_rule=args.r_rule,
                               r0=args.r0, seed=args.seed, params={"d": args.d})
    rep = lab.schedule_eval(grid, args.r_rule, args.eps, args.d, args.r0)
    _emit(rep.rows, args, cfg)
    trend = rep.trend()
    for k, v in trend.items():
        print(f"{k}: {lab.format_value(v)}", file=sys.stderr)
    if args.check_trend:
        ok = (trend["xi_strictly_decreasing"] and trend["exponent_drop"] >= 100
              and trend["m_over_n_decreasing"] and trend["r_prime_over_n_decreasing"])
        if not ok:
            print("schedule trend check failed", file=sys.stderr)
            return 1
    return 0


def cmd_superadd(args) -> int:
    if args.rho:
        rho2, s = read_state(args.rho)
        rep = lab.superadditivity_check(rho2, s, tol=args.tol)
        rows = [{"seed": args.seed, **rep}]
        params = {"rho": _file_digest(args.rho), "tol": args.tol}
    else:
        seeds = list(range(args.seed, args.seed + args.instances))
        rows = lab.superadd_table(seeds, tol=args.tol, workers=args.workers)
        params = {"instances": args.instances, "tol": args.tol}
    cfg = lab.ExperimentConfig("superadd", seed=args.seed, params=params)
    _emit(rows, args, cfg)
    return _report_failures(rows, ["seed", "half_ree2", "ree1", "certified_excess"])


# ---------------------------------------------------------------------------

def _experiment_flags(p):
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)


def _pair_flags(p):
    p.add_argument("--rho")
    p.add_argument("--sigma")
    p.add_argument("--p", help="comma-separated probabilities (commuting input)")
    p.add_argument("--q")
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--n", required=True, help="comma-separated n grid")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qstein", description=__doc__.splitlines()[0])
    ap.add_argument("--sdp-trace", metavar="FILE",
                    help="write per-iteration SDP gap and residuals to FILE as CSV")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("divergence", help="relative entropies and fidelity of two states")
    p.add_argument("--kind", choices=["rel", "dmax", "dmin", "renyi", "fidelity"], required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--rho", required=True)
    p.add_argument("--sigma", required=True)
    p.set_defaults(func=cmd_divergence)

    p = sub.add_parser("dh", help="hypothesis-testing relative entropy")
    p.add_argument("--rho")
    p.add_argument("--sigma")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--classical", action="store_true")
    p.add_argument("--p")
    p.add_argument("--q")
    p.add_argument("--n", help="comma-separated copy numbers for --classical")
    p.add_argument("--out")
    p.set_defaults(func=cmd_dh, seed=0)

    p = sub.add_parser("w1", help="order-1 Wasserstein distance")
    p.add_argument("--omega", required=True)
    p.add_argument("--tau", required=True)
    p.add_argument("--mode", choices=["exact", "bracket"], default="exact")
    p.set_defaults(func=cmd_w1)

    p = sub.add_parser("almostiid", help="sample an almost-iid state")
    p.add_argument("--theta", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--emit", choices=["state", "w1report"], default="w1report")
    p.add_argument("--out")
    p.set_defaults(func=cmd_almostiid)

    for name, func, help_ in (("ree", cmd_ree, "relative entropy to a resource set"),
                              ("continuity", cmd_continuity, "REE continuity in W1")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--rho", required=True)
        if name == "continuity":
            p.add_argument("--rhoprime", required=True)
            p.add_argument("--out")
        p.add_argument("--set", choices=["ppt", "iid"], default="ppt")
        p.add_argument("--sigma")
        p.add_argument("--tol", type=float, default=1e-4)
        p.set_defaults(func=func, seed=0)

    p = sub.add_parser("stein", help="Stein-exponent table for iid pairs")
    _pair_flags(p)
    p.add_argument("--generic", action="store_true", help="skip the commuting shortcut")
    _experiment_flags(p)
    p.set_defaults(func=cmd_stein)

    p = sub.add_parser("robust-stein", help="Stein table for sampled almost-iid pairs")
    _pair_flags(p)
    p.add_argument("--r1", type=int, default=1)
    p.add_argument("--r2", type=int, default=1)
    p.add_argument("--r-rule", choices=lab.R_RULES, default="constant")
    p.add_argument("--r2-rule", choices=lab.R_RULES, default="constant")
    p.add_argument("--samples", type=int, default=5, help="seeds used: seed .. seed+samples-1")
    p.add_argument("--chain-max-n", type=int, default=lab.CHAIN_MAX_N)
    _experiment_flags(p)
    p.set_defaults(func=cmd_robust_stein)

    p = sub.add_parser("gsl-converse", help="D_H against sandwiched Renyi at the REE optimizer")
    p.add_argument("--rho", required=True, help="single-copy state")
    p.add_argument("--set", choices=["ppt", "iid"], default="ppt")
    p.add_argument("--sigma")
    p.add_argument("--eps", type=float, default=0.3)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--alpha", default="1.5,2,3")
    p.add_argument("--tol", type=float, default=1e-4)
    _experiment_flags(p)
    p.set_defaults(func=cmd_gsl_converse)

    p = sub.add_parser("schedule", help="proof-parameter schedule over an n grid")
    p.add_argument("--n", help="explicit comma-separated grid")
    p.add_argument("--n-min", type=int, default=1000)
    p.add_argument("--n-max", type=int, default=10**6)
    p.add_argument("--points", type=int, default=7)
    p.add_argument("--r-rule", choices=lab.R_RULES, default="two-thirds")
    p.add_argument("--r0", type=int, default=1)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--check-trend", action="store_true",
                   help="fail unless xi decreases and the exponent drops by at least 100")
    _experiment_flags(p)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("superadd", help="two-copy subadditivity of the PPT relative entropy")
    p.add_argument("--rho", help="two-copy state file; default: seeded crossed-pair instances")
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--tol", type=float, default=1e-4)
    _experiment_flags(p)
    p.set_defaults(func=cmd_superadd)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.sdp_trace:
        sdp.TRACE_SINK = []
    try:
        code = args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = 2
    finally:
        if args.sdp_trace:
            records, sdp.TRACE_SINK = sdp.TRACE_SINK, None
            lab.emit_csv(records, args.sdp_trace)
    return code


if __name__ == "__main__":
    sys.exit(main())
