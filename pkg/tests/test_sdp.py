import numpy as np
import pytest

from qstein import sdp
from qstein.divergences import dmax
from qstein.hyptest import dmax_sdp
from qstein.tensor import random_density

from sdp_problems import certify, random_feasible_problem


def test_trivial_examples():
    b = sdp.SDPBuilder()
    x = b.add_block(1)
    b.set_objective(x, [[1.0]])
    b.add_scalar([(x, [[1.0]])], 1.0)
    assert sdp.solve(b.build()).primal_objective == pytest.approx(1, abs=1e-7)
    # lambda_max of diag(1, 3): maximize -t subject to tI - H >= 0
    H = np.diag([1.0, 3.0])
    sol = sdp.solve(sdp.lmi_problem([-1.0], [(-H, -np.eye(2)[None])]))
    assert -sol.dual_objective == pytest.approx(3, abs=1e-7)


def test_inconsistent_constraints_report_infeasible():
    b = sdp.SDPBuilder()
    x = b.add_block(2)
    b.add_scalar([(x, np.eye(2))], 1.0)
    b.add_scalar([(x, np.eye(2))], 2.0)
    sol = sdp.solve(b.build())
    assert sol.status == sdp.INFEASIBLE


@pytest.mark.parametrize("seed", range(8))
def test_random_feasible_problems(seed):
    p, F = random_feasible_problem(seed, max_dim=12)
    sol = sdp.solve(p)
    assert sol.status == sdp.OPTIMAL
    c = certify(p, F, sol)
    assert c["rel_gap"] <= 1e-7 and c["primal_residual"] <= 1e-7
    assert c["min_x"] >= -1e-9 and c["min_s"] >= -1e-7


def test_weak_duality_on_feasible_iterates():
    # the method starts infeasible, so the comparison is made once both residuals are small
    for seed in range(5):
        p, _ = random_feasible_problem(100 + seed, max_dim=10)
        sol = sdp.solve(p, keep_trace=True)
        for rec in sol.trace:
            if rec["primal_residual"] <= 1e-9 and rec["dual_residual"] <= 1e-9:
                assert rec["dual"] <= rec["primal"] + 1e-9 * (1 + abs(rec["primal"]))


def test_dual_slacks_match_definition():
    p, F = random_feasible_problem(7, max_dim=6)
    sol = sdp.solve(p)
    S = sdp.dual_slacks(p, sol.y)
    for s, c, f in zip(S, p.C, F):
        assert np.allclose(s, c - np.tensordot(sol.y, f, axes=1), atol=1e-10)


def test_dmax_sdp_matches_closed_form():
    for k in range(30):
        d = 2 + k % 3
        rho, sigma = random_density(d, seed=k), random_density(d, seed=500 + k)
        assert abs(dmax_sdp(rho, sigma) - dmax(rho, sigma)) <= 1e-6


def test_trace_sink_collects_records():
    sdp.TRACE_SINK = []
    try:
        sdp.solve(random_feasible_problem(3, max_dim=4)[0])
        assert sdp.TRACE_SINK and {"iter", "gap", "primal_residual"} <= set(sdp.TRACE_SINK[0])
    finally:
        sdp.TRACE_SINK = None
