import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import bell_state
from qstein.divergences import binary_entropy, rel_entropy
from qstein.hyptest import buscemi_sandwich_check, dh
from qstein.lab import (ExperimentConfig, crossed_pair_ree_oracle, crossed_pair_state, emit_csv,
                        format_value, gsl_converse_check, log_grid, r_schedule,
                        robust_stein_table, schedule_eval, schedule_row, simultaneous_spectra,
                        stein_row, stein_table, superadd_instance, superadditivity_check,
                        two_copy_marginals, write_rows)
from qstein.resource import PPTSet, SingleIID, ree_frank_wolfe
from qstein.tensor import CapacityError, random_density, tensor

P, Q = np.diag([0.7, 0.3]), np.diag([0.4, 0.6])


def test_emit_csv_shapes(tmp_path):
    path = tmp_path / "a.csv"
    emit_csv([], path, columns=["n", "value"])
    assert path.read_bytes() == b"n,value\r\n"
    emit_csv([{"n": 3, "value": 1 / 3, "ok": True, "x": None}], path)
    lines = path.read_text().splitlines()
    assert lines == ["n,value,ok,x", "3,0.333333333333,true,"]
    with pytest.raises(OSError, match="nope"):
        emit_csv([], tmp_path / "nope" / "a.csv")


def test_format_value():
    assert format_value(math.inf) == "inf" and format_value(-math.inf) == "-inf"
    assert format_value(math.nan) == "nan" and format_value(np.float64(2.5)) == "2.5"
    assert format_value(np.int64(7)) == "7" and format_value(np.bool_(False)) == "false"


def test_config_hash_and_stamp(tmp_path):
    a = ExperimentConfig("stein", eps=0.5, n_grid=[1, 2], seed=3)
    b = ExperimentConfig("stein", eps=0.5, n_grid=[1, 2], seed=3)
    c = ExperimentConfig("stein", eps=0.5, n_grid=[1, 2], seed=4)
    assert a.hash() == b.hash() != c.hash() and len(a.hash()) == 16
    with pytest.raises(ValueError):
        ExperimentConfig("stein", n_grid=[])
    with pytest.raises(ValueError):
        ExperimentConfig("stein", eps=1.0)
    path = tmp_path / "rows.csv"
    write_rows([{"n": 1}], path, a)
    row = next(csv.DictReader(path.open()))
    assert row["config_hash"] == a.hash() and row["seed"] == "3"


def test_r_schedules():
    assert r_schedule("constant", 10, 2) == 2
    assert [r_schedule("sqrt", n) for n in (1, 4, 5, 16, 17)] == [1, 2, 3, 4, 5]
    assert [r_schedule("two-thirds", n) for n in (1, 8, 9, 1000, 1001)] == [1, 4, 5, 100, 101]
    assert r_schedule("two-thirds", 10**6) == 10**4
    with pytest.raises(ValueError):
        r_schedule("constant", 2, 3)
    with pytest.raises(ValueError):
        r_schedule("cube", 8)


def test_stein_equal_states():
    rho = random_density(2, seed=1)
    for row in stein_table(rho, rho, 0.2, [1, 2, 3], force_generic=True):
        assert row["dh_per_n"] == pytest.approx(-math.log(0.8) / row["n"], abs=1e-9)
    row = stein_row(P, P, 0.2, 500)
    assert row["path"] == "classical"
    assert row["dh_per_n"] == pytest.approx(-math.log(0.8) / 500, abs=1e-12)


def test_stein_classical_convergence():
    target = 0.7 * math.log(0.7 / 0.4) + 0.3 * math.log(0.3 / 0.6)
    rows = stein_table(P, Q, 0.5, [1000, 10000])
    assert all(r["path"] == "classical" for r in rows)
    assert rows[0]["rel_entropy"] == pytest.approx(target, abs=1e-12)
    assert abs(rows[0]["gap"]) <= 0.05 and abs(rows[1]["gap"]) <= 0.02
    assert abs(rows[1]["gap"]) < abs(rows[0]["gap"])


def test_classical_path_matches_generic_at_one_copy():
    for seed in range(5):
        p = np.random.default_rng(seed).dirichlet(np.ones(3))
        q = np.random.default_rng(seed + 50).dirichlet(np.ones(3))
        a = stein_row(np.diag(p), np.diag(q), 0.3, 1)
        b = stein_row(np.diag(p), np.diag(q), 0.3, 1, force_generic=True)
        assert a["path"] == "classical" and b["path"] == "generic"
        assert a["dh_per_n"] == pytest.approx(b["dh_per_n"], abs=1e-10)


def test_simultaneous_spectra():
    u = np.linalg.qr(np.random.default_rng(2).standard_normal((3, 3)))[0]
    p, q = np.array([0.5, 0.3, 0.2]), np.array([0.1, 0.1, 0.8])
    sp = simultaneous_spectra(u @ np.diag(p) @ u.T, u @ np.diag(q) @ u.T)
    pairs = sorted(zip(*sp))
    assert np.allclose(pairs, sorted(zip(p, q)))
    assert simultaneous_spectra(random_density(2, seed=3), random_density(2, seed=4)) is None


def test_stein_noncommuting_sandwich_rows():
    rho, sigma = random_density(2, seed=5), random_density(2, seed=6)
    rows = stein_table(rho, sigma, 0.3, [1, 2, 3, 4])
    for row in rows:
        assert row["path"] == "generic" and row["pass"]
        assert min(row["sandwich_upper_slack"], row["sandwich_lower_slack"]) >= -1e-6
    with pytest.raises(CapacityError):
        stein_row(rho, sigma, 0.3, 13)


def test_robust_reduces_to_iid():
    rho, sigma = random_density(2, seed=7), random_density(2, seed=8)
    rows = robust_stein_table(rho, sigma, 0.3, [1, 2, 3], seeds=[0], r1=0, r2=0)
    iid = stein_table(rho, sigma, 0.3, [1, 2, 3], force_generic=True)
    for a, b in zip(rows, iid):
        assert a["dh_per_n"] == pytest.approx(b["dh_per_n"], abs=1e-9)
        assert a["iid_dh_per_n"] == pytest.approx(b["dh_per_n"], abs=1e-9)


def test_robust_chain_n4_r1():
    rho, sigma = random_density(2, seed=9), random_density(2, seed=10)
    rows = robust_stein_table(rho, sigma, 0.3, [4], seeds=range(20), r1=1, r2=1)
    assert len(rows) == 20
    for row in rows:
        assert row["pass"]
        assert row["dh_per_n"] >= row["chain_lower"] - 1e-7
        assert row["min_dh_per_n"] <= row["iid_dh_per_n"] + 1e-9
        # pinched D_max is no larger than the worst-case defect term
        assert row["pinched_dmax_per_n"] <= row["defect_term"] + 1e-7


def test_robust_rows_are_reproducible():
    rho, sigma = random_density(2, seed=11), random_density(2, seed=12)
    a = robust_stein_table(rho, sigma, 0.3, [3], seeds=[5], r1=1, r2=1)
    b = robust_stein_table(rho, sigma, 0.3, [3], seeds=[5], r1=1, r2=1)
    assert a == b


def test_gsl_member_and_bell():
    rep = gsl_converse_check(np.eye(4) / 4, PPTSet.qubits(1), 0.3, 1, alpha_grid=(2.0,))
    row = rep["rows"][0]
    assert row["ree_per_n"] <= 1e-4 and abs(row["renyi_per_n"]) <= 1e-6 and rep["pass"]
    rep = gsl_converse_check(bell_state(), PPTSet.qubits(1), 0.3, 1, alpha_grid=(1.5, 2.0, 3.0))
    assert rep["pass"] and rep["tightest_alpha"] in (1.5, 2.0, 3.0)
    assert rep["dh_per_n"] <= rep["tightest_rhs"]
    row = next(r for r in rep["rows"] if r["alpha"] == 2.0)
    assert row["slack_term"] == pytest.approx(2 * math.log(1 / 0.7))
    assert row["slack"] >= 0


def test_gsl_single_iid_matches_direct_computation():
    rho, sigma = random_density(2, seed=13), random_density(2, seed=14)
    rep = gsl_converse_check(rho, SingleIID(sigma), 0.2, 3, alpha_grid=(2.0,))
    rn, sn = tensor([rho] * 3), tensor([sigma] * 3)
    assert rep["dh_per_n"] == pytest.approx(dh(rn, sn, 0.2) / 3, abs=1e-12)
    assert rep["rows"][0]["ree_per_n"] == pytest.approx(rel_entropy(rho, sigma), abs=1e-10)
    # consistent with the smooth max-relative entropy sandwich on the same pair
    assert buscemi_sandwich_check(rn, sn, 0.8, 0.1)["pass"] and rep["pass"]


def test_schedule_examples():
    rows = schedule_eval([10, 100, 1000], "constant", 0.1, 2, r0=0).rows
    assert all(r["nu"] == pytest.approx(math.log(10)) for r in rows)
    assert all(r["gamma"] is None and r["r_prime"] is None for r in rows)
    row = schedule_row(16, 1, 0.1, 2)
    assert row["gamma"] == pytest.approx(math.sqrt(4 / math.log(16)), abs=1e-12)
    assert row["gamma"] == pytest.approx(1.2011, abs=5e-5)
    assert row["m"] == 4.0 and row["r_prime"] == pytest.approx(4 * math.log(16) * row["gamma"])
    nu = math.log(10) + 32 * binary_entropy(1 / 16) + 4 * math.log(2)
    assert row["nu"] == pytest.approx(nu)
    assert row["log_xi"] == pytest.approx(0.5 * math.log(2) + (-4 * row["r_prime"] / 15 + nu) / 2)
    with pytest.raises(ValueError):
        schedule_row(4, 5, 0.1, 2)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 10**7), st.integers(1, 50))
def test_schedule_admissibility_flag(n, r):
    r = min(r, n - 1)
    row = schedule_row(n, r, 0.1, 2)
    expect = row["m"] <= n - r and row["r_prime"] <= n - r - row["m"]
    assert row["admissible"] == expect


def test_log_grid():
    g = log_grid(1000, 10**6, 7)
    assert g[0] == 1000 and g[-1] == 10**6 and len(g) == 7 and g == sorted(g)


def test_superadd_product_and_bell():
    tau = random_density(4, seed=15)
    sep = np.kron(np.diag([0.6, 0.4]), np.diag([0.3, 0.7]))
    rep = superadditivity_check(np.kron(sep, sep))
    assert rep["half_ree2"] <= 1e-4 and rep["ree1"] <= 1e-4 and rep["pass"]
    rep = superadditivity_check(np.kron(bell_state(), bell_state()))
    assert rep["ree1"] == pytest.approx(math.log(2), abs=1e-3)
    assert rep["half_ree2"] <= math.log(2) + 2e-4 and rep["pass"]
    with pytest.raises(ValueError, match="marginals"):
        superadditivity_check(np.kron(tau, np.eye(4) / 4))


def test_crossed_pair_state_structure():
    p = 0.6
    rho2 = crossed_pair_state(p)
    first, second = two_copy_marginals(rho2)
    assert np.allclose(first, np.eye(4) / 4) and np.allclose(second, np.eye(4) / 4)
    assert np.trace(rho2).real == pytest.approx(1)
    # the oracle is the isotropic formula in local dimension 4
    F = p + (1 - p) / 16
    assert crossed_pair_ree_oracle(p) == pytest.approx(
        math.log(4) + F * math.log(F) + (1 - F) * math.log((1 - F) / 3))
    assert crossed_pair_ree_oracle(0.2) == 0.0


def test_crossed_pair_matches_oracle():
    p, rho2 = superadd_instance(3)
    res = ree_frank_wolfe(rho2, PPTSet.qubits(2), tol=1e-5)
    oracle = crossed_pair_ree_oracle(p)
    assert res.lower - 1e-8 <= oracle <= res.value + 1e-8
