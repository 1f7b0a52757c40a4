import csv
import math

import numpy as np
import pytest

from conftest import bell_state
from qstein.cli import main
from qstein.divergences import dmax, rel_entropy
from qstein.stateio import read_state, write_state
from qstein.tensor import SiteStructure, canonical_purification, proj, random_density


@pytest.fixture
def files(tmp_path):
    q1 = SiteStructure((2,))
    ab = SiteStructure.bipartite(2, 2)
    rho, sigma = random_density(2, seed=1), random_density(2, seed=2)
    paths = {name: tmp_path / f"{name}.json" for name in
             ("rho", "sigma", "bell", "mixed4", "theta", "two")}
    write_state(paths["rho"], rho, q1)
    write_state(paths["sigma"], sigma, q1)
    write_state(paths["bell"], bell_state(), ab)
    write_state(paths["mixed4"], 0.1 * random_density(4, seed=3) + 0.9 * bell_state(), ab)
    write_state(paths["theta"], proj(canonical_purification(rho)), ab)
    sep = np.kron(np.diag([0.6, 0.4]), np.diag([0.3, 0.7]))
    write_state(paths["two"], np.kron(sep, sep), SiteStructure.bipartite(2, 2, 2))
    paths["tmp"] = tmp_path
    return paths


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_divergence(files, capsys):
    assert main(["divergence", "--kind", "rel", "--rho", str(files["rho"]),
                 "--sigma", str(files["sigma"])]) == 0
    rho, _ = read_state(files["rho"])
    sigma, _ = read_state(files["sigma"])
    assert float(capsys.readouterr().out) == pytest.approx(rel_entropy(rho, sigma), abs=1e-11)
    main(["divergence", "--kind", "dmax", "--rho", str(files["rho"]), "--sigma", str(files["sigma"])])
    assert float(capsys.readouterr().out) == pytest.approx(dmax(rho, sigma), abs=1e-11)


def test_dh_classical_csv(files):
    out = files["tmp"] / "dh.csv"
    assert main(["dh", "--classical", "--p", "0.7,0.3", "--q", "0.4,0.6", "--eps", "0.5",
                 "--n", "10,100", "--out", str(out)]) == 0
    got = rows(out)
    assert [r["n"] for r in got] == ["10", "100"]
    assert set(got[0]) == {"n", "eps", "beta_log", "dh_per_n", "config_hash", "seed"}
    assert float(got[1]["dh_per_n"]) == pytest.approx(-float(got[1]["beta_log"]) / 100)


def test_w1(files, capsys):
    assert main(["w1", "--omega", str(files["rho"]), "--tau", str(files["sigma"])]) == 0
    rho, _ = read_state(files["rho"])
    sigma, _ = read_state(files["sigma"])
    half_trace = np.abs(np.linalg.eigvalsh(rho - sigma)).sum() / 2
    assert float(capsys.readouterr().out) == pytest.approx(half_trace, abs=1e-7)
    main(["w1", "--omega", str(files["rho"]), "--tau", str(files["sigma"]), "--mode", "bracket"])
    lo, hi = map(float, capsys.readouterr().out.split(","))
    assert lo <= half_trace + 1e-7 and hi >= half_trace - 1e-7


def test_almostiid(files):
    out = files["tmp"] / "aiid.csv"
    assert main(["almostiid", "--theta", str(files["theta"]), "--n", "3", "--r", "1",
                 "--seed", "4", "--out", str(out)]) == 0
    row = rows(out)[0]
    assert row["pass"] == "true" and float(row["w1_over_n"]) <= float(row["bound"]) + 1e-6
    state = files["tmp"] / "state.json"
    assert main(["almostiid", "--theta", str(files["rho"]), "--n", "2", "--r", "1",
                 "--emit", "state", "--out", str(state)]) == 0
    m, s = read_state(state)
    assert s.dims == (4, 4) and s.bipartition == ((2, 2), (2, 2))
    assert np.trace(m).real == pytest.approx(1)


def test_ree_and_continuity(files, capsys):
    assert main(["ree", "--rho", str(files["bell"]), "--set", "ppt"]) == 0
    lines = capsys.readouterr().out.split()
    assert lines[0] == "value,gap"
    value, gap = map(float, lines[1].split(","))
    assert abs(value - math.log(2)) <= 1e-3 and gap <= 1e-4
    assert main(["ree", "--rho", str(files["rho"]), "--set", "iid", "--sigma", str(files["sigma"])]) == 0
    rho, _ = read_state(files["rho"])
    sigma, _ = read_state(files["sigma"])
    value = float(capsys.readouterr().out.split()[1].split(",")[0])
    assert value == pytest.approx(rel_entropy(rho, sigma), abs=1e-11)
    out = files["tmp"] / "cont.csv"
    assert main(["continuity", "--rho", str(files["bell"]), "--rhoprime", str(files["mixed4"]),
                 "--set", "ppt", "--out", str(out)]) == 0
    row = rows(out)[0]
    assert row["pass"] == "true" and float(row["delta_ree"]) <= float(row["bound"])


def test_stein_and_determinism(files):
    a, b = files["tmp"] / "a.csv", files["tmp"] / "b.csv"
    args = ["stein", "--rho", str(files["rho"]), "--sigma", str(files["sigma"]), "--eps", "0.3",
            "--n", "1,2,3", "--seed", "7"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b), "--workers", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    got = rows(a)
    assert len(got) == 3 and all(r["seed"] == "7" and r["pass"] == "true" for r in got)
    assert len({r["config_hash"] for r in got}) == 1


def test_stein_classical(files):
    out = files["tmp"] / "s.csv"
    assert main(["stein", "--p", "0.7,0.3", "--q", "0.4,0.6", "--n", "1000", "--out", str(out)]) == 0
    row = rows(out)[0]
    assert row["path"] == "classical" and abs(float(row["gap"])) <= 0.05


def test_robust_stein(files):
    out = files["tmp"] / "r.csv"
    assert main(["robust-stein", "--rho", str(files["rho"]), "--sigma", str(files["sigma"]),
                 "--eps", "0.3", "--n", "2,3", "--samples", "2", "--out", str(out)]) == 0
    got = rows(out)
    assert [(r["n"], r["seed"]) for r in got] == [("2", "0"), ("2", "1"), ("3", "0"), ("3", "1")]
    assert all(r["pass"] == "true" for r in got)


def test_gsl_converse(files):
    out = files["tmp"] / "g.csv"
    assert main(["gsl-converse", "--rho", str(files["bell"]), "--eps", "0.3", "--alpha", "2",
                 "--out", str(out)]) == 0
    row = rows(out)[0]
    assert row["pass"] == "true" and row["tightest"] == "true"


def test_schedule(files, capsys):
    out = files["tmp"] / "sch.csv"
    assert main(["schedule", "--n", "16,64", "--r-rule", "constant", "--out", str(out)]) == 0
    got = rows(out)
    assert float(got[0]["gamma"]) == pytest.approx(1.2011, abs=5e-5)
    assert "xi_strictly_decreasing" in capsys.readouterr().err


def test_schedule_trend_check_exit_code(files, capsys):
    # the default two-thirds schedule does not satisfy the decreasing-trend check
    out = files["tmp"] / "sch.csv"
    assert main(["schedule", "--check-trend", "--out", str(out)]) == 1
    assert "trend check failed" in capsys.readouterr().err


def test_superadd_file_and_instances(files, capsys):
    out = files["tmp"] / "sa.csv"
    assert main(["superadd", "--rho", str(files["two"]), "--out", str(out)]) == 0
    assert rows(out)[0]["pass"] == "true"
    code = main(["superadd", "--instances", "2", "--seed", "0", "--out", str(out)])
    got = rows(out)
    assert len(got) == 2
    failing = [r for r in got if r["pass"] == "false"]
    assert code == (1 if failing else 0)
    if failing:
        assert "failing row" in capsys.readouterr().err


def test_error_exit_codes(files, capsys):
    assert main(["stein", "--p", "0.7,0.3", "--q", "0.4,0.6", "--n", "5", "--eps", "1.5"]) == 2
    assert "error" in capsys.readouterr().err
    assert main(["ree", "--rho", str(files["tmp"] / "missing.json")]) == 2
    with pytest.raises(SystemExit):
        main(["stein", "--n", "3"])


def test_sdp_trace(files):
    trace = files["tmp"] / "trace.csv"
    assert main(["--sdp-trace", str(trace), "w1", "--omega", str(files["rho"]),
                 "--tau", str(files["sigma"])]) == 0
    got = rows(trace)
    assert got and len(got[0]) >= 3
