import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import bell_state
from qstein.almostiid import symmetrize
from qstein.divergences import binary_entropy, rel_entropy
from qstein.resource import (PPTSet, SingleIID, almostiid_continuity_bound, continuity_bound,
                             continuity_check, is_member, ree_frank_wolfe, ree_gradient,
                             regularized_sequence, replacer_channel, rer_upper_bound_check,
                             smoothing_channel)
from qstein.tensor import (SiteStructure, maximally_entangled, partial_transpose, random_density,
                           tensor, trace_norm)

PPT1 = PPTSet.qubits(1)


def isotropic(F, d=2):
    phi = maximally_entangled(d)
    P = np.outer(phi, phi.conj())
    return F * P + (1 - F) * (np.eye(d * d) - P) / (d * d - 1)


def isotropic_ree(F, d=2):
    # closed form for the relative entropy of entanglement of isotropic states
    if F <= 1 / d:
        return 0.0
    return math.log(d) + F * math.log(F) + (1 - F) * math.log((1 - F) / (d - 1))


def random_ppt_member(seed):
    rng = np.random.default_rng(seed)
    out = np.zeros((4, 4), dtype=complex)
    w = rng.dirichlet(np.ones(3))
    for k in range(3):
        out += w[k] * np.kron(random_density(2, seed=rng), random_density(2, seed=rng))
    return out


def test_membership_examples():
    assert is_member(PPT1, np.kron(random_density(2, seed=1), random_density(2, seed=2)))
    assert not is_member(PPT1, bell_state())
    assert np.linalg.eigvalsh(partial_transpose(bell_state(), [1], (2, 2)))[0] == pytest.approx(-0.5)
    assert is_member(PPT1, np.eye(4) / 4)
    sigma = random_density(2, seed=3)
    iid = SingleIID(sigma, 2)
    assert is_member(iid, np.kron(sigma, sigma)) and not is_member(iid, np.eye(4) / 4)
    with pytest.raises(ValueError):
        is_member(PPT1, np.eye(2) / 2)
    with pytest.raises(ValueError):
        SingleIID(np.diag([1.0, 0.0]))


def test_ree_fixed_points():
    res = ree_frank_wolfe(np.eye(4) / 4, PPT1)
    assert res.value == pytest.approx(0, abs=1e-12) and res.gap <= 1e-4
    res = ree_frank_wolfe(random_ppt_member(4), PPT1)
    assert res.value <= 1e-4 and res.gap <= 1e-4


def test_bell_ree():
    res = ree_frank_wolfe(bell_state(), PPT1)
    assert abs(res.value - math.log(2)) <= 1e-3 and res.gap <= 1e-4
    assert res.lower <= math.log(2) <= res.value + 1e-12
    assert is_member(PPT1, res.sigma, tol=1e-8)


@pytest.mark.parametrize("F", [0.3, 0.6, 0.8, 0.95])
def test_isotropic_against_closed_form(F):
    res = ree_frank_wolfe(isotropic(F), PPT1, tol=1e-6)
    assert res.lower - 1e-9 <= isotropic_ree(F) <= res.value + 1e-9
    assert abs(res.value - isotropic_ree(F)) <= 1e-5


def test_fw_method_agrees_with_barrier():
    rho = random_density(4, seed=5)
    a = ree_frank_wolfe(rho, PPT1, tol=1e-5)
    b = ree_frank_wolfe(rho, PPT1, tol=1e-4, method="fw")
    assert b.gap <= 1e-4
    assert a.lower <= b.value + 1e-9 and b.lower <= a.value + 1e-9
    hist = b.history
    assert all(y <= x + 1e-12 for x, y in zip(hist, hist[1:]))


def test_single_iid_set_is_relative_entropy():
    rho, sigma = random_density(2, seed=6), random_density(2, seed=7)
    res = ree_frank_wolfe(tensor([rho] * 2), SingleIID(sigma, 2))
    assert res.value == pytest.approx(2 * rel_entropy(rho, sigma), abs=1e-10) and res.gap == 0


def test_gradient_matches_finite_difference():
    rho, sigma = random_density(4, seed=8), random_density(4, seed=9)
    direction = random_density(4, seed=10) - sigma
    G = ree_gradient(rho, sigma)
    h = 1e-6
    fd = (rel_entropy(rho, sigma + h * direction) - rel_entropy(rho, sigma - h * direction)) / (2 * h)
    assert np.vdot(G, direction).real == pytest.approx(fd, abs=1e-6)


def test_channels():
    s = SiteStructure.bipartite(2, 2, 2)
    x = random_density(16, seed=11)
    omega = np.eye(4) / 4
    assert np.allclose(smoothing_channel(0.0, omega, s)(x), x)
    full = replacer_channel(omega, 1, s)(replacer_channel(omega, 0, s)(x))
    assert np.allclose(full, np.eye(16) / 16)
    assert np.abs(smoothing_channel(50.0, omega, s)(x) - full).max() <= 1e-20
    y = replacer_channel(random_density(4, seed=12), 0, s)(x)
    assert np.trace(y).real == pytest.approx(1)
    with pytest.raises(ValueError):
        smoothing_channel(-1.0, omega, s)
    # replacing the second site of a product keeps the first factor
    a, b, w = random_density(4, seed=13), random_density(4, seed=14), random_density(4, seed=15)
    assert np.allclose(replacer_channel(w, 1, s)(np.kron(a, b)), np.kron(a, w))
    assert np.allclose(replacer_channel(w, 0, s)(np.kron(a, b)), np.kron(w, b))


def test_smoothing_preserves_ppt():
    two = PPTSet(SiteStructure.bipartite(2, 2, 2))
    for seed in range(10):
        member = np.kron(random_ppt_member(100 + seed), random_ppt_member(200 + seed))
        for t in (0.1, 1.0, 3.0):
            assert is_member(two, smoothing_channel(t, two.omega, two.sites)(member))


def test_continuity_bound_examples():
    assert continuity_bound(0.0, 4, 0.25) == 0.0
    assert almostiid_continuity_bound(32, 0, 2, 0.5) == 0.0
    oracle = 3 * (-0.1 * math.log(0.1) - 0.9 * math.log(0.9)) + 0.6 * math.log(16)
    assert oracle == pytest.approx(2.63880, abs=1e-5)
    assert continuity_bound(0.1, 4, 0.25) == pytest.approx(oracle, abs=1e-12)
    x = math.sqrt(2 / 64)
    assert almostiid_continuity_bound(64, 2, 2, 0.5) == pytest.approx(
        3 * binary_entropy(2 * x) + 12 * x * math.log(4), abs=1e-12)
    with pytest.raises(ValueError):
        continuity_bound(0.6, 4, 0.25)
    with pytest.raises(ValueError):
        almostiid_continuity_bound(15, 1, 2, 0.5)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 0.5), st.floats(0, 0.5))
def test_continuity_bound_monotone(a, b):
    lo, hi = sorted((a, b))
    assert continuity_bound(lo, 4, 0.25) <= continuity_bound(hi, 4, 0.25) + 1e-15


def test_continuity_check_examples():
    rho = random_density(4, seed=16)
    rep = continuity_check(rho, rho, PPT1, PPT1.sites)
    assert rep["eps_n"] == pytest.approx(0, abs=1e-7) and rep["delta_ree"] <= 2e-4 and rep["pass"]
    rho_p = 0.9 * rho + 0.1 * bell_state()
    rep = continuity_check(rho, rho_p, PPT1, PPT1.sites)
    assert rep["eps_n"] == pytest.approx(trace_norm(rho - rho_p) / 2, abs=1e-7)
    assert rep["pass"]
    rep = continuity_check(np.kron(np.diag([1.0, 0]), np.diag([1.0, 0])),
                           np.kron(np.diag([0, 1.0]), np.diag([0, 1.0])), PPT1, PPT1.sites)
    assert rep["status"] == "outside-hypothesis"


def test_rer_cap_examples():
    assert rer_upper_bound_check(np.eye(4) / 4, PPT1)["ree_per_n"] == pytest.approx(0, abs=1e-12)
    rep = rer_upper_bound_check(bell_state(), PPT1)
    assert rep["pass"] and rep["cap"] == pytest.approx(math.log(4))
    for seed in range(5):
        assert rer_upper_bound_check(random_density(4, seed=20 + seed), PPT1)["pass"]


def test_regularized_sequences():
    rho, sigma = random_density(2, seed=17), random_density(2, seed=18)
    seq = regularized_sequence(rho, lambda n: SingleIID(sigma, n), 4)
    assert all(v == pytest.approx(rel_entropy(rho, sigma), abs=1e-10) for _, v, _ in seq)
    seq = regularized_sequence(bell_state(), lambda n: PPTSet.qubits(n), 2)
    values = [v for _, v, _ in seq]
    running = [b for _, _, b in seq]
    assert values[1] <= values[0] + 2e-4
    assert all(y <= x for x, y in zip(running, running[1:]))


def test_ppt_set_convex_and_replacer_closed():
    two = PPTSet(SiteStructure.bipartite(2, 2, 2))
    rng = np.random.default_rng(19)
    members = [np.kron(random_ppt_member(300 + k), random_ppt_member(400 + k)) for k in range(100)]
    for k, m in enumerate(members):
        assert is_member(two, m)
        assert is_member(two, replacer_channel(two.omega, k % 2, two.sites)(m))
        t = rng.uniform()
        assert is_member(two, t * m + (1 - t) * members[k - 1])


def test_symmetrizer_does_not_increase_ree():
    two = PPTSet(SiteStructure.bipartite(2, 2, 2))
    for seed in range(3):
        rho = random_density(16, seed=30 + seed)
        a = ree_frank_wolfe(rho, two).value
        b = ree_frank_wolfe(symmetrize(rho, (4, 4)), two).value
        assert b <= a + 2e-4
