"""Property-based checks of the structural invariants."""

import itertools

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

import oracles
from thetaforms import forms as F
from thetaforms import linalg
from thetaforms import theta as T
from thetaforms.e8lattice import ZETA_E8, diophantine_count
from thetaforms.f2char import Characteristic, enumerate_characteristics
from thetaforms.symplectic import FULL, GAMMA2, GAMMA24, STAR24, act, membership, sample_subgroup

SETTINGS = settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])

seeds = st.integers(0, 2**31 - 1)


def complex_matrix(seed, n, m):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m))


@SETTINGS
@given(seeds, st.integers(1, 6))
def test_adjugate_identity(seed, n):
    m = complex_matrix(seed, n, n)
    adj = linalg.adjugate(m)
    d = linalg.det(m)
    scale = max(1.0, abs(d), np.abs(m).max() ** n)
    assert np.abs(m @ adj - d * np.eye(n)).max() < 1e-12 * scale
    assert np.abs(adj @ m - d * np.eye(n)).max() < 1e-12 * scale


@SETTINGS
@given(seeds, st.integers(1, 4), st.integers(1, 6))
def test_binet(seed, m, n):
    a = complex_matrix(seed, m, n)
    b = complex_matrix(seed + 1, n, m)
    scale = max(1.0, np.abs(a).max() ** m * np.abs(b).max() ** m * len(linalg.ordered_subsets(range(n), min(m, n))))
    assert linalg.binet_check(a, b) < 1e-12 * scale


@SETTINGS
@given(seeds, st.integers(2, 5), st.data())
def test_minor_multiplicativity(seed, n, data):
    a = complex_matrix(seed, n, n)
    b = complex_matrix(seed + 7, n, n)
    k = data.draw(st.integers(1, n))
    rows = tuple(sorted(data.draw(st.sets(st.integers(1, n), min_size=k, max_size=k))))
    cols = tuple(sorted(data.draw(st.sets(st.integers(1, n), min_size=k, max_size=k))))
    lhs = linalg.minor_det(a @ b, rows, cols)
    rhs = sum(linalg.minor_det(a, rows, s) * linalg.minor_det(b, s, cols)
              for s in linalg.ordered_subsets(range(1, n + 1), k))
    assert abs(lhs - rhs) < 1e-11 * max(1.0, abs(lhs), np.abs(a).max() ** k * np.abs(b).max() ** k * 20)


@SETTINGS
@given(seeds, st.integers(1, 5), st.integers(1, 5), st.integers(1, 5))
def test_rank_one_expansion(seed, n, k, m):
    a = complex_matrix(seed, n, k)
    b = complex_matrix(seed + 3, k, m)
    rebuilt = sum(np.outer(a[:, i], b[i]) for i in range(k))
    assert np.abs(rebuilt - a @ b).max() <= 1e-13 * max(1.0, np.abs(a @ b).max()) * k


@SETTINGS
@given(seeds, st.integers(2, 5), st.data())
def test_laplace_expansion(seed, n, data):
    m = complex_matrix(seed, n, n)
    k = data.draw(st.integers(1, n))
    cols = tuple(sorted(data.draw(st.sets(st.integers(1, n), min_size=k, max_size=k))))
    assert linalg.laplace_block_expansion_check(m, cols) < 1e-12 * max(1.0, np.abs(m).max() ** n) * 50


@SETTINGS
@given(st.integers(1, 5), st.permutations(range(5)))
def test_parity_invariant_under_coordinate_permutation(g, perm):
    perm = [p for p in perm if p < g]
    for m in enumerate_characteristics(g):
        pm = Characteristic(tuple(m.eps[p] for p in perm), tuple(m.delta[p] for p in perm))
        assert pm.parity == m.parity


@SETTINGS
@given(seeds, st.sampled_from([GAMMA2, GAMMA24, STAR24]), st.integers(1, 4))
def test_subgroup_inclusions(seed, tag, g):
    gamma = sample_subgroup(tag, g, 3, seed)
    assert membership(gamma, tag)
    if membership(gamma, STAR24):
        assert membership(gamma, GAMMA24)
    if membership(gamma, GAMMA24):
        assert membership(gamma, GAMMA2)


@SETTINGS
@given(seeds, seeds)
def test_group_action(seed_tau, seed_gamma):
    tau = T.random_period_matrix(2, seed_tau).tau
    a = sample_subgroup(FULL, 2, 2, seed_gamma)
    b = sample_subgroup(FULL, 2, 2, seed_gamma + 1)
    lhs = act(a, act(b, tau))
    assert np.abs(lhs - act(a @ b, tau)).max() < 1e-10 * max(1.0, np.abs(lhs).max())
    assert np.linalg.eigvalsh(lhs.imag).min() > 0


@SETTINGS
@given(seeds)
def test_theta_parity_in_z(seed):
    rng = np.random.default_rng(seed)
    tau = T.random_period_matrix(2, rng)
    z = rng.normal(size=2) * 0.3 + 1j * rng.normal(size=2) * 0.3
    for m in enumerate_characteristics(2):
        a = T.theta(m, tau, z).value
        b = T.theta(m, tau, -z).value
        assert abs(b - (-1) ** m.parity * a) < 1e-12 * max(1.0, abs(a))


@settings(max_examples=8, deadline=None)
@given(seeds, st.integers(1, 3))
def test_heat_equation_random(seed, g):
    tau = T.random_period_matrix(g, seed)
    for m in enumerate_characteristics(g):
        assert T.heat_equation_residual(m, tau) < 10 * T.DEFAULT_TOL


@settings(max_examples=8, deadline=None)
@given(seeds)
def test_truncation_certificate_doubling(seed):
    rng = np.random.default_rng(seed)
    tau = T.random_period_matrix(2, rng)
    m = enumerate_characteristics(2)[int(rng.integers(16))]
    a = T.theta(m, tau, None, 1e-6)
    b = T.theta(m, tau, None, 1e-14)
    assert abs(a.value - b.value) <= a.trunc_bound + b.trunc_bound


@settings(max_examples=8, deadline=None)
@given(seeds, st.integers(2, 3))
def test_A_antisymmetric_and_rank_equivalence(seed, g):
    tau = T.random_period_matrix(g, seed)
    a = F.A_matrix((0,) * g, (1,) * g, tau)
    b = F.A_matrix((1,) * g, (0,) * g, tau)
    assert np.abs(a + b).max() <= 1e-12 * np.abs(a).max()
    n = F.n_pairs(g)
    assert (linalg.numerical_rank(F.bold_A_matrix(tau)) < n) == (linalg.numerical_rank(F.M_matrix(tau)) < n + 1)


@settings(max_examples=8, deadline=None)
@given(seeds, seeds)
def test_decomposability_gamma_invariant(seed_tau, seed_gamma):
    rng = np.random.default_rng(seed_tau)
    prod = T.product_period_matrix(T.random_period_matrix(1, rng), T.random_period_matrix(1, rng))
    generic = T.random_period_matrix(2, rng)
    gamma = sample_subgroup(FULL, 2, 2, seed_gamma)
    for tau in (prod, generic):
        moved = T.PeriodMatrix(act(gamma, tau.tau))
        assert F.quadric_criterion(tau).verdict == F.quadric_criterion(moved).verdict


@settings(max_examples=6, deadline=None)
@given(st.permutations(range(3)))
def test_count_permutation_invariant(perm):
    m = ZETA_E8[:3, :3]
    perm = list(perm)
    assert diophantine_count(ZETA_E8, m[np.ix_(perm, perm)]).count == diophantine_count(ZETA_E8, m).count


@SETTINGS
@given(st.integers(1, 5))
def test_subset_sign_by_cycles(n):
    g = n + 1
    for k in range(n + 1):
        for s in itertools.combinations(range(1, g), k):
            comp = [x for x in range(1, g) if x not in s]
            assert linalg.subset_sign(g, s, g) == oracles.perm_sign_by_cycles(list(s) + comp)
