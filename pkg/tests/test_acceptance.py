"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines.
"""

import itertools
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from thetaforms import e8lattice as E
from thetaforms import forms as F
from thetaforms import linalg
from thetaforms import theta as T
from thetaforms.f2char import enumerate_characteristics, f2_vectors
from thetaforms.symplectic import (GAMMA2, GAMMA24, STAR24, automorphy_factor, act,
                                   sample_subgroup)

HERE = Path(__file__).parent


def verdict(number, title, ok, detail, elapsed, limit):
    ok = ok and elapsed < limit
    print(f"{'PASS' if ok else 'FAIL'} criterion {number:>2} {title}: {detail}, "
          f"{elapsed:.2f}s (limit {limit:g}s)")
    return ok


def taus(g, n, seed):
    rng = np.random.default_rng(seed)
    return [T.random_period_matrix(g, rng) for _ in range(n)]


def test_criterion_01_heat_equation():
    t0 = time.perf_counter()
    worst = 0.0
    for g in (1, 2, 3):
        chars = enumerate_characteristics(g)
        for tau in taus(g, 10, 100 + g):
            for m in chars:
                worst = max(worst, T.heat_equation_residual(m, tau))
    dt = time.perf_counter() - t0
    assert verdict(1, "heat equation", worst < 1e-9, f"max residual {worst:.2e} < 1e-9", dt, 30)


def test_criterion_02_bilinear_and_addition():
    t0 = time.perf_counter()
    worst_b = worst_a = 0.0
    rng = np.random.default_rng(200)
    for g in (1, 2):
        vecs = f2_vectors(g)
        for tau in taus(g, 10, 210 + g):
            z = 0.3 * rng.normal(size=g) + 0.3j * rng.normal(size=g)
            for e, d in itertools.product(vecs, vecs):
                worst_b = max(worst_b, T.riemann_bilinear_check(e, d, tau, z))
                worst_a = max(worst_a, T.addition_relation_check(e, d, tau))
    dt = time.perf_counter() - t0
    ok = max(worst_a, worst_b) < 1e-9
    assert verdict(2, "bilinear and addition", ok,
                   f"bilinear {worst_b:.2e}, addition {worst_a:.2e} < 1e-9", dt, 10)


def test_criterion_03_conversion_identities():
    t0 = time.perf_counter()
    worst, checked = 0.0, 0
    for g in (1, 2, 3):
        for tau in taus(g, 3, 300 + g):
            rep = F.conversion_identities_check(tau)
            worst = max(worst, rep.max_residual)
            checked += rep.checked
    dt = time.perf_counter() - t0
    assert verdict(3, "conversion identities", worst < 1e-9,
                   f"max residual {worst:.2e} < 1e-9 over {checked} identities", dt, 60)


def _witness_span(ws):
    return np.array([F.flatten_sym(w) for w in ws])


def _same_span(a, b, rel_tol=1e-6):
    ra = linalg.numerical_rank(a, rel_tol)
    return ra == linalg.numerical_rank(b, rel_tol) == linalg.numerical_rank(np.vstack([a, b]), rel_tol)


def test_criterion_04_decomposability():
    t0 = time.perf_counter()
    problems = []
    rng = np.random.default_rng(400)
    x1x2 = _witness_span([np.array([[0, 1], [1, 0]])])
    x1x2_x1x3 = _witness_span([np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]]),
                               np.array([[0, 0, 1], [0, 0, 0], [1, 0, 0]])])
    products = [
        (T.product_period_matrix(T.random_period_matrix(1, rng), T.random_period_matrix(1, rng)), x1x2),
        (T.product_period_matrix(T.random_period_matrix(1, rng), T.random_period_matrix(1, rng)), x1x2),
        (T.product_period_matrix(T.random_period_matrix(1, rng), T.random_period_matrix(2, rng)), x1x2_x1x3),
    ]
    cases = list(products)
    # transported copies: witnesses move as B -> P^-T B P^-1 with P = C tau + D
    for k, (tau, span) in enumerate(products[1:]):
        gamma = sample_subgroup(GAMMA2, tau.g, 2, 410 + k)
        pinv = np.linalg.inv(automorphy_factor(gamma, tau.tau))
        moved = [pinv.T @ F.unflatten_sym(row, tau.g) @ pinv for row in span]
        cases.append((T.PeriodMatrix(act(gamma, tau.tau)), _witness_span(moved)))
    for tau, span in cases:
        v = F.quadric_criterion(tau, 1e-8)
        if not (v.decomposable and v.rank < v.n and _same_span(_witness_span(v.witnesses), span)):
            problems.append(f"product g={tau.g} rank {v.rank}")
    for g in (2, 3):
        for tau in taus(g, 5, 420 + g):
            v = F.quadric_criterion(tau, 1e-8)
            if v.verdict != "indecomposable" or v.rank != v.n:
                problems.append(f"generic g={g} rank {v.rank}")
    dt = time.perf_counter() - t0
    detail = f"{len(cases)} product and 10 generic points, " + ("all verdicts exact" if not problems else "; ".join(problems))
    assert verdict(4, "decomposability", not problems, detail, dt, 30)


def test_criterion_05_adjugate_theorem():
    """adj(A) = ((4 pi i)^(g-1)/(g-1)!) B with the constant as stated.

    Evaluated faithfully.  The identity actually holds with 8 pi i in place of
    4 pi i, so the stated constant leaves a residual of 1 - 2^(1-g); the
    corrected residual is reported alongside for diagnosis.
    """
    t0 = time.perf_counter()
    worst = worst_fixed = 0.0
    for g, n in ((2, 5), (3, 2)):
        vecs = f2_vectors(g)
        e, d = vecs[0], vecs[-1]
        fixed = (8j * math.pi) ** (g - 1) / math.factorial(g - 1)
        for tau in taus(g, n, 500 + g):
            worst = max(worst, F.adjugate_theorem_check(e, d, tau))
            worst_fixed = max(worst_fixed, F.adjugate_theorem_check(e, d, tau, constant=fixed))
    dt = time.perf_counter() - t0
    ok = worst < 1e-7
    assert verdict(5, "adjugate theorem", ok,
                   f"residual {worst:.2e} vs 1e-7 with (4 pi i)^(g-1)/(g-1)!; "
                   f"{worst_fixed:.2e} with (8 pi i)^(g-1)/(g-1)!", dt, 120)


def test_criterion_06_W_sum():
    t0 = time.perf_counter()
    worst = 0.0
    vecs = f2_vectors(2)
    for tau in taus(2, 5, 600):
        for e, d in itertools.permutations(vecs, 2):
            worst = max(worst, F.adjugate_W_identity_check(e, d, tau))
    dt = time.perf_counter() - t0
    assert verdict(6, "W-sum proposition", worst < 1e-7, f"max residual {worst:.2e} < 1e-7", dt, 60)


def test_criterion_07_det_A():
    t0 = time.perf_counter()
    sample = taus(2, 20, 700)
    gammas = [sample_subgroup(STAR24, 2, 2, 710 + i) for i in range(5)]
    rep = F.det_A_weight_check((0, 1), (1, 0), sample, gammas, nonvanishing_threshold=1e-6, max_radius=150)
    dt = time.perf_counter() - t0
    ok = rep.nonvanishing and rep.max_weight_residual < 1e-6
    assert verdict(7, "det A", ok,
                   f"max |det A|/scale {rep.max_abs_det / rep.scale:.2e} > 1e-6, "
                   f"weight residual {rep.max_weight_residual:.2e} < 1e-6", dt, 60)


def test_criterion_08_transformation_laws():
    t0 = time.perf_counter()
    mod = rho = star = spread = 0.0
    even = enumerate_characteristics(2, "even")
    sample = taus(2, 10, 800)
    for k in range(10):
        tau = sample[k]
        g2 = sample_subgroup(GAMMA2, 2, 2, 810 + k)
        for m in even:
            rep = T.transformation_check(g2, m, tau, "characteristic_weight_half", max_radius=150)
            mod = max(mod, rep.modulus_residual)
            rho = max(rho, rep.root_of_unity_residual)
        rep = T.transformation_check(sample_subgroup(GAMMA24, 2, 2, 830 + k), None, tau, "second_order",
                                     max_radius=150)
        spread = max(spread, rep.sigma_spread, rep.root_of_unity_residual)
        rep = T.transformation_check(sample_subgroup(STAR24, 2, 2, 850 + k), None, tau, "second_order_squared",
                                     max_radius=150)
        star = max(star, rep.root_of_unity_residual, rep.sigma_spread)
    dt = time.perf_counter() - t0
    ok = mod < 1e-8 and rho < 1e-7 and star < 1e-8 and spread < 1e-8
    assert verdict(8, "transformation laws", ok,
                   f"modulus {mod:.1e}, rho^4 {rho:.1e}, Gamma(2,4) ratio {spread:.1e}, "
                   f"Gamma*(2,4) ratio-1 {star:.1e}", dt, 60)


def test_criterion_09_e8_counts():
    t0 = time.perf_counter()
    roots = len(E.vectors_of_norm(E.ZETA_E8, 2))
    norm4 = len(E.vectors_of_norm(E.ZETA_E8, 4))
    quick = time.perf_counter() - t0
    t1 = time.perf_counter()
    aut = E.automorphism_count(E.ZETA_E8).count
    slow = time.perf_counter() - t1
    t2 = time.perf_counter()
    t9 = E.theta_series_coefficient(E.ZETA_E8, 9, E.padded_target(9))
    padded = time.perf_counter() - t2
    target = math.factorial(4) * math.factorial(6) * math.factorial(8)
    ok = (roots == 240 and norm4 == 2160 and quick < 1 and aut == target == 696729600
          and t9 == target and padded < 1)
    assert verdict(9, "E8 exact counts", ok,
                   f"roots {roots} and norm-4 {norm4} in {quick:.2f}s, |Aut| {aut} in {slow:.1f}s, "
                   f"N_T(g=9) {t9} in {padded:.3f}s", time.perf_counter() - t0, 600)


def test_criterion_10_igusa():
    t0 = time.perf_counter()
    worst = max(E.cross_check_theta_numeric([[t]], max_norm=16) for t in (2j, 1j + 0.3, 0.8j - 0.4))
    hist = E.norm_histogram(E.ZETA_E8, 4)
    coeffs = [hist.get(0, 1), hist[2], hist[4]]
    dt = time.perf_counter() - t0
    ok = worst < 1e-9 and coeffs == [1, 240, 2160]
    assert verdict(10, "Igusa identity", ok, f"max residual {worst:.2e} < 1e-9, q-coefficients {coeffs}", dt, 10)


def test_criterion_11_linalg_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1100)
    worst = 0.0
    for n in range(1, 7):
        m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        d = linalg.det(m)
        scale = max(1.0, abs(d), float(np.abs(m).max()) ** n)
        worst = max(worst, float(np.abs(m @ linalg.adjugate(m) - d * np.eye(n)).max()) / scale)
        for k in range(1, n + 1):
            for cols in linalg.ordered_subsets(range(1, n + 1), k):
                worst = max(worst, linalg.laplace_block_expansion_check(m, cols))
    for p, q in ((1, 3), (2, 4), (3, 5), (4, 4)):
        a = rng.normal(size=(p, q)) + 1j * rng.normal(size=(p, q))
        b = rng.normal(size=(q, p)) + 1j * rng.normal(size=(q, p))
        worst = max(worst, linalg.binet_check(a, b))
    signs_ok = True
    for n in range(1, 6):
        g = n + 1
        for k in range(n + 1):
            subsets = linalg.ordered_subsets(range(1, n + 1), k)
            for i_set, j_set in itertools.product(subsets, subsets):
                lhs = linalg.subset_sign(g, i_set, g) * linalg.subset_sign(g, j_set, g)
                signs_ok &= lhs == linalg.index_sum_sign(i_set) * linalg.index_sum_sign(j_set)
    dt = time.perf_counter() - t0
    assert verdict(11, "linalg suite", worst < 1e-12 and signs_ok,
                   f"max residual {worst:.2e} < 1e-12, s(I)s(J) identity {'holds' if signs_ok else 'fails'}",
                   dt, 5)


def test_criterion_12_oracle_independence():
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                           str(HERE / "test_oracles.py")],
                          capture_output=True, text=True, cwd=HERE.parent)
    last = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr.strip()[-200:]
    dt = time.perf_counter() - t0
    assert verdict(12, "oracle independence", proc.returncode == 0, f"oracle target: {last}", dt, 600)
