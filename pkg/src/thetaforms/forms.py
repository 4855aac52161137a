"""Vector-valued modular forms built from theta gradients and second order
theta constants, and the holomorphic differential forms derived from them.

Symmetric g x g matrices are flattened to length N = g(g+1)/2 vectors in the
order (1,1), (1,2), ..., (1,g), (2,2), ..., (g,g).  Internally indices are
0-based; the subset-sign helpers in :mod:`thetaforms.linalg` are 1-based.

A_{eps,delta} is taken literally from its definition, with the z-derivatives of
Theta[sigma](tau, z) = theta[sigma;0](2 tau, 2 z).  Through the heat equation
this is A = 8 pi i (Theta[eps] dTheta[delta] - Theta[delta] dTheta[eps]) with
d = ((1 + delta_ij)/2) d/d tau_ij, i.e. A = -8 pi i Theta[delta]^2 d(Theta[eps]/Theta[delta]).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from . import linalg
from .f2char import Characteristic, enumerate_characteristics, f2_index, f2_vectors, f2add, f2dot
from .symplectic import STAR24, DomainError, SymplecticElement, act, automorphy_factor, membership
from .theta import (
    DEFAULT_TOL,
    ParityError,
    PeriodMatrix,
    as_period_matrix,
    odd_gradient,
    odd_gradients,
    second_order_data,
    second_order_tau_gradients,
    sym_pairs,
)

DEFAULT_RANK_TOL = linalg.DEFAULT_RANK_TOL


def n_pairs(g: int) -> int:
    return g * (g + 1) // 2


def flatten_sym(m) -> np.ndarray:
    m = np.asarray(m)
    return np.array([m[i, j] for i, j in sym_pairs(m.shape[0])])


def unflatten_sym(v, g: int) -> np.ndarray:
    out = np.zeros((g, g), dtype=complex)
    for k, (i, j) in enumerate(sym_pairs(g)):
        out[i, j] = out[j, i] = v[k]
    return out


def trace_weights(g: int) -> np.ndarray:
    """1 on diagonal pairs, 2 off the diagonal: flatten(B) * w . flatten(C) = tr(B C)."""
    return np.array([1.0 if i == j else 2.0 for i, j in sym_pairs(g)])


# --- C and A ---------------------------------------------------------------------


def C_matrix(eps, delta, tau, tol: float = DEFAULT_TOL) -> np.ndarray:
    """C_{eps,delta} = 2 v v^T for the odd characteristic [eps, delta]."""
    m = Characteristic(eps, delta)
    if not m.is_odd:
        raise ParityError(f"{m} is even")
    v = odd_gradient(m, tau, tol)
    return 2 * np.outer(v, v)


def _theta2(sigma, data) -> tuple[complex, np.ndarray]:
    k = f2_index(tuple(sigma))
    return data.values[k], data.hessians[k]


def A_matrix(eps, delta, tau, tol: float = DEFAULT_TOL) -> np.ndarray:
    """A_{eps,delta} = Hess Theta[delta] * Theta[eps] - Hess Theta[eps] * Theta[delta] at z = 0."""
    data = second_order_data(tau, tol)
    te, he = _theta2(eps, data)
    td, hd = _theta2(delta, data)
    return hd * te - he * td


def reduced_tau_gradient(sigma, tau, tol: float = DEFAULT_TOL) -> np.ndarray:
    """The matrix dTheta[sigma] with entries ((1 + delta_ij)/2) dTheta[sigma]/d tau_ij."""
    grads = second_order_tau_gradients(tau, tol)
    g = grads.shape[1]
    return grads[f2_index(tuple(sigma))] * (1 + np.eye(g)) / 2


def quotient_form(eps, delta, tau, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Theta[delta]^2 d(Theta[eps] / Theta[delta]) by the quotient rule."""
    data = second_order_data(tau, tol)
    te, _ = _theta2(eps, data)
    td, _ = _theta2(delta, data)
    return td * reduced_tau_gradient(eps, tau, tol) - te * reduced_tau_gradient(delta, tau, tol)


def _residual(lhs, rhs, scale: float = 0.0) -> float:
    lhs, rhs = np.asarray(lhs), np.asarray(rhs)
    scale = max(scale, float(np.abs(lhs).max(initial=0)), float(np.abs(rhs).max(initial=0)))
    if scale == 0:
        return 0.0
    return float(np.abs(lhs - rhs).max() / scale)


@dataclass
class ConversionReport:
    c_from_a: float
    a_from_c: float
    checked: int

    @property
    def max_residual(self) -> float:
        return max(self.c_from_a, self.a_from_c)


def conversion_identities_check(tau, tol: float = DEFAULT_TOL) -> ConversionReport:
    """Residuals of
        C_{eps,delta} = 1/2 sum_alpha (-1)^(alpha.delta) A_{eps+alpha, alpha}
        A_{eps+alpha, alpha} = 2^(1-g) sum_{delta: [eps,delta] odd} (-1)^(alpha.delta) C_{eps,delta}
    over all admissible indices.  Each residual is relative to the sum of the
    absolute values of the terms on the right.
    """
    tau = as_period_matrix(tau)
    g = tau.g
    vecs = f2_vectors(g)
    c_res = a_res = 0.0
    count = 0
    for eps in vecs:
        a_mats = {alpha: A_matrix(f2add(eps, alpha), alpha, tau, tol) for alpha in vecs}
        odd_deltas = [d for d in vecs if f2dot(eps, d) == 1]
        c_mats = {d: C_matrix(eps, d, tau, tol) for d in odd_deltas}
        for d in odd_deltas:
            terms = [(-1) ** f2dot(alpha, d) * a_mats[alpha] for alpha in vecs]
            rhs = sum(terms) / 2
            scale = float(sum(np.abs(t).max() for t in terms)) / 2
            c_res = max(c_res, _residual(c_mats[d], rhs, scale))
            count += 1
        for alpha in vecs:
            terms = [(-1) ** f2dot(alpha, d) * c_mats[d] for d in odd_deltas]
            rhs = sum(terms, np.zeros((g, g), dtype=complex)) / 2 ** (g - 1)
            scale = float(sum(np.abs(t).max() for t in terms)) / 2 ** (g - 1)
            a_res = max(a_res, _residual(a_mats[alpha], rhs, scale))
            count += 1
    return ConversionReport(c_res, a_res, count)


# --- decomposability ------------------------------------------------------------


def M_matrix(tau, tol: float = DEFAULT_TOL) -> np.ndarray:
    """(N+1) x 2^g: second order theta constants, then their tau_ij-derivatives."""
    tau = as_period_matrix(tau)
    data = second_order_data(tau, tol)
    grads = second_order_tau_gradients(tau, tol)
    rows = [data.values] + [grads[:, i, j] for i, j in sym_pairs(tau.g)]
    return np.array(rows)


def unordered_pairs(g: int) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    vecs = f2_vectors(g)
    return [(a, b) for a, b in itertools.combinations(vecs, 2)]


def bold_A_matrix(tau, tol: float = DEFAULT_TOL) -> np.ndarray:
    """N x 2^(g-1)(2^g-1) matrix of flattened A_{alpha,beta} for alpha < beta."""
    tau = as_period_matrix(tau)
    cols = [flatten_sym(A_matrix(a, b, tau, tol)) for a, b in unordered_pairs(tau.g)]
    return np.array(cols).T


def bold_C_rows(tau, tol: float = DEFAULT_TOL) -> tuple[tuple[Characteristic, ...], np.ndarray]:
    """One row per odd m: flatten(C_m) weighted so that row . flatten(B) = tr(B C_m)."""
    tau = as_period_matrix(tau)
    odd, grads = odd_gradients(tau, tol)
    w = trace_weights(tau.g)
    rows = [w * flatten_sym(2 * np.outer(v, v)) for v in grads.T]
    return odd, np.array(rows)


@dataclass
class QuadricVerdict:
    verdict: str                         # "decomposable_suspect" or "indecomposable"
    rank: int
    n: int
    singular_values: np.ndarray
    witnesses: list[np.ndarray] = field(default_factory=list)

    @property
    def decomposable(self) -> bool:
        return self.verdict == "decomposable_suspect"


def quadric_criterion(tau, rel_tol: float = DEFAULT_RANK_TOL,
                      tol: float = DEFAULT_TOL) -> QuadricVerdict:
    """Do the gradients v_m of all odd m lie on a common quadric v^T B v = 0?

    Rank N of the stacked, trace-weighted C_m rows means no quadric passes
    through them (indecomposable).  Otherwise the right null space yields the
    coefficient matrices B of such quadrics.
    """
    tau = as_period_matrix(tau)
    g = tau.g
    if g < 2:
        raise ValueError("the quadric criterion needs g >= 2")
    _, rows = bold_C_rows(tau, tol)
    n = n_pairs(g)
    _, s, vh = np.linalg.svd(rows)
    rank = int(np.sum(s > rel_tol * s[0])) if s.size and s[0] > 0 else 0
    if rank == n:
        return QuadricVerdict("indecomposable", rank, n, s)
    null = vh[rank:].conj()
    witnesses = []
    for q in null:
        b = unflatten_sym(q, g)
        witnesses.append(b / b.flat[np.argmax(np.abs(b))])   # largest entry scaled to 1
    return QuadricVerdict("decomposable_suspect", rank, n, s, witnesses)


# --- wedge forms ----------------------------------------------------------------


def wedge_vector(vectors) -> np.ndarray:
    """v_1 ^ ... ^ v_(g-1) for a g x (g-1) matrix: F_i = (-1)^(i+1) det(rows != i), 1-based i.

    For g = 2 this is (v_2, -v_1).
    """
    v = np.asarray(vectors, dtype=complex)
    g = v.shape[0]
    if v.shape[1] != g - 1:
        raise ValueError(f"expected g x (g-1) input, got {v.shape}")
    idx = np.arange(g)
    return np.array([(-1) ** i * linalg.det(v[idx != i]) for i in range(g)])


def gradient_wedge(chars: Sequence[Characteristic], tau, tol: float = DEFAULT_TOL) -> np.ndarray:
    tau = as_period_matrix(tau)
    g = tau.g
    if g < 2:
        raise ValueError("wedge forms need g >= 2")
    chars = list(chars)
    if len(chars) != g - 1:
        raise DomainError(f"need g - 1 = {g - 1} characteristics, got {len(chars)}")
    if len(set(chars)) != len(chars):
        raise DomainError("characteristics must be distinct")
    if any(not m.is_odd for m in chars):
        raise DomainError("characteristics must be odd")
    v = np.array([odd_gradient(m, tau, tol) for m in chars]).T
    return wedge_vector(v)


def wedge_form_W(chars: Sequence[Characteristic], tau, tol: float = DEFAULT_TOL) -> np.ndarray:
    """W(M) = pi^(2-2g) F F^T with F the wedge of the gradients of ``chars``."""
    g = as_period_matrix(tau).g
    f = gradient_wedge(chars, tau, tol)
    return np.pi ** (2 - 2 * g) * np.outer(f, f)


# --- Freitag's pairing and the adjugate theorem -----------------------------------


def _power_minor(theta_value: complex, dmat: np.ndarray, power: int,
                 rows: tuple[int, ...], cols: tuple[int, ...]) -> complex:
    """|d^I_J| Theta^n in closed form: n!/(n-k)! Theta^(n-k) |(d Theta)^I_J|."""
    k = len(rows)
    if k > power:
        return 0j
    falling = math.perm(power, k)
    return falling * theta_value ** (power - k) * linalg.minor_det(dmat, rows, cols)


def freitag_pairing(eps, delta, tau, tol: float = DEFAULT_TOL, power: int | None = None) -> np.ndarray:
    """The matrix B with {Theta[eps]^n, Theta[delta]^n} = tr(B dtau-check), n = g - 1 by default.

        B_ij = (-1)^(i+j) sum_k (-1)^k / binom(g-1, k)
               sum_{I in P_k(X_g - i), J in P_k(X_g - j)} s(I) s(J) |d^I_J| f |d^(I^c)_(J^c)| h

    Each differential-operator minor applied to a power of Theta collapses to
    first-derivative minors (the higher-derivative terms cancel by the heat
    equation), so only dTheta is needed.
    """
    tau = as_period_matrix(tau)
    g = tau.g
    n = g - 1 if power is None else power
    data = second_order_data(tau, tol)
    te, td = data.values[f2_index(tuple(eps))], data.values[f2_index(tuple(delta))]
    de = reduced_tau_gradient(eps, tau, tol)
    dd = reduced_tau_gradient(delta, tau, tol)
    ground = range(1, g + 1)
    out = np.zeros((g, g), dtype=complex)
    for i in range(1, g + 1):
        xi = [x for x in ground if x != i]
        for j in range(i, g + 1):
            xj = [x for x in ground if x != j]
            total = 0j
            for k in range(g):
                inner = 0j
                for rows in linalg.ordered_subsets(xi, k):
                    si = linalg.subset_sign(i, rows, g)
                    crows = linalg.complement(rows, xi)
                    for cols in linalg.ordered_subsets(xj, k):
                        sj = linalg.subset_sign(j, cols, g)
                        ccols = linalg.complement(cols, xj)
                        inner += (si * sj * _power_minor(te, de, n, rows, cols)
                                  * _power_minor(td, dd, n, crows, ccols))
                total += (-1) ** k / math.comb(g - 1, k) * inner
            out[i - 1, j - 1] = out[j - 1, i - 1] = (-1) ** (i + j) * total
    return out


def adjugate_theorem_constant(g: int) -> complex:
    """(4 pi i)^(g-1) / (g-1)!, the constant relating adj(A_{eps,delta}) to B_{eps,delta}."""
    return (4j * np.pi) ** (g - 1) / math.factorial(g - 1)


def adjugate_theorem_check(eps, delta, tau, tol: float = DEFAULT_TOL,
                           constant: complex | None = None) -> float:
    """Max-entry relative residual between adj(A_{eps,delta}) and constant * B_{eps,delta}.

    ``constant`` defaults to :func:`adjugate_theorem_constant`.
    """
    tau = as_period_matrix(tau)
    if tuple(eps) == tuple(delta):
        raise ValueError("eps and delta must differ")
    if tau.g < 2:
        raise ValueError("needs g >= 2")
    c = adjugate_theorem_constant(tau.g) if constant is None else constant
    lhs = linalg.adjugate(A_matrix(eps, delta, tau, tol))
    rhs = c * freitag_pairing(eps, delta, tau, tol)
    return _residual(lhs, rhs)


def admissible_alphas(eps, delta) -> list[tuple[int, ...]]:
    """alpha with [eps + delta, alpha] odd; 2^(g-1) of them when eps != delta."""
    s = f2add(tuple(eps), tuple(delta))
    return [a for a in f2_vectors(len(s)) if f2dot(s, a) == 1]


def adjugate_W_sum(eps, delta, tau, tol: float = DEFAULT_TOL) -> np.ndarray:
    """(pi^2 / 2^(g-2))^(g-1) sum (-1)^(delta.(alpha_1+...)) W([eps+delta, alpha_1], ...).

    The sum runs over strictly increasing tuples of admissible alpha (each set
    of g - 1 distinct characteristics once); for g = 2 this is every alpha.
    """
    tau = as_period_matrix(tau)
    g = tau.g
    s = f2add(tuple(eps), tuple(delta))
    total = np.zeros((g, g), dtype=complex)
    for alphas in itertools.combinations(admissible_alphas(eps, delta), g - 1):
        sign = (-1) ** sum(f2dot(tuple(delta), a) for a in alphas)
        chars = [Characteristic(s, a) for a in alphas]
        total += sign * wedge_form_W(chars, tau, tol)
    return (np.pi**2 / 2 ** (g - 2)) ** (g - 1) * total


def adjugate_W_identity_check(eps, delta, tau, tol: float = DEFAULT_TOL) -> float:
    if tuple(eps) == tuple(delta):
        raise ValueError("eps and delta must differ")
    lhs = linalg.adjugate(A_matrix(eps, delta, tau, tol))
    return _residual(lhs, adjugate_W_sum(eps, delta, tau, tol))


@dataclass
class DetWeightReport:
    max_abs_det: float
    scale: float
    nonvanishing: bool
    weight_residuals: list[float]

    @property
    def max_weight_residual(self) -> float:
        return max(self.weight_residuals, default=0.0)


def det_A(eps, delta, tau, tol: float = DEFAULT_TOL) -> complex:
    return linalg.det(A_matrix(eps, delta, tau, tol))


def det_A_weight_check(eps, delta, taus: Sequence, gammas: Sequence[SymplecticElement],
                       tol: float = DEFAULT_TOL, nonvanishing_threshold: float = 1e-6,
                       max_radius: int | None = None) -> DetWeightReport:
    """Sampled non-vanishing of det A_{eps,delta} and its weight g+2 modulus law.

    Non-vanishing compares |det A| with (max_ij |A_ij|)^g, the size of det A
    if A had no cancellation.  The weight law is tested at the first sampled
    tau for every gamma:  |det A(gamma tau)| = |det(C tau + D)|^(g+2) |det A(tau)|.
    """
    if tuple(eps) == tuple(delta):
        raise ValueError("eps and delta must differ")
    best, best_scale = 0.0, 1.0
    for t in taus:
        a = A_matrix(eps, delta, t, tol)
        scale = float(np.abs(a).max()) ** a.shape[0]
        val = abs(linalg.det(a))
        if scale > 0 and val / scale > best / best_scale:
            best, best_scale = val, scale
    residuals = []
    base = as_period_matrix(taus[0])
    g = base.g
    d0 = abs(det_A(eps, delta, base, tol))
    for gamma in gammas:
        if not membership(gamma, STAR24):
            raise DomainError("gammas must lie in Gamma_g^*(2,4)")
        gt = PeriodMatrix(act(gamma, base.tau))
        if max_radius is None:
            d1 = abs(det_A(eps, delta, gt, tol))
        else:
            d1 = abs(_det_A_radius(eps, delta, gt, tol, max_radius))
        j = abs(np.linalg.det(automorphy_factor(gamma, base.tau))) ** (g + 2)
        residuals.append(abs(d1 - j * d0) / max(d1, j * d0))
    return DetWeightReport(best, best_scale, best / best_scale > nonvanishing_threshold, residuals)


def _det_A_radius(eps, delta, tau, tol, max_radius) -> complex:
    data = second_order_data(tau, tol, max_radius)
    te, he = _theta2(eps, data)
    td, hd = _theta2(delta, data)
    return linalg.det(hd * te - he * td)


# --- differential forms ----------------------------------------------------------


def omega_coefficients(eps, delta, tau, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Coefficients of tr(adj(A_{eps,delta}) dtau-check) in the basis dtau-check_ij, i <= j.

    The trace sums over all (i, j), and dtau-check_ij = dtau-check_ji, so
    off-diagonal coefficients are doubled.
    """
    if tuple(eps) == tuple(delta):
        raise ValueError("eps and delta must differ")
    adj = linalg.adjugate(A_matrix(eps, delta, tau, tol))
    return trace_weights(adj.shape[0]) * flatten_sym(adj)


def omega_W_coefficients(chars: Sequence[Characteristic], tau, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Coefficients of tr(W(M) dtau-check), same convention as :func:`omega_coefficients`."""
    w = wedge_form_W(chars, tau, tol)
    return trace_weights(w.shape[0]) * flatten_sym(w)


# --- Fourier coefficients of the pairing ------------------------------------------


def _key(t) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple(int(x) for x in row) for row in np.asarray(t))


def is_psd_integer(t) -> bool:
    """Exact positive-semidefiniteness of an integer symmetric matrix (rational LDL^T)."""
    a = [[Fraction(int(x)) for x in row] for row in np.asarray(t)]
    n = len(a)
    for k in range(n):
        if a[k][k] < 0:
            return False
        if a[k][k] == 0:
            if any(a[k][j] != 0 for j in range(k + 1, n)):
                return False
            continue
        for i in range(k + 1, n):
            f = a[i][k] / a[k][k]
            for j in range(k + 1, n):
                a[i][j] -= f * a[k][j]
    return True


def _int_minor(t: np.ndarray, rows, cols) -> int:
    if not rows:
        return 1
    sub = linalg.submatrix(t, rows, cols)
    if not sub.any():
        return 0
    return int(round(linalg.det(sub.astype(float)).real)) if len(rows) <= 3 else _bareiss(sub)


def _bareiss(m: np.ndarray) -> int:
    """Exact integer determinant (fraction-free elimination)."""
    a = [[int(x) for x in row] for row in m]
    n = len(a)
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def fourier_coefficient_pairing(t, f_coeffs: Mapping, h_coeffs: Mapping):
    """The (g, g) Fourier coefficient at T of the pairing {f, h}:

        sum_{k=1}^{g} (-1)^k / binom(g-1, k-1)
            sum_{I, J in P_(k-1)(X_(g-1)), T1 + T2 = T} s(I) s(J) |T1|^I_J |T2|^(I^c)_(J^c) a_f(T1) a_h(T2)

    ``f_coeffs`` and ``h_coeffs`` map integer symmetric matrices (nested tuples)
    to coefficients.  T1 ranges over the support of f; splittings with T2
    outside h's support or not positive semidefinite contribute nothing.
    Integer input gives an exact Fraction.  With this normalisation the
    coefficient of exp(pi i tr(T tau)) in B_gg equals -(pi i)^(g-1) times the
    returned value.
    """
    t = np.asarray(t, dtype=np.int64)
    g = t.shape[0]
    if t.ndim != 2 or t.shape[1] != g or not np.array_equal(t, t.T):
        raise linalg.ShapeError("T must be a square symmetric matrix")
    h_map = {_key(k): v for k, v in h_coeffs.items()}
    ground = list(range(1, g))
    total = Fraction(0)
    exact = True
    for t1_key, af in f_coeffs.items():
        t1 = np.array(t1_key, dtype=np.int64).reshape(g, g)
        t2 = t - t1
        ah = h_map.get(_key(t2))
        if ah is None or not is_psd_integer(t1) or not is_psd_integer(t2):
            continue
        for k in range(1, g + 1):
            inner = 0
            for rows in linalg.ordered_subsets(ground, k - 1):
                si = linalg.subset_sign(g, rows, g)
                crows = linalg.complement(rows, ground)
                for cols in linalg.ordered_subsets(ground, k - 1):
                    sj = linalg.subset_sign(g, cols, g)
                    ccols = linalg.complement(cols, ground)
                    inner += si * sj * _int_minor(t1, rows, cols) * _int_minor(t2, crows, ccols)
            term = Fraction((-1) ** k, math.comb(g - 1, k - 1)) * inner
            prod = af * ah
            if isinstance(prod, (int, Fraction)):
                total += term * prod
            else:
                exact = False
                total = complex(total) + complex(term) * prod
    return total if exact else complex(total)
