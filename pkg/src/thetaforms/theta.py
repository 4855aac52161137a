"""Riemann theta functions with half-integer characteristics.

Series are summed over the shifted lattice points n = p + eps/2 lying in an
ellipsoid (n + c)^T Y (n + c) <= R^2, where Y = Im(tau) and Im(z) = Y c.
Writing every term as exp(pi c^T Y c) exp(-pi (n+c)^T Y (n+c)) and splitting
the Gaussian as 1/2 + 1/4 + 1/4 of the exponent gives a rigorous tail bound
(see :func:`_tail_bound`) in terms of the smallest eigenvalue y_min of Y.

z-derivatives are computed by multiplying each term by 2 pi i n factors;
tau-derivatives are read off the z-Hessian through the heat equation.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .f2char import Characteristic, f2_vectors, f2add, f2dot
from .symplectic import (
    GAMMA2,
    GAMMA24,
    STAR24,
    DomainError,
    SymplecticElement,
    act,
    automorphy_factor,
    membership,
    phi_m,
)

DEFAULT_TOL = 1e-12
MAX_RADIUS = 40
SYMMETRY_RTOL = 1e-13


class TruncationInfeasibleError(ArithmeticError):
    """The summation box needed for the requested tolerance exceeds the radius cap."""


class ParityError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PeriodMatrix:
    """A point of the Siegel upper half-space."""

    tau: np.ndarray
    y_min: float = field(init=False)

    def __post_init__(self):
        t = np.array(self.tau, dtype=complex)
        if t.ndim != 2 or t.shape[0] != t.shape[1]:
            raise ValueError(f"tau must be square, got shape {t.shape}")
        scale = max(1.0, float(np.abs(t).max()))
        if np.abs(t - t.T).max() > SYMMETRY_RTOL * scale:
            raise ValueError("tau is not symmetric")
        t = (t + t.T) / 2
        y_min = float(np.linalg.eigvalsh(t.imag).min())
        if y_min <= 0:
            raise ValueError("Im(tau) is not positive definite")
        t.setflags(write=False)
        object.__setattr__(self, "tau", t)
        object.__setattr__(self, "y_min", y_min)

    @property
    def g(self) -> int:
        return self.tau.shape[0]

    def __eq__(self, other):
        return isinstance(other, PeriodMatrix) and np.array_equal(self.tau, other.tau)

    def __hash__(self):
        return hash(self.tau.tobytes())

    def to_json(self) -> dict:
        return {"g": self.g, "re": self.tau.real.tolist(), "im": self.tau.imag.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "PeriodMatrix":
        re = np.array(data["re"], dtype=float)
        im = np.array(data["im"], dtype=float)
        if "g" in data and re.shape != (data["g"], data["g"]):
            raise ValueError(f"declared g={data['g']} but matrices have shape {re.shape}")
        if re.shape != im.shape:
            raise ValueError("re and im parts have different shapes")
        return cls(re + 1j * im)


def as_period_matrix(tau) -> PeriodMatrix:
    return tau if isinstance(tau, PeriodMatrix) else PeriodMatrix(tau)


def random_period_matrix(g: int, rng: np.random.Generator | int | None = None,
                         y0: float = 0.8) -> PeriodMatrix:
    """tau = S + i(Q Q^T + y0 I) with S symmetric and Q entries uniform on [-1, 1]."""
    rng = np.random.default_rng(rng)
    s = rng.uniform(-1, 1, size=(g, g))
    s = np.triu(s) + np.triu(s, 1).T
    q = rng.uniform(-1, 1, size=(g, g))
    return PeriodMatrix(s + 1j * (q @ q.T + y0 * np.eye(g)))


def product_period_matrix(*blocks) -> PeriodMatrix:
    """Block-diagonal period matrix, i.e. a point of the decomposable locus."""
    mats = [np.atleast_2d(as_period_matrix(b).tau) for b in blocks]
    g = sum(m.shape[0] for m in mats)
    out = np.zeros((g, g), dtype=complex)
    k = 0
    for m in mats:
        out[k:k + m.shape[0], k:k + m.shape[0]] = m
        k += m.shape[0]
    return PeriodMatrix(out)


@dataclass(frozen=True)
class ThetaEvaluation:
    value: complex | np.ndarray
    trunc_bound: float
    radius_used: int


@dataclass(frozen=True)
class ThetaJet:
    """Value, z-gradient and z-Hessian from one summation."""

    value: complex
    gradient: np.ndarray
    hessian: np.ndarray
    trunc_bound: float
    radius_used: int


def _tail_bound(R2: float, y_min: float, c: np.ndarray, cyc: float, g: int, order: int) -> float:
    """Upper bound on |sum over x^T Y x > R^2| of (2 pi |n|)^order |term|.

    With x = n + c: |term| = exp(pi c^T Y c) exp(-pi x^T Y x) and
      exp(-pi Q) <= exp(-pi R^2 / 2) exp(-pi Q / 4) exp(-pi Q / 4)   on Q > R^2,
      sup (|x| + |c|)^k exp(-pi y_min |x|^2 / 4) <= 2^(k-1) ((k / (2 beta e))^(k/2) + |c|^k),
      sum_x exp(-pi y_min |x|^2 / 4) <= (1 + 2 / sqrt(y_min))^g,
    where beta = pi y_min / 4 and the last line uses sum f(k + a) <= f_max + integral f.
    """
    beta = math.pi * y_min / 4
    cn = float(np.linalg.norm(c))
    if order == 0:
        poly = 1.0
    else:
        poly = 2.0 ** (order - 1) * ((order / (2 * beta * math.e)) ** (order / 2) + cn**order)
    lattice = (1 + 2 / math.sqrt(y_min)) ** g
    return math.exp(math.pi * cyc - math.pi * R2 / 2) * (2 * math.pi) ** order * poly * lattice


def _radius_squared(tol: float, y_min: float, c, cyc: float, g: int, order: int) -> float:
    pref = _tail_bound(0.0, y_min, c, cyc, g, order)
    return max(2 / math.pi * math.log(pref / tol), 1.0)


def _lattice_terms(eps: Sequence[int], delta: Sequence[int], tau: PeriodMatrix, z: np.ndarray,
                   order: int, tol: float, max_radius: int):
    """Shifted lattice points n and series terms, plus the certified tail bound."""
    g = tau.g
    t = tau.tau
    y = t.imag
    c = np.linalg.solve(y, z.imag)
    cyc = float(c @ y @ c)
    R2 = _radius_squared(tol, tau.y_min, c, cyc, g, order)
    yinv_diag = np.diag(np.linalg.inv(y))
    half = np.sqrt(R2 * yinv_diag)
    e2 = np.asarray(eps, dtype=float) / 2
    lo = np.ceil(-c - e2 - half).astype(int)
    hi = np.floor(-c - e2 + half).astype(int)
    radius = int(max(np.max(np.abs(lo)), np.max(np.abs(hi))))
    if radius > max_radius:
        raise TruncationInfeasibleError(
            f"summation radius {radius} exceeds cap {max_radius} (y_min = {tau.y_min:.3g})"
        )
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    p = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, g)
    n = p + e2
    x = n + c
    inside = np.einsum("ki,ij,kj->k", x, y, x) <= R2
    n = n[inside]
    d2 = np.asarray(delta, dtype=float) / 2
    phase = np.einsum("ki,ij,kj->k", n, t, n) + 2 * n @ (z + d2)
    terms = np.exp(1j * np.pi * phase)
    bound = _tail_bound(R2, tau.y_min, c, cyc, g, order)
    return n, terms, bound, radius


def theta_jet(m: Characteristic, tau, z=None, tol: float = DEFAULT_TOL,
              max_radius: int = MAX_RADIUS) -> ThetaJet:
    """theta_m(tau, z) with its z-gradient and z-Hessian.

    ``trunc_bound`` bounds the omitted tail of each reported entry.
    """
    tau = as_period_matrix(tau)
    g = tau.g
    if m.g != g:
        raise ValueError(f"characteristic has genus {m.g}, tau has genus {g}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    z = np.zeros(g, dtype=complex) if z is None else np.asarray(z, dtype=complex).reshape(g)
    n, terms, bound, radius = _lattice_terms(m.eps, m.delta, tau, z, 2, tol, max_radius)
    k = 2j * np.pi * n
    value = terms.sum()
    grad = k.T @ terms
    hess = np.einsum("ki,kj,k->ij", k, k, terms)
    return ThetaJet(complex(value), grad, (hess + hess.T) / 2, bound, radius)


def theta(m: Characteristic, tau, z=None, tol: float = DEFAULT_TOL,
          max_radius: int = MAX_RADIUS) -> ThetaEvaluation:
    """theta_m(tau, z) = sum_p exp(pi i [(p+eps/2)^T tau (p+eps/2) + 2 (p+eps/2)^T (z+delta/2)])."""
    tau = as_period_matrix(tau)
    if tol <= 0:
        raise ValueError("tol must be positive")
    g = tau.g
    if m.g != g:
        raise ValueError(f"characteristic has genus {m.g}, tau has genus {g}")
    z = np.zeros(g, dtype=complex) if z is None else np.asarray(z, dtype=complex).reshape(g)
    _, terms, bound, radius = _lattice_terms(m.eps, m.delta, tau, z, 0, tol, max_radius)
    return ThetaEvaluation(complex(terms.sum()), bound, radius)


def theta_gradient(m: Characteristic, tau, tol: float = DEFAULT_TOL, allow_even: bool = False,
                   z=None) -> ThetaEvaluation:
    """v_m(tau): the z-gradient of theta_m at z = 0 (or at ``z``)."""
    if not m.is_odd and not allow_even and z is None:
        raise ParityError(f"{m} is even; its gradient at z = 0 vanishes (pass allow_even=True)")
    jet = theta_jet(m, tau, z, tol)
    return ThetaEvaluation(jet.gradient, jet.trunc_bound, jet.radius_used)


def theta_hessian_z(m: Characteristic, tau, tol: float = DEFAULT_TOL, z=None) -> ThetaEvaluation:
    jet = theta_jet(m, tau, z, tol)
    return ThetaEvaluation(jet.hessian, jet.trunc_bound, jet.radius_used)


def heat_factor(g: int) -> np.ndarray:
    """2 pi i (1 + delta_ij), the heat-equation factor relating z- and tau-derivatives."""
    return 2j * np.pi * (1 + np.eye(g))


def theta_tau_derivatives(m: Characteristic, tau, tol: float = DEFAULT_TOL) -> ThetaEvaluation:
    """Matrix of d theta_m / d tau_ij at z = 0, obtained from the z-Hessian."""
    jet = theta_jet(m, tau, None, tol)
    g = jet.hessian.shape[0]
    return ThetaEvaluation(jet.hessian / heat_factor(g), jet.trunc_bound / (2 * np.pi),
                           jet.radius_used)


def theta_tau_derivatives_direct(m: Characteristic, tau, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Cross-check path: differentiate each series term in tau_ij directly.

    tau_ij and tau_ji are one variable, so off-diagonal terms pick up
    2 pi i n_i n_j and diagonal ones pi i n_i^2.
    """
    tau = as_period_matrix(tau)
    z = np.zeros(tau.g, dtype=complex)
    n, terms, _, _ = _lattice_terms(m.eps, m.delta, tau, z, 2, tol, MAX_RADIUS)
    weight = 2 - np.eye(tau.g)
    return 1j * np.pi * weight * np.einsum("ki,kj,k->ij", n, n, terms)


def heat_equation_residual(m: Characteristic, tau, tol: float = DEFAULT_TOL) -> float:
    """max_ij |d^2 theta/dz_i dz_j - 2 pi i (1 + delta_ij) d theta/d tau_ij|, relative."""
    hess = theta_hessian_z(m, tau, tol).value
    tder = theta_tau_derivatives_direct(m, tau, tol)
    rhs = heat_factor(hess.shape[0]) * tder
    scale = max(np.abs(hess).max(), np.abs(rhs).max(), 1.0)
    return float(np.abs(hess - rhs).max() / scale)


# --- second order theta functions -------------------------------------------------


def _second_order_char(sigma) -> Characteristic:
    return Characteristic(tuple(sigma), (0,) * len(sigma))


def second_order_theta(sigma, tau, z=None, tol: float = DEFAULT_TOL,
                       max_radius: int = MAX_RADIUS) -> ThetaEvaluation:
    """Theta[sigma](tau, z) = theta[sigma; 0](2 tau, 2 z)."""
    tau = as_period_matrix(tau)
    z2 = None if z is None else 2 * np.asarray(z, dtype=complex)
    return theta(_second_order_char(sigma), PeriodMatrix(2 * tau.tau), z2, tol, max_radius)


@dataclass(frozen=True)
class SecondOrderConstantVector:
    values: np.ndarray
    trunc_bound: float

    def __getitem__(self, sigma) -> complex:
        from .f2char import f2_index
        return self.values[f2_index(tuple(sigma))]


@dataclass(frozen=True)
class SecondOrderData:
    """Theta[sigma](tau) and their z-Hessians for all sigma, canonical order."""

    values: np.ndarray       # (2^g,)
    hessians: np.ndarray     # (2^g, g, g)
    trunc_bound: float


@functools.lru_cache(maxsize=256)
def _second_order_data(tau: PeriodMatrix, tol: float, max_radius: int) -> SecondOrderData:
    t2 = PeriodMatrix(2 * tau.tau)
    vals, hess, bound = [], [], 0.0
    for sigma in f2_vectors(tau.g):
        jet = theta_jet(_second_order_char(sigma), t2, None, tol, max_radius)
        vals.append(jet.value)
        # z -> 2z contributes a factor 4 to second z-derivatives
        hess.append(4 * jet.hessian)
        bound = max(bound, 4 * jet.trunc_bound)
    return SecondOrderData(np.array(vals), np.array(hess), bound)


def second_order_data(tau, tol: float = DEFAULT_TOL, max_radius: int = MAX_RADIUS) -> SecondOrderData:
    return _second_order_data(as_period_matrix(tau), float(tol), int(max_radius))


def second_order_constants(tau, tol: float = DEFAULT_TOL,
                           max_radius: int = MAX_RADIUS) -> SecondOrderConstantVector:
    d = second_order_data(tau, tol, max_radius)
    return SecondOrderConstantVector(d.values, d.trunc_bound)


def sym_pairs(g: int) -> list[tuple[int, int]]:
    """Canonical order (0,0), (0,1), ..., (0,g-1), (1,1), ..., (g-1,g-1) (0-based)."""
    return [(i, j) for i in range(g) for j in range(i, g)]


def second_order_tau_gradients(tau, tol: float = DEFAULT_TOL) -> np.ndarray:
    """(2^g, g, g) array of d Theta[sigma] / d tau_ij.

    Theta[sigma] satisfies d^2/dz_i dz_j = 4 pi i (1 + delta_ij) d/d tau_ij.
    """
    d = second_order_data(tau, tol)
    g = d.hessians.shape[1]
    return d.hessians / (2 * heat_factor(g))


def second_order_tau_derivatives(tau, tol: float = DEFAULT_TOL) -> np.ndarray:
    """N x 2^g matrix whose row (i, j) holds d Theta[eps] / d tau_ij."""
    grads = second_order_tau_gradients(tau, tol)
    g = grads.shape[1]
    return np.array([grads[:, i, j] for i, j in sym_pairs(g)])


# --- odd gradients -----------------------------------------------------------------


@functools.lru_cache(maxsize=256)
def _odd_gradients(tau: PeriodMatrix, tol: float) -> tuple[tuple[Characteristic, ...], np.ndarray]:
    from .f2char import enumerate_characteristics
    odd = tuple(enumerate_characteristics(tau.g, "odd"))
    grads = np.array([theta_jet(m, tau, None, tol).gradient for m in odd]).T
    return odd, grads


def odd_gradients(tau, tol: float = DEFAULT_TOL) -> tuple[tuple[Characteristic, ...], np.ndarray]:
    """All odd characteristics and the g x #odd matrix of their gradients v_m."""
    return _odd_gradients(as_period_matrix(tau), float(tol))


def odd_gradient(m: Characteristic, tau, tol: float = DEFAULT_TOL) -> np.ndarray:
    odd, grads = odd_gradients(tau, tol)
    return grads[:, odd.index(m)]


# --- classical identities ----------------------------------------------------------


def _relres(lhs, rhs, scale) -> float:
    scale = max(scale, float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(np.asarray(lhs) - np.asarray(rhs))) / scale)


def riemann_bilinear_check(eps, delta, tau, z=None, tol: float = DEFAULT_TOL) -> float:
    """Relative residual of
    theta[eps;delta](tau,z)^2 = (-1)^(eps.delta) sum_sigma (-1)^(sigma.delta) Theta[sigma+eps](tau,z) Theta[sigma](tau,0).

    The overall sign (-1)^(eps.delta) comes from (-1)^(u.delta) with
    u = p1 + p2 + eps when the two series are multiplied; it only matters for odd
    characteristics away from z = 0, where both sides are otherwise nonzero.
    The scale is the largest of both sides and the sum of absolute values of the
    right-hand terms, which keeps the residual meaningful when both sides vanish.
    """
    tau = as_period_matrix(tau)
    m = Characteristic(eps, delta)
    lhs = theta(m, tau, z, tol).value ** 2
    terms = []
    for sigma in f2_vectors(tau.g):
        a = second_order_theta(f2add(sigma, m.eps), tau, z, tol).value
        b = second_order_theta(sigma, tau, None, tol).value
        terms.append((-1) ** (f2dot(sigma, m.delta) + m.parity) * a * b)
    rhs = sum(terms)
    return _relres(lhs, rhs, float(np.sum(np.abs(terms))))


def addition_relation_check(alpha, eps, tau, tol: float = DEFAULT_TOL) -> float:
    """Relative residual of
    Theta[alpha] Theta[alpha+eps] = 2^-g sum_sigma (-1)^(alpha.sigma) theta[eps;sigma](tau)^2."""
    tau = as_period_matrix(tau)
    g = tau.g
    th = second_order_constants(tau, tol)
    lhs = th[alpha] * th[f2add(alpha, eps)]
    terms = [
        (-1) ** f2dot(alpha, sigma) * theta(Characteristic(eps, sigma), tau, None, tol).value ** 2
        for sigma in f2_vectors(g)
    ]
    rhs = sum(terms) / 2**g
    return _relres(lhs, rhs, float(np.sum(np.abs(terms))) / 2**g)


# --- transformation laws -----------------------------------------------------------


@dataclass(frozen=True)
class TransformationReport:
    kind: str
    modulus_residual: float          # relative deviation of the modulus identity
    root_of_unity_residual: float    # |ratio^k - 1| for the appropriate k
    ratio: complex | np.ndarray
    sigma_spread: float = 0.0        # second_order: max deviation of ratios across sigma

    def passed(self, tol: float) -> bool:
        return max(self.modulus_residual, self.root_of_unity_residual, self.sigma_spread) <= tol


def transformation_check(gamma: SymplecticElement, target, tau, kind: str,
                         tol: float = DEFAULT_TOL,
                         max_radius: int = MAX_RADIUS) -> TransformationReport:
    """Numerically test a theta transformation law at ``tau``.

    kind = "characteristic_weight_half": ``target`` is a Characteristic m and
      gamma is in Gamma_g(2).  Checks |theta_m(gamma tau)| = |det(C tau + D)|^(1/2) |theta_m(tau)|
      and that rho = theta_m(gamma tau)^2 / (e^(4 pi i phi_m) det(C tau + D) theta_m(tau)^2)
      satisfies rho^4 = 1.
    kind = "second_order": gamma in Gamma_g(2,4); the ratio
      Theta[sigma](gamma tau)^2 / (det(C tau + D) Theta[sigma](tau)^2) is +-1 and
      independent of sigma.  ``target`` is ignored (all sigma are checked).
    kind = "second_order_squared": gamma in Gamma_g^*(2,4); the same ratio is +1.

    No branch of det(C tau + D)^(1/2) is ever chosen: only squares and moduli
    are compared.  gamma . tau usually has a much smaller Im part than tau, so
    callers may need a larger ``max_radius``.
    """
    tau = as_period_matrix(tau)
    need = {"characteristic_weight_half": GAMMA2, "second_order": GAMMA24,
            "second_order_squared": STAR24}
    if kind not in need:
        raise ValueError(f"unknown transformation kind {kind!r}")
    if not membership(gamma, need[kind]):
        raise DomainError(f"gamma is not in {need[kind]}")
    gtau = PeriodMatrix(act(gamma, tau.tau))
    jdet = complex(np.linalg.det(automorphy_factor(gamma, tau.tau)))

    if kind == "characteristic_weight_half":
        m = target
        new = theta(m, gtau, None, tol, max_radius).value
        old = theta(m, tau, None, tol, max_radius).value
        mod_l, mod_r = abs(new), math.sqrt(abs(jdet)) * abs(old)
        modres = abs(mod_l - mod_r) / max(mod_l, mod_r)
        phase = np.exp(4j * np.pi * float(phi_m(gamma, m)))
        rho = new**2 / (phase * jdet * old**2)
        return TransformationReport(kind, modres, abs(rho**4 - 1), rho)

    new = second_order_constants(gtau, tol, max_radius).values
    old = second_order_constants(tau, tol, max_radius).values
    ratios = new**2 / (jdet * old**2)
    modres = float(np.max(np.abs(np.abs(ratios) - 1)))
    spread = float(np.max(np.abs(ratios - ratios[0])))
    if kind == "second_order":
        unity = float(np.max(np.abs(ratios**2 - 1)))
    else:
        unity = float(np.max(np.abs(ratios - 1)))
    return TransformationReport(kind, modres, unity, ratios, spread)
