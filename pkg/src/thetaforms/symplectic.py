"""Sp(2g, Z): the action on the Siegel upper half-space, congruence subgroups,
deterministic test-element sampling and the auxiliary data phi_m and gamma~."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .f2char import Characteristic

COND_LIMIT = 1e12


class ConditioningError(ArithmeticError):
    pass


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class SubgroupTag:
    """One of ``"full"`` (Gamma_g), ``"principal"`` (Gamma_g(n)),
    ``"theta"`` (Gamma_g(n, 2n)) or ``"star24"`` (Gamma_g^*(2, 4))."""

    kind: str
    n: int = 1

    def __post_init__(self):
        if self.kind not in ("full", "principal", "theta", "star24"):
            raise ValueError(f"unknown subgroup kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("level must be positive")
        if self.kind == "star24" and self.n != 2:
            object.__setattr__(self, "n", 2)

    def __str__(self):
        if self.kind == "full":
            return "Gamma_g"
        if self.kind == "principal":
            return f"Gamma_g({self.n})"
        if self.kind == "theta":
            return f"Gamma_g({self.n},{2 * self.n})"
        return "Gamma_g*(2,4)"


FULL = SubgroupTag("full")
GAMMA2 = SubgroupTag("principal", 2)
GAMMA24 = SubgroupTag("theta", 2)
GAMMA48 = SubgroupTag("theta", 4)
STAR24 = SubgroupTag("star24", 2)


def parse_tag(text: str) -> SubgroupTag:
    """Parse ``full``, ``G(2)``, ``G(2,4)``, ``G*(2,4)`` style names."""
    t = text.replace(" ", "").replace("Gamma_g", "G").replace("Gamma", "G")
    if t in ("full", "G"):
        return FULL
    if t in ("star24", "G*(2,4)"):
        return STAR24
    if t.startswith("G(") and t.endswith(")"):
        parts = t[2:-1].split(",")
        n = int(parts[0])
        if len(parts) == 1:
            return SubgroupTag("principal", n)
        if len(parts) == 2 and int(parts[1]) == 2 * n:
            return SubgroupTag("theta", n)
    raise ValueError(f"cannot parse subgroup tag {text!r}")


@dataclass(frozen=True, eq=False)
class SymplecticElement:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        for name in "ABCD":
            blk = np.array(getattr(self, name), dtype=np.int64)
            blk.setflags(write=False)
            object.__setattr__(self, name, blk)
        g = self.A.shape[0]
        if any(getattr(self, n).shape != (g, g) for n in "ABCD"):
            raise ValueError("blocks must all be g x g")

    @property
    def g(self) -> int:
        return self.A.shape[0]

    @classmethod
    def from_matrix(cls, m) -> "SymplecticElement":
        m = np.asarray(m, dtype=np.int64)
        g = m.shape[0] // 2
        return cls(m[:g, :g], m[:g, g:], m[g:, :g], m[g:, g:])

    @classmethod
    def identity(cls, g: int) -> "SymplecticElement":
        i, z = np.eye(g, dtype=np.int64), np.zeros((g, g), dtype=np.int64)
        return cls(i, z, z, i)

    @property
    def matrix(self) -> np.ndarray:
        return np.block([[self.A, self.B], [self.C, self.D]])

    def __matmul__(self, other: "SymplecticElement") -> "SymplecticElement":
        return SymplecticElement.from_matrix(self.matrix @ other.matrix)

    def __eq__(self, other):
        return isinstance(other, SymplecticElement) and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())

    def is_symplectic(self) -> bool:
        A, B, C, D = self.A, self.B, self.C, self.D
        return (
            np.array_equal(A.T @ C, C.T @ A)
            and np.array_equal(B.T @ D, D.T @ B)
            and np.array_equal(A.T @ D - C.T @ B, np.eye(self.g, dtype=np.int64))
        )

    def to_json(self) -> dict:
        return {k: getattr(self, k).tolist() for k in "ABCD"}

    @classmethod
    def from_json(cls, data: dict) -> "SymplecticElement":
        return cls(*(np.array(data[k]) for k in "ABCD"))


def translation(s) -> SymplecticElement:
    """tau -> tau + S for integer symmetric S."""
    s = np.asarray(s, dtype=np.int64)
    g = s.shape[0]
    i, z = np.eye(g, dtype=np.int64), np.zeros((g, g), dtype=np.int64)
    return SymplecticElement(i, s, z, i)


def lower_shear(s) -> SymplecticElement:
    s = np.asarray(s, dtype=np.int64)
    g = s.shape[0]
    i, z = np.eye(g, dtype=np.int64), np.zeros((g, g), dtype=np.int64)
    return SymplecticElement(i, z, s, i)


def inversion(g: int) -> SymplecticElement:
    i, z = np.eye(g, dtype=np.int64), np.zeros((g, g), dtype=np.int64)
    return SymplecticElement(z, -i, i, z)


def gl_conjugation(u) -> SymplecticElement:
    """(U, 0; 0, U^-T) for U in GL(g, Z)."""
    u = np.asarray(u, dtype=np.int64)
    uinv = np.rint(np.linalg.inv(u)).astype(np.int64)
    if not np.array_equal(u @ uinv, np.eye(u.shape[0], dtype=np.int64)):
        raise DomainError("U is not unimodular")
    z = np.zeros_like(u)
    return SymplecticElement(u, z, z, uinv.T)


def act(gamma: SymplecticElement, tau) -> np.ndarray:
    """gamma . tau = (A tau + B)(C tau + D)^-1, symmetrised."""
    tau = np.asarray(tau, dtype=complex)
    den = gamma.C @ tau + gamma.D
    if np.linalg.cond(den) > COND_LIMIT:
        raise ConditioningError("C tau + D is numerically singular")
    num = gamma.A @ tau + gamma.B
    # X = num den^-1  <=>  den^T X^T = num^T
    out = np.linalg.solve(den.T, num.T).T
    return (out + out.T) / 2


def automorphy_factor(gamma: SymplecticElement, tau) -> np.ndarray:
    return gamma.C @ np.asarray(tau, dtype=complex) + gamma.D


def membership(gamma: SymplecticElement, tag: SubgroupTag) -> bool:
    """Exact congruence test for ``gamma`` in the subgroup named by ``tag``."""
    if not gamma.is_symplectic():
        return False
    if tag.kind == "full":
        return True
    n = tag.n
    eye = np.eye(2 * gamma.g, dtype=np.int64)
    if np.any((gamma.matrix - eye) % n):
        return False
    if tag.kind == "principal":
        return True
    A, B, C, D = gamma.A, gamma.B, gamma.C, gamma.D
    if np.any(np.diag(A.T @ B) % (2 * n)) or np.any(np.diag(C.T @ D) % (2 * n)):
        return False
    if tag.kind == "theta":
        return True
    return int(np.trace(A) - gamma.g) % 4 == 0


def phi_m(gamma: SymplecticElement, m: Characteristic) -> Fraction:
    """The exact rational phase phi_m(gamma) for gamma in Gamma_g(2)."""
    if not membership(gamma, GAMMA2):
        raise DomainError("phi_m is only defined on Gamma_g(2)")
    A, B, C, D = (x.astype(object) for x in (gamma.A, gamma.B, gamma.C, gamma.D))
    e = np.array(m.eps, dtype=object)
    d = np.array(m.delta, dtype=object)
    quad = e @ B.T @ D @ e + d @ A.T @ C @ d - 2 * (e @ B.T @ C @ d)
    lin = np.diag(A.T @ B) @ (D @ e - C @ d)
    return Fraction(-int(quad), 8) + Fraction(int(lin), 4)


def double_cover_element(gamma: SymplecticElement) -> SymplecticElement:
    """gamma~ = (A, 2B; C/2, D), so that 2 (gamma . tau) = gamma~ . (2 tau)."""
    if np.any(gamma.C % 2):
        raise DomainError("C must be even")
    return SymplecticElement(gamma.A, 2 * gamma.B, gamma.C // 2, gamma.D)


def _random_symmetric(rng: np.random.Generator, g: int, lo: int, hi: int, even_diag: bool):
    s = rng.integers(lo, hi + 1, size=(g, g))
    s = np.triu(s) + np.triu(s, 1).T
    if even_diag:
        s[np.diag_indices(g)] = 2 * rng.integers(-1, 2, size=g)
    return s


def _elementary_symmetric(rng: np.random.Generator, g: int, even_diag: bool) -> np.ndarray:
    """+-(E_ij + E_ji) for i != j, or +-E_ii (+-2 E_ii when ``even_diag``)."""
    s = np.zeros((g, g), dtype=np.int64)
    i, j = sorted(rng.integers(g, size=2))
    sign = rng.choice([-1, 1])
    if i == j:
        s[i, i] = sign * (2 if even_diag else 1)
    else:
        s[i, j] = s[j, i] = sign
    return s


def _generator(tag: SubgroupTag, g: int, rng: np.random.Generator) -> SymplecticElement:
    """One random generator lying in ``tag``'s subgroup by construction.

    Sparse (elementary) matrices keep Im(gamma . tau) from collapsing, which
    would blow up the theta summation radius.
    """
    n = 1 if tag.kind == "full" else tag.n
    # theta-type subgroups need n*diag(S) = 0 mod 2n, i.e. diag(S) even
    even = tag.kind in ("theta", "star24")
    choice = rng.integers(3)
    if choice == 0:
        return translation(n * _elementary_symmetric(rng, g, even))
    if choice == 1:
        if tag.kind == "full":
            return inversion(g)
        return lower_shear(n * _elementary_symmetric(rng, g, even))
    u = np.eye(g, dtype=np.int64)
    if g > 1:
        i, j = rng.choice(g, size=2, replace=False)
        u[i, j] = n * rng.choice([-1, 1])
    elif tag.kind == "full":
        u[0, 0] = rng.choice([-1, 1])
    return gl_conjugation(u)


def sample_subgroup(tag: SubgroupTag, g: int, word_length: int, seed: int,
                    max_tries: int = 50) -> SymplecticElement:
    """Deterministic pseudo-random word of ``word_length`` generators in ``tag``.

    Generators are chosen inside the subgroup (translations and lower shears by
    n times an elementary symmetric matrix, elementary GL conjugations congruent
    to 1 mod n; for the full group the inversion replaces the lower shear), so the membership
    filter is a safety net; after ``max_tries`` rejected words a translation by
    2n*S with even diagonal is returned, which lies in every supported subgroup.
    Words of length 0 give the identity.
    """
    if word_length <= 0:
        return SymplecticElement.identity(g)
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        gamma = SymplecticElement.identity(g)
        for _ in range(word_length):
            gamma = gamma @ _generator(tag, g, rng)
        if membership(gamma, tag):
            return gamma
    return translation(2 * tag.n * _random_symmetric(rng, g, -1, 1, True))
