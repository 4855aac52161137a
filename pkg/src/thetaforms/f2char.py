"""Theta characteristics over F_2^g."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

MAX_GENUS = 12

F2Vector = tuple[int, ...]


class SizeLimitError(ValueError):
    pass


def f2vec(bits: Sequence[int] | str) -> F2Vector:
    """Coerce ``bits`` (a sequence of 0/1 or a string like ``"011"``) to a tuple."""
    if isinstance(bits, str):
        bits = [int(c) for c in bits]
    out = tuple(int(b) for b in bits)
    if any(b not in (0, 1) for b in out):
        raise ValueError(f"entries must be 0 or 1, got {bits!r}")
    return out


def f2add(a: F2Vector, b: F2Vector) -> F2Vector:
    return tuple((x + y) % 2 for x, y in zip(a, b, strict=True))


def f2dot(a: F2Vector, b: F2Vector) -> int:
    return sum(x * y for x, y in zip(a, b, strict=True)) % 2


def f2_vectors(g: int) -> list[F2Vector]:
    """All of F_2^g in canonical (lexicographic, first coordinate major) order."""
    return [tuple(v) for v in itertools.product((0, 1), repeat=g)]


def f2_index(v: F2Vector) -> int:
    """Position of ``v`` in :func:`f2_vectors` order (binary, first bit major)."""
    n = 0
    for b in v:
        n = 2 * n + b
    return n


@dataclass(frozen=True, order=True)
class Characteristic:
    eps: F2Vector
    delta: F2Vector

    def __post_init__(self):
        object.__setattr__(self, "eps", f2vec(self.eps))
        object.__setattr__(self, "delta", f2vec(self.delta))
        if len(self.eps) != len(self.delta):
            raise ValueError("eps and delta must have the same length")

    @property
    def g(self) -> int:
        return len(self.eps)

    @property
    def parity(self) -> int:
        """0 for even, 1 for odd."""
        return f2dot(self.eps, self.delta)

    @property
    def is_odd(self) -> bool:
        return self.parity == 1

    @property
    def index(self) -> int:
        """Canonical column index: eps major, delta minor, both read as binary."""
        return f2_index(self.eps) * 2**self.g + f2_index(self.delta)

    def __add__(self, other: "Characteristic") -> "Characteristic":
        return Characteristic(f2add(self.eps, other.eps), f2add(self.delta, other.delta))

    def split(self, g1: int) -> tuple["Characteristic", "Characteristic"]:
        """Split into the characteristics of the first ``g1`` and last ``g - g1`` coordinates."""
        return (
            Characteristic(self.eps[:g1], self.delta[:g1]),
            Characteristic(self.eps[g1:], self.delta[g1:]),
        )

    def to_json(self) -> dict:
        return {"eps": list(self.eps), "delta": list(self.delta)}

    @classmethod
    def from_json(cls, data: dict) -> "Characteristic":
        return cls(tuple(data["eps"]), tuple(data["delta"]))

    def __str__(self):
        e = "".join(map(str, self.eps))
        d = "".join(map(str, self.delta))
        return f"[{e};{d}]"


def characteristic_parity(m: Characteristic) -> str:
    return "odd" if m.parity else "even"


def iter_characteristics(g: int, parity_filter: str = "all") -> Iterator[Characteristic]:
    if not 1 <= g <= MAX_GENUS:
        raise SizeLimitError(f"genus {g} outside 1..{MAX_GENUS}")
    if parity_filter not in ("all", "even", "odd"):
        raise ValueError(f"unknown parity filter {parity_filter!r}")
    vecs = f2_vectors(g)
    for eps in vecs:
        for delta in vecs:
            m = Characteristic(eps, delta)
            if parity_filter == "all" or characteristic_parity(m) == parity_filter:
                yield m


def enumerate_characteristics(g: int, parity_filter: str = "all") -> list[Characteristic]:
    """All characteristics of genus ``g`` in lexicographic order (eps major).

    There are 2^(g-1)(2^g+1) even and 2^(g-1)(2^g-1) odd ones.
    """
    return list(iter_characteristics(g, parity_filter))


def even_count(g: int) -> int:
    return 2 ** (g - 1) * (2**g + 1)


def odd_count(g: int) -> int:
    return 2 ** (g - 1) * (2**g - 1)


@dataclass(frozen=True)
class TwoTorsionPoint:
    characteristic: Characteristic
    coords: np.ndarray

    def on_lattice_twice(self, tau: np.ndarray, atol: float = 1e-10) -> bool:
        """True when ``2 * coords`` lies in Z^g + tau Z^g."""
        w = 2 * self.coords
        y = np.asarray(tau).imag
        # w = a + tau b with real a, b: solve the imaginary part for b first
        b = np.linalg.solve(y, w.imag)
        a = w.real - np.asarray(tau).real @ b
        return bool(
            np.allclose(a, np.round(a), atol=atol) and np.allclose(b, np.round(b), atol=atol)
        )


def two_torsion_point(m: Characteristic, tau: np.ndarray) -> TwoTorsionPoint:
    """The representative (eps tau + delta)/2 of the two-torsion point attached to ``m``."""
    tau = np.asarray(tau, dtype=complex)
    eps = np.array(m.eps, dtype=float)
    delta = np.array(m.delta, dtype=float)
    return TwoTorsionPoint(m, (tau @ eps + delta) / 2)
