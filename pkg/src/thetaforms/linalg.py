"""Dense complex linear algebra: determinants, minors, adjugates and the
ordered-subset combinatorics behind block Laplace expansions.

Ordered subsets are tuples of strictly increasing **1-based** indices, matching
the row/column numbering used in sign conventions such as (-1)^(i1+...+ik).
"""

from __future__ import annotations

import itertools
from typing import Iterable, Sequence

import mpmath
import numpy as np

OrderedSubset = tuple[int, ...]

DEFAULT_RANK_TOL = 1e-8


class ShapeError(ValueError):
    pass


class InvalidSubsetError(ValueError):
    pass


def _square(m) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {m.shape}")
    return m


def det(m, precision: str = "double") -> complex:
    """Determinant; closed forms up to 3x3, partial-pivot LU above.

    ``precision="extended"`` evaluates with 40 significant digits through mpmath
    and is meant for oracle cross-checks only.
    """
    m = _square(m)
    n = m.shape[0]
    if precision == "extended":
        with mpmath.workdps(40):
            return complex(mpmath.det(mpmath.matrix(m.tolist())))
    if n == 0:
        return 1.0 + 0j
    if n == 1:
        return complex(m[0, 0])
    if n == 2:
        return complex(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
    if n == 3:
        return complex(
            m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
            - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
            + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0])
        )
    return complex(np.linalg.det(m.astype(complex)))


def adjugate(m) -> np.ndarray:
    """Transpose of the cofactor matrix, so that ``m @ adjugate(m) == det(m) * I``.

    Built from cofactors rather than ``det * inv`` so it stays exact-in-form for
    singular input.
    """
    m = _square(m).astype(complex)
    n = m.shape[0]
    if n == 1:
        return np.ones((1, 1), dtype=complex)
    adj = np.empty((n, n), dtype=complex)
    idx = np.arange(n)
    for i in range(n):
        rows = idx[idx != i]
        for j in range(n):
            cols = idx[idx != j]
            adj[j, i] = (-1) ** (i + j) * det(m[np.ix_(rows, cols)])
    return adj


def _check_subset(s: Sequence[int], bound: int | None = None) -> OrderedSubset:
    s = tuple(int(x) for x in s)
    if any(b <= a for a, b in zip(s, s[1:])):
        raise InvalidSubsetError(f"subset {s} is not strictly increasing")
    if s and (s[0] < 1 or (bound is not None and s[-1] > bound)):
        raise InvalidSubsetError(f"subset {s} out of range 1..{bound}")
    return s


def submatrix(m, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
    """Rows ``rows`` and columns ``cols`` (1-based) of ``m``."""
    m = np.asarray(m)
    r = np.array(rows, dtype=int) - 1
    c = np.array(cols, dtype=int) - 1
    return m[np.ix_(r, c)]


def minor_det(m, rows: Sequence[int], cols: Sequence[int]) -> complex:
    """Determinant of the (rows, cols) submatrix; the empty minor is 1."""
    m = np.asarray(m)
    if len(rows) != len(cols):
        raise ShapeError(f"|I| = {len(rows)} but |J| = {len(cols)}")
    rows = _check_subset(rows, m.shape[0])
    cols = _check_subset(cols, m.shape[1])
    if not rows:
        return 1.0 + 0j
    return det(submatrix(m, rows, cols))


def ordered_subsets(ground: Iterable[int], k: int) -> list[OrderedSubset]:
    """P_k^*(X): the increasing k-subsets of the ordered set ``ground``."""
    return list(itertools.combinations(sorted(ground), k))


def complement(subset: Sequence[int], ground: Iterable[int]) -> OrderedSubset:
    s = set(subset)
    return tuple(x for x in sorted(ground) if x not in s)


def permutation_sign(seq: Sequence[int]) -> int:
    """Sign of the permutation sorting ``seq`` (distinct entries)."""
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def subset_sign(i_removed: int, subset: Sequence[int], g: int) -> int:
    """s(I): sign of the permutation that sorts I followed by its complement in
    X_g minus {i_removed}.

    Equivalent to (-1)^(sum of positions of I - k(k+1)/2) with positions
    counted inside X_g \\ {i_removed}.
    """
    ground = [x for x in range(1, g + 1) if x != i_removed]
    subset = _check_subset(subset, g)
    if i_removed in subset:
        raise InvalidSubsetError(f"{i_removed} is the removed index but lies in {subset}")
    if not set(subset) <= set(ground):
        raise InvalidSubsetError(f"{subset} is not inside X_{g} \\ {{{i_removed}}}")
    return permutation_sign(list(subset) + list(complement(subset, ground)))


def index_sum_sign(subset: Sequence[int]) -> int:
    """(-1)^I with I summed as 1-based indices."""
    return -1 if sum(subset) % 2 else 1


def numerical_rank(m, rel_tol: float = DEFAULT_RANK_TOL) -> int:
    """Count singular values above ``rel_tol`` times the largest one."""
    if not 0 < rel_tol < 1:
        raise ValueError("rel_tol must lie in (0, 1)")
    m = np.asarray(m)
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > rel_tol * s[0]))


def binet_check(a, b) -> float:
    """|det(AB) - sum_S det(A_S) det(B^S)| for A (m x n) and B (n x m).

    The sum runs over S in P_m^*(X_n); it is empty (hence 0) when m > n.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    m, n = a.shape
    if b.shape != (n, m):
        raise ShapeError(f"incompatible shapes {a.shape} and {b.shape}")
    rows = tuple(range(1, m + 1))
    total = 0j
    for s in ordered_subsets(range(1, n + 1), m):
        total += minor_det(a, rows, s) * minor_det(b, s, rows)
    return abs(det(a @ b) - total)


def laplace_block_expansion_check(m, cols: Sequence[int]) -> float:
    """Residual of the generalised Laplace expansion along the columns ``cols``."""
    m = _square(m)
    n = m.shape[0]
    cols = _check_subset(cols, n)
    k = len(cols)
    ground = range(1, n + 1)
    ccols = complement(cols, ground)
    total = 0j
    for rows in ordered_subsets(ground, k):
        sign = index_sum_sign(rows) * index_sum_sign(cols)
        total += sign * minor_det(m, rows, cols) * minor_det(m, complement(rows, ground), ccols)
    return abs(det(m) - total)


def to_json(m) -> list:
    """Nested lists of [re, im] pairs."""
    m = np.asarray(m, dtype=complex)
    if m.ndim == 0:
        return [m.real.item(), m.imag.item()]
    return [to_json(row) for row in m]


def from_json(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]
