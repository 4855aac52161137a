"""Exact counts on the E8 lattice: short vectors, representation numbers of
Gram matrices (N_M = #{p integral : p zeta p^T = M}), the automorphism group
order, and the genus-1 theta series.

Solution counting backtracks row by row over candidate vectors kept as
bitsets, so each constraint x_r zeta x_s^T = M_rs is a word-wise AND.  The last
row is never enumerated: its candidates are counted with a popcount.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numba
import numpy as np

from .f2char import SizeLimitError, enumerate_characteristics
from .theta import DEFAULT_TOL, TruncationInfeasibleError, as_period_matrix, theta

ZETA_E8 = np.array(
    [
        [2, 0, 0, 1, 0, 0, 0, 0],
        [0, 2, 1, 0, 0, 0, 0, 0],
        [0, 1, 2, 1, 0, 0, 0, 0],
        [1, 0, 1, 2, 1, 0, 0, 0],
        [0, 0, 0, 1, 2, 1, 0, 0],
        [0, 0, 0, 0, 1, 2, 1, 0],
        [0, 0, 0, 0, 0, 1, 2, 1],
        [0, 0, 0, 0, 0, 0, 1, 2],
    ],
    dtype=np.int64,
)
ZETA_E8.setflags(write=False)

AUT_E8_ORDER = math.factorial(4) * math.factorial(6) * math.factorial(8)   # 696729600

MAX_NORM = 8
MAX_HISTOGRAM_NORM = 16
DEFAULT_MAX_NODES = 10**10


class BudgetExceededError(RuntimeError):
    def __init__(self, msg, count, nodes, seconds):
        super().__init__(msg)
        self.count, self.nodes, self.seconds = count, nodes, seconds


@dataclass(frozen=True)
class SolutionCount:
    target: np.ndarray
    count: int
    nodes: int
    seconds: float

    def to_json(self) -> dict:
        return {"target": self.target.tolist(), "count": self.count,
                "nodes": self.nodes, "seconds": round(self.seconds, 3)}


def _check_gram(zeta) -> np.ndarray:
    z = np.asarray(zeta, dtype=np.int64)
    if z.ndim != 2 or z.shape[0] != z.shape[1] or not np.array_equal(z, z.T):
        raise ValueError("Gram matrix must be square and symmetric")
    try:
        np.linalg.cholesky(z.astype(float))
    except np.linalg.LinAlgError:
        raise ValueError("Gram matrix must be positive definite") from None
    return z


# --- short vectors ----------------------------------------------------------------


@numba.njit(cache=True)
def _fincke_pohst(q, bound, out):
    """All nonzero x with x^T G x <= bound.  ``q`` holds the upper-triangular
    Cholesky-type coefficients of G (q_ii on the diagonal, q_ij = r_ij / r_ii
    above it), so x^T G x = sum_i q_ii (x_i + sum_{j>i} q_ij x_j)^2.
    Writes vectors into ``out`` and returns their number (or -1 on overflow)."""
    n = q.shape[0]
    x = np.zeros(n, np.int64)
    rem = np.zeros(n + 1)
    ctr = np.zeros(n)
    hi = np.zeros(n, np.int64)
    eps = 1e-9
    rem[n] = bound
    count = 0
    i = n - 1
    # initialise level n-1
    ctr[i] = 0.0
    r = math.sqrt(max(rem[i + 1], 0.0) / q[i, i] + eps)
    x[i] = int(math.ceil(-r - ctr[i] - eps))
    hi[i] = int(math.floor(r - ctr[i] + eps))
    x[i] -= 1
    while True:
        x[i] += 1
        if x[i] > hi[i]:
            i += 1
            if i == n:
                break
            continue
        t = x[i] + ctr[i]
        rem[i] = rem[i + 1] - q[i, i] * t * t
        if i == 0:
            nz = False
            for k in range(n):
                if x[k] != 0:
                    nz = True
                    break
            if nz:
                if count >= out.shape[0]:
                    return -1
                for k in range(n):
                    out[count, k] = x[k]
                count += 1
            continue
        i -= 1
        c = 0.0
        for j in range(i + 1, n):
            c += q[i, j] * x[j]
        ctr[i] = c
        r = math.sqrt(max(rem[i + 1], 0.0) / q[i, i] + eps)
        x[i] = int(math.ceil(-r - c - eps)) - 1
        hi[i] = int(math.floor(r - c + eps))
    return count


def _fp_coefficients(zeta: np.ndarray) -> np.ndarray:
    r = np.linalg.cholesky(zeta.astype(float)).T     # zeta = r^T r, r upper triangular
    n = zeta.shape[0]
    q = np.zeros((n, n))
    for i in range(n):
        q[i, i] = r[i, i] ** 2
        q[i, i + 1:] = r[i, i + 1:] / r[i, i]
    return q


@lru_cache(maxsize=32)
def _short_vectors(zeta_key: bytes, n: int, bound: int) -> np.ndarray:
    zeta = np.frombuffer(zeta_key, dtype=np.int64).reshape(n, n)
    q = _fp_coefficients(zeta)
    size = 1024
    while True:
        out = np.zeros((size, n), dtype=np.int64)
        k = _fincke_pohst(q, float(bound) + 0.5, out)
        if k >= 0:
            break
        size *= 4
    vecs = out[:k]
    norms = np.einsum("ij,jk,ik->i", vecs, zeta, vecs)
    keep = norms <= bound                           # exact integer filter
    order = np.lexsort(vecs[keep].T[::-1])
    res = vecs[keep][order]
    res.setflags(write=False)
    return res


def short_vectors(zeta, bound: int) -> tuple[np.ndarray, np.ndarray]:
    """Nonzero integer vectors with norm x zeta x^T <= bound, and their norms."""
    z = _check_gram(zeta)
    vecs = _short_vectors(z.tobytes(), z.shape[0], int(bound))
    return vecs, np.einsum("ij,jk,ik->i", vecs, z, vecs)


def vectors_of_norm(zeta=ZETA_E8, target_norm: int = 2, limit: int = MAX_NORM) -> np.ndarray:
    """All x in Z^n with x zeta x^T = target_norm (lexicographic order)."""
    if target_norm > limit:
        raise SizeLimitError(f"norm {target_norm} exceeds the limit {limit}")
    if target_norm < 0:
        return np.zeros((0, np.asarray(zeta).shape[0]), dtype=np.int64)
    if target_norm == 0:
        return np.zeros((1, np.asarray(zeta).shape[0]), dtype=np.int64)
    vecs, norms = short_vectors(zeta, target_norm)
    return vecs[norms == target_norm]


def norm_histogram(zeta=ZETA_E8, max_norm: int = 8) -> dict[int, int]:
    """{norm: number of lattice vectors of that norm} for 0 <= norm <= max_norm."""
    if max_norm > MAX_HISTOGRAM_NORM:
        raise SizeLimitError(f"max_norm {max_norm} exceeds {MAX_HISTOGRAM_NORM}")
    _, norms = short_vectors(zeta, max_norm)
    hist = {k: 0 for k in range(max_norm + 1)}
    hist[0] = 1
    for v, c in zip(*np.unique(norms, return_counts=True)):
        hist[int(v)] = int(c)
    return hist


# --- counting p zeta p^T = M -----------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _count_subtree(first, masks, init, order_k, max_nodes):
    """Count completions once row 0 is fixed to candidate ``first``.

    masks[r, t, x] is the bitset of candidates for row t compatible with row r
    taking candidate x; init[t] the initial candidate set of row t.
    Returns (count, nodes, exceeded).
    """
    k = order_k
    w = init.shape[1]
    cand = np.zeros((k + 1, k, w), np.uint64)   # cand[level, t]: sets after fixing rows < level
    for t in range(k):
        for j in range(w):
            cand[1, t, j] = init[t, j] & masks[0, t, first, j]
    if k == 1:
        return 1, 1, False
    pos = np.zeros(k, np.int64)      # scan position (bit index) per level
    nbits = w * 64
    count = 0
    nodes = 1
    level = 1
    pos[1] = 0
    while level >= 1:
        if level == k - 1:
            # last row: popcount of its candidate set
            c = 0
            for j in range(w):
                v = cand[level, level, j]
                while v:
                    v &= v - np.uint64(1)
                    c += 1
            count += c
            level -= 1
            continue
        # next candidate for row ``level``
        p = pos[level]
        found = -1
        while p < nbits:
            word = cand[level, level, p >> 6] >> np.uint64(p & 63)
            if word == 0:
                p = ((p >> 6) + 1) << 6
                continue
            # lowest set bit
            b = 0
            while (word & np.uint64(1)) == 0:
                word >>= np.uint64(1)
                b += 1
            found = p + b
            break
        if found < 0:
            level -= 1
            continue
        pos[level] = found + 1
        nodes += 1
        if nodes > max_nodes:
            return count, nodes, True
        empty = False
        for t in range(level + 1, k):
            anyb = np.uint64(0)
            for j in range(w):
                v = cand[level, t, j] & masks[level, t, found, j]
                cand[level + 1, t, j] = v
                anyb |= v
            if anyb == 0:
                empty = True
                break
        if empty:
            continue
        level += 1
        pos[level] = 0
    return count, nodes, False


def _row_order(m: np.ndarray) -> list[int]:
    """Most-constrained-first: start at the smallest candidate norm, then always
    take the row with the most nonzero couplings to rows already placed."""
    k = m.shape[0]
    start = int(np.argmin(np.diag(m)))
    order = [start]
    while len(order) < k:
        rest = [r for r in range(k) if r not in order]
        order.append(max(rest, key=lambda r: (sum(m[r, s] != 0 for s in order), -r)))
    return order


def _bitset(indices, w: int) -> np.ndarray:
    out = np.zeros(w, dtype=np.uint64)
    for i in indices:
        out[i >> 6] |= np.uint64(1) << np.uint64(i & 63)
    return out


def _prepare(zeta: np.ndarray, m: np.ndarray):
    k = m.shape[0]
    order = _row_order(m)
    m = m[np.ix_(order, order)]
    norms = sorted({int(x) for x in np.diag(m)})
    universe = np.concatenate([vectors_of_norm(zeta, nv) for nv in norms])
    unorm = np.einsum("ij,jk,ik->i", universe, zeta, universe)
    u = len(universe)
    w = (u + 63) // 64
    ip = universe @ zeta @ universe.T
    init = np.array([_bitset(np.flatnonzero(unorm == m[t, t]), w) for t in range(k)])
    masks = np.zeros((k, k, u, w), dtype=np.uint64)
    for r in range(k):
        for t in range(r + 1, k):
            hit = ip == m[r, t]
            for x in np.flatnonzero(unorm == m[r, r]):
                masks[r, t, x] = _bitset(np.flatnonzero(hit[x]), w)
    firsts = np.flatnonzero(unorm == m[0, 0])
    return masks, init, firsts


_COUNT_CACHE: dict[tuple[bytes, bytes, tuple[int, ...]], SolutionCount] = {}


def diophantine_count(zeta, m, max_nodes: int = DEFAULT_MAX_NODES, threads: int = 1,
                      use_cache: bool = True) -> SolutionCount:
    """Exact number of integer k x n matrices p with p zeta p^T = M.

    Rows of p are drawn from vectors_of_norm(zeta, M_rr); the work is split over
    the choices for the first row, so the total is independent of ``threads``.
    Completed counts are memoised per (zeta, M).
    """
    zeta = _check_gram(zeta)
    m = np.asarray(m, dtype=np.int64)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or not np.array_equal(m, m.T):
        raise ValueError("target must be square and symmetric")
    key = (zeta.tobytes(), m.tobytes(), m.shape)
    if use_cache and key in _COUNT_CACHE:
        return _COUNT_CACHE[key]
    res = _diophantine_count(zeta, m, max_nodes, threads)
    _COUNT_CACHE[key] = res
    return res


def _diophantine_count(zeta: np.ndarray, m: np.ndarray, max_nodes: int, threads: int) -> SolutionCount:
    t0 = time.perf_counter()
    k = m.shape[0]
    if k > zeta.shape[0]:
        raise SizeLimitError("more rows than the lattice rank")
    if np.any(np.diag(m) < 0) or np.any(np.diag(m) > MAX_NORM):
        raise SizeLimitError(f"diagonal entries must lie in 0..{MAX_NORM}")
    masks, init, firsts = _prepare(zeta, m)

    def work(chunk):
        c = n = 0
        for x in chunk:
            cc, nn, over = _count_subtree(x, masks, init, k, max_nodes)
            c += cc
            n += nn
            if over or n > max_nodes:
                return c, n, True
        return c, n, False

    threads = max(1, int(threads))
    chunks = [firsts[i::threads] for i in range(threads)]
    if threads == 1:
        results = [work(chunks[0])]
    else:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(work, chunks))
    count = sum(r[0] for r in results)
    nodes = sum(r[1] for r in results)
    elapsed = time.perf_counter() - t0
    if any(r[2] for r in results) or nodes > max_nodes:
        raise BudgetExceededError(f"node budget {max_nodes} exceeded", count, nodes, elapsed)
    return SolutionCount(m, int(count), int(nodes), elapsed)


def automorphism_count(zeta=ZETA_E8, threads: int = 1, max_nodes: int = DEFAULT_MAX_NODES) -> SolutionCount:
    """|Aut| as the number of p with p zeta p^T = zeta."""
    return diophantine_count(zeta, zeta, max_nodes=max_nodes, threads=threads)


def sanity_count(zeta=ZETA_E8, rows: int = 2) -> SolutionCount:
    """The stabiliser-chain prefix: solutions for the leading rows x rows block of zeta."""
    z = np.asarray(zeta)
    return diophantine_count(zeta, z[:rows, :rows])


def reduce_zero_rows(m) -> np.ndarray | None:
    """Drop rows/columns with zero diagonal.  In a positive definite lattice such
    a row of p must vanish, so M is representable only if the whole row of M is
    zero; ``None`` signals that no solution exists."""
    m = np.asarray(m, dtype=np.int64)
    zero = np.diag(m) == 0
    if np.any(m[zero]):
        return None
    keep = np.flatnonzero(~zero)
    return m[np.ix_(keep, keep)]


def theta_series_coefficient(zeta, g: int, m, threads: int = 1,
                             max_nodes: int = DEFAULT_MAX_NODES) -> int:
    """N_M, the coefficient of prod_{i<=j} exp(pi i m_ij tau_ij) in the genus-g theta series."""
    m = np.asarray(m, dtype=np.int64)
    if m.shape != (g, g):
        raise ValueError(f"M must be {g} x {g}")
    reduced = reduce_zero_rows(m)
    if reduced is None:
        return 0
    if reduced.shape[0] == 0:
        return 1
    return diophantine_count(zeta, reduced, max_nodes=max_nodes, threads=threads).count


def padded_target(g: int = 9, zeta=ZETA_E8) -> np.ndarray:
    """T = diag(zeta, 0) of size g."""
    z = np.asarray(zeta, dtype=np.int64)
    t = np.zeros((g, g), dtype=np.int64)
    t[: z.shape[0], : z.shape[0]] = z
    return t


# --- genus 1 theta series ----------------------------------------------------------


def sigma3(k: int) -> int:
    return sum(d**3 for d in range(1, k + 1) if k % d == 0)


def e8_theta_genus1(tau: complex, zeta=ZETA_E8, max_norm: int = 12) -> tuple[complex, float]:
    """sum_x exp(pi i tau x zeta x^T) truncated at norm <= max_norm, with a tail bound.

    The tail uses #(norm 2k) = 240 sigma3(k) <= 240 zeta(3) k^3, valid for E8.
    """
    tau = complex(tau)
    hist = norm_histogram(zeta, max_norm)
    val = sum(c * np.exp(1j * np.pi * tau * n) for n, c in hist.items())
    q = math.exp(-2 * math.pi * tau.imag)
    k0 = max_norm // 2 + 1
    # sum_{k >= k0} 1.21*240 k^3 q^k, bounded by a geometric tail on k^3 q^k
    ratio = ((k0 + 1) / k0) ** 3 * q
    if ratio >= 1:
        return complex(val), math.inf
    tail = 240 * 1.21 * k0**3 * q**k0 / (1 - ratio)
    return complex(val), tail


def cross_check_theta_numeric(tau, zeta=ZETA_E8, tol: float = DEFAULT_TOL, max_norm: int = 12) -> float:
    """Relative residual of sum_m theta_m(tau)^8 = 2 Theta_E8(tau) at genus 1."""
    t = as_period_matrix(tau)
    if t.g != 1:
        raise ValueError("genus 1 only")
    lhs = sum(theta(m, t, tol=tol).value ** 8 for m in enumerate_characteristics(1))
    rhs, tail = e8_theta_genus1(complex(t.tau[0, 0]), zeta, max_norm)
    if tail > max(tol, 1e-15) * max(abs(rhs), 1.0) * 1e3:
        raise TruncationInfeasibleError(f"E8 theta tail bound {tail:.2e} too large; raise max_norm")
    return abs(lhs - 2 * rhs) / max(abs(lhs), abs(2 * rhs))
