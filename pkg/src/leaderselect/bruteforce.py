"""Exhaustive evaluation over all leader subsets of a small graph.

Every subset ``S`` is encoded as an integer bitmask.  For each mask the matrix
``K L K + diag(1_S)`` (``K`` zeroes leader rows and columns) is block diagonal
with blocks ``L_ff`` and the identity, so one batched general inverse yields
``inv(L_ff)`` for every subset at once.  This path shares no code with the
Cholesky-based evaluator in :mod:`leaderselect.metric` and serves as its
oracle.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .errors import BruteForceTooLarge
from .graph import NoisyGraph, count_components, laplacian

MAX_BRUTE_NODES = 16


def subset_bits(n: int) -> np.ndarray:
    """Boolean matrix of shape ``(2**n, n)``; row ``m`` is the bitmask ``m``."""
    if n > MAX_BRUTE_NODES:
        raise BruteForceTooLarge(f"{n} nodes exceeds the exhaustive limit {MAX_BRUTE_NODES}")
    ints = np.arange(2**n, dtype=np.int64)
    return ((ints[:, None] >> np.arange(n)) & 1).astype(bool)


def mask_of(members) -> int:
    m = 0
    for v in members:
        m |= 1 << int(v)
    return m


def covered_masks(n: int, heads: np.ndarray, tails: np.ndarray) -> np.ndarray:
    """For each subset, whether every connected component holds a leader."""
    _, labels = count_components(n, heads, tails)
    ints = np.arange(2**n, dtype=np.int64)
    ok = np.ones(2**n, dtype=bool)
    for c in np.unique(labels):
        cm = mask_of(np.flatnonzero(labels == c))
        ok &= (ints & cm) != 0
    return ok


def subset_inverse_diagonals(lap: np.ndarray, valid: np.ndarray | None = None) -> np.ndarray:
    """``inv(L_ff)[u, u]`` for every subset and follower ``u``.

    Returns an array of shape ``(2**n, n)``; entries for leaders are 0 and
    rows for the empty set or for masks flagged invalid are NaN.
    """
    n = lap.shape[0]
    bits = subset_bits(n)
    ok = bits.any(axis=1)
    if valid is not None:
        ok &= valid
    out = np.full(bits.shape, np.nan)
    keep = (~bits[ok]).astype(float)
    mats = lap[None, :, :] * keep[:, :, None] * keep[:, None, :]
    idx = np.arange(n)
    mats[:, idx, idx] += bits[ok]
    diag = np.diagonal(np.linalg.inv(mats), axis1=1, axis2=2)
    out[ok] = np.where(bits[ok], 0.0, diag)
    return out


def subset_errors(g: NoisyGraph) -> np.ndarray:
    """``R(S)`` for every subset mask (NaN for the empty set)."""
    return 0.5 * subset_inverse_diagonals(laplacian(g)).sum(axis=1)


def sets_of_size(n: int, k: int) -> list[int]:
    return [mask_of(c) for c in combinations(range(n), k)]


def optimum_at_most_k(values: np.ndarray, n: int, k: int) -> tuple[float, tuple[int, ...]]:
    """Minimum of a subset function over ``1 <= |S| <= k``."""
    best, arg = np.inf, ()
    for size in range(1, k + 1):
        for c in combinations(range(n), size):
            v = values[mask_of(c)]
            if v < best:
                best, arg = float(v), c
    return best, arg


def min_size_for(values: np.ndarray, n: int, alpha: float) -> int:
    """Smallest ``|S|`` with ``values[S] <= alpha``."""
    for size in range(1, n + 1):
        if any(values[m] <= alpha for m in sets_of_size(n, size)):
            return size
    raise ValueError("no subset meets the bound")


def supermodularity_slack(values: np.ndarray, n: int, domain: np.ndarray | None = None) -> float:
    """Smallest value of ``[f(S)-f(S+v)] - [f(T)-f(T+v)]`` over ``S ⊆ T``, ``v ∉ T``.

    ``domain`` optionally restricts the sweep to masks where ``f`` is defined;
    only quadruples with all four sets in the domain count.  Returns ``inf``
    when no quadruple is admissible.
    """
    size = 2**n
    if domain is None:
        domain = np.isfinite(values)
    worst = np.inf
    ints = np.arange(size, dtype=np.int64)
    for v in range(n):
        bit = 1 << v
        without = ints[(ints & bit) == 0]
        gain = np.full(size, np.nan)
        ok = domain[without] & domain[without | bit]
        gain[without[ok]] = values[without[ok]] - values[without[ok] | bit]
        # For each T, compare against every subset S of T.
        for t in without[ok]:
            sub = t
            while True:
                if not np.isnan(gain[sub]):
                    worst = min(worst, gain[sub] - gain[t])
                if sub == 0:
                    break
                sub = (sub - 1) & t
    return float(worst)


def monotonicity_slack(values: np.ndarray, n: int, domain: np.ndarray | None = None) -> float:
    """Smallest ``f(S) - f(S+v)`` over admissible pairs (nonnegative if nonincreasing)."""
    if domain is None:
        domain = np.isfinite(values)
    ints = np.arange(2**n, dtype=np.int64)
    worst = np.inf
    for v in range(n):
        bit = 1 << v
        s = ints[(ints & bit) == 0]
        ok = domain[s] & domain[s | bit]
        if ok.any():
            worst = min(worst, float((values[s[ok]] - values[s[ok] | bit]).min()))
    return worst
