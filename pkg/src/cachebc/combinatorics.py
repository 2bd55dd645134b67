"""Subset bookkeeping and harmonic numbers.

Shared arithmetic for the closed-form performance expressions and for the
cache placement / folded-delivery machinery: lexicographic enumeration of
user subsets of [K] = {1..K}, and harmonic numbers H_n = sum_{i<=n} 1/i as
exact rationals (with a float fast path for large-n sweeps).
"""

from __future__ import annotations

import math
import threading
from fractions import Fraction
from itertools import combinations

# A user set is a strictly increasing tuple of 1-based user indices.
UserSet = tuple

EULER_MASCHERONI = 0.5772156649015329

_harmonic_lock = threading.Lock()
_harmonic_cache = [Fraction(0)]

# Below this order the float harmonic falls back to the exact value; above it
# the asymptotic expansion is already accurate to ~1 ulp of a double.
_FLOAT_EXACT_MAX = 256


def enumerate_subsets(K: int, size: int) -> list[UserSet]:
    """All C(K, size) subsets of {1..K} as sorted tuples, lexicographic."""
    if K < 0:
        raise ValueError(f"user count must be non-negative, got {K}")
    if not 0 <= size <= K:
        raise ValueError(f"subset size {size} outside 0..{K}")
    return list(combinations(range(1, K + 1), size))


def subsets_containing(K: int, size: int, k: int) -> list[UserSet]:
    """The C(K-1, size-1) subsets from enumerate_subsets(K, size) containing user k."""
    if not 1 <= k <= K:
        raise ValueError(f"user index {k} outside 1..{K}")
    if not 1 <= size <= K:
        raise ValueError(f"subset size {size} outside 1..{K}")
    others = [i for i in range(1, K + 1) if i != k]
    out = [tuple(sorted(c + (k,))) for c in combinations(others, size - 1)]
    out.sort()
    return out


def replace_member(tau: UserSet, k_old: int, k_new: int) -> UserSet:
    """Copy of `tau` with member `k_old` swapped for non-member `k_new`, re-sorted."""
    if k_old not in tau:
        raise ValueError(f"{k_old} is not a member of {tau}")
    if k_new in tau:
        raise ValueError(f"{k_new} is already a member of {tau}")
    return tuple(sorted([k_new] + [i for i in tau if i != k_old]))


def harmonic(n: int) -> Fraction:
    """Exact n-th harmonic number; harmonic(0) == 0.

    Values are memoized incrementally, so grid sweeps pay for each order once.
    """
    if n < 0:
        raise ValueError(f"harmonic order must be non-negative, got {n}")
    with _harmonic_lock:
        while len(_harmonic_cache) <= n:
            m = len(_harmonic_cache)
            _harmonic_cache.append(_harmonic_cache[-1] + Fraction(1, m))
        return _harmonic_cache[n]


def harmonic_float(n: int) -> float:
    """Float H_n for large-n sweeps.

    Exact below _FLOAT_EXACT_MAX; beyond that the log + Euler-Mascheroni
    expansion, whose truncation error is < 1/(252 n^6).
    """
    if n < 0:
        raise ValueError(f"harmonic order must be non-negative, got {n}")
    if n <= _FLOAT_EXACT_MAX:
        return float(harmonic(n))
    inv = 1.0 / n
    inv2 = inv * inv
    return math.log(n) + EULER_MASCHERONI + inv / 2 - inv2 / 12 + inv2 * inv2 / 120
