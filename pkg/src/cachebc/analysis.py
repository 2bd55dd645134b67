"""Closed-form performance quantities for the cache-aided K-user MISO BC.

The setting: a K-antenna transmitter serves K single-antenna users over a
fading broadcast link. Each user caches a fraction gamma = M/N of an N-file
library ahead of time. During delivery the transmitter has delayed (obsolete
but perfect) channel feedback plus a current channel estimate whose quality
is summarized by the exponent alpha in [0, 1] (0: no current feedback,
1: perfect). Performance is the normalized delivery duration T (one unit =
one file to one user, interference-free) or the per-user DoF d = (1-gamma)/T.

Every quantity that is a ratio of harmonic-number and cache-size terms is
evaluated in exact rational arithmetic, so formula values can be compared
bit-for-bit against the schedule produced by the delivery simulator. Only
the logarithmic large-system approximations return floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .combinatorics import harmonic, harmonic_float


class NoDeliveryNeeded(ValueError):
    """The caches already hold the whole library (cumulative cache = K)."""


Rational = int | Fraction


def _frac(x, name: str) -> Fraction:
    try:
        return Fraction(x)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{name} must be a rational number, got {x!r}") from exc


@dataclass(frozen=True)
class SystemParams:
    """Problem instance: K users/antennas, N library files, cache size M, CSIT quality alpha.

    M is measured in files and may be rational; alpha is the current-CSIT
    quality exponent. Derived: gamma = M/N and Gamma = K*M/N.
    """

    K: int
    N: int
    M: Fraction
    alpha: Fraction

    def __post_init__(self):
        object.__setattr__(self, "M", _frac(self.M, "M"))
        object.__setattr__(self, "alpha", _frac(self.alpha, "alpha"))
        if self.K < 1:
            raise ValueError(f"need at least one user, got K={self.K}")
        if self.N < self.K:
            raise ValueError(f"library must hold at least K files (N={self.N} < K={self.K})")
        if not 0 <= self.M <= self.N:
            raise ValueError(f"cache size M={self.M} outside [0, N={self.N}]")
        if not 0 <= self.alpha <= 1:
            raise ValueError(f"alpha={self.alpha} outside [0, 1]")

    @property
    def gamma(self) -> Fraction:
        return self.M / self.N

    @property
    def Gamma(self) -> Fraction:
        """Cumulative cache budget K*M/N (library volumes stored across all caches)."""
        return self.K * self.M / self.N

    def delivery_budget(self) -> int:
        """Gamma as an integer in {1..K-1}; the regime the delivery results cover."""
        g = self.Gamma
        if g.denominator != 1:
            raise ValueError(f"cumulative cache Gamma={g} must be an integer")
        g = int(g)
        if g == self.K:
            raise NoDeliveryNeeded(f"Gamma = K = {g}: every user caches the whole library")
        if not 1 <= g <= self.K - 1:
            raise ValueError(f"Gamma={g} outside 1..{self.K - 1}")
        return g


@dataclass(frozen=True)
class PerformancePoint:
    """All closed-form quantities evaluated at one parameter point."""

    T_ach_simple: Fraction
    T_ach_best: Fraction
    T_lower: Fraction
    dof: Fraction
    eta_selected: int
    gap: Fraction


@dataclass(frozen=True)
class DcsitLoad:
    """Delayed-CSIT feedback load: raw scalar count L and coherence-normalized Q."""

    L: Fraction | float
    Q: Fraction | float
    K: int
    Gamma: int
    T_c: Fraction | float


def alpha_breakpoint(K: int, Gamma: int, eta: int) -> Fraction:
    """CSIT quality at which fold order eta becomes worth using.

    Defined for Gamma <= eta <= K-1; equals 0 at eta = Gamma and lies in [0, 1].
    """
    if not 1 <= Gamma <= eta:
        raise ValueError(f"need 1 <= Gamma <= eta, got Gamma={Gamma}, eta={eta}")
    if eta >= K:
        raise ValueError(f"fold order eta={eta} must be below K={K}")
    num = Fraction(eta - Gamma)
    den = Gamma * (harmonic(K) - harmonic(eta) - 1) + eta
    return num / den


def select_eta(K: int, Gamma: int, alpha: Rational) -> int:
    """Largest fold order in [Gamma, K-1] whose breakpoint is <= alpha.

    Ties (alpha exactly at a breakpoint) resolve to the larger order.
    """
    alpha = _frac(alpha, "alpha")
    if not 1 <= Gamma <= K - 1:
        raise ValueError(f"Gamma={Gamma} outside 1..{K - 1}")
    best = Gamma
    for eta in range(Gamma, K):
        if alpha_breakpoint(K, Gamma, eta) <= alpha:
            best = eta
    return best


def delivery_time_for_eta(K: int, Gamma: int, eta: int, alpha: Rational) -> Fraction:
    """Delivery duration of the folded scheme run at a fixed fold order eta.

    T = (K - Gamma)(H_K - H_eta) / ((K - eta) + alpha (eta + K (H_K - H_eta - 1))).
    At eta = K-1 this is 1 - gamma for every alpha.
    """
    alpha = _frac(alpha, "alpha")
    if not 1 <= Gamma <= eta <= K - 1:
        raise ValueError(f"need 1 <= Gamma <= eta <= K-1, got Gamma={Gamma}, eta={eta}, K={K}")
    diff = harmonic(K) - harmonic(eta)
    num = (K - Gamma) * diff
    den = (K - eta) + alpha * (eta + K * (diff - 1))
    return num / den


def achievable_T_best(params: SystemParams) -> Fraction:
    """Best achievable delivery time: fold order adapted to alpha.

    Never below the perfect-CSIT floor 1 - gamma, and equal to it once alpha
    reaches alpha_max_needed(K, gamma).
    """
    Gamma = params.delivery_budget()
    eta = select_eta(params.K, Gamma, params.alpha)
    return max(1 - params.gamma, delivery_time_for_eta(params.K, Gamma, eta, params.alpha))


def achievable_T_simple(params: SystemParams) -> Fraction:
    """Achievable delivery time of the alpha-oblivious scheme (fold order = Gamma).

    T = (1-gamma)(H_K - H_Gamma) / (alpha (H_K - H_Gamma) + (1-alpha)(1-gamma)).
    Reduces to H_K - H_Gamma at alpha = 0 and to 1 - gamma at alpha = 1.
    """
    Gamma = params.delivery_budget()
    diff = harmonic(params.K) - harmonic(Gamma)
    one_m_gamma = 1 - params.gamma
    return one_m_gamma * diff / (params.alpha * diff + (1 - params.alpha) * one_m_gamma)


def dof(params: SystemParams) -> Fraction:
    """Per-user DoF d = alpha + (1-alpha)(1-gamma)/(H_K - H_Gamma).

    Exactly (1-gamma)/achievable_T_simple(params).
    """
    Gamma = params.delivery_budget()
    diff = harmonic(params.K) - harmonic(Gamma)
    return params.alpha + (1 - params.alpha) * (1 - params.gamma) / diff


def dof_log_approx(gamma, alpha) -> float:
    """Large-K per-user DoF under H_n ~ log(n): alpha + (1-alpha)(1-gamma)/log(1/gamma)."""
    gamma = float(gamma)
    alpha = float(alpha)
    if not 0 < gamma < 1:
        raise ValueError(f"gamma={gamma} must lie strictly in (0, 1)")
    return alpha + (1 - alpha) * (1 - gamma) / math.log(1 / gamma)


def achievable_T_log_approx(gamma, alpha) -> float:
    """Large-K delivery time under H_n ~ log(n)."""
    gamma = float(gamma)
    alpha = float(alpha)
    if not 0 < gamma < 1:
        raise ValueError(f"gamma={gamma} must lie strictly in (0, 1)")
    log_inv = math.log(1 / gamma)
    return (1 - gamma) * log_inv / (alpha * log_inv + (1 - alpha) * (1 - gamma))


def lower_bound_T(params: SystemParams) -> Fraction:
    """Converse lower bound on the optimal delivery time.

    Maximum over s served users of (H_s - M s / floor(N/s)) / (H_s alpha + 1 - alpha),
    with s capped at K (no more than K users can be served) and at floor(N/M)
    when M >= 1. The s = 1 term equals 1 - gamma, so the bound is positive;
    negative bracket terms at larger s are allowed and simply never win.
    """
    K, N, M, alpha = params.K, params.N, params.M, params.alpha
    if M > 0:
        s_max = min(int(N / M), K)
    else:
        s_max = K
    s_max = max(s_max, 1)
    best = None
    for s in range(1, s_max + 1):
        h = harmonic(s)
        term = (h - M * s / (N // s)) / (h * alpha + 1 - alpha)
        if best is None or term > best:
            best = term
    return best


def sum_dof_upper(s: int, alpha: Rational, d_m=0):
    """Sum-DoF upper bound for s users with delayed CSIT, alpha-quality current
    CSIT, and a parallel side link of capacity d_m:  s alpha + (s/H_s)(1 - alpha + d_m).

    Returned raw (can exceed s at alpha = 1); exact when d_m is rational.
    """
    if s < 1:
        raise ValueError(f"need s >= 1, got {s}")
    alpha = _frac(alpha, "alpha")
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha={alpha} outside [0, 1]")
    if d_m < 0:
        raise ValueError(f"side-link capacity d_m={d_m} must be non-negative")
    return s * alpha + (s / harmonic(s)) * (1 - alpha + d_m)


def gap(params: SystemParams) -> Fraction:
    """Multiplicative optimality gap achievable_T_best / lower_bound_T."""
    lower = lower_bound_T(params)
    if lower <= 0:
        raise ValueError(f"gap undefined: lower bound {lower} is not positive")
    return achievable_T_best(params) / lower


def csit_reduction(params: SystemParams) -> Fraction:
    """Current-CSIT quality that caching saves:
    delta = (1-alpha)(H_Gamma - gamma H_K) / ((H_K - 1)(H_K - H_Gamma)).

    A cacheless system would need quality alpha + delta to match
    achievable_T_simple(params). Returned raw: no clamp is applied even if
    alpha + delta lands above 1 (at Gamma = K-1, alpha + delta is exactly 1).
    """
    if params.K < 2:
        raise ValueError("CSIT reduction needs K >= 2")
    Gamma = params.delivery_budget()
    hk = harmonic(params.K)
    hg = harmonic(Gamma)
    return (1 - params.alpha) * (hg - params.gamma * hk) / ((hk - 1) * (hk - hg))


def csit_reduction_float(K: int, Gamma: int, alpha) -> float:
    """Float csit_reduction for large-K sweeps (avoids huge exact harmonics)."""
    if K < 2:
        raise ValueError("CSIT reduction needs K >= 2")
    if not 1 <= Gamma <= K - 1:
        raise ValueError(f"Gamma={Gamma} outside 1..{K - 1}")
    alpha = float(alpha)
    gamma = Gamma / K
    hk = harmonic_float(K)
    hg = harmonic_float(Gamma)
    return (1 - alpha) * (hg - gamma * hk) / ((hk - 1) * (hk - hg))


def alpha_max_needed(K: int, gamma) -> Fraction:
    """CSIT quality beyond which delivery time cannot improve:
    (K(1-gamma) - 1) / ((K-1)(1-gamma)).

    For alpha at or above this threshold the achievable time is the
    perfect-CSIT value 1 - gamma.
    """
    if K < 2:
        raise ValueError("threshold needs K >= 2")
    gamma = _frac(gamma, "gamma")
    if not 0 < gamma < 1:
        raise ValueError(f"gamma={gamma} must lie strictly in (0, 1)")
    return (K * (1 - gamma) - 1) / ((K - 1) * (1 - gamma))


def gamma_substitute(alpha) -> float:
    """Cache fraction that substitutes for alpha-quality current CSIT at large K:
    gamma' = exp(-1/alpha)."""
    alpha = float(alpha)
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha={alpha} must lie in (0, 1]")
    return math.exp(-1.0 / alpha)


def dcsit_load(K: int, Gamma: int, T_c=1, exact: bool = True) -> DcsitLoad:
    """Delayed-CSIT scalars the delivery scheme consumes, and the normalized load.

    L(Gamma) = sum_{j=Gamma+1..K} (K-j+1)(K-j)/j, evaluated by literal
    summation (the defining series), and Q = L / (T_c K). With exact=False the
    summation runs in floats, for large-K trend sweeps.
    """
    if not 0 <= Gamma <= K:
        raise ValueError(f"Gamma={Gamma} outside 0..{K}")
    if T_c <= 0:
        raise ValueError(f"coherence period T_c={T_c} must be positive")
    if exact:
        total = Fraction(0)
        for j in range(Gamma + 1, K + 1):
            total += Fraction((K - j + 1) * (K - j), j)
        q = total / (Fraction(T_c) * K)
    else:
        total = 0.0
        for j in range(Gamma + 1, K + 1):
            total += (K - j + 1) * (K - j) / j
        q = total / (float(T_c) * K)
    return DcsitLoad(L=total, Q=q, K=K, Gamma=Gamma, T_c=T_c)


def dcsit_load_closed_form(K: int, Gamma: int) -> Fraction:
    """Alternative closed-form evaluation of the D-CSIT scalar count.

    Known to disagree with the defining summation at small K (for example
    K=3, Gamma=0: sum 7, closed form 10); kept so report commands can show
    the discrepancy. The summation in dcsit_load is authoritative.
    """
    gamma = Fraction(Gamma, K)
    hdiff = harmonic(K) - harmonic(Gamma)
    return (K * K + K) * hdiff - K * (1 - gamma) * (3 * K - K * gamma - 1) / 2


def zf_load(K: int, T_c=1):
    """Normalized current-CSIT cost of plain zero-forcing: K^2/(T_c K) = K/T_c."""
    if K < 1:
        raise ValueError(f"need K >= 1, got {K}")
    if T_c <= 0:
        raise ValueError(f"coherence period T_c={T_c} must be positive")
    if isinstance(T_c, (int, Fraction)):
        return Fraction(K) / T_c
    return K / T_c


def evaluate(params: SystemParams) -> PerformancePoint:
    """All closed-form quantities at one parameter point."""
    Gamma = params.delivery_budget()
    eta = select_eta(params.K, Gamma, params.alpha)
    t_best = achievable_T_best(params)
    t_lower = lower_bound_T(params)
    return PerformancePoint(
        T_ach_simple=achievable_T_simple(params),
        T_ach_best=t_best,
        T_lower=t_lower,
        dof=dof(params),
        eta_selected=eta,
        gap=t_best / t_lower,
    )


@dataclass(frozen=True)
class GapScanResult:
    """Worst multiplicative gap over a (K, Gamma, alpha) grid."""

    max_gap: float
    K: int
    Gamma: int
    alpha: float
    per_K: tuple  # max gap for each K in [K_min, K_max], for reporting/plots


def gap_scan(K_max: int, alphas: Sequence | None = None, K_min: int = 2) -> GapScanResult:
    """Float scan of achievable_T_best / lower_bound_T over every K in
    [K_min, K_max], every integer Gamma in 1..K-1 (with N = K, M = Gamma),
    and every alpha in `alphas` (default 0, 0.05, ..., 1).

    Vectorized float arithmetic; the worst gap sits far from the bound of 4,
    so double precision is ample. Single points can be cross-checked exactly
    with gap().
    """
    if K_max < K_min:
        raise ValueError(f"K_max={K_max} below K_min={K_min}")
    if alphas is None:
        alphas = [i / 20 for i in range(21)]
    alphas = [float(a) for a in alphas]

    H = np.zeros(K_max + 1)
    H[1:] = np.cumsum(1.0 / np.arange(1, K_max + 1))

    worst = (0.0, 0, 0, 0.0)
    per_K = []
    for K in range(K_min, K_max + 1):
        G = np.arange(1, K)
        Gf = G.astype(float)
        gamma = Gf / K
        eta = np.arange(1, K)
        HK = H[K]
        # Breakpoint matrix over (Gamma, eta); entries with eta < Gamma masked out.
        den = np.outer(Gf, HK - H[eta] - 1.0) + eta
        B = np.where(eta[None, :] >= G[:, None], (eta[None, :] - Gf[:, None]) / den, np.inf)
        # Lower-bound bracket terms over (Gamma, s); s capped at floor(K/Gamma).
        s = np.arange(1, K + 1)
        Hs = H[s]
        floor_K_s = K // s
        s_ok = s[None, :] <= np.minimum(K // G, K)[:, None]
        bracket = Hs[None, :] - (Gf[:, None] * s[None, :]) / floor_K_s[None, :]
        k_worst = (0.0, 0, 0.0)
        for a in alphas:
            ok = B <= a
            idx = ok.shape[1] - 1 - np.argmax(ok[:, ::-1], axis=1)
            eta_sel = eta[idx]
            He = H[eta_sel]
            t_best = (K - Gf) * (HK - He) / ((K - eta_sel) + a * (eta_sel + K * (HK - He - 1.0)))
            t_best = np.maximum(t_best, 1.0 - gamma)
            terms = np.where(s_ok, bracket / (Hs[None, :] * a + 1.0 - a), -np.inf)
            t_lower = terms.max(axis=1)
            gaps = t_best / t_lower
            i = int(np.argmax(gaps))
            if gaps[i] > k_worst[0]:
                k_worst = (float(gaps[i]), int(G[i]), a)
        per_K.append(k_worst[0])
        if k_worst[0] > worst[0]:
            worst = (k_worst[0], K, k_worst[1], k_worst[2])
    return GapScanResult(max_gap=worst[0], K=worst[1], Gamma=worst[2], alpha=worst[3],
                         per_K=tuple(per_K))
