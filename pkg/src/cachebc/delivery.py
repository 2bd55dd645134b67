"""Symbolic delivery over a prime field, with retrospective backward decoding.

The folded multicast payloads are delivered by K - eta phases. Phase eta+1
sends each order-(eta+1) payload on K - eta parallel scalar streams; every
user overhears one linear combination of the streams per slot, and the
transmitter (which learns the fading after the fact) re-encodes the
combinations overheard by users outside the target set into the next phase,
j - 1 fixed MDS combinations per size-j set. The last phase rides a single
stream and is readable by everyone, which lets each user unwind the chain
backwards: recover a phase's payload, subtract its own known observation
from the MDS combinations, solve for the observations the other targets
overheard, and use those as the missing equations one phase earlier. At the
first phase each user ends up with K - eta independent equations per wanted
payload, solves for the streams, and peels the XOR with cached subfiles.

Fidelity split: this common pipeline is simulated exactly over F_p (noise is
ignored; the model is degrees-of-freedom level), while the zero-forced
private streams and the auxiliary residual-interference symbols are modeled
as an ideal per-user pipe of rate alpha whose byte budget is accounted
exactly. Channel coefficients are seeded draws, redrawn on the measure-zero
event that a needed square system is singular, so decoding never hits a
singular solve.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .analysis import SystemParams, achievable_T_best, delivery_time_for_eta, select_eta
from .combinatorics import enumerate_subsets, harmonic, subsets_containing, UserSet
from .scheme import (
    CacheContents,
    FileLayout,
    SplitPlan,
    fold,
    make_library,
    phase_chunks,
    place,
    plan_split,
    residual_demands,
)

PRIME = 2_147_483_647  # 2^31 - 1

# Disjoint sub-stream tags for the seeded generators (well above any file index).
_CHANNEL_STREAM = 1_048_577
_COMBINER_STREAM = 1_048_579


class SingularSolve(RuntimeError):
    """A linear system that the construction guarantees solvable was singular."""


class DecodeFailure(RuntimeError):
    """Recovered payload failed a structural check (wrong size or symbol range)."""


# ---------------------------------------------------------------------------
# Prime-field linear algebra (lists of Python ints; matrices are tiny).
# ---------------------------------------------------------------------------

def inv_mod(a: int) -> int:
    return pow(a, -1, PRIME)


def det_mod(rows) -> int:
    """Determinant mod PRIME by elimination."""
    m = [list(r) for r in rows]
    n = len(m)
    det = 1
    for c in range(n):
        piv = next((r for r in range(c, n) if m[r][c]), None)
        if piv is None:
            return 0
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            det = PRIME - det
        det = det * m[c][c] % PRIME
        inv = inv_mod(m[c][c])
        for r in range(c + 1, n):
            f = m[r][c] * inv % PRIME
            if f:
                mr, mc = m[r], m[c]
                for cc in range(c, n):
                    mr[cc] = (mr[cc] - f * mc[cc]) % PRIME
    return det


def solve_mod(rows, rhs) -> list[int]:
    """Solve the square system rows * x = rhs mod PRIME."""
    n = len(rows)
    m = [list(r) + [b] for r, b in zip(rows, rhs)]
    for c in range(n):
        piv = next((r for r in range(c, n) if m[r][c]), None)
        if piv is None:
            raise SingularSolve(f"singular {n}x{n} system")
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
        inv = inv_mod(m[c][c])
        m[c] = [x * inv % PRIME for x in m[c]]
        for r in range(n):
            if r != c and m[r][c]:
                f = m[r][c]
                m[r] = [(x - f * y) % PRIME for x, y in zip(m[r], m[c])]
    return [m[r][n] for r in range(n)]


def invert_mod(rows) -> list[list[int]]:
    """Inverse of a square matrix mod PRIME."""
    n = len(rows)
    m = [list(r) + [1 if i == j else 0 for j in range(n)] for i, r in enumerate(rows)]
    for c in range(n):
        piv = next((r for r in range(c, n) if m[r][c]), None)
        if piv is None:
            raise SingularSolve(f"singular {n}x{n} matrix")
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
        inv = inv_mod(m[c][c])
        m[c] = [x * inv % PRIME for x in m[c]]
        for r in range(n):
            if r != c and m[r][c]:
                f = m[r][c]
                m[r] = [(x - f * y) % PRIME for x, y in zip(m[r], m[c])]
    return [m[r][n:] for r in range(n)]


# ---------------------------------------------------------------------------
# Combiners: the fixed per-set matrices each later phase re-encodes with.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CombinerSpec:
    """(j-1) x j coefficient matrices, one per phase j and size-j set.

    Every (j-1)x(j-1) submatrix (delete one column) is invertible, so any
    target that knows one of the j inputs can solve for the other j-1.
    """

    K: int
    eta: int
    matrices: dict

    def matrix(self, phase: int, psi: UserSet):
        return self.matrices[(phase, psi)]


def _cauchy_matrix(rows: int, cols: int, rng) -> list[list[int]]:
    # Distinct row/column parameters make every square submatrix invertible.
    while True:
        draw = rng.integers(1, PRIME, size=rows + cols).tolist()
        if len(set(draw)) == rows + cols:
            break
    a, b = draw[:rows], draw[rows:]
    return [[inv_mod((ai - bj) % PRIME) for bj in b] for ai in a]


def make_combiners(K: int, eta: int, seed: int = 0) -> CombinerSpec:
    """Seeded Cauchy combiners for phases eta+2..K, verified minor by minor."""
    rng = np.random.default_rng([seed, _COMBINER_STREAM])
    matrices = {}
    for j in range(eta + 2, K + 1):
        for psi in enumerate_subsets(K, j):
            mat = _cauchy_matrix(j - 1, j, rng)
            for drop in range(j):
                minor = [[row[c] for c in range(j) if c != drop] for row in mat]
                if det_mod(minor) == 0:
                    raise SingularSolve(f"combiner minor for phase {j}, set {psi} degenerate")
            matrices[(j, psi)] = tuple(tuple(row) for row in mat)
    return CombinerSpec(K=K, eta=eta, matrices=matrices)


# ---------------------------------------------------------------------------
# Schedule: rational durations plus integral symbol counts per phase.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseSchedule:
    """Durations and layout of phases eta+1..K.

    durations[j] is the wall-clock share of phase j; they follow the
    recursion durations[j] = durations[eta+1] * (eta+1)/j and total exactly
    the closed-form delivery time. chunk_sym[j] is the per-user observation
    block per set (in symbols) and streams[j] = K - j + 1 the active
    entries, so payload_sym[j] = streams[j] * chunk_sym[j].
    """

    K: int
    eta: int
    phases: tuple
    durations: dict
    total: Fraction
    streams: dict
    chunk_sym: dict
    payload_sym: dict
    sets: dict

    def slot_count(self, phase: int) -> int:
        return len(self.sets[phase]) * self.chunk_sym[phase]


def build_schedule(K: int, eta: int, plan: SplitPlan) -> PhaseSchedule:
    """Phase durations and symbol layout for a feasible split plan.

    The first-phase duration is evaluated two ways: from the total via the
    harmonic recursion, and from the payload sizes and the common-stream
    rate 1 - alpha. They must agree exactly; a mismatch means the plan's T
    is not the fixed point of the recursion.
    """
    if (K, eta) != (plan.K, plan.eta):
        raise ValueError(f"schedule for (K={K}, eta={eta}) but plan has ({plan.K}, {plan.eta})")
    phases = tuple(range(eta + 1, K + 1))
    first = plan.T / ((eta + 1) * (harmonic(K) - harmonic(eta)))
    if plan.alpha != 1:
        first_from_sizes = (math.comb(K, eta + 1) * plan.folded_message
                            / ((K - eta) * (1 - plan.alpha)))
        if first_from_sizes != first:
            raise ValueError(
                f"duration {first} inconsistent with payload sizes {first_from_sizes}; "
                f"plan.T={plan.T} is not the scheme's fixed point")
    durations = {j: first * (eta + 1) / j for j in phases}
    total = sum(durations.values())
    assert total == plan.T

    chunk_sym = {j: plan.sym(c) for j, c in phase_chunks(K, eta, plan.folded_message).items()}
    streams = {j: K - j + 1 for j in phases}
    payload_sym = {j: streams[j] * chunk_sym[j] for j in phases}
    for j in phases[1:]:
        assert payload_sym[j] == (j - 1) * chunk_sym[j - 1]
    sets = {j: enumerate_subsets(K, j) for j in phases}
    return PhaseSchedule(K=K, eta=eta, phases=phases, durations=durations, total=total,
                         streams=streams, chunk_sym=chunk_sym, payload_sym=payload_sym,
                         sets=sets)


# ---------------------------------------------------------------------------
# Channel and transcript.
# ---------------------------------------------------------------------------

def _reduce_row(row, basis):
    r = list(row)
    for p, b in basis:
        f = r[p]
        if f:
            r = [(x - f * y) % PRIME for x, y in zip(r, b)]
    return r


def _draw_usable(rows, psi) -> bool:
    """True when [own row; rows outside psi] is invertible for every own in psi."""
    basis = []
    for k in range(1, len(rows) + 1):
        if k in psi:
            continue
        r = _reduce_row(rows[k - 1], basis)
        p = next((i for i, x in enumerate(r) if x), None)
        if p is None:
            return False
        inv = inv_mod(r[p])
        basis.append((p, [x * inv % PRIME for x in r]))
    for k in psi:
        if not any(_reduce_row(rows[k - 1], basis)):
            return False
    return True


class ChannelSampler:
    """Seeded per-slot fading draws over F_p with a degeneracy guard."""

    def __init__(self, K: int, seed: int):
        self.K = K
        self._rng = np.random.default_rng([seed, _CHANNEL_STREAM])
        self.redraws = 0

    def block(self, psi: UserSet, m: int, slots: int):
        """slots x K x m coefficient draws; each slot usable for set psi."""
        if slots == 0:
            return []
        draws = self._rng.integers(0, PRIME, size=(slots, self.K, m)).tolist()
        for t in range(slots):
            while not _draw_usable(draws[t], psi):
                self.redraws += 1
                draws[t] = self._rng.integers(0, PRIME, size=(self.K, m)).tolist()
        return draws


@dataclass(frozen=True)
class SlotRecord:
    phase: int
    psi: UserSet
    t: int
    payload: tuple            # the streams[phase] active entries
    channel: tuple            # K rows of streams[phase] coefficients
    source_phase: int | None  # causality tag: whose observations fed this payload


class Transcript:
    """Everything that went over the air, plus every user's observations."""

    def __init__(self, K: int, eta: int, seed: int):
        self.K = K
        self.eta = eta
        self.seed = seed
        self.slots: list[SlotRecord] = []
        self.redraws = 0
        self._obs: dict = {}
        self._chan: dict = {}

    def record(self, phase, psi, channel_block, columns, source_phase):
        obs = {k: [] for k in range(1, self.K + 1)}
        for t, col in enumerate(columns):
            rows = channel_block[t]
            for k in range(1, self.K + 1):
                obs[k].append(sum(c * x for c, x in zip(rows[k - 1], col)) % PRIME)
            self.slots.append(SlotRecord(
                phase=phase, psi=psi, t=t, payload=tuple(col),
                channel=tuple(tuple(r) for r in rows), source_phase=source_phase))
        for k in range(1, self.K + 1):
            self._obs[(phase, psi, k)] = tuple(obs[k])
        self._chan[(phase, psi)] = channel_block

    def observation(self, phase: int, psi: UserSet, k: int) -> tuple:
        return self._obs[(phase, psi, k)]

    def channel_rows(self, phase: int, psi: UserSet):
        return self._chan[(phase, psi)]

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(f"K={self.K};eta={self.eta};p={PRIME}".encode())
        for s in self.slots:
            h.update(f"|{s.phase};{s.psi};{s.t};{s.payload};{s.channel};{s.source_phase}".encode())
        return h.hexdigest()

    def to_json(self) -> dict:
        def row_hex(row):
            return "".join(f"{x:08x}" for x in row)

        slots = []
        for s in self.slots:
            payload_digest = hashlib.sha256(
                b"".join(x.to_bytes(4, "big") for x in s.payload)).hexdigest()
            slots.append({
                "phase": s.phase,
                "psi": list(s.psi),
                "t": s.t,
                "coefficients": [row_hex(r) for r in s.channel],
                "payload_digest": payload_digest,
                "source_phase": s.source_phase,
            })
        return {
            "K": self.K,
            "eta": self.eta,
            "prime": PRIME,
            "seed": self.seed,
            "redraws": self.redraws,
            "digest": self.digest(),
            "slots": slots,
        }


# ---------------------------------------------------------------------------
# Transmission.
# ---------------------------------------------------------------------------

def _send_set(transcript, sampler, schedule, phase, psi, payload, source_phase):
    m = schedule.streams[phase]
    slots = schedule.chunk_sym[phase]
    if len(payload) != m * slots:
        raise ValueError(f"payload for {psi} is {len(payload)} elements, need {m * slots}")
    streams = [payload[i * slots:(i + 1) * slots] for i in range(m)]
    block = sampler.block(psi, m, slots)
    columns = [[streams[i][t] for i in range(m)] for t in range(slots)]
    transcript.record(phase, psi, block, columns, source_phase)


def transmit_phase(phase, schedule, combiners, folded_payloads, sampler, transcript):
    """Send every set of one phase.

    The first phase carries the folded messages themselves; every later
    phase re-encodes the previous phase's observations (available to the
    transmitter through delayed feedback, i.e. read back from the
    transcript) with the fixed combiners.
    """
    first = schedule.phases[0]
    for psi in schedule.sets[phase]:
        if phase == first:
            payload = folded_payloads[psi]
            source = None
        else:
            prev_chunk = schedule.chunk_sym[phase - 1]
            cmat = combiners.matrix(phase, psi)
            elems = [transcript.observation(phase - 1, tuple(u for u in psi if u != k), k)
                     for k in psi]
            payload = []
            for i in range(phase - 1):
                row = cmat[i]
                payload.extend(
                    sum(row[x] * elems[x][t] for x in range(phase)) % PRIME
                    for t in range(prev_chunk))
            source = phase - 1
        _send_set(transcript, sampler, schedule, phase, psi, payload, source)


def run_delivery(plan, schedule, folded, combiners, seed: int = 0) -> Transcript:
    """Execute all phases and return the full transcript."""
    transcript = Transcript(plan.K, plan.eta, seed)
    sampler = ChannelSampler(plan.K, seed)
    payloads = {msg.psi: list(msg.payload) for msg in folded}
    for phase in schedule.phases:
        transmit_phase(phase, schedule, combiners, payloads, sampler, transcript)
    transcript.redraws = sampler.redraws
    return transcript


# ---------------------------------------------------------------------------
# Backward decoding.
# ---------------------------------------------------------------------------

def _recover_payload(phase, psi, k, transcript, recovered, schedule):
    """Solve, slot by slot, for the active entries of one set's transmission.

    Equations per slot: the user's own observation plus the recovered
    observations of every user outside psi, exactly streams[phase] of them.
    """
    m = schedule.streams[phase]
    slots = schedule.chunk_sym[phase]
    own = transcript.observation(phase, psi, k)
    chan = transcript.channel_rows(phase, psi)
    outside = [u for u in range(1, schedule.K + 1) if u not in psi]
    others = [recovered[(phase, psi, u)] for u in outside]
    streams = [[0] * slots for _ in range(m)]
    for t in range(slots):
        rows = [chan[t][k - 1]] + [chan[t][u - 1] for u in outside]
        rhs = [own[t]] + [blk[t] for blk in others]
        col = solve_mod(rows, rhs)
        for i in range(m):
            streams[i][t] = col[i]
    out = []
    for s in streams:
        out.extend(s)
    return out


def _mds_recover(cmat, own_pos, blocks, own_elem):
    """Given all j-1 combination blocks and the input at own_pos, solve for
    the other j-1 inputs. Returns {position: block}."""
    width = len(cmat[0])
    unknown = [l for l in range(width) if l != own_pos]
    ainv = invert_mod([[cmat[i][l] for l in unknown] for i in range(width - 1)])
    chunk = len(own_elem)
    res = {l: [0] * chunk for l in unknown}
    for t in range(chunk):
        rhs = [(blocks[i][t] - cmat[i][own_pos] * own_elem[t]) % PRIME
               for i in range(width - 1)]
        for ridx, l in enumerate(unknown):
            res[l][t] = sum(ainv[ridx][c] * rhs[c] for c in range(width - 1)) % PRIME
    return res


@dataclass
class DecodeResult:
    files: dict
    solve_failures: int


def backward_decode(transcript, caches: CacheContents, combiners: CombinerSpec,
                    requests, plan: SplitPlan, schedule: PhaseSchedule,
                    residual: dict) -> DecodeResult:
    """Reconstruct every user's requested file from the transcript, the
    user's cache, and the user's private-pipe payload."""
    K, eta = plan.K, plan.eta
    layout = FileLayout(plan)
    files = {}
    failures = 0
    for k in range(1, K + 1):
        try:
            files[k] = _decode_user(k, transcript, caches, combiners, requests,
                                    plan, schedule, layout, residual[k])
        except (SingularSolve, DecodeFailure):
            failures += 1
            files[k] = b""
    return DecodeResult(files=files, solve_failures=failures)


def _decode_user(k, transcript, caches, combiners, requests, plan, schedule, layout,
                 residual_bytes):
    K, eta = plan.K, plan.eta
    recovered = {}
    # Unwind phases K..eta+2: each recovers the observations that users
    # outside a set overheard one phase earlier.
    for phase in range(K, eta + 1, -1):
        prev_chunk = schedule.chunk_sym[phase - 1]
        for psi in subsets_containing(K, phase, k):
            payload = _recover_payload(phase, psi, k, transcript, recovered, schedule)
            blocks = [payload[i * prev_chunk:(i + 1) * prev_chunk] for i in range(phase - 1)]
            own_tau = tuple(u for u in psi if u != k)
            own_elem = transcript.observation(phase - 1, own_tau, k)
            others = _mds_recover(combiners.matrix(phase, psi), psi.index(k), blocks, own_elem)
            for pos, k2 in enumerate(psi):
                if k2 == k:
                    continue
                tau2 = tuple(u for u in psi if u != k2)
                recovered[(phase - 1, tau2, k2)] = others[pos]
    # First phase: solve for the folded payloads and peel the XORs.
    folded_parts = {}
    own_cache = caches.per_user[k]
    folded_sym = plan.folded_sym
    for psi in subsets_containing(K, eta + 1, k):
        payload = _recover_payload(eta + 1, psi, k, transcript, recovered, schedule)
        if any(x > 255 for x in payload):
            raise DecodeFailure(f"payload for {psi} contains non-byte symbols")
        acc = np.frombuffer(bytes(payload), dtype=np.uint8).copy()
        for k2 in psi:
            if k2 == k:
                continue
            tau2 = tuple(u for u in psi if u != k2)
            partner = own_cache[(requests[k2 - 1], tau2)][:folded_sym]
            acc ^= np.frombuffer(partner, dtype=np.uint8)
        folded_parts[tuple(u for u in psi if u != k)] = acc.tobytes()
    # Reassemble: cached subfiles + folded slices + private-pipe slices.
    uncached_sym = plan.uncached_sym
    unfolded_sym = plan.unfolded_sym
    uncached = residual_bytes[:uncached_sym]
    offset = uncached_sym
    subfiles = {}
    for tau in layout.taus:
        if k in tau:
            subfiles[tau] = own_cache[(requests[k - 1], tau)]
        else:
            unfolded = residual_bytes[offset:offset + unfolded_sym]
            offset += unfolded_sym
            subfiles[tau] = folded_parts[tau] + unfolded
    if offset != len(residual_bytes):
        raise DecodeFailure(f"private pipe for user {k} has {len(residual_bytes)} symbols, "
                            f"consumed {offset}")
    return layout.assemble(subfiles, uncached)


# ---------------------------------------------------------------------------
# End-to-end run.
# ---------------------------------------------------------------------------

@dataclass
class SimReport:
    """Outcome and assertion results of one end-to-end delivery run."""

    K: int
    N: int
    M: Fraction
    alpha: Fraction
    eta: int
    requests: tuple
    seed: int
    duration: Fraction
    duration_matches_formula: bool
    decode_ok: dict
    residual_sym: dict
    residual_expected_sym: int
    residual_ok: bool
    solve_failures: int
    redraws: int
    causality_ok: bool
    transcript_digest: str
    transcript: Transcript | None = field(default=None, repr=False)

    def all_ok(self) -> bool:
        return (all(self.decode_ok.values()) and self.duration_matches_formula
                and self.residual_ok and self.solve_failures == 0 and self.causality_ok)

    def to_json(self) -> dict:
        return {
            "params": {"K": self.K, "N": self.N, "M": str(self.M), "alpha": str(self.alpha)},
            "eta": self.eta,
            "requests": list(self.requests),
            "seed": self.seed,
            "duration": {"num": self.duration.numerator, "den": self.duration.denominator,
                         "decimal": float(self.duration)},
            "duration_matches_formula": self.duration_matches_formula,
            "decode_ok": {str(k): v for k, v in sorted(self.decode_ok.items())},
            "residual_bytes": {str(k): v for k, v in sorted(self.residual_sym.items())},
            "residual_expected_bytes": self.residual_expected_sym,
            "residual_ok": self.residual_ok,
            "solve_failures": self.solve_failures,
            "channel_redraws": self.redraws,
            "causality_ok": self.causality_ok,
            "transcript_digest": self.transcript_digest,
            "all_ok": self.all_ok(),
        }


def simulate(params: SystemParams, requests=None, seed: int = 0,
             keep_transcript: bool = False) -> SimReport:
    """Run placement, folding, delivery and backward decoding end to end.

    Verifies that the simulated schedule length equals the closed-form
    delivery time exactly, that every user recovers its file bytewise, that
    the private pipe carries exactly alpha*T*f_sym symbols per user, and
    that no solve was singular.
    """
    K = params.K
    Gamma = params.delivery_budget()
    if requests is None:
        requests = tuple(range(1, K + 1))
    requests = tuple(int(r) for r in requests)
    if len(requests) != K:
        raise ValueError(f"need {K} requests, got {len(requests)}")
    for r in requests:
        if not 1 <= r <= params.N:
            raise ValueError(f"request {r} outside 1..{params.N}")

    eta = select_eta(K, Gamma, params.alpha)
    T = delivery_time_for_eta(K, Gamma, eta, params.alpha)
    plan = plan_split(params, eta, T)
    schedule = build_schedule(K, eta, plan)
    library = make_library(params.N, plan.f_sym, seed)
    caches = place(library, params, eta)
    folded = fold(requests, caches, plan)
    residual = residual_demands(requests, library, plan)
    combiners = make_combiners(K, eta, seed)
    transcript = run_delivery(plan, schedule, folded, combiners, seed)
    decoded = backward_decode(transcript, caches, combiners, requests, plan, schedule,
                              residual)

    expected_residual = plan.sym(params.alpha * T)
    decode_ok = {k: decoded.files[k] == library.file(requests[k - 1]) for k in range(1, K + 1)}
    report = SimReport(
        K=K, N=params.N, M=params.M, alpha=params.alpha, eta=eta,
        requests=requests, seed=seed,
        duration=schedule.total,
        duration_matches_formula=(schedule.total == achievable_T_best(params)),
        decode_ok=decode_ok,
        residual_sym={k: len(residual[k]) for k in residual},
        residual_expected_sym=expected_residual,
        residual_ok=all(len(v) == expected_residual for v in residual.values()),
        solve_failures=decoded.solve_failures,
        redraws=transcript.redraws,
        causality_ok=all(s.source_phase is None or s.source_phase < s.phase
                         for s in transcript.slots),
        transcript_digest=transcript.digest(),
        transcript=transcript if keep_transcript else None,
    )
    return report
