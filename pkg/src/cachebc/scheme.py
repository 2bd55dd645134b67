"""Cache placement, file splitting, and folding into XOR multicast messages.

Sizing convention: every size is an exact Fraction in units of one file f.
A file holds f_sym byte symbols, where f_sym is a multiple of 64 chosen so
that every slice the scheme ever takes (subfiles, their folded/unfolded
sub-slices, the never-cached tail, and the per-stream chunks of every
delivery phase) is a whole number of symbols.

File layout: the C(K, eta) cached subfiles in lexicographic subset order,
each stored as its folded slice followed by its unfolded slice, then the
never-cached tail. Caches, folding and decoding all address bytes through
this one layout.

With fold order eta, each file's cached portion is divided into subfiles
indexed by the size-eta subsets of [K]; subfile (n, tau) sits in the cache
of every user in tau. For requests R_1..R_K, the folded message for a
size-(eta+1) set psi is the bytewise XOR over k in psi of the folded slice
of subfile (R_k, psi \\ {k}); each user in psi can peel it with cached
partners. Everything the folded messages do not carry (unfolded slices of
wanted subfiles plus the never-cached tail) rides the private per-user pipe
whose byte budget is alpha*T*f_sym, exactly.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .analysis import SystemParams
from .combinatorics import enumerate_subsets, subsets_containing, UserSet

# Base symbol block: the denominator LCM is scaled by this so small phase
# factors (stream counts, chunk ratios) stay integral without special cases.
BASE_BLOCK = 64


class InfeasibleSplit(ValueError):
    """A split size came out negative: eta is not usable at this alpha/T."""


class InvalidPacketization(ValueError):
    """f_sym does not divide the scheme's slice sizes into whole symbols."""


class CorruptedCache(ValueError):
    """A subfile the folding step relies on is missing from every cache."""


@dataclass(frozen=True)
class SplitPlan:
    """Exact sizes (units of one file) for a given fold order and duration."""

    K: int
    Gamma: int
    eta: int
    alpha: Fraction
    T: Fraction
    cached_part: Fraction          # slice of each file that gets cached
    uncached_part: Fraction        # never-cached tail
    subfile: Fraction              # one cached subfile
    unfolded_per_subfile: Fraction  # subfile slice left out of the XORs
    folded_per_subfile: Fraction   # subfile slice that enters the XORs
    folded_message: Fraction       # one order-(eta+1) XOR payload
    f_sym: int                     # symbols per file

    def sym(self, size: Fraction) -> int:
        """Convert a size in file units to a whole symbol count."""
        n = size * self.f_sym
        if n.denominator != 1:
            raise InvalidPacketization(f"{size} * {self.f_sym} is not a whole symbol count")
        return int(n)

    @property
    def subfile_sym(self) -> int:
        return self.sym(self.subfile)

    @property
    def folded_sym(self) -> int:
        return self.sym(self.folded_per_subfile)

    @property
    def unfolded_sym(self) -> int:
        return self.sym(self.unfolded_per_subfile)

    @property
    def uncached_sym(self) -> int:
        return self.sym(self.uncached_part)


def phase_chunks(K: int, eta: int, folded_message: Fraction) -> dict[int, Fraction]:
    """Per-user observation chunk of each delivery phase, in file units.

    Phase eta+1 spreads one folded message over K-eta parallel streams; each
    later phase j re-encodes j-1 chunks of the previous phase over K-j+1
    streams, so chunks grow by (j-1)/(K-j+1) per phase.
    """
    chunks: dict[int, Fraction] = {}
    e = Fraction(folded_message) / (K - eta)
    chunks[eta + 1] = e
    for j in range(eta + 2, K + 1):
        e = e * (j - 1) / (K - j + 1)
        chunks[j] = e
    return chunks


def choose_f_sym(sizes) -> int:
    """Smallest BASE_BLOCK multiple making every size a whole symbol count."""
    denom = 1
    for s in sizes:
        denom = math.lcm(denom, Fraction(s).denominator)
    return BASE_BLOCK * denom


def plan_split(params: SystemParams, eta: int, T: Fraction) -> SplitPlan:
    """Exact split sizes for fold order eta and delivery duration T.

    Raises InfeasibleSplit when any slice would be negative, which happens
    when eta is not matched to alpha (the private pipe alpha*T must cover at
    least the never-cached tail, and the folded payload 1 - gamma - alpha*T
    must be non-negative).
    """
    K = params.K
    Gamma = params.delivery_budget()
    if not Gamma <= eta <= K - 1:
        raise ValueError(f"fold order eta={eta} outside {Gamma}..{K - 1}")
    T = Fraction(T)
    alpha = params.alpha
    gamma = params.gamma

    cached = Fraction(Gamma, eta)
    uncached = 1 - cached
    subfile = gamma / math.comb(K - 1, eta - 1)
    unfolded = (alpha * T - uncached) / math.comb(K - 1, eta)
    folded_msg = (1 - gamma - alpha * T) / math.comb(K - 1, eta)
    folded_per = subfile - unfolded
    for name, size in [("unfolded slice", unfolded), ("folded slice", folded_per),
                       ("folded message", folded_msg)]:
        if size < 0:
            raise InfeasibleSplit(
                f"{name} would be {size} for eta={eta}, alpha={alpha}, T={T}")
    assert folded_per == folded_msg  # one XOR operand per contributing subfile

    sizes = [cached, uncached, subfile, unfolded, folded_per, folded_msg]
    sizes += list(phase_chunks(K, eta, folded_msg).values())
    return SplitPlan(
        K=K, Gamma=Gamma, eta=eta, alpha=alpha, T=T,
        cached_part=cached, uncached_part=uncached, subfile=subfile,
        unfolded_per_subfile=unfolded, folded_per_subfile=folded_per,
        folded_message=folded_msg, f_sym=choose_f_sym(sizes),
    )


@dataclass(frozen=True)
class Library:
    """The transmitter's N files, each f_sym symbols."""

    files: tuple[bytes, ...]
    f_sym: int

    def file(self, n: int) -> bytes:
        if not 1 <= n <= len(self.files):
            raise ValueError(f"file index {n} outside 1..{len(self.files)}")
        return self.files[n - 1]


def make_library(N: int, f_sym: int, seed: int = 0) -> Library:
    """Deterministic pseudorandom library; each file opens with an identity
    marker so recovered payloads are self-evidently the right file."""
    files = []
    for n in range(1, N + 1):
        marker = f"file{n:06d}".encode()
        rng = np.random.default_rng([seed, n])
        body = rng.integers(0, 256, size=f_sym - len(marker), dtype=np.uint8).tobytes()
        files.append(marker + body)
    return Library(files=tuple(files), f_sym=f_sym)


class FileLayout:
    """Byte offsets of every slice of a file under a SplitPlan."""

    def __init__(self, plan: SplitPlan):
        self.plan = plan
        self.taus = enumerate_subsets(plan.K, plan.eta)
        self._index = {tau: i for i, tau in enumerate(self.taus)}
        self.sub_sym = plan.subfile_sym
        self.folded_sym = plan.folded_sym
        self.cached_sym = len(self.taus) * self.sub_sym
        if self.cached_sym + plan.uncached_sym != plan.f_sym:
            raise InvalidPacketization(
                f"slices {self.cached_sym}+{plan.uncached_sym} do not tile f_sym={plan.f_sym}")

    def subfile_bytes(self, data: bytes, tau: UserSet) -> bytes:
        start = self._index[tau] * self.sub_sym
        return data[start:start + self.sub_sym]

    def folded_bytes(self, data: bytes, tau: UserSet) -> bytes:
        return self.subfile_bytes(data, tau)[:self.folded_sym]

    def unfolded_bytes(self, data: bytes, tau: UserSet) -> bytes:
        return self.subfile_bytes(data, tau)[self.folded_sym:]

    def uncached_bytes(self, data: bytes) -> bytes:
        return data[self.cached_sym:]

    def assemble(self, subfiles: dict[UserSet, bytes], uncached: bytes) -> bytes:
        """Inverse of the layout: rebuild a file from its slices."""
        parts = [subfiles[tau] for tau in self.taus]
        parts.append(uncached)
        out = b"".join(parts)
        if len(out) != self.plan.f_sym:
            raise InvalidPacketization(f"assembled {len(out)} symbols, expected {self.plan.f_sym}")
        return out


@dataclass(frozen=True)
class CacheContents:
    """Per-user cached subfiles: user k holds subfile (n, tau) iff k is in tau."""

    K: int
    eta: int
    f_sym: int
    per_user: dict[int, dict[tuple[int, UserSet], bytes]]

    def subfile(self, n: int, tau: UserSet) -> bytes:
        """Fetch subfile (n, tau) from any cache holding it."""
        holder = self.per_user.get(tau[0], {})
        try:
            return holder[(n, tau)]
        except KeyError:
            raise CorruptedCache(f"subfile ({n}, {tau}) missing from cache {tau[0]}") from None


def place(library: Library, params: SystemParams, eta: int) -> CacheContents:
    """Fill the K caches: each cached subfile lands in exactly eta caches,
    and each cache ends up holding exactly M*f_sym symbols."""
    K = params.K
    Gamma = params.delivery_budget()
    if not Gamma <= eta <= K - 1:
        raise ValueError(f"fold order eta={eta} outside {Gamma}..{K - 1}")
    subfile = params.gamma / math.comb(K - 1, eta - 1)
    sub_sym = subfile * library.f_sym
    if sub_sym.denominator != 1:
        raise InvalidPacketization(
            f"subfile size {subfile} of f_sym={library.f_sym} is not a whole symbol count")
    sub_sym = int(sub_sym)
    taus = enumerate_subsets(K, eta)
    # Cut each file once; caches share the immutable slices.
    table = {}
    for n in range(1, params.N + 1):
        data = library.file(n)
        for i, tau in enumerate(taus):
            table[(n, tau)] = data[i * sub_sym:(i + 1) * sub_sym]
    per_user = {
        k: {(n, tau): table[(n, tau)]
            for tau in subsets_containing(K, eta, k)
            for n in range(1, params.N + 1)}
        for k in range(1, K + 1)
    }
    return CacheContents(K=K, eta=eta, f_sym=library.f_sym, per_user=per_user)


@dataclass(frozen=True)
class FoldedMessage:
    """Order-(eta+1) XOR payload targeted at the users in psi."""

    psi: UserSet
    payload: bytes


def _xor(chunks) -> bytes:
    acc = None
    for c in chunks:
        arr = np.frombuffer(c, dtype=np.uint8)
        acc = arr.copy() if acc is None else acc ^ arr
    return acc.tobytes() if acc is not None else b""


def fold(requests, caches: CacheContents, plan: SplitPlan) -> list[FoldedMessage]:
    """All C(K, eta+1) folded messages for the given request vector.

    Repeated requests fold the same way; no message gets larger or smaller.
    """
    K, eta = plan.K, plan.eta
    if len(requests) != K:
        raise ValueError(f"need {K} requests, got {len(requests)}")
    folded_sym = plan.folded_sym
    out = []
    for psi in enumerate_subsets(K, eta + 1):
        parts = []
        for k in psi:
            tau = tuple(i for i in psi if i != k)
            parts.append(caches.subfile(requests[k - 1], tau)[:folded_sym])
        out.append(FoldedMessage(psi=psi, payload=_xor(parts)))
    return out


def residual_demands(requests, library: Library, plan: SplitPlan) -> dict[int, bytes]:
    """Per-user private-pipe payload: the never-cached tail of the requested
    file, then the unfolded slices of its subfiles the user does not cache,
    in lexicographic subset order. Exactly alpha*T*f_sym symbols per user."""
    K = plan.K
    if len(requests) != K:
        raise ValueError(f"need {K} requests, got {len(requests)}")
    layout = FileLayout(plan)
    out = {}
    for k in range(1, K + 1):
        data = library.file(requests[k - 1])
        parts = [layout.uncached_bytes(data)]
        for tau in layout.taus:
            if k not in tau:
                parts.append(layout.unfolded_bytes(data, tau))
        out[k] = b"".join(parts)
    return out


def cache_manifest(caches: CacheContents) -> dict:
    """JSON-ready audit view of the caches: indices, sizes, payload digests."""
    users = {}
    for k in sorted(caches.per_user):
        entries = []
        for (n, tau), data in sorted(caches.per_user[k].items()):
            entries.append({
                "file": n,
                "subset": list(tau),
                "symbols": len(data),
                "sha256": hashlib.sha256(data).hexdigest(),
            })
        users[str(k)] = entries
    return {"K": caches.K, "eta": caches.eta, "f_sym": caches.f_sym, "caches": users}


def message_manifest(messages) -> dict:
    """JSON-ready audit view of the folded messages."""
    return {
        "messages": [
            {
                "psi": list(m.psi),
                "symbols": len(m.payload),
                "sha256": hashlib.sha256(m.payload).hexdigest(),
            }
            for m in messages
        ]
    }
