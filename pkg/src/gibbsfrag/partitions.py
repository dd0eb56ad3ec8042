"""Set partitions of [n], compositions and (truncated) mass partitions."""

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, ResourceGuardError

MAX_ENUMERATION_N = 12


@dataclass(frozen=True)
class SetPartition:
    """Partition of {1..n}; blocks are sorted tuples listed by least element."""

    n: int
    blocks: tuple

    def __post_init__(self):
        blocks = tuple(tuple(sorted(int(i) for i in b)) for b in self.blocks)
        if any(len(b) == 0 for b in blocks):
            raise DomainError("blocks must be nonempty")
        blocks = tuple(sorted(blocks, key=lambda b: b[0]))
        seen = sorted(i for b in blocks for i in b)
        if seen != list(range(1, int(self.n) + 1)):
            raise DomainError(f"blocks do not partition 1..{self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "blocks", blocks)

    @property
    def k(self):
        return len(self.blocks)

    @property
    def sizes(self):
        return tuple(len(b) for b in self.blocks)

    @classmethod
    def from_labels(cls, labels):
        """Build from a label per element (element i+1 carries ``labels[i]``)."""
        groups = {}
        for i, lab in enumerate(labels):
            groups.setdefault(lab, []).append(i + 1)
        return cls(len(labels), tuple(groups.values()))

    def labels(self):
        """Restricted growth string: 0-based block index of each element."""
        out = [0] * self.n
        for j, b in enumerate(self.blocks):
            for i in b:
                out[i - 1] = j
        return tuple(out)

    def to_json(self):
        return json.dumps([list(b) for b in self.blocks], separators=(",", ":"))

    @classmethod
    def from_json(cls, text):
        blocks = json.loads(text) if isinstance(text, str) else text
        if not isinstance(blocks, list) or not all(isinstance(b, list) for b in blocks):
            raise DomainError("partition JSON must be an array of arrays")
        n = sum(len(b) for b in blocks)
        return cls(n, tuple(tuple(b) for b in blocks))

    def restrict(self, elements):
        """The induced partition of the sorted ``elements``, relabelled 1..len."""
        pos = {e: i + 1 for i, e in enumerate(sorted(elements))}
        blocks = [tuple(pos[i] for i in b if i in pos) for b in self.blocks]
        return SetPartition(len(pos), tuple(b for b in blocks if b))


@dataclass(frozen=True)
class Composition:
    """Multiset of block sizes, stored in nonincreasing order."""

    sizes: tuple

    def __post_init__(self):
        sizes = tuple(sorted((int(x) for x in self.sizes), reverse=True))
        if not sizes or sizes[-1] < 1:
            raise DomainError("a composition needs at least one size, all >= 1")
        object.__setattr__(self, "sizes", sizes)

    @property
    def n(self):
        return sum(self.sizes)

    @property
    def k(self):
        return len(self.sizes)

    def grow(self, j):
        """Add one element to block ``j`` (0-based), or a new block when j == k."""
        s = list(self.sizes)
        if j == len(s):
            s.append(1)
        else:
            s[j] += 1
        return Composition(tuple(s))


class MassPartition:
    """Nonincreasing weights plus the mass left in an untracked tail."""

    def __init__(self, weights, tail=0.0, tol=1e-9):
        w = np.asarray(weights, dtype=float).ravel()
        if np.any(w < 0) or np.any(w > 1 + tol):
            raise DomainError("weights must lie in [0, 1]")
        if np.any(np.diff(w) > 0):
            raise DomainError("weights must be nonincreasing")
        tail = float(tail)
        if tail < 0:
            raise DomainError("tail must be nonnegative")
        total = float(w.sum()) + tail
        if abs(total - 1.0) > tol:
            raise DomainError(f"weights + tail = {total!r}, expected 1")
        w.setflags(write=False)
        self.weights = w
        self.tail = tail

    def __len__(self):
        return self.weights.size

    def __repr__(self):
        return f"MassPartition({self.weights.size} weights, tail={self.tail:.3g})"

    def to_json(self):
        return json.dumps({"weights": [float(x) for x in self.weights], "tail": self.tail},
                          separators=(",", ":"))


def to_composition(p):
    return Composition(p.sizes)


def rank_masses(raw, tail=0.0, tol=1e-6):
    """Sort masses into nonincreasing order and drop zeros; the tail is carried."""
    w = np.asarray(raw, dtype=float).ravel()
    if np.any(w < 0) or tail < 0:
        raise DomainError("masses must be nonnegative")
    if abs(w.sum() + tail - 1.0) > tol:
        raise DomainError("masses plus tail must sum to 1")
    w = -np.sort(-w[w > 0])
    # absorb rounding so the stored partition is normalized to machine precision
    scale = 1.0 / (w.sum() + tail)
    return MassPartition(w * scale, tail * scale)


def diversity_estimate(m, alpha, eps):
    """Finite-eps estimate of the alpha-diversity L = T**-alpha.

    The count of masses above eps grows like L eps**-alpha / Gamma(1-alpha), so the
    estimate is Gamma(1-alpha) eps**alpha #{P_i >= eps}.
    """
    if not eps > 0:
        raise DomainError("eps must be positive")
    a = float(alpha)
    count = int(np.count_nonzero(np.asarray(m.weights) >= eps))
    return math.gamma(1.0 - a) * eps ** a * count


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------

def _guard(n):
    n = int(n)
    if n < 1:
        raise DomainError("n must be positive")
    if n > MAX_ENUMERATION_N:
        raise ResourceGuardError(f"enumeration capped at n = {MAX_ENUMERATION_N}")
    return n


@lru_cache(maxsize=16)
def _rgs_table(n):
    rows = np.zeros((1, 1), dtype=np.int8)
    top = np.zeros(1, dtype=np.int8)
    for _ in range(1, n):
        reps = top.astype(np.int64) + 2
        idx = np.repeat(np.arange(rows.shape[0]), reps)
        start = np.cumsum(reps) - reps
        nxt = (np.arange(idx.size) - np.repeat(start, reps)).astype(np.int8)
        rows = np.concatenate([rows[idx], nxt[:, None]], axis=1)
        top = np.maximum(top[idx], nxt)
    rows.setflags(write=False)
    return rows


def rgs_table(n):
    """All restricted growth strings of length n, one row each, in lexicographic order."""
    return _rgs_table(_guard(n))


def enumerate_set_partitions(n):
    """Yield every set partition of [n] once, in restricted-growth-string order."""
    for row in rgs_table(n):
        yield SetPartition.from_labels(row.tolist())


def bell_number(n):
    """Bell number via the Bell triangle."""
    row = [1]
    for _ in range(int(n) - 1):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[-1]


def canonical_labels(labels):
    """Relabel each row of an integer array by order of first appearance."""
    labels = np.asarray(labels, dtype=np.int64)
    size, n = labels.shape
    if n == 0:
        return labels.copy()
    order = np.argsort(labels, axis=1, kind="stable")
    srt = np.take_along_axis(labels, order, axis=1)
    start = np.ones((size, n), dtype=bool)
    start[:, 1:] = srt[:, 1:] != srt[:, :-1]
    # position of the first start at or before each sorted slot
    cols = np.broadcast_to(np.arange(n), (size, n))
    head = np.maximum.accumulate(np.where(start, cols, 0), axis=1)
    first_sorted = np.take_along_axis(order, head, axis=1)
    first = np.empty_like(first_sorted)
    np.put_along_axis(first, order, first_sorted, axis=1)
    is_first = first == cols
    rank = np.cumsum(is_first, axis=1) - 1
    return np.take_along_axis(rank, first, axis=1)


def rgs_codes(labels):
    """Integer code of each canonical label row (base-n digits); order-preserving."""
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.shape[1]
    return labels @ (n ** np.arange(n - 1, -1, -1, dtype=np.int64))


def partition_index(labels):
    """Position of each canonical label row in :func:`rgs_table` order."""
    labels = np.asarray(labels, dtype=np.int64)
    codes = rgs_codes(rgs_table(labels.shape[1]))
    idx = np.searchsorted(codes, rgs_codes(labels))
    return idx
