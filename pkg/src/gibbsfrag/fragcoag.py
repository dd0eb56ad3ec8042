"""Fragmentation by PD(alpha, -beta) and the dual dependent coagulation.

Partition-level operators act on canonical label arrays of shape (size, n) for
batch work; the SetPartition versions wrap them for single draws.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import samplers
from .eppf import GibbsWeights
from .errors import DomainError, EfficiencyError
from .partitions import SetPartition, canonical_labels, rank_masses
from .special import as_index
from .tilts import TiltFunction


@dataclass(frozen=True)
class FragParams:
    alpha: float
    beta: float

    def __post_init__(self):
        a = as_index(self.alpha)
        b = as_index(self.beta, "beta")
        if not b < a:
            raise DomainError(f"need beta < alpha, got alpha={a}, beta={b}")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    @property
    def ratio(self):
        return self.beta / self.alpha


@dataclass(frozen=True)
class CoagPair:
    """A fine partition and the partition of its block indices that merges it."""

    v_tilde: object
    q: object
    law_tag: str = ""

    def __post_init__(self):
        if isinstance(self.v_tilde, SetPartition) and isinstance(self.q, SetPartition):
            if self.q.n != self.v_tilde.k:
                raise DomainError("q must partition the blocks of v_tilde")

    def coagulate(self):
        return coag_set_partition(self.v_tilde, self.q)


def frag_labels(labels, fp, rng, backend=None):
    """Shatter every block by an independent PD(alpha, -beta) partition."""
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    w = GibbsWeights.pd(fp.alpha, -fp.beta, max(labels.shape[1], 1))
    return samplers.sample_groups(w, labels, rng, backend=backend)


def frag_set_partition(p, fp, rng):
    out = frag_labels(np.array([p.labels()]), fp, rng)
    return SetPartition.from_labels(out[0].tolist())


def frag_mass_partition(m, fp, sticks_per_mass, rng):
    """Multiply each mass into an independent GEM(alpha, -beta) stick sequence and rank.

    The returned tail collects the input tail plus every truncated stick remainder.
    """
    w = np.asarray(m.weights)
    sticks, tails = samplers.gem_sticks(fp.alpha, -fp.beta, sticks_per_mass, rng, size=w.size)
    pieces = (w[:, None] * sticks).ravel()
    tail = m.tail + float(np.dot(w, tails))
    return rank_masses(pieces, tail)


def coag_labels(labels, q_labels):
    """Merge blocks: block b of ``labels`` joins block ``q_labels[b]``; output canonical.

    ``q_labels`` rows may be longer than the block count; extra entries are ignored.
    """
    labels = np.asarray(labels, dtype=np.int64)
    q_labels = np.asarray(q_labels, dtype=np.int64)
    merged = np.take_along_axis(q_labels, labels, axis=1)
    return canonical_labels(merged)


def coag_set_partition(p, q):
    """Union the blocks of ``p`` whose indices share a block of ``q`` (a partition of [p.k])."""
    if q.n != p.k:
        raise DomainError(f"q must partition [{p.k}], got a partition of [{q.n}]")
    out = coag_labels(np.array([p.labels()]), np.array([q.labels()]))
    return SetPartition.from_labels(out[0].tolist())


def _block_counts(labels):
    return labels.max(axis=1) + 1


def _restrict_prefix(q_labels, k):
    """First k entries of each row (a canonical prefix is canonical); -1 beyond."""
    cols = np.arange(q_labels.shape[1])[None, :]
    return np.where(cols < k[:, None], q_labels, -1)


def dependent_coag_labels(alpha, beta, h, n, rng, size, probe_min=1e-4):
    """Draws of (v_tilde, q, v) under the joint law tilted by h(s y**(1/alpha)).

    Returns label arrays of shape (size, n): ``q`` partitions the first k
    positions (k = blocks of v_tilde) and holds -1 beyond them.

    The untilted pair is drawn exactly: v_tilde ~ PD(alpha, 0) with its total
    s given the block count, and q ~ PD(beta/alpha, 0) on [k] with its total y
    given its block count.  The pair is kept with probability h(s y**(1/alpha)) / sup h.
    """
    fp = FragParams(alpha, beta)
    if not isinstance(h, TiltFunction) or not h.bounded:
        raise DomainError("dependent coagulation needs a bounded tilt")
    if abs(h.alpha - fp.beta) > 1e-15:
        raise DomainError("the tilt must be built at index beta")
    g = samplers._stream(rng)
    n, size = int(n), int(size)
    ga = fp.ratio
    wa = GibbsWeights.pd(fp.alpha, 0.0, n)
    wg = GibbsWeights.pd(ga, 0.0, n)
    log_sup = math.log(h.sup_bound)
    out_v, out_q = [], []
    got = 0
    tried = 0
    batch = max(1000, size)
    while got < size:
        vt = samplers.sample_partitions(wa, n, batch, g)
        k = _block_counts(vt)
        s = samplers.sample_given_blocks(fp.alpha, np.full(batch, n), k, g)
        q = _restrict_prefix(samplers.sample_partitions(wg, n, batch, g), k)
        j = q.max(axis=1) + 1
        y = samplers.sample_given_blocks(ga, k, j, g)
        keep = g.random(batch) < np.exp(h.log_eval(s * y ** (1.0 / fp.alpha)) - log_sup)
        out_v.append(vt[keep])
        out_q.append(q[keep])
        got += int(keep.sum())
        tried += batch
        if tried >= 100 * batch and got < probe_min * tried:
            raise EfficiencyError("acceptance rate too small for dependent coagulation")
    v_tilde = np.concatenate(out_v)[:size]
    q = np.concatenate(out_q)[:size]
    v = coag_labels(v_tilde, np.where(q < 0, 0, q))
    return v_tilde, q, v


def _prefix_partition(row):
    return SetPartition.from_labels([int(x) for x in row if x >= 0])


def dependent_coag_sample(alpha, beta, h, n, rng):
    """One (v_tilde, q, v) triple of SetPartitions; see :func:`dependent_coag_labels`."""
    vt, q, v = dependent_coag_labels(alpha, beta, h, n, rng, 1)
    return (SetPartition.from_labels(vt[0].tolist()), _prefix_partition(q[0]),
            SetPartition.from_labels(v[0].tolist()))


def gg_dual_demo(beta, alpha, zeta, m, n, rng, size=1, theta=None):
    """Explicit generalized gamma dual pair on [n].

    q and its total y come from P^[m]_{beta/alpha}(zeta); v_tilde from
    P^[m]_alpha(zeta**(alpha/beta) y); v is their coagulation.  With ``theta``
    given, zeta is randomized: Gamma(theta/beta) for m = 0 (theta > 0) and
    Gamma((theta + beta)/beta) for m = 1 (theta > -beta).

    Returns a dict of label arrays ``v_tilde``, ``q`` (prefix of length k, -1
    beyond), ``v`` and the arrays ``zeta``, ``y``.
    """
    fp = FragParams(alpha, beta)
    if m not in (0, 1):
        raise DomainError("m must be 0 or 1")
    g = samplers._stream(rng)
    size = int(size)
    if theta is None:
        if not zeta > 0:
            raise DomainError("zeta must be positive")
        z = np.full(size, float(zeta))
    elif m == 0:
        if not theta > 0:
            raise DomainError("the m = 0 route needs theta > 0")
        z = g.gamma(theta / fp.beta, size=size)
    else:
        if not theta > -fp.beta:
            raise DomainError("the m = 1 route needs theta > -beta")
        z = g.gamma((theta + fp.beta) / fp.beta, size=size)
    q_full, y = samplers.sample_gg_partition(fp.ratio, z, m, n, g)
    v_tilde, _ = samplers.sample_gg_partition(fp.alpha, z ** (fp.alpha / fp.beta) * y, m, n, g)
    k = _block_counts(v_tilde)
    q = _restrict_prefix(q_full, k)
    v = coag_labels(v_tilde, q_full)
    return {"v_tilde": v_tilde, "q": q, "v": v, "zeta": z, "y": y}
