"""Random generation for stable and Poisson-Kingman laws.

Variates are drawn in vectorized batches; every function takes an
:class:`RngStream` and consumes it deterministically.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .eppf import Evaluator, GibbsWeights, predictive_weights
from .errors import DomainError, EfficiencyError
from .partitions import SetPartition, rank_masses
from .special import as_index
from .tilts import TiltFunction


class RngStream:
    """A numpy Generator keyed by (seed, stream_id); equal keys give equal draws."""

    def __init__(self, seed=0, stream_id=0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def child(self, k):
        """An independent stream derived from this one's key and ``k``."""
        return RngStream(self.seed, (self.stream_id << 16) + 1 + int(k))


def _stream(rng):
    if isinstance(rng, RngStream):
        return rng.gen
    if isinstance(rng, np.random.Generator):
        return rng
    raise DomainError("rng must be an RngStream")


# ---------------------------------------------------------------------------
# stable variables and their tilts
# ---------------------------------------------------------------------------

def _kanter(alpha, u, e):
    # (A(u) / E)**((1 - alpha) / alpha) with Zolotarev's A
    a = alpha
    log_t = (np.log(np.sin(a * u)) + (1 - a) / a * np.log(np.sin((1 - a) * u))
             - np.log(np.sin(u)) / a - (1 - a) / a * np.log(e))
    return np.exp(log_t)


def sample_stable(alpha, rng, size=None):
    """Positive stable draws with E exp(-lam T) = exp(-lam**alpha)."""
    a = as_index(alpha)
    g = _stream(rng)
    u = g.uniform(0.0, math.pi, size)
    e = g.standard_exponential(size)
    return _kanter(a, u, e)


def sample_exp_tilted_stable(alpha, c, rng):
    """Draws with density proportional to exp(-c t) f_alpha(t), one per entry of ``c``.

    The law at rate c is that of m**(-1/alpha) times a sum of m copies at rate
    c m**(-1/alpha); with m = ceil(c**alpha) each copy is accepted from a plain
    stable draw with probability at least exp(-1).
    """
    a = as_index(alpha)
    g = _stream(rng)
    c = np.atleast_1d(np.asarray(c, dtype=float))
    if np.any(c < 0):
        raise DomainError("tilt rate must be nonnegative")
    flat = c.ravel()
    m = np.maximum(1, np.ceil(flat ** a)).astype(np.int64)
    owner = np.repeat(np.arange(flat.size), m)
    rate = (flat * m ** (-1.0 / a))[owner]
    out = np.empty(owner.size)
    todo = np.arange(owner.size)
    while todo.size:
        t = sample_stable(a, g, todo.size)
        ok = g.random(todo.size) < np.exp(-rate[todo] * t)
        out[todo[ok]] = t[ok]
        todo = todo[~ok]
    sums = np.add.reduceat(out, np.cumsum(m) - m)
    res = (sums * m ** (-1.0 / a)).reshape(c.shape)
    return res if np.ndim(res) else float(res)


def sample_poly_tilted_stable(alpha, theta, rng, size=None):
    """Draws with density proportional to t**(-theta) f_alpha(t), theta >= 0.

    Uses the Gamma(theta/alpha) mixture of exponentially tilted stables.
    """
    a = as_index(alpha)
    g = _stream(rng)
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0):
        raise DomainError("theta must be nonnegative here")
    shape = theta.shape if size is None else tuple(np.atleast_1d(size))
    th = np.broadcast_to(theta, shape).ravel()
    out = np.empty(th.size)
    zero = th == 0
    if zero.any():
        out[zero] = sample_stable(a, g, int(zero.sum()))
    if (~zero).any():
        zeta = g.gamma(th[~zero] / a)
        out[~zero] = sample_exp_tilted_stable(a, zeta ** (1.0 / a), g)
    out = out.reshape(shape)
    return out if out.ndim else float(out)


def sample_ml(alpha, theta, rng, size=None):
    """Mittag-Leffler ML(alpha, theta) draws, i.e. T_{alpha,theta}**(-alpha), theta > -alpha."""
    a = as_index(alpha)
    if not theta > -a:
        raise DomainError("theta must exceed -alpha")
    g = _stream(rng)
    if theta >= 0:
        return sample_poly_tilted_stable(a, theta, g, size) ** -a
    # Z_{a,theta} = Z_{a,theta+a} W**a with W ~ Beta(theta + a, 1 - a)
    z = np.asarray(sample_poly_tilted_stable(a, theta + a, g, size)) ** -a
    w = g.beta(theta + a, 1.0 - a, size)
    return z * w ** a


def sample_given_blocks(alpha, n, k, rng):
    """T_alpha given K_n = k under PD(alpha, 0): T_{alpha, k alpha} / Beta(k alpha, n - k alpha)."""
    a = as_index(alpha)
    g = _stream(rng)
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    n, k = np.broadcast_arrays(n, k)
    if np.any(k < 1) or np.any(k > n):
        raise DomainError("need 1 <= k <= n")
    t = np.asarray(sample_poly_tilted_stable(a, k * a, g))
    b = g.beta(k * a, n - k * a)
    return t / b


def sample_gg_inverse_lt(beta, zeta, m, rng, size=None):
    """Total of the generalized gamma law: density r^[m](t) f_beta(t) for m in {0, 1}.

    m = 0 is the stable law exponentially tilted at zeta**(1/beta); m = 1 is
    (s/zeta)**(1/beta) X_s with s = zeta + Gamma((1-beta)/beta) and X_s tilted at
    s**(1/beta).
    """
    b = as_index(beta, "beta")
    if m not in (0, 1):
        raise DomainError("m must be 0 or 1")
    g = _stream(rng)
    zeta = np.asarray(zeta, dtype=float)
    if np.any(zeta <= 0):
        raise DomainError("zeta must be positive")
    shape = zeta.shape if size is None else tuple(np.atleast_1d(size))
    z = np.broadcast_to(zeta, shape).astype(float)
    if m == 0:
        out = sample_exp_tilted_stable(b, z ** (1.0 / b), g)
    else:
        s = z + g.gamma((1.0 - b) / b, size=shape)
        out = (s / z) ** (1.0 / b) * np.asarray(sample_exp_tilted_stable(b, s ** (1.0 / b), g))
    out = np.asarray(out)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# mass partitions
# ---------------------------------------------------------------------------

def gem_sticks(alpha, theta, count, rng, size=None):
    """Size-biased GEM(alpha, theta) weights, 0 <= alpha < 1, and the leftover mass.

    Returns ``(weights, tail)`` with shapes ``size + (count,)`` and ``size``.
    """
    a = float(alpha)
    if not 0.0 <= a < 1.0:
        raise DomainError("alpha must lie in [0, 1)")
    if not theta > -a:
        raise DomainError("theta must exceed -alpha")
    count = int(count)
    if count < 1:
        raise DomainError("count must be positive")
    g = _stream(rng)
    shape = () if size is None else tuple(np.atleast_1d(size))
    k = np.arange(1, count + 1)
    r = g.beta(1.0 - a, theta + k * a, shape + (count,))
    with np.errstate(divide="ignore"):  # a stick of exactly 1 leaves nothing
        log_left = np.cumsum(np.log1p(-r), axis=-1)
    before = np.concatenate([np.zeros(shape + (1,)), log_left[..., :-1]], axis=-1)
    return r * np.exp(before), np.exp(log_left[..., -1])


def sample_gem(alpha, theta, count, rng):
    """Ranked GEM(alpha, theta) masses truncated at ``count`` sticks."""
    a = as_index(alpha)
    w, tail = gem_sticks(a, theta, count, rng)
    return rank_masses(w, float(tail))


@dataclass
class JumpSeries:
    jumps: np.ndarray
    total: float
    tail_mean: float

    def masses(self):
        return rank_masses(self.jumps / self.total, self.tail_mean / self.total)


def _jump_tail_mean(a, gam_n):
    return math.gamma(1.0 - a) ** (-1.0 / a) * a / (1.0 - a) * gam_n ** (1.0 - 1.0 / a)


def sample_stable_jumps(alpha, count, rng):
    """Largest ``count`` jumps of the alpha-stable subordinator on [0, 1], decreasing.

    ``total`` adds the expected sum of the omitted jumps (``tail_mean``).
    """
    a = as_index(alpha)
    count = int(count)
    if count < 1:
        raise DomainError("count must be positive")
    gam = np.cumsum(_stream(rng).standard_exponential(count))
    jumps = (math.gamma(1.0 - a) * gam) ** (-1.0 / a)
    tail = _jump_tail_mean(a, gam[-1])
    return JumpSeries(jumps, float(jumps.sum() + tail), tail)


def _batched_jumps(a, count, size, g):
    gam = np.cumsum(g.standard_exponential((size, count)), axis=1)
    jumps = (math.gamma(1.0 - a) * gam) ** (-1.0 / a)
    tail = _jump_tail_mean(a, gam[:, -1])
    return jumps, jumps.sum(axis=1) + tail, tail


def sample_pk_tilted(beta, h, count, rng, size=None, probe=2000, min_rate=1e-4):
    """Poisson-Kingman masses and total: jump series accepted with probability h(T)/sup h.

    With ``size=None`` returns ``(MassPartition, t)``; otherwise
    ``(weights, tails, totals)`` arrays for ``size`` accepted draws.
    """
    b = as_index(beta, "beta")
    if not isinstance(h, TiltFunction) or not h.bounded:
        raise DomainError("rejection needs a tilt with a finite sup_bound")
    if abs(h.alpha - b) > 1e-15:
        raise DomainError("tilt was built for a different index")
    g = _stream(rng)
    log_sup = math.log(h.sup_bound)
    # acceptance check on stable totals, which have the same law as the series totals
    t_probe = sample_stable(b, g, probe)
    rate = float(np.mean(np.exp(h.log_eval(t_probe) - log_sup)))
    if rate < min_rate:
        raise EfficiencyError(f"acceptance rate {rate:.2e} is below {min_rate}; change parameters")
    want = 1 if size is None else int(size)
    got_w, got_tail, got_t = [], [], []
    n_got = 0
    batch = max(16, min(4096, int(1.5 * want / max(rate, 1e-3))))
    while n_got < want:
        jumps, tot, tail = _batched_jumps(b, count, batch, g)
        keep = g.random(batch) < np.exp(h.log_eval(tot) - log_sup)
        got_w.append(jumps[keep] / tot[keep, None])
        got_tail.append(tail[keep] / tot[keep])
        got_t.append(tot[keep])
        n_got += int(keep.sum())
    w = np.concatenate(got_w)[:want]
    tails = np.concatenate(got_tail)[:want]
    t = np.concatenate(got_t)[:want]
    if size is None:
        return rank_masses(w[0], float(tails[0])), float(t[0])
    return w, tails, t


def sample_pk_total(beta, h, rng, size):
    """Totals T with density h(t) f_beta(t) by rejection from exact stable draws."""
    b = as_index(beta, "beta")
    if not h.bounded:
        raise DomainError("rejection needs a tilt with a finite sup_bound")
    g = _stream(rng)
    log_sup = math.log(h.sup_bound)
    out = []
    n_got = 0
    while n_got < size:
        t = sample_stable(b, g, max(1024, size))
        keep = g.random(t.size) < np.exp(h.log_eval(t) - log_sup)
        out.append(t[keep])
        n_got += int(keep.sum())
    return np.concatenate(out)[:size]


# ---------------------------------------------------------------------------
# partitions of [n]
# ---------------------------------------------------------------------------

def _table_for(source, n):
    if isinstance(source, GibbsWeights):
        return source
    if isinstance(source, Evaluator):
        return source.weights(n)
    return None


def sample_partitions(source, n, size, rng, backend=None):
    """``size`` exchangeable partitions of [n] as canonical label rows, shape (size, n).

    ``source`` is a GibbsWeights table or an evaluator.  Tables go through the
    compiled sequential sampler; bare evaluators use EPPF ratios item by item.
    """
    n, size = int(n), int(size)
    if n < 1:
        raise DomainError("n must be positive")
    g = _stream(rng)
    w = _table_for(source, n)
    if w is not None:
        unif = g.random((size, n))
        return kernels.gibbs_sample(w.vtable(n), w.alpha, 0, np.zeros(n, dtype=np.int64), unif,
                                    backend=backend)
    return _sample_by_ratios(source, n, size, g)


def _sample_by_ratios(eppf, n, size, g):
    out = np.zeros((size, n), dtype=np.int64)
    cache = {}
    for b in range(size):
        sizes = [1]
        for i in range(1, n):
            key = tuple(sizes)
            if key not in cache:
                part = SetPartition.from_labels([j for j, s in enumerate(sizes) for _ in range(s)])
                cache[key] = np.cumsum(predictive_weights(eppf, part))
            cum = cache[key]
            pick = int(np.searchsorted(cum, g.random() * cum[-1], side="right"))
            pick = min(pick, len(sizes))
            if pick == len(sizes):
                sizes.append(1)
            else:
                sizes[pick] += 1
            out[b, i] = pick
    return out


def sample_eppf_partition(source, n, rng):
    """One partition of [n] drawn sequentially from an EPPF or weight table."""
    return SetPartition.from_labels(sample_partitions(source, n, 1, rng)[0].tolist())


def sample_groups(w, groups, rng, backend=None):
    """Independent Gibbs partitions inside each group; ``groups`` is (size, n) labels.

    Output labels are global block ids in order of least element.
    """
    groups = np.ascontiguousarray(groups, dtype=np.int64)
    size, n = groups.shape
    unif = _stream(rng).random((size, n))
    return kernels.gibbs_sample(w.vtable(n), w.alpha, 0, groups, unif, backend=backend)


def _gg_completion_tables(gamma, c, m, n):
    """Per-draw Gibbs tables for the partition of [n] given the augmenting variable."""
    B = c.size
    W = np.zeros((B, n + 1, n + 2))
    j = np.arange(1, n + 1)
    logc = np.log(c)[:, None]
    lw = j[None, :] * logc
    if m == 1:
        lw = lw + np.log(c[:, None] + n - j[None, :] * gamma)
    lw -= lw.max(axis=1, keepdims=True)
    W[:, n, 1:n + 1] = np.exp(lw)
    for r in range(n - 1, 0, -1):
        jj = np.arange(1, r + 1)
        W[:, r, 1:r + 1] = (r - jj * gamma) * W[:, r + 1, 1:r + 1] + W[:, r + 1, 2:r + 2]
        top = W[:, r, 1:r + 1].max(axis=1, keepdims=True)
        W[:, r, 1:r + 1] /= top
    W[:, 0, 0] = 1.0
    return W


def sample_gg_partition(gamma, zeta, m, n, rng, size=None, backend=None):
    """Exact (partition of [n], total) pairs under the generalized gamma law P^[m]_gamma(zeta).

    The partition is drawn given the augmenting variable U = Gamma(n) / T, whose
    conditional law is Gibbs with explicit weights; the total is then redrawn
    given (partition, U).  ``zeta`` may vary per draw.
    """
    ga = as_index(gamma, "gamma")
    if m not in (0, 1):
        raise DomainError("m must be 0 or 1")
    g = _stream(rng)
    zeta = np.asarray(zeta, dtype=float)
    shape = zeta.shape if size is None else tuple(np.atleast_1d(size))
    z = np.broadcast_to(zeta, shape).astype(float).ravel()
    B = z.size
    n = int(n)
    t0 = np.asarray(sample_gg_inverse_lt(ga, z, m, g)).ravel()
    u = g.gamma(n, size=B) / t0
    v = u + z ** (1.0 / ga)
    c = ga * v ** ga
    W = _gg_completion_tables(ga, c, m, n)
    unif = g.random((B, n))
    labels = kernels.gibbs_sample(W, ga, np.arange(B), np.zeros(n, dtype=np.int64), unif,
                                  backend=backend)
    j = labels.max(axis=1) + 1
    shape_g = n - j * ga
    rest = np.asarray(sample_exp_tilted_stable(ga, v, g)).ravel()
    if m == 0:
        t = g.gamma(shape_g) / v + rest
    else:
        pick_gamma = g.random(B) < shape_g / (shape_g + c)
        t = np.where(pick_gamma,
                     g.gamma(shape_g + 1.0) / v + rest,
                     g.gamma(shape_g) / v + rest + g.gamma(1.0 - ga, size=B) / v)
    return labels.reshape(shape + (n,)), t.reshape(shape)
