"""Exchangeable partition probability functions of Gibbs type built on the stable law.

Every evaluator here has the product form ``V[n, k] * prod_j (1 - alpha)_{n_j - 1}``.
The weight table ``V`` is what the sequential sampler consumes; ``Psi`` is the
same table relative to the PD(alpha, 0) weights,
``V[n, k] = Psi[n, k] alpha**(k-1) Gamma(k) / Gamma(n)``.

All weight tables satisfy the backward recursion
``V[n, k] = (n - k alpha) V[n+1, k] + V[n+1, k+1]``, a sum of positive terms, so a
table is filled from its top row without loss of relative accuracy.
"""

import math
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, roots_jacobi

from . import special
from .errors import DomainError, NumericError
from .partitions import Composition, SetPartition, to_composition
from .special import as_index
from .tilts import TiltFunction

MAX_TABLE_N = 160


def _composition(c):
    if isinstance(c, Composition):
        return c
    if isinstance(c, SetPartition):
        return to_composition(c)
    return Composition(tuple(c))


def _log_size_product(alpha, sizes):
    """log prod_j (1 - alpha)_{n_j - 1}."""
    return sum(math.lgamma(m - alpha) for m in sizes) - len(sizes) * math.lgamma(1.0 - alpha)


def _check_theta(alpha, theta):
    if not theta > -alpha:
        raise DomainError(f"theta must exceed -alpha = {-alpha}, got {theta}")


# ---------------------------------------------------------------------------
# two-parameter EPPF and block counts
# ---------------------------------------------------------------------------

def pd_eppf(alpha, theta, c):
    """Two-parameter Poisson-Dirichlet EPPF at the composition ``c``."""
    a = as_index(alpha)
    _check_theta(a, theta)
    c = _composition(c)
    num = 1.0
    for i in range(1, c.k):
        num *= theta + i * a
    return num / special.pochhammer(theta + 1.0, c.n - 1) * math.exp(_log_size_product(a, c.sizes))


@lru_cache(maxsize=128)
def _blocks_table(alpha, n_max):
    P = np.zeros((n_max + 1, n_max + 1))
    P[1, 1] = 1.0
    for n in range(1, n_max):
        k = np.arange(1, n + 2)
        P[n + 1, 1:n + 2] = ((n - k * alpha) * P[n, 1:n + 2] + alpha * (k - 1) * P[n, 0:n + 1]) / n
    P.setflags(write=False)
    return P


def blocks_table(alpha, n_max):
    """Table ``P[n, k]`` of the PD(alpha, 0) block-count law for n <= n_max."""
    return _blocks_table(as_index(alpha), int(n_max))


def blocks_pmf(alpha, n, k):
    """P(K_n = k) under PD(alpha, 0): alpha**(k-1) Gamma(k) S_alpha(n, k) / Gamma(n)."""
    a = as_index(alpha)
    n, k = int(n), int(k)
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got n={n}, k={k}")
    return float(_blocks_table(a, n)[n, k])


def blocks_pmf_half(k, j):
    """Closed form of P(K_k = j) under PD(1/2, 0)."""
    k, j = int(k), int(j)
    if not 1 <= j <= k:
        raise DomainError(f"need 1 <= j <= k, got k={k}, j={j}")
    return math.comb(2 * k - j - 1, k - 1) * 2.0 ** (j + 1 - 2 * k)


# ---------------------------------------------------------------------------
# Psi weights of a tilted stable law
# ---------------------------------------------------------------------------

def _beta_nodes(n, k, alpha, n_jac=64, n_gl=20, ratio=4.0, depth=1e-17):
    """Nodes and weights for E[phi(U)], U ~ Beta(k alpha, n - k alpha).

    The upper half uses Gauss-Jacobi for the (1-u) factor.  The lower half is
    mapped to w = u**(k alpha), which removes the u**(k alpha - 1) factor and
    leaves any u**power behaviour of phi to geometric panels in w.
    """
    ka = k * alpha
    b2 = n - ka
    log_b = math.lgamma(ka) + math.lgamma(b2) - math.lgamma(n)
    x, w = roots_jacobi(n_jac, b2 - 1.0, 0.0)
    u_hi = (3.0 + x) / 4.0
    w_hi = w * 4.0 ** -b2 * u_hi ** (ka - 1.0)
    # stop the panels where the omitted Beta mass is below depth
    log_wmin = math.log(depth) + math.log(ka) + log_b
    n_pan = max(1, math.ceil((ka * math.log(0.5) - log_wmin) / math.log(ratio)))
    edges = 0.5 ** ka * ratio ** -np.arange(n_pan, -1, -1.0)
    xg, wg = special.gauss_legendre(n_gl)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    wn = (mid[:, None] + half[:, None] * xg).ravel()
    u_lo = wn ** (1.0 / ka)
    w_lo = (half[:, None] * wg).ravel() * (1.0 - u_lo) ** (b2 - 1.0) / ka
    return np.concatenate([u_lo, u_hi]), np.concatenate([w_lo, w_hi]) * math.exp(-log_b)


def psi_weight(alpha, h, n, k):
    """Psi_{n,k} = E[h(T) | K_n = k] = E[h(T_{alpha, k alpha} / U)], U ~ Beta(k alpha, n - k alpha).

    Evaluated as a product quadrature: the polynomially tilted stable variable on
    its Mittag-Leffler grid, the Beta variable by :func:`_beta_nodes`.
    """
    a = as_index(alpha)
    n, k = int(n), int(k)
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got n={n}, k={k}")
    if abs(h.alpha - a) > 1e-15:
        raise DomainError("tilt was built for a different index")
    grid = special.ml_grid(a, float(k))
    t = grid.nodes ** (-1.0 / a)
    u, w = _beta_nodes(n, k, a)
    with np.errstate(over="ignore", divide="ignore"):
        lh = h.log_eval(t[:, None] / u[None, :])
    top = float(np.max(lh))
    if not np.isfinite(top):
        raise NumericError("tilt is not finite on the quadrature grid")
    val = float(grid.integrate(np.exp(lh - top) @ w))
    return val * math.exp(top) / special.ml_moment_normalizer(a, k * a)


def psi_weight_by_density(alpha, h, n, k, config=None):
    """Psi_{n,k} as int h(y) f(y | K_n = k) dy with the conditional density of
    :func:`special.tilted_y_pdf`; slower, kept as an independent route."""
    a = as_index(alpha)
    grid = special.ml_grid(a, 0.0)
    y = grid.nodes ** (-1.0 / a)
    f = np.asarray(special.stable_pdf(a, y, config))
    dens = np.asarray(special.tilted_y_pdf(a, n, k, y, config))
    ratio = np.divide(dens, f, out=np.zeros_like(f), where=f > 0)
    return float(grid.integrate(ratio * h(y)))


# ---------------------------------------------------------------------------
# weight tables
# ---------------------------------------------------------------------------

def _fill_down(alpha, top, n_max):
    """Complete a V table from its row n_max by the backward recursion."""
    V = np.zeros((n_max + 1, n_max + 2))
    V[n_max, 1:n_max + 1] = top
    for n in range(n_max - 1, 0, -1):
        k = np.arange(1, n + 1)
        V[n, 1:n + 1] = (n - k * alpha) * V[n + 1, 1:n + 1] + V[n + 1, 2:n + 2]
    V[0, 0] = 1.0
    return V


class GibbsWeights:
    """Gibbs weight table for index ``alpha`` and partitions of up to ``n_max`` items.

    ``V[n, k]`` is stored for 1 <= k <= n <= n_max (zeros elsewhere) and
    ``psi`` gives the same table relative to the PD(alpha, 0) weights.
    ``provenance`` is 'closed-form', 'quadrature' or 'mixture'.
    """

    def __init__(self, alpha, V, provenance, label=""):
        self.alpha = as_index(alpha)
        V = np.array(V, dtype=float)
        if V.ndim != 2 or V.shape[1] != V.shape[0] + 1:
            raise DomainError("V must have shape (n_max + 1, n_max + 2)")
        if provenance not in ("closed-form", "quadrature", "mixture"):
            raise DomainError(f"unknown provenance {provenance!r}")
        V.setflags(write=False)
        self.V = V
        self.n_max = V.shape[0] - 1
        self.provenance = provenance
        self.label = label

    def __repr__(self):
        return (f"GibbsWeights(alpha={self.alpha}, n_max={self.n_max}, "
                f"{self.provenance}{', ' + self.label if self.label else ''})")

    @property
    def psi(self):
        n = np.arange(self.n_max + 1)[:, None]
        k = np.arange(self.n_max + 2)[None, :]
        ok = (k >= 1) & (k <= n)
        with np.errstate(divide="ignore", invalid="ignore"):
            logc = gammaln(np.maximum(n, 1)) - (k - 1) * math.log(self.alpha) - gammaln(np.maximum(k, 1))
            out = np.where(ok, self.V * np.exp(logc), 0.0)
        return out

    def v(self, n, k):
        if not 1 <= k <= n <= self.n_max:
            raise DomainError(f"(n, k) = ({n}, {k}) outside the table (n_max = {self.n_max})")
        return float(self.V[n, k])

    def eppf(self, c):
        c = _composition(c)
        return self.v(c.n, c.k) * math.exp(_log_size_product(self.alpha, c.sizes))

    __call__ = eppf

    def vtable(self, n):
        """Rows 0..n of V for the sequential sampler."""
        if n > self.n_max:
            raise DomainError(f"table holds n <= {self.n_max}, asked for {n}")
        return self.V[:n + 1, :n + 2]

    def block_count_pmf(self, n):
        """P(K_n = k) for k = 0..n under this Gibbs law."""
        P = _blocks_table(self.alpha, max(n, 1))[n, :n + 1]
        return P * self.psi[n, :n + 1]

    # constructors -----------------------------------------------------------

    @classmethod
    def pd(cls, alpha, theta, n_max=64):
        """Two-parameter Poisson-Dirichlet weights (closed form)."""
        a = as_index(alpha)
        _check_theta(a, theta)
        n_max = _check_nmax(n_max)
        V = np.zeros((n_max + 1, n_max + 2))
        V[0, 0] = 1.0
        for n in range(1, n_max + 1):
            den = special.pochhammer(theta + 1.0, n - 1)
            num = 1.0
            for k in range(1, n + 1):
                V[n, k] = num / den
                num *= theta + k * a
        return cls(a, V, "closed-form", f"pd_theta({theta})")

    @classmethod
    def unit(cls, alpha, n_max=64):
        return cls.pd(alpha, 0.0, n_max)

    @classmethod
    def from_tilt(cls, h, n_max=64):
        """Weights of the Poisson-Kingman law with tilt ``h``.

        Power tilts use the closed form; otherwise the top row is computed by
        :func:`psi_weight` and the rest by the backward recursion.
        """
        if not isinstance(h, TiltFunction):
            raise DomainError("from_tilt needs a TiltFunction")
        if h.label == "unit":
            return cls.pd(h.alpha, 0.0, n_max)
        if h.label == "pd_theta":
            return cls.pd(h.alpha, h.params["theta"], n_max)
        n_max = _check_nmax(n_max)
        a = h.alpha
        ks = np.arange(1, n_max + 1)
        psi = np.array([psi_weight(a, h, n_max, k) for k in ks])
        top = psi * np.exp((ks - 1) * math.log(a) + gammaln(ks) - gammaln(n_max))
        return cls(a, _fill_down(a, top, n_max), "quadrature", repr(h))

    @classmethod
    def conditional(cls, beta, y, n_max=64, config=None):
        """Weights of PD(beta | T = y), the stable partition given the total y."""
        b = as_index(beta, "beta")
        n_max = _check_nmax(n_max)
        top = np.array([special.conditional_v(b, n_max, k, y, config) for k in range(1, n_max + 1)])
        return cls(b, _fill_down(b, top, n_max), "quadrature", f"given T={y}")

    @classmethod
    def fragmented(cls, alpha, inner):
        """Weights at index alpha obtained by fragmenting a Gibbs(beta) law.

        V_alpha[n, k] = sum_j alpha**(k-j) S_{beta/alpha}(k, j) V_beta[n, j].
        """
        a = as_index(alpha)
        b = inner.alpha
        if not b < a:
            raise DomainError("the fragmented index must exceed the inner index")
        n_max = inner.n_max
        S = special.stirling_table(b / a, n_max)
        V = np.zeros((n_max + 1, n_max + 2))
        V[0, 0] = 1.0
        k = np.arange(1, n_max + 1)
        powers = np.exp(np.subtract.outer(k, k) * math.log(a))
        M = np.tril(S[1:, 1:] * powers)
        for n in range(1, n_max + 1):
            V[n, 1:n + 1] = M[:n, :n] @ inner.V[n, 1:n + 1]
        prov = "closed-form" if inner.provenance == "closed-form" else "mixture"
        return cls(a, V, prov, f"fragmented from {inner.alpha}: {inner.label}")


def _check_nmax(n_max):
    n_max = int(n_max)
    if not 1 <= n_max <= MAX_TABLE_N:
        raise DomainError(f"n_max must lie in 1..{MAX_TABLE_N}")
    return n_max


# ---------------------------------------------------------------------------
# evaluators
# ---------------------------------------------------------------------------

def gibbs_eppf(w, c):
    return w.eppf(c)


def _tilt_ratio(beta, n, j, y, config=None):
    """f(y | K_n = j) / f_beta(y)."""
    return special.tilted_y_pdf(beta, n, j, y, config) / special.stable_pdf(beta, y, config)


def cond_eppf(beta, y, c, config=None):
    """EPPF of PD(beta | T_beta = y)."""
    b = as_index(beta, "beta")
    c = _composition(c)
    return _tilt_ratio(b, c.n, c.k, y, config) * pd_eppf(b, 0.0, c)


def _ordered(alpha, beta):
    a = as_index(alpha)
    b = as_index(beta, "beta")
    if not b < a:
        raise DomainError(f"need beta < alpha, got alpha={a}, beta={b}")
    return a, b


def frag_cond_eppf(alpha, beta, y, c, config=None):
    """EPPF of the PD(alpha, -beta) fragmentation of a PD(beta | y) partition."""
    a, b = _ordered(alpha, beta)
    c = _composition(c)
    r = b / a
    mix = sum(blocks_pmf(r, c.k, j) * _tilt_ratio(b, c.n, j, y, config)
              for j in range(1, c.k + 1))
    return mix * pd_eppf(a, 0.0, c)


def frag_eppf(alpha, beta, psi_beta, c):
    """EPPF of the PD(alpha, -beta) fragmentation of a Gibbs(beta) partition."""
    a, b = _ordered(alpha, beta)
    if abs(psi_beta.alpha - b) > 1e-15:
        raise DomainError("psi_beta was built at a different index")
    c = _composition(c)
    if c.n > psi_beta.n_max:
        raise DomainError("composition exceeds the weight table")
    psi = psi_beta.psi
    mix = sum(blocks_pmf(b / a, c.k, j) * psi[c.n, j] for j in range(1, c.k + 1))
    return mix * pd_eppf(a, 0.0, c)


def block_moment_identity(alpha, beta, theta, k):
    """Both sides of the PD(beta, theta) instance of the fragmented weight mixture.

    Left: E[Gamma(theta/beta + J) / (Gamma(theta/beta + 1) Gamma(J))] with J the
    PD(beta/alpha, 0) block count of [k]. Right: the same ratio at theta/alpha and k.
    """
    a, b = _ordered(alpha, beta)
    _check_theta(b, theta)
    k = int(k)
    if k < 1:
        raise DomainError(f"k must be positive, got {k}")
    tb, ta = theta / b, theta / a
    lhs = sum(blocks_pmf(b / a, k, j)
              * math.exp(math.lgamma(tb + j) - math.lgamma(tb + 1) - math.lgamma(j))
              for j in range(1, k + 1))
    rhs = math.exp(math.lgamma(ta + k) - math.lgamma(ta + 1) - math.lgamma(k))
    return lhs, rhs


def cond_blocks_pmf(alpha, beta, y, n, k, config=None):
    """P(K_n = k) for the fragmentation of a PD(beta | y) partition."""
    a, b = _ordered(alpha, beta)
    n, k = int(n), int(k)
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got n={n}, k={k}")
    mix = sum(blocks_pmf(b / a, k, j) * _tilt_ratio(b, n, j, y, config) for j in range(1, k + 1))
    return mix * blocks_pmf(a, n, k)


def hermite_eppf(s, c):
    """EPPF of PD(1/2 | T = s**-2 / 2) written with Hermite functions."""
    c = _composition(c)
    n, k = c.n, c.k
    H = special.hermite_fn((2 * n - k - 1) / 2.0, s)
    logc = (k - 1) * math.log(s) if k > 1 else 0.0
    return (math.exp(logc + math.lgamma(n) - math.lgamma(k) + (n - 1) * math.log(2.0)) * H
            * pd_eppf(0.5, 0.0, c))


def mixed_hermite_eppf(alpha, s, c):
    """Fragmentation of PD(1/2 | s**-2 / 2) to index alpha > 1/2, as a Hermite mixture
    with mixing law the PD(1/(2 alpha), 0) block count of [k]."""
    a = as_index(alpha)
    if not a > 0.5:
        raise DomainError("alpha must exceed 1/2")
    c = _composition(c)
    n, k = c.n, c.k
    total = 0.0
    for j in range(1, k + 1):
        H = special.hermite_fn((2 * n - j - 1) / 2.0, s)
        logc = ((j - 1) * math.log(s) if j > 1 else 0.0) + (n - 1) * math.log(2.0) + math.lgamma(n) - math.lgamma(j)
        total += blocks_pmf(0.5 / a, k, j) * math.exp(logc) * H
    return total * pd_eppf(a, 0.0, c)


class Evaluator:
    """Named EPPF evaluator: callable on compositions, with a Gibbs table for sampling."""

    def __init__(self, name, alpha, fn, table=None):
        self.name = name
        self.alpha = alpha
        self._fn = fn
        self._table = table

    def __repr__(self):
        return f"Evaluator({self.name})"

    def __call__(self, c):
        return self._fn(_composition(c))

    def weights(self, n):
        """A GibbsWeights table covering n items, or None when there is none."""
        if self._table is None:
            return None
        return self._table(n)


def pd_evaluator(alpha, theta):
    a = as_index(alpha)
    _check_theta(a, theta)
    return Evaluator(f"pd({a},{theta})", a, lambda c: pd_eppf(a, theta, c),
                     lambda n: GibbsWeights.pd(a, theta, max(n, 1)))


def gibbs_evaluator(w):
    return Evaluator(f"gibbs[{w.label}]", w.alpha, w.eppf, lambda n: w)


def cond_evaluator(beta, y):
    b = as_index(beta, "beta")
    cache = {}

    def table(n):
        n = max(n, 1)
        if n not in cache:
            cache[n] = GibbsWeights.conditional(b, y, n)
        return cache[n]

    return Evaluator(f"cond({b}|{y})", b, lambda c: cond_eppf(b, y, c), table)


def frag_cond_evaluator(alpha, beta, y):
    a, b = _ordered(alpha, beta)
    inner = cond_evaluator(b, y)
    return Evaluator(f"frag_cond({a},{b}|{y})", a, lambda c: frag_cond_eppf(a, b, y, c),
                     lambda n: GibbsWeights.fragmented(a, inner.weights(n)))


def frag_evaluator(alpha, beta, psi_beta):
    a, b = _ordered(alpha, beta)
    return Evaluator(f"frag({a},{b})[{psi_beta.label}]", a,
                     lambda c: frag_eppf(a, b, psi_beta, c),
                     lambda n: GibbsWeights.fragmented(a, psi_beta))


def predictive_weights(eppf, p):
    """Probabilities of joining each block of ``p`` or opening a new one, from EPPF ratios."""
    comp = list(p.sizes)
    base = eppf(Composition(tuple(comp)))
    if not base > 0:
        raise DomainError("EPPF vanishes at the given partition")
    out = []
    for j in range(len(comp) + 1):
        grown = comp[:j] + [comp[j] + 1] + comp[j + 1:] if j < len(comp) else comp + [1]
        out.append(eppf(Composition(tuple(grown))) / base)
    return np.array(out)
