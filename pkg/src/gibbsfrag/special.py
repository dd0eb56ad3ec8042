"""Special functions and densities: positive stable and Mittag-Leffler laws,
generalized Stirling numbers, Mittag-Leffler functions, Hermite functions and the
conditional density of the stable variable given the block count.

Conventions
-----------
``T`` is the positive stable variable with ``E exp(-lam T) = exp(-lam**alpha)``.
``L = T**(-alpha)`` has the Mittag-Leffler density ``g_alpha``.  Most numerics run
on the ``L`` scale because ``g_alpha`` is entire and bounded.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import erf, erfc, gammaln, roots_jacobi

from . import kernels
from .errors import DomainError, NumericError

_SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class StableIndex:
    """A stable index in the open interval (0, 1)."""

    value: float

    def __post_init__(self):
        v = float(self.value)
        if not (0.0 < v < 1.0):
            raise DomainError(f"stable index must lie in (0, 1), got {v}")
        object.__setattr__(self, "value", v)

    def __float__(self):
        return self.value

    def ratio(self, other):
        """The index ``self / other`` (e.g. beta/alpha), itself a StableIndex."""
        return StableIndex(self.value / float(other))


def as_index(x, name="alpha"):
    """Validate a stable index given as float or StableIndex and return a float."""
    v = float(x.value if isinstance(x, StableIndex) else x)
    if not (0.0 < v < 1.0):
        raise DomainError(f"{name} must lie in (0, 1), got {v}")
    return v


@dataclass(frozen=True)
class DensityEvalConfig:
    """Accuracy knobs for the stable / Mittag-Leffler density.

    ``switch_point`` is the crossover on the Mittag-Leffler scale ``s = t**-alpha``:
    the power series is used for ``s <= switch_point`` and the Zolotarev integral
    above it.  ``quad_points`` is the Gauss-Legendre budget for that integral,
    spread over three windows around the peak of its integrand.
    """

    rel_tol: float = 1e-10
    max_terms: int = 400
    quad_points: int = 256
    switch_point: float = 1.0

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise DomainError("rel_tol must be positive")
        if self.max_terms < 1:
            raise DomainError("max_terms must be >= 1")
        if self.quad_points < 16:
            raise DomainError("quad_points must be >= 16")
        if not self.switch_point > 0:
            raise DomainError("switch_point must be positive")


DEFAULT_CONFIG = DensityEvalConfig()


@lru_cache(maxsize=None)
def gauss_legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _scalar_out(like, arr):
    return float(arr) if np.ndim(like) == 0 else arr


# ---------------------------------------------------------------------------
# elementary combinatorial functions
# ---------------------------------------------------------------------------

def pochhammer(x, n):
    """Rising factorial x(x+1)...(x+n-1); the empty product is 1."""
    n = int(n)
    if n < 0:
        raise DomainError("pochhammer needs n >= 0")
    if n == 0:
        return 1.0
    if x > 0:
        return math.exp(math.lgamma(x + n) - math.lgamma(x))
    out = 1.0
    for i in range(n):
        out *= x + i
    return out


@lru_cache(maxsize=64)
def _stirling_table(alpha, n_max):
    S = np.zeros((n_max + 1, n_max + 1))
    S[1, 1] = 1.0
    for n in range(1, n_max):
        k = np.arange(1, n + 2)
        S[n + 1, 1:n + 2] = S[n, 0:n + 1] + (n - k * alpha) * S[n, 1:n + 2]
    S.setflags(write=False)
    return S


def stirling_table(alpha, n_max):
    """Table ``S[n, k]`` of generalized Stirling numbers for n <= n_max."""
    return _stirling_table(as_index(alpha), int(n_max))


def gen_stirling(alpha, n, k):
    """Generalized Stirling number S_alpha(n, k) via the triangular recurrence."""
    a = as_index(alpha)
    n, k = int(n), int(k)
    if not (1 <= k <= n):
        raise DomainError(f"need 1 <= k <= n, got n={n}, k={k}")
    return float(_stirling_table(a, n)[n, k])


def gen_stirling_exact(alpha, n, k):
    """S_alpha(n, k) from the explicit alternating sum, in exact rational arithmetic.

    ``alpha`` is converted exactly from its binary value, so this is an
    independent cross-check of :func:`gen_stirling`.
    """
    as_index(alpha)
    n, k = int(n), int(k)
    if not (1 <= k <= n):
        raise DomainError(f"need 1 <= k <= n, got n={n}, k={k}")
    a = Fraction(float(alpha.value if isinstance(alpha, StableIndex) else alpha))
    total = Fraction(0)
    for j in range(1, k + 1):
        rising = Fraction(1)
        for i in range(n):
            rising *= -j * a + i
        total += (-1) ** j * math.comb(k, j) * rising
    return float(total / (a ** k * math.factorial(k)))


# ---------------------------------------------------------------------------
# Mittag-Leffler density and distribution function
# ---------------------------------------------------------------------------

def _check_positive(x, name):
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f"{name} must be positive")
    return arr


def _ml_series(alpha, s, cfg, cumulative):
    """Power series of g_alpha (or its integral from 0) on the L scale.

    Uses 1/Gamma(1 - a(k+1)) = Gamma(a(k+1)) sin(pi a(k+1)) / pi so the terms
    never overflow.
    """
    s = np.atleast_1d(s).astype(float)
    logs = np.log(s)
    total = np.zeros_like(s)
    chunk = 32
    k0 = 0
    while k0 < cfg.max_terms:
        k = np.arange(k0, min(k0 + chunk, cfg.max_terms), dtype=float)
        z = alpha * (k + 1)
        sn = np.sin(np.pi * z)
        if cumulative:
            logmag = (k + 1)[None, :] * logs[:, None] - gammaln(k + 2)[None, :]
        else:
            logmag = k[None, :] * logs[:, None] - gammaln(k + 1)[None, :]
        logmag = logmag + (gammaln(z) + np.log(np.abs(sn) + 1e-300))[None, :]
        sign = np.where(k % 2 == 0, 1.0, -1.0) * np.sign(sn)
        terms = sign[None, :] * np.exp(logmag) / np.pi
        total = total + terms.sum(axis=1)
        k0 += chunk
        tail = np.abs(terms[:, -4:]).max(axis=1)
        if k0 >= 2 * chunk and np.all(tail <= cfg.rel_tol * np.abs(total)):
            return total
    raise NumericError("Mittag-Leffler series did not converge within max_terms",
                       partial=total)


def _zolo_nodes(cfg):
    return gauss_legendre(max(8, cfg.quad_points // 4))


def ml_pdf(alpha, s, config=None):
    """Mittag-Leffler density g_alpha(s), the law of L = T_alpha**(-alpha)."""
    a = as_index(alpha)
    cfg = config or DEFAULT_CONFIG
    s_arr = _check_positive(s, "s")
    flat = np.atleast_1d(s_arr).ravel()
    if a == 0.5:
        out = np.exp(-flat ** 2 / 4.0) / _SQRT_PI
    else:
        out = np.empty_like(flat)
        small = flat <= cfg.switch_point
        if small.any():
            out[small] = _ml_series(a, flat[small], cfg, cumulative=False)
        if (~small).any():
            x, w = _zolo_nodes(cfg)
            out[~small] = kernels.ml_pdf_zolo(a, flat[~small], x, w)
        out = np.maximum(out, 0.0)
    return _scalar_out(s, out.reshape(s_arr.shape))


def _ml_split(alpha, s, cfg):
    """(cdf, sf) of L at s, each computed from the representation accurate for it."""
    flat = np.atleast_1d(np.asarray(s, dtype=float)).ravel()
    if alpha == 0.5:
        return erf(flat / 2.0), erfc(flat / 2.0)
    cdf = np.empty_like(flat)
    sf = np.empty_like(flat)
    small = flat <= cfg.switch_point
    if small.any():
        c = _ml_series(alpha, flat[small], cfg, cumulative=True)
        cdf[small] = c
        sf[small] = 1.0 - c
    if (~small).any():
        x, w = _zolo_nodes(cfg)
        t = kernels.ml_sf_zolo(alpha, flat[~small], x, w)
        sf[~small] = t
        cdf[~small] = 1.0 - t
    return np.clip(cdf, 0.0, 1.0), np.clip(sf, 0.0, 1.0)


def ml_cdf(alpha, s, config=None):
    """P(L <= s) for L ~ ML(alpha, 0)."""
    a = as_index(alpha)
    s_arr = _check_positive(s, "s")
    cdf, _ = _ml_split(a, s_arr, config or DEFAULT_CONFIG)
    return _scalar_out(s, cdf.reshape(s_arr.shape))


def ml_sf(alpha, s, config=None):
    """P(L > s) for L ~ ML(alpha, 0)."""
    a = as_index(alpha)
    s_arr = _check_positive(s, "s")
    _, sf = _ml_split(a, s_arr, config or DEFAULT_CONFIG)
    return _scalar_out(s, sf.reshape(s_arr.shape))


def stable_pdf(alpha, t, config=None):
    """Density f_alpha(t) of the positive alpha-stable variable."""
    a = as_index(alpha)
    t_arr = _check_positive(t, "t")
    if a == 0.5:
        out = np.exp(-1.0 / (4.0 * t_arr)) / (2.0 * _SQRT_PI) * t_arr ** -1.5
    else:
        s = t_arr ** -a
        with np.errstate(over="ignore", invalid="ignore"):
            out = a * np.asarray(ml_pdf(a, s, config)) * s ** (1.0 / a + 1.0)
        out = np.where(np.isfinite(out), out, 0.0)
    return _scalar_out(t, out)


def stable_cdf(alpha, t, config=None):
    """P(T_alpha <= t)."""
    a = as_index(alpha)
    t_arr = _check_positive(t, "t")
    return ml_sf(a, t_arr ** -a, config) if np.ndim(t) else float(ml_sf(a, float(t) ** -a, config))


def stable_sf(alpha, t, config=None):
    """P(T_alpha > t)."""
    a = as_index(alpha)
    t_arr = _check_positive(t, "t")
    return ml_cdf(a, t_arr ** -a, config) if np.ndim(t) else float(ml_cdf(a, float(t) ** -a, config))


def ml_moment_normalizer(alpha, theta):
    """E[T_alpha**(-theta)] = Gamma(theta/alpha + 1) / Gamma(theta + 1)."""
    a = as_index(alpha)
    if not theta > -a:
        raise DomainError(f"theta must exceed -alpha, got {theta}")
    return math.exp(math.lgamma(theta / a + 1.0) - math.lgamma(theta + 1.0))


def gml_pdf(alpha, theta, s, config=None):
    """Generalized Mittag-Leffler density g_{alpha,theta}(s) = s**(theta/alpha) g_alpha(s) / M."""
    a = as_index(alpha)
    m = ml_moment_normalizer(a, theta)
    s_arr = _check_positive(s, "s")
    out = s_arr ** (theta / a) * np.asarray(ml_pdf(a, s_arr, config)) / m
    return _scalar_out(s, out)


# ---------------------------------------------------------------------------
# quadrature against g_alpha
# ---------------------------------------------------------------------------

class MLGrid:
    """Fixed nodes and weights for integrals of the form int phi(s) s**p g_alpha(s) ds.

    Composite Gauss-Legendre: geometric panels towards 0 (where s**p may be
    singular) and uniform panels out to where the weight is below e**-75 of its peak.
    """

    def __init__(self, alpha, p=0.0, nodes_per_panel=16, n_uniform=160):
        self.alpha = as_index(alpha)
        self.p = float(p)
        if not self.p > -1.0:
            raise DomainError("weight exponent must exceed -1")
        probe = np.geomspace(0.25, 1e6, 400)
        with np.errstate(divide="ignore"):
            logw = self.p * np.log(probe) + np.log(ml_pdf(self.alpha, probe))
        peak = int(np.argmax(logw))
        beyond = np.nonzero(logw[peak:] < logw[peak] - 75.0)[0]
        if beyond.size == 0:
            raise NumericError("could not bracket the Mittag-Leffler weight")
        s_max = probe[peak + beyond[0]]
        low = [0.0] + list(0.25 * 4.0 ** -np.arange(20, 0, -1))
        edges = np.concatenate([low, np.linspace(0.25, s_max, n_uniform + 1)])
        x, w = gauss_legendre(nodes_per_panel)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        qw = (half[:, None] * w[None, :]).ravel()
        self.s_max = float(s_max)
        self.edges = edges
        self.nodes_per_panel = nodes_per_panel
        self.nodes = nodes
        self.weights = qw * nodes ** self.p * ml_pdf(self.alpha, nodes)
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    def integrate(self, values):
        """Sum of weights times ``values`` (last axis indexes the nodes)."""
        return np.asarray(values) @ self.weights


@lru_cache(maxsize=256)
def ml_grid(alpha, p=0.0):
    """Cached :class:`MLGrid` for (alpha, p)."""
    return MLGrid(alpha, p)


def ml_expect(alpha, fn, theta=0.0):
    """E[fn(L)] for L ~ ML(alpha, theta), by quadrature."""
    a = as_index(alpha)
    grid = ml_grid(a, round(theta / a, 12))
    return float(grid.integrate(fn(grid.nodes))) / ml_moment_normalizer(a, theta)


def stable_expect(alpha, fn, theta=0.0):
    """E[fn(T)] for T with density t**-theta f_alpha(t) / E[T**-theta]."""
    a = as_index(alpha)
    return ml_expect(a, lambda s: fn(s ** (-1.0 / a)), theta)


# ---------------------------------------------------------------------------
# Mittag-Leffler functions
# ---------------------------------------------------------------------------

def _alternating_series(log_mag, n_terms, rel_tol=1e-15):
    """Sum of (-1)**l exp(log_mag(l)) for l < n_terms; also returns the largest term."""
    ell = np.arange(n_terms, dtype=float)
    lm = log_mag(ell)
    top = lm.max()
    terms = np.where(ell % 2 == 0, 1.0, -1.0) * np.exp(lm)
    return terms.sum(), math.exp(top)


def _series_or_quad(series_fn, quad_fn, lam, threshold):
    lam = float(lam)
    if lam < 0:
        raise DomainError("lam must be nonnegative")
    if lam == 0.0:
        return 1.0
    if lam < threshold:
        value, biggest = series_fn(lam)
        # the alternating series loses log10(biggest) digits; fall back when too many
        if biggest < 1e3:
            return float(value)
    return float(quad_fn(lam))


def ml_function(beta, lam, threshold=5.0):
    """E_{beta,1}(-lam) = E[exp(-lam L)] for L ~ ML(beta, 0)."""
    b = as_index(beta, "beta")

    def series(x):
        n = 60 + int(40 * x / b)
        return _alternating_series(lambda l: l * math.log(x) - gammaln(b * l + 1.0), n)

    def quad(x):
        return ml_expect(b, lambda s: np.exp(-x * s))

    if np.ndim(lam):
        return np.array([_series_or_quad(series, quad, v, threshold) for v in np.ravel(lam)]
                        ).reshape(np.shape(lam))
    return _series_or_quad(series, quad, lam, threshold)


def gml_function(beta, theta, j, lam, threshold=5.0):
    """E^{(th/beta+1)}_{beta,th+1}(-lam) with th = theta + j*beta; equals E[exp(-lam L)]
    for L ~ ML(beta, th)."""
    b = as_index(beta, "beta")
    j = int(j)
    if j < 0:
        raise DomainError("j must be nonnegative")
    th = theta + j * b
    if not th > -b:
        raise DomainError("theta + j*beta must exceed -beta")
    c = gammaln(th + 1.0) - gammaln(th / b + 1.0)

    def series(x):
        n = 80 + int(40 * x / b)
        return _alternating_series(
            lambda l: (l * math.log(x) - gammaln(l + 1.0) + gammaln(th / b + 1.0 + l)
                       - gammaln(b * l + th + 1.0) + c), n)

    def quad(x):
        return ml_expect(b, lambda s: np.exp(-x * s), theta=th)

    if np.ndim(lam):
        return np.array([_series_or_quad(series, quad, v, threshold) for v in np.ravel(lam)]
                        ).reshape(np.shape(lam))
    return _series_or_quad(series, quad, lam, threshold)


# ---------------------------------------------------------------------------
# Hermite functions
# ---------------------------------------------------------------------------

def _hermite_integral(q, s):
    # 2**-q U(q, 1/2, z), U(a, b, z) = Gamma(a)**-1 int e^{-zt} t^{a-1} (1+t)^{b-a-1} dt
    z = 0.5 * s * s
    val, err = integrate.quad(lambda t: math.exp(-z * t) * t ** (q - 1.0) * (1.0 + t) ** (-0.5 - q),
                              0.0, np.inf, epsabs=0.0, epsrel=1e-12, limit=200)
    if not abs(err) <= 1e-9 * abs(val):
        raise NumericError("Hermite integral did not converge", partial=val)
    return 2.0 ** -q * val / math.gamma(q)


def hermite_fn(q, s):
    """Hermite function of index -2q, H(s) = 2**-q U(q, 1/2, s**2/2)."""
    q = float(q)
    s = float(s)
    if q < 0:
        raise DomainError("q must be nonnegative")
    if s < 0:
        raise DomainError("s must be nonnegative")
    if q == 0.0:
        return 1.0
    if s > 3.0:
        return _hermite_integral(q, s)
    base = math.log(2.0) * (q - 1.0) - math.lgamma(2.0 * q) + math.lgamma(q)
    if s == 0.0:
        return math.exp(base)
    n = 120
    ell = np.arange(n, dtype=float)
    lm = (ell * math.log(s) - gammaln(ell + 1.0) + gammaln(q + ell / 2.0)
          + (q - 1.0 + ell / 2.0) * math.log(2.0) - math.lgamma(2.0 * q))
    terms = np.where(ell % 2 == 0, 1.0, -1.0) * np.exp(lm)
    if abs(terms[-1]) > 1e-17 * abs(terms.sum()):
        raise NumericError("Hermite series did not converge", partial=float(terms.sum()))
    return float(terms.sum())


# ---------------------------------------------------------------------------
# conditional law of T given the block count
# ---------------------------------------------------------------------------

def _tilted_integral(b, a, y, n_jac, n_gl, cfg):
    """I(y) = int_0^y f_b(v) (1 - v/y)**(a-1) dv, split at v = y/2."""
    # upper half: Gauss-Jacobi in x = 1 - v/y absorbs the x**(a-1) endpoint singularity
    t, wj = roots_jacobi(n_jac, 0.0, a - 1.0)
    x = (1.0 + t) / 4.0
    f_up = np.asarray(stable_pdf(b, y[:, None] * (1.0 - x[None, :]), cfg))
    upper = y * 4.0 ** -a * (f_up @ wj)
    # lower half on the Mittag-Leffler scale, where f_b(v) dv = g_b(s) ds: the cached
    # grid covers whole panels above s_lo, one fresh panel covers [s_lo, next edge]
    s_lo = (0.5 * y) ** -b
    grid = ml_grid(b, 0.0)
    lower = np.zeros_like(y)
    live = np.nonzero(s_lo < grid.s_max)[0]
    if live.size:
        edges = grid.edges
        nxt = np.searchsorted(edges, s_lo[live], side="right")
        right = edges[nxt]
        xg, wg = gauss_legendre(n_gl)
        half = 0.5 * (right - s_lo[live])
        s = 0.5 * (right + s_lo[live])[:, None] + half[:, None] * xg[None, :]
        ratio = s ** (-1.0 / b) / y[live, None]
        part = (half[:, None] * wg[None, :] * np.asarray(ml_pdf(b, s, cfg))
                * (1.0 - ratio) ** (a - 1.0)).sum(axis=1)
        first = nxt * grid.nodes_per_panel
        for lo in range(0, live.size, 256):
            sl = slice(lo, lo + 256)
            yy = y[live[sl]]
            r = grid.nodes[None, :] ** (-1.0 / b) / yy[:, None]
            keep = np.arange(grid.nodes.size)[None, :] >= first[sl, None]
            with np.errstate(invalid="ignore", divide="ignore"):
                phi = np.where(keep, np.clip(1.0 - r, 0.0, None) ** (a - 1.0), 0.0)
            part[sl] += phi @ grid.weights
        lower[live] = part
    return upper + lower


def _tilted_core(beta, n, k, y, config):
    b = as_index(beta, "beta")
    n, k = int(n), int(k)
    if not (1 <= k <= n):
        raise DomainError(f"need 1 <= k <= n, got n={n}, k={k}")
    cfg = config or DEFAULT_CONFIG
    y_arr = np.atleast_1d(_check_positive(y, "y")).astype(float).ravel()
    a = n - k * b
    coarse = _tilted_integral(b, a, y_arr, 48, 16, cfg)
    fine = _tilted_integral(b, a, y_arr, 96, 24, cfg)
    scale = np.maximum(np.abs(fine), 1e-300)
    if np.any(np.abs(fine - coarse) > 1e-8 * scale + 1e-300):
        raise NumericError("tilted density quadrature did not settle", partial=fine)
    return b, n, k, a, y_arr, fine


def tilted_y_pdf(beta, n, k, y, config=None):
    """Density of T_beta given K_n = k blocks under PD(beta, 0).

    This is the law of T_{beta,k beta} / B(k beta, n - k beta).
    """
    b, n, k, a, y_arr, I = _tilted_core(beta, n, k, y, config)
    logc = math.log(b) + math.lgamma(n) - math.lgamma(k) - math.lgamma(a)
    out = np.exp(logc - (k * b + 1.0) * np.log(y_arr)) * I
    return _scalar_out(y, out.reshape(np.shape(y)) if np.ndim(y) else out[0])


def conditional_v(beta, n, k, y, config=None):
    """Gibbs weight V_{n,k}(y) of the PD(beta | y) partition of [n].

    Equals ``tilted_y_pdf / stable_pdf * beta**(k-1) Gamma(k) / Gamma(n)``.
    """
    b, n, k, a, y_arr, I = _tilted_core(beta, n, k, y, config)
    f = np.asarray(stable_pdf(b, y_arr, config))
    out = np.exp(k * math.log(b) - math.lgamma(a) - (k * b + 1.0) * np.log(y_arr)) * I / f
    return _scalar_out(y, out.reshape(np.shape(y)) if np.ndim(y) else out[0])
