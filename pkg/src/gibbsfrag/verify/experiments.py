"""Seeded experiments checking the fragmentation/coagulation identities.

Each experiment is a function ``(rng, **params) -> ExperimentReport``; defaults
are the desk-scale sizes.  :func:`run_suite` derives one stream per experiment
from the suite seed and the experiment name, so results do not depend on which
other experiments run.
"""

import math
import zlib

import numpy as np
from scipy.special import betaln

from .. import eppf, fragcoag, samplers, special, tilts
from ..eppf import GibbsWeights
from ..errors import DomainError
from ..partitions import SetPartition, canonical_labels, partition_index, rgs_table
from .stats import (ExperimentReport, QuadratureCDF, Timer, chi_square_vs_eppf, combine,
                    category_codes, error_report, homogeneity_test, independence_test,
                    ks_two_sample, ks_vs_cdf, mean_z_test, pooled_chisquare)


def _gen(rng):
    return samplers._stream(rng)


def _ml_mean(alpha, theta):
    """E[Z] for Z ~ ML(alpha, theta)."""
    return (theta / alpha + 1.0) * math.exp(math.lgamma(theta + 1.0) - math.lgamma(theta + alpha + 1.0))


# ---------------------------------------------------------------------------
# partition-level duality
# ---------------------------------------------------------------------------

def duality_pd(rng, alpha=0.6, beta=0.3, theta=0.3, n=5, samples=100_000):
    """FRAG of PD(beta, theta) against PD(alpha, theta), and COAG back to PD(beta, theta)."""
    g = _gen(rng)
    fp = fragcoag.FragParams(alpha, beta)
    base = samplers.sample_partitions(GibbsWeights.pd(beta, theta, n), n, samples, g)
    out = fragcoag.frag_labels(base, fp, g)
    frag = chi_square_vs_eppf(out, GibbsWeights.pd(alpha, theta, n), n, name="frag")
    fine = samplers.sample_partitions(GibbsWeights.pd(alpha, theta, n), n, samples, g)
    q = samplers.sample_partitions(GibbsWeights.pd(beta / alpha, theta / alpha, n), n, samples, g)
    coag = chi_square_vs_eppf(fragcoag.coag_labels(fine, q), GibbsWeights.pd(beta, theta, n), n,
                              name="coag")
    return combine("duality-pd", [frag, coag])


def frag_composition(rng, beta=0.2, sigma=0.4, alpha=0.8, theta=0.0, n=4, samples=100_000):
    """Two fragmentations (beta -> sigma -> alpha) against one (beta -> alpha)."""
    g = _gen(rng)
    w = GibbsWeights.pd(beta, theta, n)
    two = fragcoag.frag_labels(samplers.sample_partitions(w, n, samples, g),
                               fragcoag.FragParams(sigma, beta), g)
    two = fragcoag.frag_labels(two, fragcoag.FragParams(alpha, sigma), g)
    one = fragcoag.frag_labels(samplers.sample_partitions(w, n, samples, g),
                               fragcoag.FragParams(alpha, beta), g)
    return combine("frag-composition", [homogeneity_test(one, two, name="two-vs-one")])


def _prefix_margin_test(q, k, w_inner, k_pmf, name):
    """Chi-square for prefix partitions q of [k] against P(k) times the inner EPPF."""
    n = q.shape[1]
    keys, probs = [], []
    for kk in range(1, n + 1):
        for row in rgs_table(kk):
            keys.append(tuple(int(x) for x in row))
            probs.append(k_pmf[kk] * w_inner.eppf(SetPartition.from_labels(row.tolist()).sizes))
    pos = {key: i for i, key in enumerate(keys)}
    obs = np.bincount([pos[tuple(int(x) for x in row[:kk])] for row, kk in zip(q, k)],
                      minlength=len(keys))
    stat, p, cells = pooled_chisquare(obs, np.array(probs))
    return ExperimentReport(name, stat, p_value=p, n_samples=len(q), passed=p > 0.01,
                            details={"cells": cells})


def _independence_given_k(vt, q, k, min_count=1000):
    """Contingency tests of v_tilde against q within each block count k.

    q partitions [k], so it can only be independent of v_tilde given k; k = 1
    and k = n leave one side constant and are skipped.
    """
    n = vt.shape[1]
    out = []
    for kk in range(2, n):
        sel = k == kk
        if sel.sum() >= min_count:
            out.append(independence_test(partition_index(vt[sel]), category_codes(q[sel, :kk]),
                                          name=f"independence-k{kk}"))
    return out


def dependent_coag(rng, alpha=0.8, beta=0.4, zeta=1.0, n=4, samples=100_000):
    """Tilted joint law: v against the generalized gamma Gibbs law at beta; untilted
    margins of (v_tilde, q) and their independence."""
    g = _gen(rng)
    h = tilts.gg_zeta(beta, zeta, 0)
    _, _, v = fragcoag.dependent_coag_labels(alpha, beta, h, n, g, samples)
    gg = chi_square_vs_eppf(v, GibbsWeights.from_tilt(h, max(n, 8)), n, name="v-gg")
    vt, q, _ = fragcoag.dependent_coag_labels(alpha, beta, tilts.unit(beta), n, g, samples)
    m_vt = chi_square_vs_eppf(vt, GibbsWeights.pd(alpha, 0.0, n), n, name="v_tilde-margin")
    k = vt.max(axis=1) + 1
    k_pmf = np.concatenate([[0.0], eppf.blocks_table(alpha, n)[n, 1:n + 1]])
    m_q = _prefix_margin_test(q, k, GibbsWeights.pd(beta / alpha, 0.0, n), k_pmf, "q-margin")
    return combine("dependent-coag", [gg, m_vt, m_q] + _independence_given_k(vt, q, k))


def gg_dual(rng, alpha=0.6, beta=0.3, theta=0.6, m=0, n=4, samples=100_000, zeta=None):
    """Gamma-randomized generalized gamma pair against PD(alpha, theta) x PD(beta/alpha, theta/alpha).

    With ``zeta`` given (and theta None) the fixed-zeta v-margin is checked instead.
    """
    g = _gen(rng)
    if theta is None:
        d = fragcoag.gg_dual_demo(beta, alpha, zeta, m, n, g, samples)
        h = tilts.gg_zeta(beta, zeta, m)
        return combine("gg-dual", [chi_square_vs_eppf(d["v"], GibbsWeights.from_tilt(h, max(n, 8)),
                                                      n, name="v-gg")])
    d = fragcoag.gg_dual_demo(beta, alpha, None, m, n, g, samples, theta=theta)
    vt, q = d["v_tilde"], d["q"]
    k = vt.max(axis=1) + 1
    m_vt = chi_square_vs_eppf(vt, GibbsWeights.pd(alpha, theta, n), n, name="v_tilde-margin")
    wa = GibbsWeights.pd(alpha, theta, n)
    k_pmf = np.concatenate([[0.0], wa.block_count_pmf(n)[1:n + 1]])
    m_q = _prefix_margin_test(q, k, GibbsWeights.pd(beta / alpha, theta / alpha, n), k_pmf,
                              "q-margin")
    v = chi_square_vs_eppf(d["v"], GibbsWeights.pd(beta, theta, n), n, name="v-margin")
    return combine("gg-dual", [m_vt, m_q, v] + _independence_given_k(vt, q, k))


# ---------------------------------------------------------------------------
# diversities
# ---------------------------------------------------------------------------

def _tilt_from_name(beta, name):
    if name in ("unit", "1"):
        return tilts.unit(beta)
    return tilts.from_spec(beta, name)


def diversity_density(alpha, beta, h):
    """s -> E_{beta/alpha}[h(s**(-1/alpha) T**(1/alpha))] g_alpha(s), vectorized."""
    grid = special.ml_grid(beta / alpha)
    scale = grid.nodes ** (-1.0 / beta)
    wts = grid.weights

    def pdf(s):
        s = np.asarray(s, dtype=float)
        flat = s.ravel()
        hs = np.empty(flat.size)
        for i in range(0, flat.size, 512):
            ss = flat[i:i + 512]
            arg = ss[:, None] ** (-1.0 / alpha) * scale[None, :]
            hs[i:i + 512] = np.exp(h.log_eval(arg)) @ wts
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.where(flat > 0, special.ml_pdf(alpha, np.maximum(flat, 1e-300)), 0.0)
        return (hs * g).reshape(s.shape)

    return pdf


def diversity_route_a(alpha, beta, h, samples, g, count=2000):
    """sum_k P_k**alpha Z_k over PK_beta(h) masses with iid Z ~ ML(alpha, -beta).

    The jumps below the last kept one add their conditional mean contribution.
    """
    w, _, t = samplers.sample_pk_tilted(beta, h, count, g, size=samples)
    out = np.empty(samples)
    for i in range(0, samples, 500):
        ww = w[i:i + 500]
        z = samplers.sample_ml(alpha, -beta, g, size=ww.shape)
        out[i:i + 500] = (ww ** alpha * z).sum(axis=1)
    # Poisson jumps below eps = last jump: mean of sum x**alpha is
    # beta eps**(alpha-beta) / ((alpha-beta) Gamma(1-beta))
    eps = w[:, -1] * t
    tail = beta * eps ** (alpha - beta) / ((alpha - beta) * math.gamma(1.0 - beta))
    return out + tail * t ** -alpha * _ml_mean(alpha, -beta)


def diversity_rep(rng, alpha=0.8, beta=0.4, tilt="unit", samples=10_000, count=2000):
    """Sum representation of the alpha-diversity against its quadrature CDF."""
    g = _gen(rng)
    h = _tilt_from_name(beta, tilt)
    x = diversity_route_a(alpha, beta, h, samples, g, count)
    cdf = QuadratureCDF(diversity_density(alpha, beta, h), special.ml_grid(alpha).edges)
    ks = ks_vs_cdf(x, cdf, name=f"ks-{tilt}")
    mass = error_report("density-mass", abs(cdf.total - 1.0), 1e-6)
    return combine("diversity-rep", [ks, mass])


def _fixed_point_rhs(alpha, beta, ell, variant, n_sticks, samples, g):
    theta = ell * alpha - beta if variant == "alpha-scale" else ell - beta
    sticks, rest = samplers.gem_sticks(beta, theta, n_sticks, g, size=samples)
    i = np.arange(1, ell + 1)
    if variant == "alpha-scale":
        a_i, b_i = i * alpha - beta, np.full(ell, 1.0 - alpha)
        fac = g.beta(a_i, b_i, size=(samples, n_sticks, ell)) ** alpha
        fac_mean = np.exp(betaln(a_i + alpha, b_i) - betaln(a_i, b_i)).prod()
    else:
        # iterating Z_{a,t} = Z_{a,t+1} Beta((t+a)/a, (1-a)/a) from t = -beta
        a_i, b_i = (alpha - beta + i - 1) / alpha, np.full(ell, (1.0 - alpha) / alpha)
        fac = g.beta(a_i, b_i, size=(samples, n_sticks, ell))
        fac_mean = (a_i / (a_i + b_i)).prod()
    coef = sticks ** alpha * fac.prod(axis=-1)
    # leftover sticks are rest * GEM(beta, theta + N beta); E sum P**alpha = E[P_1**(alpha-1)]
    th2 = theta + n_sticks * beta
    tail_sum = math.exp(betaln(alpha - beta, th2 + beta) - betaln(1.0 - beta, th2 + beta))
    tail = rest ** alpha * tail_sum * fac_mean
    z = np.empty(samples)
    for j in range(0, samples, 500):
        zz = samplers.sample_ml(alpha, theta, g, size=coef[j:j + 500].shape)
        z[j:j + 500] = (coef[j:j + 500] * zz).sum(axis=1)
    return theta, coef.sum(axis=1) + tail, z + tail * _ml_mean(alpha, theta), rest


def fixed_point(rng, alpha=0.6, beta=0.3, ell=1, variant="alpha-scale", n_sticks=2000,
                samples=10_000):
    """Stick-sum fixed point for ML(alpha, ell*alpha - beta) or ML(alpha, ell - beta)."""
    if variant not in ("alpha-scale", "unit-scale"):
        raise DomainError("variant must be alpha-scale or unit-scale")
    if not 0.0 <= beta < alpha < 1.0:
        raise DomainError("need 0 <= beta < alpha < 1")
    g = _gen(rng)
    theta, coef, rhs, rest = _fixed_point_rhs(alpha, beta, int(ell), variant, n_sticks, samples, g)
    lhs = samplers.sample_ml(alpha, theta, g, size=samples)
    moment = mean_z_test(coef, 1.0, name="moment")
    ks = ks_two_sample(lhs, rhs, name="ks")
    rep = combine("fixed-point", [moment, ks])
    rep.details["max_stick_tail"] = float(rest.max())
    rep.details["truncation_warning"] = bool(np.mean(rest) > 1e-4)
    return rep


# ---------------------------------------------------------------------------
# Hermite and Brownian checks
# ---------------------------------------------------------------------------

def _compositions(n, k):
    def rec(n, k, top):
        if k == 0:
            if n == 0:
                yield ()
            return
        for first in range(min(n - k + 1, top), 0, -1):
            for rest in rec(n - first, k - 1, first):
                yield (first,) + rest
    return list(rec(n, k, n))


def hermite(rng=None, pairs=((2, 1), (3, 2), (4, 2)), s_grid=(0.5, 1.0, 2.0), alpha=0.8,
            tol=1e-6):
    """Hermite closed forms against the quadrature evaluators."""
    e1 = e2 = e3 = 0.0
    for s in s_grid:
        y = 0.5 / (s * s)
        for n, k in pairs:
            for c in _compositions(n, k):
                e1 = max(e1, abs(eppf.cond_eppf(0.5, y, c) - eppf.hermite_eppf(s, c)))
                e3 = max(e3, abs(eppf.frag_cond_eppf(alpha, 0.5, y, c)
                                 - eppf.mixed_hermite_eppf(alpha, s, c)))
            closed = 2.0 ** (n - k) * s ** (k - 1) * special.hermite_fn((2 * n - k - 1) / 2.0, s)
            e2 = max(e2, abs(_g_half(n, k, y) - closed))
    return combine("hermite", [error_report("eppf", e1, tol), error_report("g-function", e2, tol),
                               error_report("mixed-eppf", e3, tol)])


def _g_half(n, k, y):
    """G^{(n,k)} at index 1/2: the tilted-to-stable density ratio times 2**(1-k) Gamma(k)/Gamma(n)."""
    ratio = special.tilted_y_pdf(0.5, n, k, y) / special.stable_pdf(0.5, y)
    return ratio * 0.5 ** (k - 1) * math.exp(math.lgamma(k) - math.lgamma(n))


def brownian_masses(s, n_terms, g, size=None):
    """First ``n_terms`` size-biased masses s^2/(s^2+S_{j-1}) - s^2/(s^2+S_j) and partial sums S_j."""
    shape = () if size is None else (int(size),)
    S = np.cumsum(g.chisquare(1, size=shape + (n_terms,)), axis=-1)
    frac = s * s / (s * s + S)
    prev = np.concatenate([np.ones(shape + (1,)), frac[..., :-1]], axis=-1)
    return prev - frac, S


def brownian_partitions(s, n, samples, g, max_steps=10_000):
    """Partitions of [n] painted from the Brownian size-biased masses.

    A point with uniform u falls in stick j, the first j with S_j >= s^2 u/(1-u);
    points beyond ``max_steps`` sticks become singletons.
    """
    u = g.random((samples, n))
    tau = s * s * u / (1.0 - u)
    idx = np.full((samples, n), -1, dtype=np.int64)
    S = np.zeros(samples)
    active = np.arange(samples)
    tmax = tau.max(axis=1)
    for j in range(1, max_steps + 1):
        S[active] += g.chisquare(1, size=active.size)
        hit = (idx[active] < 0) & (S[active, None] >= tau[active])
        sub = idx[active]
        sub[hit] = j
        idx[active] = sub
        active = active[S[active] < tmax[active]]
        if active.size == 0:
            break
    lost = idx < 0
    idx[lost] = max_steps + 1 + np.nonzero(lost)[1]
    return canonical_labels(idx)


def brownian_sizebias(rng, s=1.0, n=4, samples=100_000, n_terms=10_000):
    """Brownian size-biased masses: telescoping sum and the PD(1/2 | s^-2/2) partition law."""
    g = _gen(rng)
    p, S = brownian_masses(s, n_terms, g, size=200)
    tele = np.abs(p.sum(axis=1) - (1.0 - s * s / (s * s + S[:, -1]))).max()
    tail = float(np.median(s * s / (s * s + S[:, -1])))
    labels = brownian_partitions(s, n, samples, g, n_terms)
    chi = chi_square_vs_eppf(labels, eppf.cond_evaluator(0.5, 0.5 / (s * s)), n, name="partition")
    rep = combine("brownian-sizebias", [error_report("telescoping", tele, 1e-12), chi,
                                        error_report("median-tail", tail, 1e-3)])
    return rep


# ---------------------------------------------------------------------------
# quadrature identities
# ---------------------------------------------------------------------------

def disintegration(rng=None, alpha=0.8, beta=0.4, comps=((2, 1), (3, 1), (2, 2)), tol=1e-5):
    """Mixing the conditional fragmentation EPPF over T_beta recovers PD(alpha, 0)."""
    grid = special.ml_grid(beta)
    y = grid.nodes ** (-1.0 / beta)
    err = 0.0
    for c in comps:
        mixed = float(grid.integrate(eppf.frag_cond_eppf(alpha, beta, y, c)))
        err = max(err, abs(mixed - eppf.pd_eppf(alpha, 0.0, c)))
    return combine("disintegration", [error_report("mixture", err, tol)])


EXPERIMENTS = {
    "duality-pd": duality_pd,
    "frag-composition": frag_composition,
    "dependent-coag": dependent_coag,
    "gg-dual": gg_dual,
    "diversity-rep": diversity_rep,
    "fixed-point": fixed_point,
    "hermite": hermite,
    "brownian-sizebias": brownian_sizebias,
    "disintegration": disintegration,
}


def stream_for(seed, name):
    return samplers.RngStream(seed, zlib.crc32(name.encode()))


def run_experiment(name, seed=0, **params):
    if name not in EXPERIMENTS:
        raise DomainError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    with Timer() as tm:
        rep = EXPERIMENTS[name](stream_for(seed, name), **params)
    rep.name = name
    rep.seed = int(seed)
    rep.runtime_ms = tm.ms
    return rep


def run_suite(names, seed=0):
    """Run the named experiments at default sizes, in the given order."""
    unknown = [x for x in names if x not in EXPERIMENTS]
    if unknown:
        raise DomainError(f"unknown experiments {unknown}")
    return [run_experiment(x, seed) for x in names]
