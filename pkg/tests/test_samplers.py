import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import erfc

from gibbsfrag import eppf, samplers, special, tilts
from gibbsfrag.eppf import GibbsWeights
from gibbsfrag.errors import DomainError, EfficiencyError
from gibbsfrag.partitions import SetPartition
from gibbsfrag.samplers import RngStream
from gibbsfrag.verify.stats import QuadratureCDF, chi_square_vs_eppf

LEVEL = 0.01


def tilted_cdf(alpha, log_h):
    """Normalized CDF of the density h(t) f_alpha(t), and its total mass, by quadrature
    on the ML scale s = t**-alpha."""
    def pdf_s(s):
        s = np.asarray(s, dtype=float)
        pos = np.maximum(s, 1e-300)
        return np.where(s > 0, np.exp(log_h(pos ** (-1 / alpha))) * special.ml_pdf(alpha, pos), 0.0)
    cdf_s = QuadratureCDF(pdf_s, special.ml_grid(alpha).edges)
    # T <= t  <=>  S >= t**-alpha
    return lambda t: 1.0 - cdf_s(np.asarray(t, dtype=float) ** -alpha), cdf_s.total


def test_rng_stream_reproducible():
    a = samplers.sample_stable(0.6, RngStream(3, 9), 5)
    b = samplers.sample_stable(0.6, RngStream(3, 9), 5)
    c = samplers.sample_stable(0.6, RngStream(3, 10), 5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert RngStream(3, 9).child(1).stream_id != RngStream(3, 9).child(2).stream_id
    with pytest.raises(DomainError):
        samplers.sample_stable(0.6, 42)


@pytest.mark.parametrize("fn", [
    lambda r: samplers.sample_ml(0.6, 0.4, r, 10),
    lambda r: samplers.sample_gem(0.5, 0.5, 50, r).weights,
    lambda r: samplers.sample_partitions(GibbsWeights.pd(0.5, 0.2, 6), 6, 10, r),
    lambda r: samplers.sample_gg_partition(0.5, 1.0, 1, 5, r, 10)[0],
    lambda r: samplers.sample_pk_tilted(0.5, tilts.ml_lambda(0.5, 1.0), 100, r, 5)[2],
])
def test_samplers_deterministic(fn):
    np.testing.assert_array_equal(fn(RngStream(77, 1)), fn(RngStream(77, 1)))


def test_stable_half_against_closed_form(rng):
    t = samplers.sample_stable(0.5, rng, 100_000)
    assert stats.kstest(t, lambda x: erfc(1 / (2 * np.sqrt(x)))).pvalue > LEVEL
    # the Levy(1/2) variable is 1/(2 G^2)
    g = rng.gen.standard_normal(100_000)
    assert stats.ks_2samp(t, 1 / (2 * g ** 2)).pvalue > LEVEL


@pytest.mark.parametrize("alpha,lam", [(0.5, 1.0), (0.7, 2.0), (0.3, 1.0)])
def test_stable_laplace_transform(rng, alpha, lam):
    x = np.exp(-lam * samplers.sample_stable(alpha, rng, 1_000_000))
    se = x.std() / math.sqrt(x.size)
    assert abs(x.mean() - math.exp(-lam ** alpha)) < 3 * se


@pytest.mark.parametrize("alpha,c", [(0.5, 2.0), (0.7, 10.0), (0.3, 0.3)])
def test_exp_tilted_stable(rng, alpha, c):
    x = samplers.sample_exp_tilted_stable(alpha, np.full(20_000, c), rng)
    cdf, _ = tilted_cdf(alpha, lambda t: -c * t)
    assert stats.kstest(x, cdf).pvalue > LEVEL


@pytest.mark.parametrize("alpha,theta", [(0.5, 0.7), (0.6, 2.4)])
def test_poly_tilted_stable(rng, alpha, theta):
    x = samplers.sample_poly_tilted_stable(alpha, theta, rng, 20_000)
    cdf, total = tilted_cdf(alpha, lambda t: -theta * np.log(t))
    assert stats.kstest(x, cdf).pvalue > LEVEL


@pytest.mark.parametrize("alpha,theta", [(0.5, 0.5), (0.7, -0.4), (0.4, 3.0)])
def test_ml_sampler_law(rng, alpha, theta):
    z = samplers.sample_ml(alpha, theta, rng, 20_000)
    cdf = QuadratureCDF(lambda s: special.gml_pdf(alpha, theta, s),
                        special.ml_grid(alpha, round(max(theta, 0) / alpha, 12)).edges)
    assert stats.kstest(z, cdf).pvalue > LEVEL
    with pytest.raises(DomainError):
        samplers.sample_ml(alpha, -alpha, rng, 3)


def test_given_blocks_law(rng):
    b, n, k = 0.5, 4, 2
    x = samplers.sample_given_blocks(b, np.full(20_000, n), np.full(20_000, k), rng)
    grid = np.geomspace(1e-3, 1e5, 3001)
    dens = special.tilted_y_pdf(b, n, k, grid)
    cdf = np.concatenate([[0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    assert stats.kstest(x, lambda v: np.interp(v, grid, cdf)).pvalue > LEVEL


def test_gem_first_stick_mean(rng):
    w, tail = samplers.gem_sticks(0.5, 0.5, 5, rng, size=100_000)
    x = w[:, 0]
    assert abs(x.mean() - 1 / 3) < 3 * x.std() / math.sqrt(x.size)
    np.testing.assert_allclose(w.sum(axis=1) + tail, 1.0, atol=1e-12)


def test_gem_tail_and_ranking(rng):
    # the leftover mass after N sticks has exact mean prod_k (theta + k a) / (theta + k a + 1 - a);
    # it decays like N**(-(1-a)/a), about 1/N at a = 1/2
    a, th, count = 0.5, 0.0, 2000
    tails = np.array([samplers.sample_gem(a, th, count, rng).tail for _ in range(2000)])
    k = np.arange(1, count + 1)
    want = np.exp(np.sum(np.log(th + k * a) - np.log(th + k * a + 1 - a)))
    assert abs(tails.mean() - want) < 3 * tails.std() / math.sqrt(tails.size)
    m = samplers.sample_gem(a, th, count, rng)
    assert np.all(np.diff(m.weights) <= 0)
    with pytest.raises(DomainError):
        samplers.sample_gem(0.5, -0.6, 10, rng)


def test_stable_jumps(rng):
    js = samplers.sample_stable_jumps(0.5, 10_000, rng)
    assert np.all(np.diff(js.jumps) < 0)
    assert js.tail_mean / js.total < 0.01
    m = js.masses()
    assert m.weights.sum() + m.tail == pytest.approx(1.0, abs=1e-9)


def test_stable_jump_totals_are_stable(rng):
    tot = np.array([samplers.sample_stable_jumps(0.5, 10_000, rng).total for _ in range(10_000)])
    ref = samplers.sample_stable(0.5, rng, 10_000)
    assert stats.ks_2samp(tot, ref).pvalue > LEVEL


def test_stable_jumps_first_mass(rng):
    # E[P_1] under PD(1/2, 0) from ranked GEM sticks as the cross-oracle
    a = 0.5
    first_j = np.array([samplers.sample_stable_jumps(a, 2000, rng).masses().weights[0]
                        for _ in range(4000)])
    first_g = np.array([samplers.sample_gem(a, 0.0, 2000, rng).weights[0] for _ in range(4000)])
    se = math.hypot(first_j.std(), first_g.std()) / math.sqrt(4000)
    assert abs(first_j.mean() - first_g.mean()) < 3 * se


def test_pk_tilted_unit_is_stable(rng):
    _, _, t = samplers.sample_pk_tilted(0.5, tilts.unit(0.5), 500, rng, size=5000)
    assert stats.kstest(t, lambda x: erfc(1 / (2 * np.sqrt(x)))).pvalue > LEVEL


@pytest.mark.parametrize("h", [tilts.ml_lambda(0.5, 1.0), tilts.gg_zeta(0.5, 1.0, 0)])
def test_pk_tilted_totals(rng, h):
    _, _, t = samplers.sample_pk_tilted(0.5, h, 2000, rng, size=5000)
    cdf, total = tilted_cdf(0.5, h.log_eval)
    assert total == pytest.approx(1.0, abs=1e-6)
    assert stats.kstest(t, cdf).pvalue > LEVEL
    m, tt = samplers.sample_pk_tilted(0.5, h, 2000, rng)
    assert m.weights.sum() + m.tail == pytest.approx(1.0, abs=1e-9) and tt > 0


def test_pk_tilted_rejects_unbounded_and_inefficient(rng):
    with pytest.raises(DomainError):
        samplers.sample_pk_tilted(0.5, tilts.pd_theta(0.5, 1.0), 10, rng)
    with pytest.raises(EfficiencyError):
        samplers.sample_pk_tilted(0.5, tilts.gg_zeta(0.5, 40.0, 0), 10, rng)


def test_pk_total_exact(rng):
    h = tilts.gg_zeta(0.5, 1.0, 0)
    t = samplers.sample_pk_total(0.5, h, rng, 20_000)
    cdf, _ = tilted_cdf(0.5, h.log_eval)
    assert stats.kstest(t, cdf).pvalue > LEVEL


@pytest.mark.parametrize("beta,zeta,m", [(0.5, 0.8, 0), (0.5, 1.0, 1), (0.3, 2.0, 1)])
def test_gg_inverse_local_time(rng, beta, zeta, m):
    x = samplers.sample_gg_inverse_lt(beta, zeta, m, rng, 20_000)
    h = tilts.gg_zeta(beta, zeta, m)
    cdf, total = tilted_cdf(beta, h.log_eval)
    assert total == pytest.approx(1.0, abs=1e-6)
    assert stats.kstest(x, cdf).pvalue > LEVEL
    if m == 1:
        mean = special.stable_expect(beta, lambda t: t * h(t))
        assert abs(x.mean() - mean) < 3 * x.std() / math.sqrt(x.size)


def test_gg_inverse_small_zeta_is_stable(rng):
    x = samplers.sample_gg_inverse_lt(0.5, 1e-4, 0, rng, 20_000)
    y = samplers.sample_stable(0.5, rng, 20_000)
    assert stats.ks_2samp(x, y).pvalue > LEVEL


def test_eppf_partition_sampler_small_cases(rng):
    assert samplers.sample_eppf_partition(eppf.pd_evaluator(0.5, 0.0), 1, rng) == SetPartition(1, ((1,),))
    lab = samplers.sample_partitions(eppf.pd_evaluator(0.5, 0.0), 3, 100_000, rng)
    assert chi_square_vs_eppf(lab, eppf.pd_evaluator(0.5, 0.0), 3).passed


@pytest.mark.parametrize("make", [
    lambda: eppf.pd_evaluator(0.5, 0.3),
    lambda: eppf.pd_evaluator(0.6, -0.3),
    lambda: eppf.cond_evaluator(0.5, 1.3),
    lambda: eppf.frag_cond_evaluator(0.8, 0.4, 1.0),
    lambda: eppf.frag_evaluator(0.6, 0.3, GibbsWeights.from_tilt(tilts.gg_zeta(0.3, 1.0), 8)),
    lambda: eppf.gibbs_evaluator(GibbsWeights.from_tilt(tilts.ml_lambda(0.6, 1.0), 8)),
])
def test_table_sampler_exact(rng, make):
    ev = make()
    lab = samplers.sample_partitions(ev, 5, 100_000, rng)
    assert chi_square_vs_eppf(lab, ev, 5).passed


def test_ratio_sampler_matches_evaluator(rng):
    # a bare callable has no table: the item-by-item EPPF-ratio route is used
    ev = eppf.frag_cond_evaluator(0.8, 0.4, 1.0)
    lab = samplers.sample_partitions(lambda c: ev(c), 4, 20_000, rng)
    assert chi_square_vs_eppf(lab, ev, 4).passed


@pytest.mark.parametrize("gamma,zeta,m", [(0.5, 1.0, 0), (0.3, 0.7, 1)])
def test_gg_partition_law(rng, gamma, zeta, m):
    lab, t = samplers.sample_gg_partition(gamma, zeta, m, 5, rng, 100_000)
    w = GibbsWeights.from_tilt(tilts.gg_zeta(gamma, zeta, m), 8)
    assert chi_square_vs_eppf(lab, w, 5).passed
    # totals follow the tilted law
    cdf, _ = tilted_cdf(gamma, tilts.gg_zeta(gamma, zeta, m).log_eval)
    assert stats.kstest(t[:20_000], cdf).pvalue > LEVEL
