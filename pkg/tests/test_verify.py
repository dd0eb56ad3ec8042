import math

import numpy as np
import pytest
from scipy import stats as sps

from gibbsfrag import eppf, samplers
from gibbsfrag.eppf import GibbsWeights
from gibbsfrag.errors import DegenerateTestError, DomainError
from gibbsfrag.verify import experiments as ex
from gibbsfrag.verify import stats


def test_calibration_same_law():
    w = GibbsWeights.pd(0.5, 0.5, 5)
    passes = 0
    for seed in range(40):
        x = samplers.sample_partitions(w, 5, 20_000, samplers.RngStream(seed, 7))
        passes += stats.chi_square_vs_eppf(x, w, 5).passed
    assert passes >= 38


def test_power_against_wrong_theta(rng):
    x = samplers.sample_partitions(GibbsWeights.pd(0.5, 0.0, 5), 5, 100_000, rng)
    rep = stats.chi_square_vs_eppf(x, GibbsWeights.pd(0.5, 0.5, 5), 5)
    assert not rep.passed and rep.p_value < 1e-10


def test_chi_square_input_forms(rng):
    w = GibbsWeights.pd(0.4, 1.0, 7)
    x = samplers.sample_partitions(w, 7, 50_000, rng)
    # n = 7 bins by block-size class
    assert stats.chi_square_vs_eppf(x, eppf.pd_evaluator(0.4, 1.0), 7).passed
    from gibbsfrag.partitions import SetPartition
    parts = [SetPartition.from_labels(r.tolist()) for r in x[:5000, :3]]
    assert stats.chi_square_vs_eppf(parts, w, 3).n_samples == 5000


def test_chi_square_errors():
    with pytest.raises(DegenerateTestError):
        stats.chi_square_vs_eppf(np.zeros((10, 1), dtype=int), GibbsWeights.pd(0.5, 0.0, 2), 1)
    with pytest.raises(DomainError):
        stats.chi_square_vs_eppf(np.zeros((10, 9), dtype=int), GibbsWeights.pd(0.5, 0.0, 9), 9)
    with pytest.raises(DomainError):
        stats.chi_square_vs_eppf(np.zeros((10, 3), dtype=int), GibbsWeights.pd(0.5, 0.0, 4), 4)


def test_pooled_chisquare_pools_small_cells():
    obs = np.array([50, 30, 15, 3, 2])
    p = np.array([0.5, 0.3, 0.15, 0.03, 0.02])
    stat, pv, cells = stats.pooled_chisquare(obs, p)
    assert cells == 4 and stat == pytest.approx(0.0) and pv == pytest.approx(1.0)
    with pytest.raises(DomainError):
        stats.pooled_chisquare(obs, p * 2)
    with pytest.raises(DegenerateTestError):
        stats.pooled_chisquare(np.array([3, 1]), np.array([0.5, 0.5]))


def test_report_pass_rule():
    assert stats.p_value_report("x", 1.0, 0.02, 10).passed
    assert not stats.p_value_report("x", 1.0, 0.005, 10).passed
    assert stats.error_report("e", 1e-7, 1e-6).passed
    assert not stats.error_report("e", 1e-5, 1e-6).passed


def test_combine_needs_every_part():
    a = stats.p_value_report("a", 1.0, 0.5, 10)
    b = stats.p_value_report("b", 1.0, 0.02, 20)
    e = stats.error_report("e", 1e-3, 1e-6)
    rep = stats.combine("both", [a, b])
    assert rep.passed and rep.p_value == 0.02 and rep.n_samples == 20
    rep = stats.combine("mixed", [a, e])
    assert not rep.passed and rep.abs_error == 1e-3
    assert set(rep.details) == {"a", "e"}


def test_quadrature_cdf_exact_on_exponential():
    cdf = stats.QuadratureCDF(lambda x: np.exp(-x), np.linspace(0, 60, 121))
    x = np.array([0.0, 0.3, 1.0, 7.25])
    np.testing.assert_allclose(cdf(x), -np.expm1(-x), atol=1e-14)
    assert cdf.total == pytest.approx(1.0, abs=1e-14)


def test_independence_and_homogeneity_detect_dependence(rng):
    x = rng.gen.integers(0, 3, 20_000)
    y = (x + (rng.gen.random(20_000) < 0.2)) % 3
    assert not stats.independence_test(x, y).passed
    assert stats.independence_test(x, rng.gen.integers(0, 3, 20_000)).passed
    a = rng.gen.integers(0, 2, (20_000, 3))
    assert stats.homogeneity_test(a[:10_000], a[10_000:]).passed


def test_mean_z_test():
    x = np.random.default_rng(0).normal(1.0, 1.0, 10_000)
    assert stats.mean_z_test(x, 1.0).passed
    assert not stats.mean_z_test(x, 1.1).passed


def test_fixed_point_moment_alpha_scale():
    rep = ex.run_experiment("fixed-point", seed=3, alpha=0.6, beta=0.3, ell=1)
    assert rep.details["moment"]["pass"]


def test_fixed_point_beta_zero():
    rep = ex.run_experiment("fixed-point", seed=3, alpha=0.6, beta=0.0, ell=1)
    assert rep.passed


def test_fixed_point_unit_scale_ks():
    rep = ex.run_experiment("fixed-point", seed=3, alpha=0.5, beta=0.25, ell=1, variant="unit-scale")
    assert rep.passed


def test_fixed_point_domain():
    with pytest.raises(DomainError):
        ex.run_experiment("fixed-point", variant="other")
    with pytest.raises(DomainError):
        ex.run_experiment("fixed-point", alpha=0.3, beta=0.4)


def test_diversity_density_is_normalized():
    from gibbsfrag import special, tilts
    for h in (tilts.unit(0.4), tilts.ml_lambda(0.4, 1.0), tilts.gg_zeta(0.4, 1.0, 0)):
        cdf = stats.QuadratureCDF(ex.diversity_density(0.8, 0.4, h), special.ml_grid(0.8).edges)
        assert cdf.total == pytest.approx(1.0, abs=1e-6)


def test_diversity_unit_mean():
    # with h = 1 the diversity is ML(alpha, 0)
    g = samplers.RngStream(5).gen
    from gibbsfrag import tilts
    x = ex.diversity_route_a(0.8, 0.4, tilts.unit(0.4), 5000, g)
    assert stats.mean_z_test(x, ex._ml_mean(0.8, 0.0)).passed


@pytest.mark.parametrize("tilt,alpha,beta", [("ml_lambda:1", 0.8, 0.4), ("gg_zeta:1", 0.6, 0.3)])
def test_diversity_rep_tilted(tilt, alpha, beta):
    rep = ex.run_experiment("diversity-rep", seed=2, alpha=alpha, beta=beta, tilt=tilt)
    assert rep.passed


def test_hermite_experiment():
    rep = ex.run_experiment("hermite")
    assert rep.passed and rep.abs_error < 1e-6
    # n = k = 1 both sides equal 1
    assert eppf.hermite_eppf(0.7, (1,)) == pytest.approx(1.0)
    assert eppf.cond_eppf(0.5, 0.5 / 0.49, (2, 2)) == pytest.approx(eppf.hermite_eppf(0.7, (2, 2)), abs=1e-6)
    assert ex.run_experiment("hermite", pairs=((3, 2),), s_grid=(1.0,), tol=1e-5).passed


def test_brownian_telescoping_and_first_mass(rng):
    g = rng.gen
    p, S = ex.brownian_masses(1.0, 50, g, size=20_000)
    np.testing.assert_allclose(p.sum(axis=1), 1.0 - 1.0 / (1.0 + S[:, -1]), atol=1e-13)
    # first mass = chi2 / (1 + chi2): mean by quadrature against the chi-square(1) density
    want = sps.chi2(1).expect(lambda x: x / (1 + x))
    first = p[:, 0]
    assert abs(first.mean() - want) < 3 * first.std() / math.sqrt(first.size)


def test_brownian_sizebias_experiment():
    rep = ex.run_experiment("brownian-sizebias", seed=1)
    assert rep.passed


def test_disintegration_experiment():
    rep = ex.run_experiment("disintegration")
    assert rep.passed and rep.abs_error < 1e-5


def test_run_suite_plumbing():
    assert ex.run_suite([]) == []
    with pytest.raises(DomainError):
        ex.run_suite(["duality-pd", "nope"])
    with pytest.raises(DomainError):
        ex.run_experiment("nope")


def test_runs_are_deterministic():
    a = ex.run_experiment("frag-composition", seed=9, samples=20_000)
    b = ex.run_experiment("frag-composition", seed=9, samples=20_000)
    assert (a.statistic, a.p_value, a.seed) == (b.statistic, b.p_value, 9)
    c = ex.run_experiment("frag-composition", seed=10, samples=20_000)
    assert c.statistic != a.statistic


def test_streams_do_not_depend_on_suite_order():
    a = ex.run_suite(["hermite", "frag-composition"], seed=4)[1]
    b = ex.run_experiment("frag-composition", seed=4)
    assert a.statistic == b.statistic
