import math

import numpy as np
import pytest
from scipy import integrate, special as sp

from gibbsfrag import special
from gibbsfrag.errors import DomainError
from gibbsfrag.special import DensityEvalConfig, StableIndex, as_index


def test_stable_index_bounds():
    assert float(StableIndex(0.3)) == 0.3
    assert StableIndex(0.4).ratio(0.8).value == pytest.approx(0.5)
    for bad in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(DomainError):
            StableIndex(bad)
        with pytest.raises(DomainError):
            as_index(bad)


def test_config_validation():
    with pytest.raises(DomainError):
        DensityEvalConfig(rel_tol=0)
    with pytest.raises(DomainError):
        DensityEvalConfig(max_terms=0)
    with pytest.raises(DomainError):
        DensityEvalConfig(quad_points=8)


@pytest.mark.parametrize("x,n,want", [(3, 0, 1.0), (0.5, 2, 0.75), (-0.5, 3, -0.375), (2.0, 3, 24.0)])
def test_pochhammer(x, n, want):
    assert special.pochhammer(x, n) == pytest.approx(want, rel=1e-14)


@pytest.mark.parametrize("n,k,want", [(3, 3, 1.0), (3, 1, 0.75), (3, 2, 1.5)])
def test_gen_stirling_examples(n, k, want):
    assert special.gen_stirling(0.5, n, k) == pytest.approx(want, rel=1e-14)


def test_gen_stirling_domain():
    with pytest.raises(DomainError):
        special.gen_stirling(0.5, 3, 4)
    with pytest.raises(DomainError):
        special.gen_stirling(0.5, 3, 0)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.7])
def test_gen_stirling_against_exact_sum(alpha):
    # exact rational alternating sum is the independent oracle
    for n in range(1, 13):
        for k in range(1, n + 1):
            ref = special.gen_stirling_exact(alpha, n, k)
            assert special.gen_stirling(alpha, n, k) == pytest.approx(ref, rel=1e-12)


def test_gen_stirling_recurrence():
    a = 0.37
    for n in range(1, 20):
        for k in range(1, n + 2):
            lhs = special.gen_stirling(a, n + 1, k)
            prev = special.gen_stirling(a, n, k - 1) if k >= 2 else 0.0
            cur = special.gen_stirling(a, n, k) if k <= n else 0.0
            assert lhs == pytest.approx(prev + (n - k * a) * cur, rel=1e-12)


def test_stable_pdf_frozen(frozen):
    for a, t, want in frozen["stable_pdf"]:
        assert special.stable_pdf(a, t) == pytest.approx(want, rel=1e-8, abs=1e-300)


def test_stable_pdf_half_closed_form():
    t = np.geomspace(0.01, 100, 50)
    want = t ** -1.5 * np.exp(-1 / (4 * t)) / (2 * math.sqrt(math.pi))
    np.testing.assert_allclose(special.stable_pdf(0.5, t), want, rtol=1e-12)
    assert special.stable_pdf(0.5, 1.0) == pytest.approx(0.219695644733861, rel=1e-12)
    assert special.stable_pdf(0.5, 1e-4) < 1e-300


def test_stable_pdf_domain():
    with pytest.raises(DomainError):
        special.stable_pdf(0.5, 0.0)
    with pytest.raises(DomainError):
        special.stable_pdf(0.7, -1.0)


def _laplace(alpha, lam):
    # substitution t = exp(x) keeps scipy's quadrature on a smooth integrand
    f = lambda x: math.exp(x - lam * math.exp(x)) * special.stable_pdf(alpha, math.exp(x))
    val, _ = integrate.quad(f, -12, 8, limit=400, epsabs=1e-12, epsrel=1e-11)
    return val


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7, 0.9])
def test_stable_pdf_laplace_transform(alpha):
    for lam in (0.5, 1.0, 2.0):
        assert _laplace(alpha, lam) == pytest.approx(math.exp(-lam ** alpha), abs=1e-6)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7, 0.9])
def test_stable_pdf_normalized(alpha):
    # integrate on the ML scale, where the weight is smooth and bounded
    val, _ = integrate.quad(lambda s: special.ml_pdf(alpha, s), 0, np.inf, limit=400)
    assert val == pytest.approx(1.0, abs=1e-6)


def test_stable_pdf_config_switch_is_seamless():
    t = np.geomspace(0.2, 20, 40)
    for a in (0.3, 0.8):
        lo = special.stable_pdf(a, t, DensityEvalConfig(switch_point=0.5))
        hi = special.stable_pdf(a, t, DensityEvalConfig(switch_point=2.0))
        np.testing.assert_allclose(lo, hi, rtol=1e-8)


def test_stable_cdf_half():
    t = np.array([0.1, 1.0, 5.0])
    np.testing.assert_allclose(special.stable_cdf(0.5, t), sp.erfc(1 / (2 * np.sqrt(t))), rtol=1e-8)
    np.testing.assert_allclose(special.stable_cdf(0.5, t) + special.stable_sf(0.5, t), 1.0, atol=1e-14)


def test_ml_pdf_frozen(frozen):
    for a, s, want in frozen["ml_pdf"]:
        assert special.ml_pdf(a, s) == pytest.approx(want, rel=1e-8)
    assert special.ml_pdf(0.5, 1.0) == pytest.approx(0.439391289467722, rel=1e-12)


def test_ml_pdf_domain():
    with pytest.raises(DomainError):
        special.ml_pdf(0.5, 0.0)
    with pytest.raises(DomainError):
        special.ml_pdf(0.5, -2.0)


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
def test_ml_moments(alpha):
    for p in (1, 2):
        val, _ = integrate.quad(lambda s: s ** p * special.ml_pdf(alpha, s), 0, np.inf, limit=400)
        assert val == pytest.approx(math.gamma(p + 1) / math.gamma(p * alpha + 1), abs=1e-6)


def test_ml_cdf_matches_integral():
    s = np.array([0.3, 1.0, 2.5])
    for a in (0.3, 0.75):
        ref = [integrate.quad(lambda x: special.ml_pdf(a, x), 0, v, limit=200)[0] for v in s]
        np.testing.assert_allclose(special.ml_cdf(a, s), ref, atol=1e-9)
        np.testing.assert_allclose(special.ml_cdf(a, s) + special.ml_sf(a, s), 1.0, atol=1e-13)


def test_gml_pdf():
    s = np.geomspace(0.1, 5, 9)
    np.testing.assert_allclose(special.gml_pdf(0.6, 0.0, s), special.ml_pdf(0.6, s), rtol=1e-14)
    val, _ = integrate.quad(lambda x: special.gml_pdf(0.6, 1.2, x), 0, np.inf, limit=400)
    assert val == pytest.approx(1.0, abs=1e-8)
    a, th = 0.5, 0.5
    mean, _ = integrate.quad(lambda x: x * special.gml_pdf(a, th, x), 0, np.inf, limit=400)
    want = math.gamma(th / a + 2) * math.gamma(th + 1) / (math.gamma(th / a + 1) * math.gamma(th + a + 1))
    assert mean == pytest.approx(want, abs=1e-6)
    with pytest.raises(DomainError):
        special.gml_pdf(0.5, -0.5, 1.0)


@pytest.mark.parametrize("alpha,theta", [(0.4, 0.8), (0.6, -0.3), (0.7, 2.0)])
def test_moment_normalizer_by_quadrature(alpha, theta):
    val, _ = integrate.quad(lambda s: s ** (theta / alpha) * special.ml_pdf(alpha, s), 0, np.inf,
                            limit=400)
    assert special.ml_moment_normalizer(alpha, theta) == pytest.approx(val, rel=1e-7)


def test_ml_grid_expectations():
    assert special.ml_expect(0.6, lambda s: np.ones_like(s)) == pytest.approx(1.0, abs=1e-12)
    assert special.ml_expect(0.6, lambda s: s) == pytest.approx(1 / math.gamma(1.6), rel=1e-10)
    # E[T^{-theta}] under the theta-tilt has mean of L equal to the ML(alpha, theta) mean
    a, th = 0.5, 0.7
    want = (th / a + 1) * math.gamma(th + 1) / math.gamma(th + a + 1)
    assert special.ml_expect(a, lambda s: s, theta=th) == pytest.approx(want, rel=1e-10)
    assert special.stable_expect(0.5, lambda t: np.exp(-t)) == pytest.approx(math.exp(-1), rel=1e-10)


def test_ml_function(frozen):
    assert special.ml_function(0.5, 0.0) == 1.0
    assert special.ml_function(0.5, 1.0) == pytest.approx(math.e * math.erfc(1.0), abs=1e-12)
    for b, lam, want in frozen["ml_function"]:
        assert special.ml_function(b, lam) == pytest.approx(want, rel=1e-9)
    lam = np.linspace(0, 30, 61)
    vals = special.ml_function(0.6, lam)
    assert np.all(vals > 0) and np.all(np.diff(vals) < 0)
    with pytest.raises(DomainError):
        special.ml_function(0.5, -1.0)


def test_ml_function_branches_agree():
    # series just below the switch vs quadrature forced by a zero threshold
    for b in (0.3, 0.7):
        for lam in (0.5, 2.0, 4.5):
            assert special.ml_function(b, lam) == pytest.approx(
                special.ml_function(b, lam, threshold=0.0), abs=1e-10)


def test_gml_function(frozen):
    for b, th, lam, want in frozen["gml_function"]:
        assert special.gml_function(b, th, 0, lam) == pytest.approx(want, rel=1e-9)
    for lam in (0.3, 1.0, 7.0):
        assert special.gml_function(0.5, 0.0, 0, lam) == pytest.approx(special.ml_function(0.5, lam),
                                                                         abs=1e-12)
    assert special.gml_function(0.5, 0.5, 0, 0.0) == 1.0
    # j shifts theta by j*beta
    assert special.gml_function(0.5, 0.5, 1, 0.7) == pytest.approx(
        special.gml_function(0.5, 1.0, 0, 0.7), rel=1e-13)
    ref, _ = integrate.quad(lambda s: math.exp(-0.7 * s) * special.gml_pdf(0.5, 1.0, s), 0, np.inf,
                            limit=400)
    assert special.gml_function(0.5, 0.5, 1, 0.7) == pytest.approx(ref, abs=1e-6)
    vals = [special.gml_function(0.4, 0.3, 2, lam) for lam in np.linspace(0, 12, 25)]
    assert np.all(np.array(vals) > 0) and np.all(np.diff(vals) < 0)
    with pytest.raises(DomainError):
        special.gml_function(0.5, -0.6, 0, 1.0)


@pytest.mark.parametrize("beta,theta,lam", [(0.3, 0.4, 2.0), (0.6, -0.2, 0.8), (0.8, 1.5, 9.0)])
def test_gml_function_vs_quadrature(beta, theta, lam):
    ref, _ = integrate.quad(lambda s: math.exp(-lam * s) * special.gml_pdf(beta, theta, s), 0, np.inf,
                            limit=400)
    assert special.gml_function(beta, theta, 0, lam) == pytest.approx(ref, abs=1e-6)


def test_hermite_fn(frozen):
    assert special.hermite_fn(0, 3.0) == 1.0
    assert special.hermite_fn(0.5, 0.0) == pytest.approx(math.sqrt(math.pi / 2), rel=1e-13)
    for q, s, want in frozen["hermite_fn"]:
        assert special.hermite_fn(q, s) == pytest.approx(want, rel=1e-9)
    # confluent U via scipy as a second oracle
    assert special.hermite_fn(1.0, 1.0) == pytest.approx(0.5 * sp.hyperu(1.0, 0.5, 0.5), rel=1e-8)
    with pytest.raises(DomainError):
        special.hermite_fn(-0.5, 1.0)


def test_tilted_y_pdf(frozen):
    for b, n, k, y, want in frozen["tilted_y_pdf"]:
        assert special.tilted_y_pdf(b, n, k, y) == pytest.approx(want, rel=1e-7)
    val, _ = integrate.quad(lambda y: special.tilted_y_pdf(0.5, 4, 2, y), 0, np.inf, limit=400)
    assert val == pytest.approx(1.0, abs=1e-6)


def test_tilted_y_pdf_single_block_monte_carlo():
    from scipy import stats
    from gibbsfrag.samplers import RngStream, sample_given_blocks
    b = 0.6
    x = np.asarray(sample_given_blocks(b, np.ones(4000), np.ones(4000), RngStream(5, 5)))
    grid = np.geomspace(1e-3, 1e4, 4001)
    dens = special.tilted_y_pdf(b, 1, 1, grid)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    p = stats.kstest(x, lambda v: np.interp(v, grid, cdf)).pvalue
    assert p > 0.001


@pytest.mark.parametrize("n,k", [(2, 1), (3, 2), (4, 2), (5, 3)])
@pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
def test_hermite_vs_tilted_density_at_half(n, k, s):
    # G^{(n,k)}_{1/2}(y) = ratio * 2^{1-k} Gamma(k)/Gamma(n) must equal 2^{n-k} s^{k-1} H_{k+1-2n}(s)
    y = s ** -2 / 2
    ratio = special.tilted_y_pdf(0.5, n, k, y) / special.stable_pdf(0.5, y)
    g = ratio * 2.0 ** (1 - k) * math.gamma(k) / math.gamma(n)
    want = 2.0 ** (n - k) * s ** (k - 1) * special.hermite_fn((2 * n - k - 1) / 2, s)
    assert g == pytest.approx(want, rel=1e-6)


def test_conditional_v_matches_ratio():
    b, n, k, y = 0.4, 5, 2, 1.3
    r = special.tilted_y_pdf(b, n, k, y) / special.stable_pdf(b, y)
    want = r * b ** (k - 1) * math.gamma(k) / math.gamma(n)
    assert special.conditional_v(b, n, k, y) == pytest.approx(want, rel=1e-10)


def test_densities_nonnegative():
    t = np.geomspace(1e-3, 1e3, 200)
    for a in (0.1, 0.5, 0.95):
        assert np.all(special.stable_pdf(a, t) >= 0)
        assert np.all(special.ml_pdf(a, t) >= 0)
