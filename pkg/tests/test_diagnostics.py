"""QQ data construction and empirical region coverage."""

import numpy as np
import pytest

from swarmclt import coverage, normal_quantile, qq_data, region_nonoscillatory
from swarmclt.clt_stats import ConfidenceRegion


def exact_normal_sample(m):
    # sample whose order statistics sit exactly at the plotting positions
    return np.array([normal_quantile((i + 0.5) / m) for i in range(m)])


def test_qq_corr_is_one_for_exact_quantiles():
    qq = qq_data(exact_normal_sample(200))
    assert qq.qq_corr == pytest.approx(1.0, abs=1e-12)
    # z-scoring is affine, so the points still sit on one straight line
    slope = np.polyfit(qq.theoretical, qq.sample, 1)[0]
    assert np.allclose(qq.sample, slope * qq.theoretical, atol=1e-9)


def test_qq_plotting_positions():
    # theoretical quantiles use (i - 0.5)/m positions, i = 1..m
    qq = qq_data(np.linspace(-3.0, 3.0, 40))
    want = [normal_quantile((i - 0.5) / 40) for i in range(1, 41)]
    assert np.allclose(qq.theoretical, want, atol=1e-12)


def test_qq_sample_is_standardized_sorted_input():
    # the sample axis is z-scored so axes are comparable on a unit diagonal
    rng = np.random.default_rng(0)
    x = rng.standard_normal(60)
    qq = qq_data(x)
    want = (np.sort(x) - x.mean()) / np.std(x)
    assert np.allclose(qq.sample, want, atol=1e-12)


def test_qq_affine_invariance():
    rng = np.random.default_rng(1)
    x = rng.standard_normal(100)
    base = qq_data(x).qq_corr
    assert qq_data(3.0 + 2.5 * x).qq_corr == pytest.approx(base, abs=1e-12)
    # negative scale reverses the ordering and destroys the correlation sign
    assert qq_data(-x).qq_corr != pytest.approx(base, abs=1e-6) or base == pytest.approx(
        qq_data(-x).qq_corr, abs=1e-6)


def test_qq_heavier_tails_score_lower():
    rng = np.random.default_rng(2)
    normal = rng.standard_normal(2000)
    heavy = rng.standard_t(df=1, size=2000)
    assert qq_data(heavy).qq_corr < qq_data(normal).qq_corr


def test_qq_needs_ten_points():
    with pytest.raises(ValueError, match="at least 10"):
        qq_data(np.arange(9, dtype=float))


def test_qq_rejects_zero_variance():
    with pytest.raises(ValueError, match="zero variance"):
        qq_data(np.full(15, 2.0))


def test_qq_pairs_property():
    qq = qq_data(exact_normal_sample(12))
    pairs = qq.pairs
    assert pairs.shape == (12, 2)
    assert np.array_equal(pairs[:, 0], qq.theoretical)
    assert np.array_equal(pairs[:, 1], qq.sample)


def test_coverage_interval():
    region = ConfidenceRegion(kind="Interval", level=0.95,
                              payload={"bounds": np.array([[-1.0, 1.0]])})
    pts = np.array([-2.0, -0.5, 0.0, 0.5, 2.0])
    assert coverage(pts, region) == pytest.approx(3 / 5)
    assert coverage(np.zeros(4), region) == 1.0
    assert coverage(np.full(4, 9.9), region) == 0.0


def test_coverage_two_sided_union():
    region = region_nonoscillatory(0.0, 4, -0.5, 0.1, 0.05)
    (a_lo, a_hi), (b_lo, b_hi) = region.payload["intervals"]
    pts = [0.5 * (a_lo + a_hi), 0.5 * (b_lo + b_hi), 0.0, 100.0]
    assert coverage(pts, region) == pytest.approx(0.5)


def test_coverage_monotone_in_level():
    rng = np.random.default_rng(3)
    pts = rng.normal(0.0, 1.0, 500)

    def region_at(alpha):
        half = normal_quantile(1.0 - alpha / 2.0)
        return ConfidenceRegion(kind="Interval", level=1.0 - alpha,
                                payload={"bounds": np.array([[-half, half]])})

    covs = [coverage(pts, region_at(a)) for a in (0.50, 0.20, 0.05, 0.01)]
    assert all(b >= a for a, b in zip(covs, covs[1:]))
    # and roughly matches the nominal level
    assert covs[2] == pytest.approx(0.95, abs=0.05)
