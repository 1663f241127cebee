import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from relaysim.diagnostics import (DegenerateSeries, acceptance_rate, acf, acf_curve, codeword_frequencies, edf,
                                  edf_max_distance, ks_to_cdf, total_variation)
from relaysim.samplers import ChainTrace


def ar1(phi, n, seed):
    g = np.random.default_rng(seed)
    e = g.standard_normal(n)
    x = np.empty(n)
    x[0] = e[0] / np.sqrt(1 - phi**2)
    for i in range(1, n):
        x[i] = phi * x[i - 1] + e[i]
    return x


def test_acf_of_ar1():
    x = ar1(0.9, 200_000, 1)
    assert acf(x, 0) == pytest.approx(1.0)
    assert abs(acf(x, 1) - 0.9) < 0.02
    assert abs(acf(x, 5) - 0.9**5) < 0.03


def test_acf_curve_matches_direct():
    x = ar1(0.5, 3000, 2)
    curve = acf_curve(x, 40)
    assert np.allclose(curve, [acf(x, t) for t in range(41)])


def test_acf_errors():
    with pytest.raises(DegenerateSeries):
        acf(np.ones(10), 1)
    with pytest.raises(DegenerateSeries):
        acf_curve(np.ones(10), 3)
    with pytest.raises(ValueError):
        acf([1.0, 2.0], 2)


@settings(max_examples=60)
@given(arrays(float, st.integers(3, 60), elements=st.floats(-1e3, 1e3, allow_nan=False)), st.integers(0, 59))
def test_acf_bounds(x, tau):
    if np.ptp(x) < 1e-6 or tau >= x.size:
        return
    v = acf(x, tau)
    # the (n - tau) normalisation can exceed one slightly at large lags; bound by n / (n - tau)
    assert abs(v) <= x.size / (x.size - tau) + 1e-6
    if tau == 0:
        assert v == pytest.approx(1.0)


def test_edf_basics():
    e = edf([3.0, 1.0, 2.0, 2.0])
    assert e(0.5) == 0.0 and e(1.0) == 0.25 and e(2.0) == 0.75 and e(10) == 1.0
    w = edf([1.0, 2.0], weights=[3.0, 1.0])
    assert w(1.0) == 0.75
    with pytest.raises(ValueError):
        edf([])


def test_edf_distance_matches_scipy_two_sample():
    g = np.random.default_rng(3)
    a, b = g.standard_normal(500), g.standard_normal(700) + 0.2
    assert edf_max_distance(edf(a), edf(b)) == pytest.approx(stats.ks_2samp(a, b).statistic)


def test_ks_to_cdf_matches_scipy():
    x = np.random.default_rng(4).standard_normal(1000)
    assert ks_to_cdf(x, stats.norm.cdf) == pytest.approx(stats.kstest(x, "norm").statistic)


def test_ks_null_calibration():
    # under the null, sqrt(n) D is Kolmogorov distributed: the 95% point is about 1.358
    g = np.random.default_rng(5)
    n = 400
    ds = np.array([ks_to_cdf(g.standard_normal(n), stats.norm.cdf) for _ in range(2000)])
    rejected = np.mean(np.sqrt(n) * ds > stats.kstwobign.ppf(0.95))
    assert abs(rejected - 0.05) < 0.02


@given(arrays(float, st.integers(1, 40), elements=st.floats(-50, 50, allow_nan=False)),
       arrays(float, st.integers(1, 40), elements=st.floats(-50, 50, allow_nan=False)))
def test_edf_distance_properties(a, b):
    d = edf_max_distance(edf(a), edf(b))
    assert 0.0 <= d <= 1.0
    assert d == pytest.approx(edf_max_distance(edf(b), edf(a)))
    assert edf_max_distance(edf(a), edf(a)) == 0.0


def test_acceptance_rate_and_frequencies():
    acc = np.array([False] * 5 + [True, False, True, True])
    n = acc.size
    z = np.zeros((n, 1), complex)
    tr = ChainTrace(np.array([0, 0, 0, 0, 0, 1, 1, 2, 2]), z, z, acc, np.zeros(n, int), burn_in=5)
    assert acceptance_rate(tr) == 0.75
    assert acceptance_rate(tr, slice(0, 5)) == 0.0
    with pytest.raises(ValueError):
        acceptance_rate(tr, slice(9, 9))
    assert np.allclose(codeword_frequencies(tr, 3), [0, 0.5, 0.5])
    assert total_variation([1, 0], [0, 1]) == 1.0
