import numpy as np
import pytest

from fanct.diagnostics import (autocorrelation, chain_stats, effective_sample_size, integrated_autocorr_time,
                               summarize)
from fanct.io import ChainRecords


def _records(c, lam=None, delta=None, acc=None):
    n = len(c)
    return ChainRecords(np.arange(1, n + 1), np.ones(n) if lam is None else lam,
                        np.ones(n) if delta is None else delta, np.asarray(c, float),
                        np.zeros(n, np.int64) if acc is None else acc)


def test_acf_matches_direct_sum(rng):
    x = rng.standard_normal(300).cumsum()
    d = x - x.mean()
    direct = np.array([d[: x.size - k] @ d[k:] for k in range(21)]) / (d @ d)
    np.testing.assert_allclose(autocorrelation(x, 20), direct, atol=1e-12)


def test_constant_chain():
    s = summarize(np.full(100, 2.5), max_lag=10)
    assert s.acf[0] == 1.0 and np.all(s.acf[1:] == 0)
    assert s.q025 == s.q975 == s.mean == 2.5 and s.sd == 0.0
    assert np.isnan(s.ess)


def test_iid_chain():
    x = np.random.default_rng(0).standard_normal(100_000)
    acf = autocorrelation(x, 50)
    assert acf[0] == 1.0 and np.max(np.abs(acf[1:])) <= 0.02
    assert abs(effective_sample_size(x) / x.size - 1) <= 0.1


def test_ar1_autocorrelation_time():
    # AR(1) with coefficient phi has tau = (1 + phi) / (1 - phi)
    rng = np.random.default_rng(1)
    phi, n = 0.8, 200_000
    e = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = e[0]
    for i in range(1, n):
        x[i] = phi * x[i - 1] + e[i]
    assert abs(integrated_autocorr_time(x) / 9.0 - 1) < 0.1


def test_anticorrelated_ess_is_bounded():
    x = np.tile([1.0, -1.0], 50) + 1e-3 * np.random.default_rng(2).standard_normal(100)
    assert np.isfinite(effective_sample_size(x))
    assert effective_sample_size(x) <= 100 * np.log10(100) + 1e-9


def test_chain_stats_burn_in_and_quantiles(rng):
    c = np.concatenate([np.full(50, 100.0), rng.standard_normal(1000)])
    st = chain_stats(_records(c), burn_in=50, k_metro=10)
    assert st.n_samples == 1000
    post = c[50:]
    assert st["c"].mean == pytest.approx(post.mean())
    assert st["c"].sd == pytest.approx(post.std(ddof=1))
    assert (st["c"].q025, st["c"].q975) == tuple(np.quantile(post, [0.025, 0.975]))
    assert st["c"].covers(0.0) and not st["c"].covers(5.0)


def test_acceptance_rate():
    acc = np.full(20, 10, np.int64)
    assert chain_stats(_records(np.zeros(20), acc=acc), 5, k_metro=10).acceptance_rate == 1.0
    acc[10:] = 0
    assert chain_stats(_records(np.zeros(20), acc=acc), 5, k_metro=10).acceptance_rate == pytest.approx(50 / 150)


def test_chain_stats_errors():
    rec = _records(np.zeros(10))
    with pytest.raises(ValueError):
        chain_stats(rec, 10, k_metro=1)
    with pytest.raises(ValueError):
        chain_stats(rec, 0)
