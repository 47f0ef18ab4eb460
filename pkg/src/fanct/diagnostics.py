"""Post-burn-in summaries of Gibbs chains."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .io import ChainRecords

__all__ = ["ParamSummary", "ChainSummary", "autocorrelation", "integrated_autocorr_time",
           "effective_sample_size", "summarize", "chain_stats"]


def autocorrelation(x, max_lag: int | None = None) -> np.ndarray:
    """Normalized autocorrelation function (lag 0 equals 1), computed by FFT.

    A constant series has no defined correlation; it is reported as 1 at lag
    0 and 0 elsewhere.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    if max_lag is None:
        max_lag = n - 1
    max_lag = min(max_lag, n - 1)
    d = x - x.mean()
    var = float(np.dot(d, d))
    acf = np.zeros(max_lag + 1)
    acf[0] = 1.0
    if var == 0.0 or n < 2:
        return acf
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(d, size)
    full = np.fft.irfft(f * np.conj(f), size)[: max_lag + 1]
    return full / full[0]


def integrated_autocorr_time(x, window_c: float = 5.0) -> float:
    """Integrated autocorrelation time with Sokal's automatic window.

    The window is the smallest M with ``M >= window_c * tau(M)``. The result
    is floored at ``1 / log10(N)``, which caps the effective sample size of
    anticorrelated chains at ``N log10 N``.
    """
    acf = autocorrelation(x)
    if acf.size < 2 or np.all(acf[1:] == 0):
        return float("nan") if np.var(x) == 0 else 1.0
    taus = 2.0 * np.cumsum(acf) - 1.0
    m = np.arange(taus.size)
    ok = m >= window_c * taus
    idx = int(np.argmax(ok)) if ok.any() else taus.size - 1
    floor = 1.0 / np.log10(max(acf.size, 10))
    return float(max(taus[idx], floor))


def effective_sample_size(x, window_c: float = 5.0) -> float:
    x = np.asarray(x)
    tau = integrated_autocorr_time(x, window_c)
    return float(x.size / tau) if np.isfinite(tau) else float("nan")


@dataclass
class ParamSummary:
    mean: float
    sd: float
    q025: float
    q975: float
    acf: np.ndarray
    ess: float

    def covers(self, value: float) -> bool:
        return self.q025 <= value <= self.q975


@dataclass
class ChainSummary:
    n_samples: int
    burn_in: int
    params: dict  # name -> ParamSummary for "lambda", "delta", "c"
    acceptance_rate: float

    def __getitem__(self, name) -> ParamSummary:
        return self.params[name]


def summarize(x, max_lag: int = 50) -> ParamSummary:
    x = np.asarray(x, dtype=np.float64)
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    q025, q975 = np.quantile(x, [0.025, 0.975])
    return ParamSummary(float(x.mean()), sd, float(q025), float(q975), autocorrelation(x, max_lag),
                        effective_sample_size(x))


def chain_stats(chain, burn_in: int, k_metro: int | None = None, max_lag: int = 50) -> ChainSummary:
    """Summaries of lambda, delta and c after discarding `burn_in` records.

    `chain` is a `GibbsChain` or bare `ChainRecords`; for the latter
    `k_metro` must be supplied to normalize the acceptance rate.
    """
    if isinstance(chain, ChainRecords):
        recs = chain
        if k_metro is None:
            raise ValueError("k_metro is required when passing bare chain records")
    else:
        recs = chain.records
        k_metro = chain.k_metro if k_metro is None else k_metro
    n = len(recs)
    if not 0 <= burn_in < n:
        raise ValueError(f"burn_in {burn_in} must be in [0, {n})")
    sl = slice(burn_in, None)
    params = {
        "lambda": summarize(recs.lam[sl], max_lag),
        "delta": summarize(recs.delta[sl], max_lag),
        "c": summarize(recs.c[sl], max_lag),
    }
    rate = float(np.sum(recs.mh_accepts[sl])) / (k_metro * (n - burn_in))
    return ChainSummary(n - burn_in, burn_in, params, rate)
