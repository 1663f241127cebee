"""Chain diagnostics: autocorrelation, empirical CDFs, acceptance rates."""

from dataclasses import dataclass

import numpy as np


class DegenerateSeries(ValueError):
    """The series has zero variance, so its autocorrelation is undefined."""


def acf(series, tau):
    """Autocorrelation at lag ``tau``.

    sum_{n < N - tau} (x_n - mu)(x_{n+tau} - mu) / ((N - tau) * var), with
    ``var`` the (1/N) sample variance, so lag 0 gives exactly 1.
    """
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    if n < 2:
        raise ValueError("need at least two samples")
    if not 0 <= tau < n:
        raise ValueError(f"lag {tau} outside [0, {n})")
    xc = x - x.mean()
    var = np.mean(xc * xc)
    if var <= 0.0:
        raise DegenerateSeries("constant series")
    return float(np.dot(xc[: n - tau], xc[tau:]) / ((n - tau) * var))


def acf_curve(series, max_lag):
    """ACF for lags 0..max_lag via FFT (same normalisation as ``acf``)."""
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    max_lag = min(max_lag, n - 1)
    xc = x - x.mean()
    var = np.mean(xc * xc)
    if var <= 0.0:
        raise DegenerateSeries("constant series")
    size = 1 << int(np.ceil(np.log2(2 * n)))
    fx = np.fft.rfft(xc, size)
    raw = np.fft.irfft(fx * np.conj(fx), size)[: max_lag + 1]
    return raw / ((n - np.arange(max_lag + 1)) * var)


@dataclass(frozen=True)
class Edf:
    """Empirical distribution function: sorted support and cumulative mass."""

    values: np.ndarray
    cumulative: np.ndarray

    def __call__(self, x):
        idx = np.searchsorted(self.values, np.asarray(x, dtype=float), side="right")
        c = np.concatenate([[0.0], self.cumulative])
        return c[idx]


def edf(samples, weights=None) -> Edf:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("an EDF needs at least one sample")
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float).ravel()
    order = np.argsort(x, kind="stable")
    xs, ws = x[order], w[order]
    vals, first = np.unique(xs, return_index=True)
    mass = np.add.reduceat(ws, first)
    cum = np.cumsum(mass) / ws.sum()
    cum[-1] = 1.0
    return Edf(vals, cum)


def edf_max_distance(a: Edf, b: Edf) -> float:
    """Kolmogorov-Smirnov distance between two EDFs (exact on the union grid)."""
    grid = np.union1d(a.values, b.values)
    return float(np.max(np.abs(a(grid) - b(grid))))


def ks_to_cdf(samples, cdf) -> float:
    """One-sample KS distance between the EDF of ``samples`` and a continuous CDF."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    f = cdf(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def acceptance_rate(trace, window=None) -> float:
    """Fraction of accepted proposals over ``window`` (a slice; default post burn-in)."""
    acc = np.asarray(trace.accepted if hasattr(trace, "accepted") else trace, dtype=bool)
    if window is None:
        window = slice(getattr(trace, "burn_in", 0), None)
    sel = acc[window]
    if sel.size == 0:
        raise ValueError("empty acceptance window")
    return float(sel.mean())


def total_variation(p, q):
    return 0.5 * float(np.sum(np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float))))


def codeword_frequencies(trace, n_codewords, burn_in=None):
    b = trace.burn_in if burn_in is None else burn_in
    counts = np.bincount(np.asarray(trace.s_index)[b:], minlength=n_codewords)
    return counts / counts.sum()
