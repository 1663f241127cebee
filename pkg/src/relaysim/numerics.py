"""Numeric substrate: seeded streams, complex Gaussian draws, quantiles, covariance."""

from dataclasses import dataclass

import numpy as np


class InvalidParameter(ValueError):
    """Raised when a numeric routine receives an out-of-domain argument."""


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    ``stream_id`` may be an int or a tuple of ints; distinct ids give
    statistically independent streams via ``SeedSequence`` spawn keys.
    """

    seed: int
    stream_id: tuple = ()

    def generator(self) -> np.random.Generator:
        key = self.stream_id if isinstance(self.stream_id, tuple) else (self.stream_id,)
        ss = np.random.SeedSequence(int(self.seed), spawn_key=tuple(int(k) for k in key))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, *ids) -> "RngStream":
        key = self.stream_id if isinstance(self.stream_id, tuple) else (self.stream_id,)
        return RngStream(self.seed, tuple(key) + tuple(int(i) for i in ids))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True)
class ComplexGaussianSpec:
    """CN(mean, variance) with ``variance`` the total (re + im) variance."""

    mean: complex = 0j
    variance: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.variance) or self.variance <= 0:
            raise InvalidParameter(f"variance must be positive, got {self.variance}")


def cn(rng, mean, variance, size):
    """Unchecked circularly symmetric complex normal draws.

    Each of the real and imaginary parts has variance ``variance / 2``.
    """
    std = np.sqrt(np.asarray(variance, dtype=float) / 2.0)
    z = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    return mean + std * z


def sample_cn(spec: ComplexGaussianSpec, n: int, rng) -> np.ndarray:
    """Draw ``n`` i.i.d. samples from ``spec``."""
    if n < 1:
        raise InvalidParameter("n must be at least 1")
    return cn(as_generator(rng), complex(spec.mean), spec.variance, n)


def empirical_quantile(data, alpha):
    """Type-7 (linear interpolation) empirical quantile.

    ``alpha`` may be a scalar or an array of levels in (0, 1).
    """
    data = np.asarray(data, dtype=float).ravel()
    if data.size == 0:
        raise InvalidParameter("empirical_quantile needs non-empty data")
    a = np.asarray(alpha, dtype=float)
    if np.any((a <= 0) | (a >= 1)):
        raise InvalidParameter("quantile levels must lie in (0, 1)")
    return np.quantile(data, a, method="linear")


def sample_covariance(draws) -> np.ndarray:
    """Unbiased (n - 1) sample covariance of an ``n x d`` matrix of draws."""
    x = np.asarray(draws, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise InvalidParameter("sample_covariance needs at least two rows")
    xc = x - x.mean(axis=0)
    s = xc.T @ xc / (x.shape[0] - 1)
    return 0.5 * (s + s.T)
