"""Summary statistics, distances, weighting kernels and tolerance schedules."""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import SystemConfig, simulate_forward, ChannelRealization
from .numerics import InvalidParameter, as_generator, sample_covariance

DEFAULT_LEVELS = tuple(np.round(np.arange(1, 10) / 10.0, 10))


@dataclass(frozen=True)
class SummarySpec:
    """How an observation is reduced before comparison.

    kind
        ``"quantile"`` (empirical quantiles at ``levels``) or ``"identity"``.
    complex_mode
        ``"split"`` summarises real and imaginary parts separately,
        ``"modulus"`` summarises |y|.
    pooling
        ``"all"`` pools every relay and symbol slot into one sample;
        ``"per_symbol"`` takes quantiles across relays separately for each
        symbol position, which keeps the summary sensitive to symbol order.
    """

    kind: str = "quantile"
    levels: tuple = DEFAULT_LEVELS
    complex_mode: str = "split"
    pooling: str = "all"

    def __post_init__(self):
        if self.kind not in ("quantile", "identity"):
            raise InvalidParameter(f"unknown summary kind {self.kind!r}")
        if self.complex_mode not in ("split", "modulus"):
            raise InvalidParameter(f"unknown complex mode {self.complex_mode!r}")
        if self.pooling not in ("all", "per_symbol"):
            raise InvalidParameter(f"unknown pooling {self.pooling!r}")
        lv = tuple(float(a) for a in self.levels)
        if not lv or any(a <= 0 or a >= 1 for a in lv) or any(b <= a for a, b in zip(lv, lv[1:])):
            raise InvalidParameter("levels must be strictly increasing inside (0, 1)")
        object.__setattr__(self, "levels", lv)

    def dim(self, L, K):
        parts = 2 if self.complex_mode == "split" else 1
        if self.kind == "identity":
            return parts * L * K
        groups = K if self.pooling == "per_symbol" else 1
        return parts * groups * len(self.levels)

    @property
    def codes(self):
        return (
            0 if self.kind == "quantile" else 1,
            0 if self.complex_mode == "split" else 1,
            0 if self.pooling == "all" else 1,
        )


def _components(spec, y):
    if spec.complex_mode == "split":
        return [y.real, y.imag]
    return [np.abs(y)]


def summarize(spec: SummarySpec, obs) -> np.ndarray:
    """Summary vector of an L x K complex observation."""
    y = np.atleast_2d(np.asarray(obs, dtype=complex))
    if y.size == 0:
        raise InvalidParameter("cannot summarise an empty observation")
    parts = _components(spec, y)
    if spec.kind == "identity":
        return np.concatenate([p.ravel() for p in parts])
    q = np.asarray(spec.levels)
    if spec.pooling == "all":
        return np.concatenate([np.quantile(p.ravel(), q, method="linear") for p in parts])
    return np.concatenate(
        [np.quantile(p[:, k], q, method="linear") for p in parts for k in range(y.shape[1])]
    )


METRIC_KINDS = ("euclidean", "scaled_euclidean", "mahalanobis", "lp", "city_block")


@dataclass(frozen=True)
class DistanceMetric:
    """A discrepancy between summary vectors.

    The quadratic kinds (euclidean, scaled_euclidean, mahalanobis) return the
    quadratic form without a square root: sum of squared errors, sum of
    ``weights * d**2``, and ``d @ inv(cov) @ d`` respectively.
    """

    kind: str = "euclidean"
    weights: np.ndarray = field(default=None, repr=False)
    cov: np.ndarray = field(default=None, repr=False)
    p: float = 2.0
    precision: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in METRIC_KINDS:
            raise InvalidParameter(f"unknown metric {self.kind!r}")
        if self.kind == "scaled_euclidean":
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.size == 0 or np.any(w <= 0):
                raise InvalidParameter("scaled Euclidean weights must be positive")
            object.__setattr__(self, "weights", w)
        if self.kind == "mahalanobis":
            cov = regularize_covariance(np.atleast_2d(np.asarray(self.cov, dtype=float)))
            object.__setattr__(self, "cov", cov)
            object.__setattr__(self, "precision", np.linalg.inv(cov))
        if self.kind == "lp" and self.p < 1:
            raise InvalidParameter("Lp distance needs p >= 1")

    @classmethod
    def euclidean(cls):
        return cls("euclidean")

    @classmethod
    def scaled_euclidean(cls, weights):
        return cls("scaled_euclidean", weights=weights)

    @classmethod
    def scaled_from_covariance(cls, cov):
        """Mahalanobis with the off-diagonal covariance dropped."""
        return cls("scaled_euclidean", weights=1.0 / np.diag(np.atleast_2d(cov)))

    @classmethod
    def mahalanobis(cls, cov):
        return cls("mahalanobis", cov=cov)

    @classmethod
    def lp(cls, p):
        return cls("lp", p=float(p))

    @classmethod
    def city_block(cls):
        return cls("city_block")

    def quadratic_matrix(self, dim):
        """Matrix Q with rho = d @ Q @ d, or None for the non-quadratic kinds."""
        if self.kind == "euclidean":
            return np.eye(dim)
        if self.kind == "scaled_euclidean":
            return np.diag(self.weights)
        if self.kind == "mahalanobis":
            return self.precision
        return None


def regularize_covariance(cov, rel_ridge=1e-8):
    """Symmetrise and add a relative ridge; warn if that was not enough for PD."""
    cov = 0.5 * (cov + cov.T)
    d = cov.shape[0]
    tr = np.trace(cov)
    ridge = rel_ridge * (tr / d if tr > 0 else 1.0)
    out = cov + ridge * np.eye(d)
    eig = np.linalg.eigvalsh(out)
    if eig[0] <= 0:
        warnings.warn("summary covariance is not positive definite; adding extra ridge", RuntimeWarning)
        out = out + (abs(eig[0]) + ridge) * np.eye(d)
        if np.linalg.eigvalsh(out)[0] <= 0:
            raise np.linalg.LinAlgError("summary covariance is singular after regularisation")
    return out


def distance(metric: DistanceMetric, t_y, t_x) -> float:
    a = np.asarray(t_y, dtype=float).ravel()
    b = np.asarray(t_x, dtype=float).ravel()
    if a.shape != b.shape:
        raise InvalidParameter(f"summary dimensions differ: {a.shape} vs {b.shape}")
    d = a - b
    k = metric.kind
    if k == "euclidean":
        return float(np.sum(d * d))
    if k == "scaled_euclidean":
        if metric.weights.size != d.size:
            raise InvalidParameter("weight vector does not match summary dimension")
        return float(np.sum(metric.weights * d * d))
    if k == "mahalanobis":
        if metric.precision.shape[0] != d.size:
            raise InvalidParameter("covariance does not match summary dimension")
        return float(max(d @ metric.precision @ d, 0.0))
    if k == "city_block":
        return float(np.sum(np.abs(d)))
    return float(np.sum(np.abs(d) ** metric.p) ** (1.0 / metric.p))


@dataclass(frozen=True)
class WeightingFunction:
    """Hard (indicator rho <= eps) or soft (exp(-rho / eps**2)) ABC kernel."""

    kind: str = "sd"
    epsilon: float = 1.0

    def __post_init__(self):
        if self.kind not in ("hd", "sd"):
            raise InvalidParameter(f"unknown weighting {self.kind!r}")
        if not self.epsilon > 0:
            raise InvalidParameter("epsilon must be positive")


def weight(w: WeightingFunction, rho) -> float:
    if w.kind == "hd":
        return 1.0 if rho <= w.epsilon else 0.0
    return float(np.exp(-rho / w.epsilon**2))


@dataclass(frozen=True)
class ToleranceSchedule:
    N: int
    epsilon_min: float

    def __post_init__(self):
        if self.N < 1 or not self.epsilon_min > 0:
            raise InvalidParameter("schedule needs N >= 1 and epsilon_min > 0")


def tolerance_at(sched: ToleranceSchedule, n) -> float:
    """max(N - 10 n, epsilon_min)."""
    return max(float(sched.N - 10 * n), sched.epsilon_min)


@dataclass(frozen=True)
class AbcSpec:
    """Everything the ABC sampler needs besides the model and the data.

    ``n_datasets`` synthetic datasets are averaged per proposal. With
    ``refresh_rho`` the current state's discrepancy is re-simulated every
    iteration instead of being carried over from its acceptance.
    """

    summary: SummarySpec = SummarySpec()
    metric: DistanceMetric = DistanceMetric()
    weighting: str = "sd"
    epsilon_min: float = 1.0
    n_datasets: int = 1
    refresh_rho: bool = False

    def __post_init__(self):
        WeightingFunction(self.weighting, self.epsilon_min)
        if self.n_datasets < 1:
            raise InvalidParameter("n_datasets must be >= 1")

    def replace(self, **kw):
        d = dict(self.__dict__)
        d.update(kw)
        return AbcSpec(**d)


def estimate_summary_covariance(config: SystemConfig, spec: SummarySpec, n_draws=2000, rng=None):
    """Covariance of T(x) for data simulated at the prior mode with CSI channels.

    Returns the regularised (symmetric positive definite) matrix.
    """
    dim = spec.dim(config.L, config.K)
    if n_draws < dim + 1:
        raise InvalidParameter(f"need at least {dim + 1} draws for a {dim}-dim summary")
    rng = as_generator(rng)
    s = config.symbols(config.prior.mode)
    ch = ChannelRealization(config.csi.h_hat, config.csi.g_hat)
    t = np.empty((n_draws, dim))
    for i in range(n_draws):
        t[i] = summarize(spec, simulate_forward(config, s, ch, rng))
    return regularize_covariance(sample_covariance(t))
