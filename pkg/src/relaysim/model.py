"""Generative model of a single-hop relay network with partial CSI.

Source broadcasts a length-K codeword s to L relays over channels h; relay l
receives r = s h_l + w_l, forwards f(r) over channel g_l, and the destination
observes y_l = f(r) g_l + v_l.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from .numerics import InvalidParameter, as_generator, cn

RELAY_KINDS = ("linear", "tanh", "custom")
RELAY_MODES = ("componentwise", "modulus_phase")


@dataclass(frozen=True)
class Constellation:
    points: tuple

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        object.__setattr__(self, "points", pts)
        if len(pts) < 2:
            raise InvalidParameter("a constellation needs at least two points")
        if len(set(pts)) != len(pts):
            raise InvalidParameter("constellation points must be distinct")
        if self.energy <= 0:
            raise InvalidParameter("mean symbol energy must be positive")

    @property
    def M(self):
        return len(self.points)

    @property
    def energy(self):
        return float(np.mean(np.square(self.points)))

    @property
    def array(self):
        return np.asarray(self.points)

    @classmethod
    def pam(cls, M=4):
        return cls(tuple(float(2 * m - M + 1) for m in range(M)))


def codebook(M, K):
    """All M**K codewords as constellation-index rows, in lexicographic order."""
    return np.array(list(itertools.product(range(M), repeat=K)), dtype=np.int64).reshape(-1, K)


def codeword_index(indices, M):
    idx = 0
    for i in np.asarray(indices, dtype=np.int64).ravel():
        idx = idx * M + int(i)
    return idx


@dataclass(frozen=True)
class CodewordPrior:
    """Prior pmf over Omega, stored as a vector aligned with ``codebook(M, K)``."""

    K: int
    pmf: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.asarray(self.pmf, dtype=float).ravel()
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise InvalidParameter("prior probabilities must be finite and non-negative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise InvalidParameter(f"prior pmf sums to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "pmf", p)

    @property
    def log_pmf(self):
        with np.errstate(divide="ignore"):
            return np.log(self.pmf)

    @property
    def support(self):
        return np.flatnonzero(self.pmf > 0)

    @property
    def mode(self):
        # argmax returns the first maximiser, i.e. the lexicographically smallest
        return int(np.argmax(self.pmf))

    @classmethod
    def uniform(cls, M, K):
        return cls(K, np.full(M**K, 1.0 / M**K))

    @classmethod
    def with_masses(cls, constellation, K, masses):
        """Fixed mass on listed codewords (symbol tuples), rest spread equally."""
        M = constellation.M
        lookup = {p: i for i, p in enumerate(constellation.points)}
        pmf = np.zeros(M**K)
        fixed = np.zeros(M**K, dtype=bool)
        for word, mass in masses.items():
            j = codeword_index([lookup[float(x)] for x in word], M)
            pmf[j] = mass
            fixed[j] = True
        rest = 1.0 - pmf.sum()
        n_free = int((~fixed).sum())
        if rest < -1e-12 or (n_free == 0 and abs(rest) > 1e-12):
            raise InvalidParameter("listed masses are inconsistent with a pmf")
        if n_free:
            pmf[~fixed] = rest / n_free
        return cls(K, pmf)

    def sample(self, rng, size=None):
        rng = as_generator(rng)
        return rng.choice(self.pmf.size, size=size, p=self.pmf)


@dataclass(frozen=True)
class ChannelCsi:
    h_hat: np.ndarray
    g_hat: np.ndarray
    sigma_h_sq: float
    sigma_g_sq: float

    def __post_init__(self):
        h = np.asarray(self.h_hat, dtype=complex).ravel()
        g = np.asarray(self.g_hat, dtype=complex).ravel()
        if h.size != g.size or h.size < 1:
            raise InvalidParameter("h_hat and g_hat must have the same non-zero length")
        if self.sigma_h_sq < 0 or self.sigma_g_sq < 0:
            raise InvalidParameter("channel error variances must be non-negative")
        object.__setattr__(self, "h_hat", h)
        object.__setattr__(self, "g_hat", g)

    @property
    def L(self):
        return self.h_hat.size


@dataclass(frozen=True)
class ChannelRealization:
    h: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "h", np.asarray(self.h, dtype=complex).ravel())
        object.__setattr__(self, "g", np.asarray(self.g, dtype=complex).ravel())
        if self.h.size != self.g.size:
            raise InvalidParameter("h and g must have the same length")


@dataclass(frozen=True)
class NoiseSpec:
    sigma_w_sq: float
    sigma_v_sq: float

    def __post_init__(self):
        if not (self.sigma_w_sq > 0 and self.sigma_v_sq > 0):
            raise InvalidParameter("noise variances must be strictly positive")


@dataclass(frozen=True)
class RelayFunction:
    """Memoryless per-symbol relay map.

    ``mode`` controls how a real scalar map acts on complex input:
    componentwise applies it to the real and imaginary parts separately,
    modulus_phase applies it to |r| and keeps the phase.
    """

    kind: str = "tanh"
    mode: str = "componentwise"
    func: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in RELAY_KINDS:
            raise InvalidParameter(f"unknown relay kind {self.kind!r}")
        if self.mode not in RELAY_MODES:
            raise InvalidParameter(f"unknown complex mode {self.mode!r}")
        if self.kind == "custom" and self.func is None:
            raise InvalidParameter("a custom relay needs a scalar function")

    @property
    def code(self):
        """Integer code used by the compiled samplers (custom has none)."""
        if self.kind == "linear":
            return 0
        if self.kind == "tanh":
            return 1 if self.mode == "componentwise" else 2
        return -1

    def __call__(self, r):
        return apply_relay(self, r)


def apply_relay(f: RelayFunction, r):
    r = np.asarray(r, dtype=complex)
    if f.kind == "linear":
        return r.copy()
    fn = np.tanh if f.kind == "tanh" else f.func
    if f.mode == "componentwise":
        out = np.asarray(fn(r.real), dtype=float) + 1j * np.asarray(fn(r.imag), dtype=float)
    else:
        mod = np.abs(r)
        out = np.asarray(fn(mod), dtype=float) * np.exp(1j * np.angle(r))
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("relay function returned non-finite values")
    return out


@dataclass(frozen=True)
class SystemConfig:
    constellation: Constellation
    prior: CodewordPrior
    csi: ChannelCsi
    noise: NoiseSpec
    relay: RelayFunction = RelayFunction()

    def __post_init__(self):
        if self.prior.pmf.size != self.constellation.M**self.prior.K:
            raise InvalidParameter("prior support does not match M**K")

    @property
    def L(self):
        return self.csi.L

    @property
    def K(self):
        return self.prior.K

    @property
    def M(self):
        return self.constellation.M

    def codewords(self):
        """Omega as an (M**K, K) array of symbol values."""
        return self.constellation.array[codebook(self.M, self.K)]

    def symbols(self, index):
        return self.constellation.array[codebook(self.M, self.K)[index]]

    def with_noise(self, noise):
        return SystemConfig(self.constellation, self.prior, self.csi, noise, self.relay)

    def with_csi(self, csi):
        return SystemConfig(self.constellation, self.prior, csi, self.noise, self.relay)

    def with_relay(self, relay):
        return SystemConfig(self.constellation, self.prior, self.csi, self.noise, relay)

    def to_dict(self):
        if self.relay.kind == "custom":
            raise InvalidParameter("custom relay functions cannot be serialised")
        return {
            "constellation": list(self.constellation.points),
            "K": self.K,
            "prior": self.prior.pmf.tolist(),
            "csi": {
                "h_hat": [[z.real, z.imag] for z in self.csi.h_hat],
                "g_hat": [[z.real, z.imag] for z in self.csi.g_hat],
                "sigma_h_sq": self.csi.sigma_h_sq,
                "sigma_g_sq": self.csi.sigma_g_sq,
            },
            "noise": {"sigma_w_sq": self.noise.sigma_w_sq, "sigma_v_sq": self.noise.sigma_v_sq},
            "relay": {"kind": self.relay.kind, "mode": self.relay.mode},
        }

    @classmethod
    def from_dict(cls, d):
        const = Constellation(tuple(d["constellation"]))
        c = d["csi"]
        csi = ChannelCsi(
            np.array([complex(*z) for z in c["h_hat"]]),
            np.array([complex(*z) for z in c["g_hat"]]),
            float(c["sigma_h_sq"]),
            float(c["sigma_g_sq"]),
        )
        return cls(
            const,
            CodewordPrior(int(d["K"]), np.asarray(d["prior"], dtype=float)),
            csi,
            NoiseSpec(float(d["noise"]["sigma_w_sq"]), float(d["noise"]["sigma_v_sq"])),
            RelayFunction(d["relay"]["kind"], d["relay"].get("mode", "componentwise")),
        )


def snr_to_noise(snr_db, constellation: Constellation) -> NoiseSpec:
    """Equal relay/destination noise variance E_s / 10**(snr_db / 10)."""
    if not np.isfinite(snr_db):
        raise InvalidParameter("snr_db must be finite")
    var = constellation.energy / 10.0 ** (snr_db / 10.0)
    return NoiseSpec(var, var)


def default_config(L=5, snr_db=15.0, relay=None, h_hat=1.0 + 0j, g_hat=1.0 + 0j):
    """The reference setup: 4-PAM, K = 2, two prior modes, tanh relays.

    p([1, 1]) = p([-1, 1]) = 0.3 and the other 14 codewords share 0.4.
    Channel estimates default to 1 on every link with error variance 0.1.
    """
    const = Constellation((-3.0, -1.0, 1.0, 3.0))
    prior = CodewordPrior.with_masses(const, 2, {(1, 1): 0.3, (-1, 1): 0.3})
    csi = ChannelCsi(np.full(L, h_hat, dtype=complex), np.full(L, g_hat, dtype=complex), 0.1, 0.1)
    return SystemConfig(const, prior, csi, snr_to_noise(snr_db, const), relay or RelayFunction("tanh"))


def draw_channels(csi: ChannelCsi, rng) -> ChannelRealization:
    rng = as_generator(rng)
    h = cn(rng, csi.h_hat, csi.sigma_h_sq, csi.L)
    g = cn(rng, csi.g_hat, csi.sigma_g_sq, csi.L)
    return ChannelRealization(h, g)


def relay_noise(config: SystemConfig, rng):
    return cn(as_generator(rng), 0.0, config.noise.sigma_w_sq, (config.L, config.K))


def noiseless_output(config, s, channels, w):
    """f(s h_l + w_l) g_l for every relay, as an L x K array."""
    s = np.asarray(s, dtype=float)
    r = channels.h[:, None] * s[None, :] + w
    return apply_relay(config.relay, r) * channels.g[:, None]


def simulate_forward(config: SystemConfig, s, channels: ChannelRealization, rng, return_noise=False):
    """Draw one L x K observation for codeword ``s`` (symbol values).

    With ``return_noise`` the relay noise realisation is returned as well,
    which the oracle detector needs.
    """
    rng = as_generator(rng)
    w = relay_noise(config, rng)
    v = cn(rng, 0.0, config.noise.sigma_v_sq, (config.L, config.K))
    y = noiseless_output(config, s, channels, w) + v
    return (y, w) if return_noise else y


def cn_logpdf(x, mean, variance):
    """Elementwise log density of CN(mean, variance) (total variance)."""
    return -np.log(np.pi * variance) - np.abs(x - mean) ** 2 / variance


def linear_likelihood(y_l, s, h_l, g_l, noise: NoiseSpec, log=False):
    """Closed-form likelihood of one relay branch under a linear relay.

    y_l ~ CN(s h_l g_l, (|g_l|^2 sigma_w^2 + sigma_v^2) I).
    """
    var = abs(g_l) ** 2 * noise.sigma_w_sq + noise.sigma_v_sq
    mean = np.asarray(s, dtype=float) * h_l * g_l
    ll = float(np.sum(cn_logpdf(np.asarray(y_l), mean, var)))
    return ll if log else float(np.exp(ll))
