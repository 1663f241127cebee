"""Symbol decisions: chain-based MAP, exhaustive-search baselines, exact oracle."""

from dataclasses import dataclass

import numpy as np

from .model import SystemConfig, ChannelRealization, apply_relay, codebook

MAX_SEARCH = 10**7
METHODS = ("mcmc-abc", "mcmc-av", "ses-zf", "omap", "exact-known-channel")


class SearchBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Detection:
    s_index: int
    score: float
    method: str

    def symbols(self, config):
        return config.symbols(self.s_index)

    def indices(self, config):
        return codebook(config.M, config.K)[self.s_index]


def symbol_errors(config, detected, truth):
    """Number of symbol positions where two codeword indices disagree."""
    words = codebook(config.M, config.K)
    return int(np.sum(words[detected] != words[truth]))


def map_from_trace(trace, burn_in=None) -> Detection:
    """Empirical mode of the post-burn-in codeword samples.

    Ties go to the smallest codeword index, i.e. the lexicographically
    smallest codeword; the score is the log empirical frequency.
    """
    b = trace.burn_in if burn_in is None else burn_in
    post = np.asarray(trace.s_index)[b:]
    if post.size == 0:
        raise ValueError("trace is not longer than the burn-in")
    vals, counts = np.unique(post, return_counts=True)
    j = np.argmax(counts)  # unique() sorts, so the first maximum is the smallest index
    return Detection(int(vals[j]), float(np.log(counts[j] / post.size)), trace.method)


def _check_budget(config):
    if config.M**config.K > MAX_SEARCH:
        raise SearchBudgetExceeded(
            f"exhaustive search over {config.M}**{config.K} codewords exceeds {MAX_SEARCH}"
        )


def _gaussian_search(config, y, means, variance, method):
    """argmax over Omega of sum log CN(y; means[c], variance) + log prior.

    ``means`` has shape (|Omega|, L, K); ``variance`` broadcasts against it.
    """
    y = np.asarray(y, dtype=complex)
    var = np.broadcast_to(np.asarray(variance, dtype=float), means.shape)
    ll = -np.sum(np.log(np.pi * var) + np.abs(y[None] - means) ** 2 / var, axis=(1, 2))
    with np.errstate(invalid="ignore"):
        score = ll + config.prior.log_pmf
    score[config.prior.pmf == 0] = -np.inf
    j = int(np.argmax(score))
    return Detection(j, float(score[j]), method)


def ses_zf_means(config, h, g):
    words = config.codewords()  # (C, K)
    r = words[:, None, :] * np.asarray(h)[None, :, None]
    return apply_relay(config.relay, r) * np.asarray(g)[None, :, None]


def ses_zf_detect(y, config: SystemConfig, csi=None) -> Detection:
    """Zero-forcing exhaustive search: relay noise set to 0, channels to CSI."""
    _check_budget(config)
    csi = csi or config.csi
    means = ses_zf_means(config, csi.h_hat, csi.g_hat)
    return _gaussian_search(config, y, means, config.noise.sigma_v_sq, "ses-zf")


def omap_detect(y, channels: ChannelRealization, w, config: SystemConfig) -> Detection:
    """Oracle MAP: true channels and true relay-noise realisation are known."""
    _check_budget(config)
    words = config.codewords()
    r = words[:, None, :] * channels.h[None, :, None] + np.asarray(w)[None]
    means = apply_relay(config.relay, r) * channels.g[None, :, None]
    return _gaussian_search(config, y, means, config.noise.sigma_v_sq, "omap")


def exact_posterior_known_channels(y, channels: ChannelRealization, config: SystemConfig):
    """Exact p(s | y, h, g) for a linear relay, as a pmf aligned with Omega."""
    if config.relay.kind != "linear":
        raise ValueError("the closed-form posterior needs a linear relay")
    _check_budget(config)
    words = config.codewords()
    h, g = channels.h, channels.g
    means = words[:, None, :] * (h * g)[None, :, None]
    var = (np.abs(g) ** 2 * config.noise.sigma_w_sq + config.noise.sigma_v_sq)[None, :, None]
    y = np.asarray(y, dtype=complex)
    ll = -np.sum(np.log(np.pi * var) + np.abs(y[None] - means) ** 2 / var, axis=(1, 2))
    with np.errstate(divide="ignore"):
        logp = ll + np.log(config.prior.pmf)
    logp -= logp.max()
    p = np.exp(logp)
    return p / p.sum()


def exact_known_channel_detect(y, channels, config) -> Detection:
    p = exact_posterior_known_channels(y, channels, config)
    j = int(np.argmax(p))
    return Detection(j, float(np.log(p[j])), "exact-known-channel")
