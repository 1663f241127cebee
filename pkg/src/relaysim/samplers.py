"""MCMC-ABC and auxiliary-variable MCMC samplers for joint detection.

Both samplers update one randomly chosen component of the parameter vector
per iteration. Symbol proposals are uniform over the constellation, channel
and relay-noise proposals are complex Gaussian random walks, so every
proposal ratio is 1.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .abc import AbcSpec, summarize, distance, tolerance_at, ToleranceSchedule, weight, WeightingFunction
from .model import SystemConfig, codebook, codeword_index, noiseless_output, simulate_forward, ChannelRealization, cn_logpdf
from .numerics import InvalidParameter, as_generator, cn


class ChainStuckWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class ProposalScales:
    """Random-walk variances for the g, h and relay-noise kernels."""

    sigma_g_rw_sq: float = 0.05
    sigma_h_rw_sq: float = 0.05
    sigma_w_rw_sq: float = 0.05

    def __post_init__(self):
        if min(self.sigma_g_rw_sq, self.sigma_h_rw_sq, self.sigma_w_rw_sq) <= 0:
            raise InvalidParameter("proposal variances must be positive")

    def scaled(self, c):
        return ProposalScales(self.sigma_g_rw_sq * c, self.sigma_h_rw_sq * c, self.sigma_w_rw_sq * c)


@dataclass
class ChainTrace:
    """Per-iteration record of a chain.

    ``s_index`` holds codeword indices into ``codebook(M, K)``; ``component``
    is the updated component (-1 for the initial state). ``rho`` is the
    carried discrepancy for ABC chains, ``loglik`` the exact log-likelihood
    for auxiliary-variable chains.
    """

    s_index: np.ndarray
    h: np.ndarray
    g: np.ndarray
    accepted: np.ndarray
    component: np.ndarray
    epsilon: np.ndarray = None
    rho: np.ndarray = None
    loglik: np.ndarray = None
    w: np.ndarray = None
    burn_in: int = 0
    method: str = "mcmc-abc"
    warnings: list = field(default_factory=list)

    def __len__(self):
        return self.s_index.size

    @property
    def stuck(self):
        return any("stuck" in w for w in self.warnings)

    def post_burn_in(self):
        return slice(self.burn_in, len(self))

    def to_rows(self, M, K):
        """Iteration records as dicts, suitable for a CSV dump."""
        words = codebook(M, K)
        rows = []
        for n in range(len(self)):
            row = {
                "iteration": n + 1,
                "component": int(self.component[n]),
                "accepted": int(self.accepted[n]),
                "epsilon": "" if self.epsilon is None else repr(float(self.epsilon[n])),
                "s_indices": " ".join(str(i) for i in words[self.s_index[n]]),
            }
            for l in range(self.h.shape[1]):
                row[f"h{l + 1}_re"] = repr(float(self.h[n, l].real))
                row[f"h{l + 1}_im"] = repr(float(self.h[n, l].imag))
                row[f"g{l + 1}_re"] = repr(float(self.g[n, l].real))
                row[f"g{l + 1}_im"] = repr(float(self.g[n, l].imag))
            rows.append(row)
        return rows


def _check_relay(config):
    if config.relay.code < 0:
        raise InvalidParameter(
            "compiled samplers support linear and tanh relays; use engine='python' for custom maps"
        )


def _stuck_check(trace, window=5000):
    tail = trace.accepted[max(trace.burn_in, len(trace) - window):]
    if tail.size and not tail.any():
        msg = f"chain stuck: no acceptances in the final {tail.size} iterations"
        trace.warnings.append(msg)
        warnings.warn(msg, ChainStuckWarning, stacklevel=3)


# -- single-step reference implementation ---------------------------------

@dataclass(frozen=True)
class AbcState:
    s_index: int
    h: np.ndarray
    g: np.ndarray


@dataclass(frozen=True)
class AvState:
    s_index: int
    h: np.ndarray
    g: np.ndarray
    w: np.ndarray


def n_components(config, auxiliary=False):
    return config.K + 2 * config.L + (config.K * config.L if auxiliary else 0)


def propose_abc(state: AbcState, scales: ProposalScales, config: SystemConfig, rng, component=None):
    """Random-scan proposal: change exactly one of the K + 2L components.

    Components are ordered (s_1..s_K, g_1..g_L, h_1..h_L); ``component``
    forces the choice instead of drawing it uniformly. Returns
    ``(proposal, log_q_ratio, component)``; the ratio is always 0.
    """
    rng = as_generator(rng)
    K, L, M = config.K, config.L, config.M
    i = int(rng.integers(0, K + 2 * L)) if component is None else int(component)
    h, g, s = state.h.copy(), state.g.copy(), state.s_index
    if i < K:
        idx = codebook(M, K)[s].copy()
        idx[i] = rng.integers(0, M)
        s = codeword_index(idx, M)
    elif i < K + L:
        g[i - K] = cn(rng, g[i - K], scales.sigma_g_rw_sq, None)
    else:
        h[i - K - L] = cn(rng, h[i - K - L], scales.sigma_h_rw_sq, None)
    return AbcState(s, h, g), 0.0, i


def _log_prior_abc(state, config):
    c = config.csi
    lp = config.prior.log_pmf[state.s_index]
    if c.sigma_h_sq > 0:
        lp -= np.sum(np.abs(state.h - c.h_hat) ** 2) / c.sigma_h_sq
    if c.sigma_g_sq > 0:
        lp -= np.sum(np.abs(state.g - c.g_hat) ** 2) / c.sigma_g_sq
    return lp


def abc_accept(current: AbcState, proposal: AbcState, y, abc_spec: AbcSpec, config: SystemConfig,
               epsilon, rng, rho_current=None, epsilon_current=None):
    """One MCMC-ABC accept/reject decision with a single synthetic dataset.

    Returns ``(accept, rho)`` where ``rho`` is the discrepancy of the freshly
    simulated data for ``proposal``. Soft-decision weighting needs
    ``rho_current``, the carried discrepancy of the current state, which is
    weighted at ``epsilon_current`` (the previous iteration's tolerance;
    defaults to ``epsilon``).
    """
    rng = as_generator(rng)
    ch = ChannelRealization(proposal.h, proposal.g)
    x = simulate_forward(config, config.symbols(proposal.s_index), ch, rng)
    rho = distance(abc_spec.metric, summarize(abc_spec.summary, y), summarize(abc_spec.summary, x))
    log_prior_ratio = _log_prior_abc(proposal, config) - _log_prior_abc(current, config)
    wf = WeightingFunction(abc_spec.weighting, epsilon)
    u = rng.random()
    if abc_spec.weighting == "hd":
        if weight(wf, rho) == 0.0:
            return False, rho
        return bool(np.log(u) <= min(0.0, log_prior_ratio)), rho
    if rho_current is None:
        raise InvalidParameter("soft-decision acceptance needs the current state's rho")
    eps_cur = epsilon if epsilon_current is None else epsilon_current
    log_alpha = rho_current / eps_cur**2 - rho / epsilon**2 + log_prior_ratio
    return bool(np.log(u) <= min(0.0, log_alpha)), rho


def _run_abc_python(config, y, abc_spec, scales, N, burn_in, rng, channels, init_index, scan="random"):
    """Slow reference chain built from ``propose_abc`` / ``abc_accept`` (D = 1 only).

    ``scan="block"`` makes each iteration update one random symbol, then one
    random g and one random h, each with its own accept/reject step; the
    recorded component is the last one tried.
    """
    K, L = config.K, config.L
    h0 = config.csi.h_hat.copy() if channels is None else channels.h.copy()
    g0 = config.csi.g_hat.copy() if channels is None else channels.g.copy()
    s0 = config.prior.sample(rng) if init_index is None else init_index
    state = AbcState(int(s0), h0, g0)
    t_y = summarize(abc_spec.summary, y)
    x = simulate_forward(config, config.symbols(state.s_index), ChannelRealization(h0, g0), rng)
    rho = distance(abc_spec.metric, t_y, summarize(abc_spec.summary, x))
    sched = ToleranceSchedule(N, abc_spec.epsilon_min)
    out = _empty_trace(N, L)
    _record(out, 0, state, False, -1)
    out["epsilon"][0] = tolerance_at(sched, 1)
    out["rho"][0] = rho
    eps_prev = out["epsilon"][0]
    for n in range(2, N + 1):
        eps = tolerance_at(sched, n) if n <= burn_in else abc_spec.epsilon_min
        if scan == "block":
            picks = [int(rng.integers(0, K))]
            if channels is None:
                picks += [K + int(rng.integers(0, L)), K + L + int(rng.integers(0, L))]
        else:
            picks = [None]
        any_acc = False
        for pick in picks:
            prop, _, comp = propose_abc(state, scales, config, rng, pick)
            if channels is not None and comp >= K:
                acc, rho_new = False, rho
            elif np.isfinite(_log_prior_abc(prop, config)):
                acc, rho_new = abc_accept(state, prop, y, abc_spec, config, eps, rng, rho, eps_prev)
            else:
                acc, rho_new = False, rho
            if acc:
                state, rho = prop, rho_new
            any_acc = any_acc or acc
        eps_prev = eps
        _record(out, n - 1, state, any_acc, comp)
        out["epsilon"][n - 1] = eps
        out["rho"][n - 1] = rho
    return ChainTrace(out["s"], out["h"], out["g"], out["acc"], out["comp"], out["epsilon"],
                      out["rho"], burn_in=burn_in, method="mcmc-abc")


def _empty_trace(N, L):
    return {
        "s": np.empty(N, dtype=np.int64),
        "h": np.empty((N, L), dtype=complex),
        "g": np.empty((N, L), dtype=complex),
        "acc": np.zeros(N, dtype=bool),
        "comp": np.empty(N, dtype=np.int64),
        "epsilon": np.empty(N),
        "rho": np.empty(N),
    }


def _record(out, n, state, acc, comp):
    out["s"][n] = state.s_index
    out["h"][n] = state.h
    out["g"][n] = state.g
    out["acc"][n] = acc
    out["comp"][n] = comp


# -- compiled chains --------------------------------------------------------

def _metric_args(metric, dim):
    Q = metric.quadratic_matrix(dim)
    if Q is not None:
        return 0, np.ascontiguousarray(Q, dtype=float), 2.0
    p = 1.0 if metric.kind == "city_block" else metric.p
    return 1, np.zeros((1, 1)), float(p)


def run_mcmc_abc(config: SystemConfig, y, abc_spec: AbcSpec, scales: ProposalScales, N=20000,
                 burn_in=5000, rng=None, channels=None, init_index=None, engine="numba", scan="random"):
    """Run the MCMC-ABC detector chain on observation ``y``.

    Parameters
    ----------
    channels
        If given, the channels are clamped to this realisation and only the
        symbols are updated (a test configuration, not a detector).
    init_index
        Initial codeword index; drawn from the prior when omitted.
    engine
        ``"numba"`` (default) or ``"python"`` for the step-by-step reference
        implementation, which also supports custom relay functions.
    scan
        ``"random"`` updates one of the K + 2L components per iteration;
        ``"block"`` updates one symbol, one g and one h per iteration
        (python engine only).
    """
    if N <= burn_in:
        raise InvalidParameter("N must exceed burn_in")
    if scan not in ("random", "block"):
        raise InvalidParameter(f"unknown scan {scan!r}")
    rng = as_generator(rng)
    y = np.asarray(y, dtype=complex)
    if scan == "block":
        engine = "python"
    if engine == "python":
        if abc_spec.n_datasets != 1 or abc_spec.refresh_rho:
            raise InvalidParameter("the python engine implements D = 1 without refresh only")
        trace = _run_abc_python(config, y, abc_spec, scales, N, burn_in, rng, channels, init_index, scan)
        _stuck_check(trace)
        return trace
    _check_relay(config)
    K, L = config.K, config.L
    summ = abc_spec.summary
    t_y = summarize(summ, y)
    mkind, Q, p = _metric_args(abc_spec.metric, t_y.size)
    c = config.csi
    h0 = c.h_hat if channels is None else channels.h
    g0 = c.g_hat if channels is None else channels.g
    out = _empty_trace(N, L)
    skind, cmode, pooling = summ.codes
    _kernels.abc_chain(
        rng, t_y, config.constellation.array, config.prior.log_pmf, K, L, c.h_hat, c.g_hat,
        float(c.sigma_h_sq), float(c.sigma_g_sq), float(config.noise.sigma_w_sq),
        float(config.noise.sigma_v_sq), config.relay.code, skind, cmode, pooling,
        np.asarray(summ.levels), mkind, Q, p, 0 if abc_spec.weighting == "hd" else 1,
        float(abc_spec.epsilon_min), int(N), int(burn_in), int(abc_spec.n_datasets),
        bool(abc_spec.refresh_rho), float(scales.sigma_g_rw_sq), float(scales.sigma_h_rw_sq),
        np.array(h0, dtype=complex), np.array(g0, dtype=complex), channels is None,
        -1 if init_index is None else int(init_index),
        out["s"], out["h"], out["g"], out["acc"], out["epsilon"], out["comp"], out["rho"],
    )
    trace = ChainTrace(out["s"], out["h"], out["g"], out["acc"], out["comp"], out["epsilon"],
                       out["rho"], burn_in=burn_in, method="mcmc-abc")
    _stuck_check(trace)
    return trace


def av_log_likelihood(y, state: AvState, config: SystemConfig) -> float:
    """log p(y | s, g, h, w): independent CN(f(s h_l + w_l) g_l, sigma_v^2) entries."""
    mean = noiseless_output(config, config.symbols(state.s_index), ChannelRealization(state.h, state.g), state.w)
    return float(np.sum(cn_logpdf(np.asarray(y), mean, config.noise.sigma_v_sq)))


def run_mcmc_av(config: SystemConfig, y, scales: ProposalScales, N=20000, burn_in=5000, rng=None,
                channels=None, w=None, init_index=None, store_w=False):
    """Run the auxiliary-variable MCMC chain over (s, g, h, w).

    Passing ``channels`` clamps g and h, passing ``w`` clamps the relay
    noise; clamped components are excluded from the random scan.
    """
    if N <= burn_in:
        raise InvalidParameter("N must exceed burn_in")
    _check_relay(config)
    rng = as_generator(rng)
    y = np.asarray(y, dtype=complex)
    K, L = config.K, config.L
    c = config.csi
    h0 = c.h_hat if channels is None else channels.h
    g0 = c.g_hat if channels is None else channels.g
    w0 = cn(rng, 0.0, config.noise.sigma_w_sq, (L, K)) if w is None else np.asarray(w, dtype=complex)
    out = _empty_trace(N, L)
    ll = np.empty(N)
    w_out = np.empty((N if store_w else 0, L, K), dtype=complex)
    _kernels.av_chain(
        rng, y, config.constellation.array, config.prior.log_pmf, K, L, c.h_hat, c.g_hat,
        float(c.sigma_h_sq), float(c.sigma_g_sq), float(config.noise.sigma_w_sq),
        float(config.noise.sigma_v_sq), config.relay.code, int(N), float(scales.sigma_g_rw_sq),
        float(scales.sigma_h_rw_sq), float(scales.sigma_w_rw_sq), np.array(h0, dtype=complex),
        np.array(g0, dtype=complex), np.array(w0, dtype=complex), channels is None, w is None,
        -1 if init_index is None else int(init_index),
        out["s"], out["h"], out["g"], out["acc"], out["comp"], ll, w_out,
    )
    trace = ChainTrace(out["s"], out["h"], out["g"], out["acc"], out["comp"], loglik=ll,
                       w=w_out if store_w else None, burn_in=burn_in, method="mcmc-av")
    _stuck_check(trace)
    return trace


def acceptance_of(trace):
    post = trace.accepted[trace.burn_in:]
    return float(post.mean()) if post.size else 0.0


def tune_proposals(config, y_sample, target=(0.3, 0.5), rng=None, initial=None, sampler="abc",
                   abc_spec=None, pilot_length=2000, pilot_burn_in=500, max_pilots=20):
    """Multiplicative search on the random-walk variances.

    Each pilot chain runs ``pilot_length`` iterations; the common scale is
    halved when the post-burn-in acceptance is too low and doubled when it is
    too high. Returns the first scales inside ``target``, otherwise the best
    pilot seen (with a warning).
    """
    lo, hi = target
    scales = initial or ProposalScales()
    if lo <= 0.0 and hi >= 1.0:
        return scales
    rng = as_generator(rng)
    best, best_gap = scales, np.inf
    for _ in range(max_pilots):
        if sampler == "abc":
            tr = run_mcmc_abc(config, y_sample, abc_spec, scales, pilot_length, pilot_burn_in, rng)
        else:
            tr = run_mcmc_av(config, y_sample, scales, pilot_length, pilot_burn_in, rng)
        rate = acceptance_of(tr)
        if lo <= rate <= hi:
            return scales
        gap = lo - rate if rate < lo else rate - hi
        if gap < best_gap:
            best, best_gap = scales, gap
        scales = scales.scaled(0.5 if rate < lo else 2.0)
    warnings.warn(f"proposal tuning missed {target} after {max_pilots} pilots", RuntimeWarning)
    return best


def generic_abc_mcmc(theta0, log_prior, propose, simulate, summary, discrepancy, epsilon, N, rng=None,
                     weighting="hd"):
    """Plain likelihood-free MH on an arbitrary model.

    ``propose(theta, rng)`` must be symmetric; ``simulate(theta, rng)``
    returns a synthetic dataset; ``summary`` maps data to the compared
    statistic and ``discrepancy(t_x)`` returns rho against the observed
    summary, which the caller binds in. Returns the list of states and the
    acceptance flags.
    """
    rng = as_generator(rng)
    wf = WeightingFunction(weighting, epsilon)
    theta = theta0
    lp = log_prior(theta)
    rho = discrepancy(summary(simulate(theta, rng)))
    states, accepted = [theta], [False]
    for _ in range(N - 1):
        prop = propose(theta, rng)
        lp_new = log_prior(prop)
        acc = False
        if np.isfinite(lp_new):
            rho_new = discrepancy(summary(simulate(prop, rng)))
            w_new = weight(wf, rho_new)
            if w_new > 0:
                if weighting == "hd":
                    log_alpha = lp_new - lp
                else:
                    log_alpha = (rho - rho_new) / epsilon**2 + lp_new - lp
                acc = bool(np.log(rng.random()) <= min(0.0, log_alpha))
            if acc:
                theta, lp, rho = prop, lp_new, rho_new
        states.append(theta)
        accepted.append(acc)
    return states, np.array(accepted)
