"""Reproducible experiments: SER sweeps and the tolerance/metric study.

Every random quantity is drawn from an ``RngStream`` derived from the master
seed and the position of the work item (cell, frame, purpose), so results do
not depend on thread count or scheduling.
"""

import csv
import hashlib
import json
import logging
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .abc import (AbcSpec, DistanceMetric, SummarySpec, distance, estimate_summary_covariance,
                  regularize_covariance, summarize)
from .detectors import map_from_trace, ses_zf_detect, omap_detect, symbol_errors
from .diagnostics import DegenerateSeries, acf_curve, edf, edf_max_distance, acceptance_rate
from .model import (ChannelCsi, ChannelRealization, SystemConfig, default_config, draw_channels,
                    simulate_forward, snr_to_noise)
from .numerics import InvalidParameter, RngStream, sample_covariance
from .samplers import ProposalScales, run_mcmc_abc, run_mcmc_av, tune_proposals

log = logging.getLogger(__name__)

DETECTORS = ("mcmc-abc", "mcmc-av", "ses-zf", "omap")

# spawn-key purposes
_FRAME, _SETUP = 0, 1
_DATA, _ABC, _AV = 0, 1, 2


def thread_count(threads=None):
    if threads:
        return int(threads)
    env = os.environ.get("RELAYSIM_THREADS")
    return int(env) if env else 1


@dataclass(frozen=True)
class AbcSettings:
    """ABC detector settings for a sweep.

    ``epsilon`` is either a number or ``"auto"``; auto sets epsilon**2 (SD) or
    epsilon (HD) to ``epsilon_factor`` times the ``epsilon_quantile`` of the
    discrepancy between pairs of datasets simulated at the prior mode with CSI
    channels, i.e. the typical distance between two datasets that share all
    parameters. ``n_datasets`` synthetic datasets are averaged in each
    acceptance weight.
    """

    pooling: str = "per_symbol"
    complex_mode: str = "split"
    metric: str = "mahalanobis"
    weighting: str = "sd"
    epsilon: object = "auto"
    epsilon_quantile: float = 0.5
    epsilon_factor: float = 0.25
    covariance_draws: int = 2000
    n_datasets: int = 1

    def summary(self):
        return SummarySpec(pooling=self.pooling, complex_mode=self.complex_mode)


@dataclass(frozen=True)
class SamplerSettings:
    """Chain length and random-walk scales. With ``tune`` the scales are
    adapted on a pilot dataset towards the ``target`` acceptance window."""

    N: int = 20000
    burn_in: int = 5000
    tune: bool = False
    target: tuple = (0.3, 0.5)
    initial_scales: tuple = (0.05, 0.05, 0.05)


@dataclass(frozen=True)
class ExperimentPlan:
    config: SystemConfig
    L_grid: tuple = (1, 2, 5, 10)
    snr_grid: tuple = (0, 5, 10, 15, 20, 25, 30)
    frames: int = 2000
    detectors: tuple = ("mcmc-abc", "ses-zf", "omap")
    abc: AbcSettings = AbcSettings()
    sampler: SamplerSettings = SamplerSettings()
    seed: int = 0

    def __post_init__(self):
        if not self.L_grid or not self.snr_grid:
            raise InvalidParameter("L and SNR grids must be non-empty")
        if self.frames < 1:
            raise InvalidParameter("frames must be >= 1")
        bad = set(self.detectors) - set(DETECTORS)
        if bad:
            raise InvalidParameter(f"unknown detectors {sorted(bad)}")

    def cells(self):
        return [(L, snr) for L in self.L_grid for snr in self.snr_grid]

    def to_dict(self):
        return {
            "config": self.config.to_dict(),
            "L_grid": list(self.L_grid),
            "snr_grid": list(self.snr_grid),
            "frames": self.frames,
            "detectors": list(self.detectors),
            "abc": asdict(self.abc),
            "sampler": {**asdict(self.sampler), "target": list(self.sampler.target),
                        "initial_scales": list(self.sampler.initial_scales)},
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        s = d.get("sampler", {})
        sampler = SamplerSettings(
            int(s.get("N", 20000)), int(s.get("burn_in", 5000)), bool(s.get("tune", False)),
            tuple(s.get("target", (0.3, 0.5))), tuple(s.get("initial_scales", (0.05, 0.05, 0.05))),
        )
        config = SystemConfig.from_dict(d["config"]) if "config" in d else default_config()
        return cls(
            config,
            tuple(int(v) for v in d.get("L_grid", (1, 2, 5, 10))),
            tuple(float(v) for v in d.get("snr_grid", (0, 5, 10, 15, 20, 25, 30))),
            int(d.get("frames", 2000)),
            tuple(d.get("detectors", ("mcmc-abc", "ses-zf", "omap"))),
            AbcSettings(**d.get("abc", {})),
            sampler,
            int(d.get("seed", 0)),
        )

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class SerRecord:
    L: int
    snr_db: float
    detector: str
    frames: int
    errors: int
    ser: float
    failures: int = 0
    wall_time: float = 0.0
    config_hash: str = ""
    seed: int = 0
    scales: tuple = ()
    epsilon: float = float("nan")

    CSV_FIELDS = ("L", "snr_db", "detector", "frames", "errors", "ser", "failures", "epsilon",
                  "scale_g", "scale_h", "scale_w", "config_hash", "seed")

    def row(self):
        sg, sh, sw = (repr(float(v)) for v in self.scales) if self.scales else ("", "", "")
        return {
            "L": self.L, "snr_db": repr(float(self.snr_db)), "detector": self.detector,
            "frames": self.frames, "errors": self.errors, "ser": repr(float(self.ser)),
            "failures": self.failures, "epsilon": repr(float(self.epsilon)),
            "scale_g": sg, "scale_h": sh, "scale_w": sw,
            "config_hash": self.config_hash, "seed": self.seed,
        }


def config_for_cell(base: SystemConfig, L, snr_db) -> SystemConfig:
    """Base config with L relays and noise set from the SNR.

    When ``L`` differs from the base, every relay link reuses the base's
    first channel estimate.
    """
    csi = base.csi
    if csi.L != L:
        csi = ChannelCsi(np.full(L, csi.h_hat[0]), np.full(L, csi.g_hat[0]), csi.sigma_h_sq, csi.sigma_g_sq)
    return SystemConfig(base.constellation, base.prior, csi, snr_to_noise(snr_db, base.constellation), base.relay)


def self_distances(config, summary, metric, n_pairs, rng):
    """Discrepancies between pairs of datasets simulated from the same parameters."""
    s = config.symbols(config.prior.mode)
    ch = ChannelRealization(config.csi.h_hat, config.csi.g_hat)
    out = np.empty(n_pairs)
    for i in range(n_pairs):
        a = summarize(summary, simulate_forward(config, s, ch, rng))
        b = summarize(summary, simulate_forward(config, s, ch, rng))
        out[i] = distance(metric, a, b)
    return out


def tune_tolerance(config, summary, metric, weighting="sd", quantile=0.5, factor=1.0, n_pairs=1000, rng=None):
    """Tolerance from the self-discrepancy scale of the summary.

    For SD weighting the kernel is exp(-rho / eps**2), so eps**2 is set to
    ``factor`` times the quantile; for HD eps itself is.
    """
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    q = factor * float(np.quantile(self_distances(config, summary, metric, n_pairs, rng), quantile))
    return float(np.sqrt(q)) if weighting == "sd" else q


def build_metric(kind, cov):
    if kind == "mahalanobis":
        return DistanceMetric.mahalanobis(cov)
    if kind == "scaled_euclidean":
        return DistanceMetric.scaled_from_covariance(cov)
    if kind == "euclidean":
        return DistanceMetric.euclidean()
    if kind == "city_block":
        return DistanceMetric.city_block()
    raise InvalidParameter(f"metric {kind!r} is not available in sweeps")


@dataclass
class CellContext:
    """Per-cell quantities shared by every frame: ABC spec and tuned scales."""

    config: SystemConfig
    abc_spec: AbcSpec = None
    abc_scales: ProposalScales = None
    av_scales: ProposalScales = None
    N: int = 20000
    burn_in: int = 5000


def prepare_cell(plan: ExperimentPlan, L, snr_db, cell_index, config=None) -> CellContext:
    """Covariance, tolerance and tuned scales for one cell.

    ``config`` overrides the cell's derived configuration (used to detect
    on frames simulated with an explicit noise level).
    """
    config = config or config_for_cell(plan.config, L, snr_db)
    ctx = CellContext(config, N=plan.sampler.N, burn_in=plan.sampler.burn_in)
    setup = RngStream(plan.seed, (cell_index, _SETUP))
    init = ProposalScales(*plan.sampler.initial_scales)
    if "mcmc-abc" in plan.detectors:
        a = plan.abc
        summary = a.summary()
        cov = estimate_summary_covariance(config, summary, a.covariance_draws, setup.child(0).generator())
        metric = build_metric(a.metric, cov)
        if a.epsilon == "auto":
            eps = tune_tolerance(config, summary, metric, a.weighting, a.epsilon_quantile,
                                 a.epsilon_factor, rng=setup.child(1).generator())
        else:
            eps = float(a.epsilon)
        ctx.abc_spec = AbcSpec(summary, metric, a.weighting, eps, n_datasets=a.n_datasets)
        ctx.abc_scales = init
    if "mcmc-av" in plan.detectors:
        ctx.av_scales = init
    if plan.sampler.tune and ("mcmc-abc" in plan.detectors or "mcmc-av" in plan.detectors):
        g = setup.child(2).generator()
        y_pilot = simulate_forward(config, config.symbols(config.prior.sample(g)), draw_channels(config.csi, g), g)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            if ctx.abc_spec is not None:
                ctx.abc_scales = tune_proposals(config, y_pilot, plan.sampler.target, setup.child(3).generator(),
                                                init, "abc", ctx.abc_spec)
            if ctx.av_scales is not None:
                ctx.av_scales = tune_proposals(config, y_pilot, plan.sampler.target, setup.child(4).generator(),
                                               init, "av")
    return ctx


def run_frame(ctx: CellContext, detectors, stream: RngStream):
    """Simulate one frame and run every requested detector on it.

    Returns ``{detector: symbol_errors}``; a detector that raises is reported
    as ``None`` for that frame.
    """
    config = ctx.config
    g = stream.child(_DATA).generator()
    s = int(config.prior.sample(g))
    channels = draw_channels(config.csi, g)
    y, w = simulate_forward(config, config.symbols(s), channels, g, return_noise=True)
    out = {}
    for det in detectors:
        try:
            if det == "ses-zf":
                d = ses_zf_detect(y, config)
            elif det == "omap":
                d = omap_detect(y, channels, w, config)
            elif det == "mcmc-abc":
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    tr = run_mcmc_abc(config, y, ctx.abc_spec, ctx.abc_scales, ctx.N, ctx.burn_in,
                                      stream.child(_ABC).generator())
                d = map_from_trace(tr)
            elif det == "mcmc-av":
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    tr = run_mcmc_av(config, y, ctx.av_scales, ctx.N, ctx.burn_in, stream.child(_AV).generator())
                d = map_from_trace(tr)
            else:
                raise InvalidParameter(det)
            out[det] = symbol_errors(config, d.s_index, s)
        except Exception as exc:  # recorded per frame, never dropped
            log.warning("frame %s: %s failed: %s", stream.stream_id, det, exc)
            out[det] = None
    return out


def run_cell(plan, L, snr_db, cell_index, threads=1):
    t0 = time.perf_counter()
    ctx = prepare_cell(plan, L, snr_db, cell_index)
    streams = [RngStream(plan.seed, (cell_index, _FRAME, f)) for f in range(plan.frames)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(lambda st: run_frame(ctx, plan.detectors, st), streams))
    else:
        results = [run_frame(ctx, plan.detectors, st) for st in streams]
    wall = time.perf_counter() - t0
    records = []
    K = ctx.config.K
    for det in plan.detectors:
        errs = [r[det] for r in results]
        ok = [e for e in errs if e is not None]
        fails = len(errs) - len(ok)
        n_ok = len(ok)
        ser = sum(ok) / (n_ok * K) if n_ok else float("nan")
        scales = ()
        eps = float("nan")
        if det == "mcmc-abc":
            sc = ctx.abc_scales
            scales = (sc.sigma_g_rw_sq, sc.sigma_h_rw_sq, sc.sigma_w_rw_sq)
            eps = ctx.abc_spec.epsilon_min
        elif det == "mcmc-av":
            sc = ctx.av_scales
            scales = (sc.sigma_g_rw_sq, sc.sigma_h_rw_sq, sc.sigma_w_rw_sq)
        records.append(SerRecord(L, float(snr_db), det, n_ok, int(sum(ok)), ser, fails, wall,
                                 plan.config_hash(), plan.seed, scales, eps))
    return records


def run_ser_sweep(plan: ExperimentPlan, threads=None, progress=None):
    """SER for every (L, SNR, detector) cell of the plan."""
    threads = thread_count(threads)
    records = []
    for ci, (L, snr) in enumerate(plan.cells()):
        recs = run_cell(plan, L, snr, ci, threads)
        records.extend(recs)
        if progress:
            progress(L, snr, recs)
    return records


def binomial_sigma(ser, n_symbols):
    return float(np.sqrt(max(ser * (1 - ser), 0.0) / n_symbols))


# -- tolerance / metric study ---------------------------------------------

@dataclass(frozen=True)
class TolerancePlan:
    """Settings for the tolerance-versus-mixing and metric comparison study.

    Tolerances are multiplied by ``epsilon_unit`` before use. The string
    ``"self-distance"`` sets the unit to the square root of the median
    Mahalanobis discrepancy between two datasets that share all parameters,
    so that epsilon = 1 puts the SD weight at exp(-1) for a typical match.
    """

    L: int = 5
    snr_db: float = 15.0
    epsilons: tuple = (0.25, 0.5, 0.75, 1.0)
    baseline_epsilon: float = 0.2
    baseline_N: int = 100000
    N: int = 20000
    burn_in: int = 5000
    datasets: int = 20
    combos: tuple = (("sd", "mahalanobis"), ("sd", "scaled_euclidean"),
                     ("hd", "mahalanobis"), ("hd", "scaled_euclidean"))
    tuning_target: tuple = (0.1, 0.3)
    max_lag: int = 200
    pooling: str = "all"
    epsilon_unit: object = 1.0
    seed: int = 0

    @classmethod
    def from_dict(cls, d, seed=0):
        kw = dict(d)
        for key in ("epsilons", "tuning_target"):
            if key in kw:
                kw[key] = tuple(kw[key])
        return cls(seed=seed, **kw)


@dataclass
class ToleranceResult:
    acf: dict = field(default_factory=dict)        # (weighting, metric, eps) -> mean ACF curve
    edf_error: dict = field(default_factory=dict)  # (weighting, metric, eps) -> mean max EDF error
    edf_errors: dict = field(default_factory=dict)  # per-dataset errors
    stuck: dict = field(default_factory=dict)      # (weighting, metric, eps) -> stuck-chain count
    acceptance: dict = field(default_factory=dict)
    scales: dict = field(default_factory=dict)     # eps -> tuned ProposalScales
    baseline_acceptance: list = field(default_factory=list)
    epsilon_unit: float = 1.0
    edf_grid: dict = field(default_factory=dict)   # (weighting, metric, eps) -> (grid, edf) of dataset 0


def _acf_or_flag(series, max_lag):
    try:
        return acf_curve(series, max_lag), False
    except DegenerateSeries:
        # a frozen chain is perfectly correlated with itself at every lag
        return np.ones(max_lag + 1), True


def run_tolerance_study(config: SystemConfig, plan: TolerancePlan = TolerancePlan(), threads=None):
    """ACF and EDF-error tables for each (weighting, metric, tolerance).

    The reference EDF of Re(g_1) comes from a long SD + Mahalanobis chain at
    the baseline tolerance. Random-walk scales are tuned once per tolerance
    with SD + Mahalanobis and reused by every other combination.
    """
    config = config_for_cell(config, plan.L, plan.snr_db)
    summary = SummarySpec(pooling=plan.pooling)
    root = RngStream(plan.seed, (99,))
    cov = estimate_summary_covariance(config, summary, 2000, root.child(0).generator())
    metrics = {"mahalanobis": DistanceMetric.mahalanobis(cov),
               "scaled_euclidean": DistanceMetric.scaled_from_covariance(cov)}
    res = ToleranceResult()
    unit = plan.epsilon_unit
    if unit == "self-distance":
        d = self_distances(config, summary, metrics["mahalanobis"], 1000, root.child(6).generator())
        unit = float(np.sqrt(np.median(d)))
    res.epsilon_unit = unit = float(unit)

    pilot = root.child(1).generator()
    y_pilot = simulate_forward(config, config.symbols(config.prior.sample(pilot)), draw_channels(config.csi, pilot), pilot)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for j, eps in enumerate((plan.baseline_epsilon,) + tuple(plan.epsilons)):
            spec = AbcSpec(summary, metrics["mahalanobis"], "sd", eps * unit)
            res.scales[eps] = tune_proposals(config, y_pilot, plan.tuning_target, root.child(2, j).generator(),
                                             ProposalScales(), "abc", spec)

    def one_dataset(d):
        g = root.child(3, d).generator()
        s = config.prior.sample(g)
        y = simulate_forward(config, config.symbols(s), draw_channels(config.csi, g), g)
        out = {}
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            base_spec = AbcSpec(summary, metrics["mahalanobis"], "sd", plan.baseline_epsilon * unit)
            base = run_mcmc_abc(config, y, base_spec, res.scales[plan.baseline_epsilon], plan.baseline_N,
                                plan.burn_in, root.child(4, d).generator())
            base_edf = edf(base.g[plan.burn_in:, 0].real)
            out["baseline_acc"] = acceptance_rate(base)
            for c, (wk, mk) in enumerate(plan.combos):
                for e, eps in enumerate(plan.epsilons):
                    spec = AbcSpec(summary, metrics[mk], wk, eps * unit)
                    tr = run_mcmc_abc(config, y, spec, res.scales[eps], plan.N, plan.burn_in,
                                      root.child(5, d, c, e).generator())
                    series = tr.g[plan.burn_in:, 0].real
                    curve, stuck = _acf_or_flag(series, plan.max_lag)
                    e_d = edf(series)
                    out[(wk, mk, eps)] = (curve, stuck, edf_max_distance(e_d, base_edf), acceptance_rate(tr), e_d)
        return out

    threads = thread_count(threads)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            per = list(pool.map(one_dataset, range(plan.datasets)))
    else:
        per = [one_dataset(d) for d in range(plan.datasets)]

    res.baseline_acceptance = [p["baseline_acc"] for p in per]
    for wk, mk in plan.combos:
        for eps in plan.epsilons:
            key = (wk, mk, eps)
            res.acf[key] = np.mean([p[key][0] for p in per], axis=0)
            res.stuck[key] = int(sum(p[key][1] for p in per))
            res.edf_errors[key] = [p[key][2] for p in per]
            res.edf_error[key] = float(np.mean(res.edf_errors[key]))
            res.acceptance[key] = float(np.mean([p[key][3] for p in per]))
            res.edf_grid[key] = per[0][key][4]
    return res


# -- file outputs ---------------------------------------------------------

def write_ser_csv(records, path):
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=SerRecord.CSV_FIELDS, lineterminator="\n")
        wr.writeheader()
        for r in records:
            wr.writerow(r.row())


def read_ser_csv(path):
    """Load ser.csv rows, re-checking SER = errors / (frames K)."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            row["L"] = int(row["L"])
            row["snr_db"] = float(row["snr_db"])
            row["frames"] = int(row["frames"])
            row["errors"] = int(row["errors"])
            row["ser"] = float(row["ser"])
            rows.append(row)
    return rows


def check_ser_rows(rows, K):
    for r in rows:
        if not 0.0 <= r["ser"] <= 1.0:
            raise ValueError(f"SER out of range in row {r}")
        if r["frames"] and abs(r["ser"] - r["errors"] / (r["frames"] * K)) > 1e-12:
            raise ValueError(f"inconsistent SER in row {r}")


def write_acf_csv(result: ToleranceResult, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["weighting", "metric", "epsilon", "lag", "acf", "stuck_chains"])
        for (wk, mk, eps), curve in result.acf.items():
            for lag, v in enumerate(curve):
                wr.writerow([wk, mk, repr(eps), lag, repr(float(v)), result.stuck[(wk, mk, eps)]])


def write_edf_csv(result: ToleranceResult, path):
    """Mean max-EDF error per configuration, then the dataset-0 EDFs on their grids."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["weighting", "metric", "epsilon", "mean_max_edf_error", "acceptance", "stuck_chains"])
        for key, v in result.edf_error.items():
            wk, mk, eps = key
            wr.writerow([wk, mk, repr(eps), repr(v), repr(result.acceptance[key]), result.stuck[key]])


def write_edf_grid_csv(result: ToleranceResult, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["weighting", "metric", "epsilon", "grid", "edf"])
        for (wk, mk, eps), e in result.edf_grid.items():
            for x, c in zip(e.values, e.cumulative):
                wr.writerow([wk, mk, repr(eps), repr(float(x)), repr(float(c))])


def run_meta(plan_dict, seed, config_hash, extra=None):
    """Metadata recorded next to every result set."""
    meta = {
        "config_hash": config_hash,
        "seed": seed,
        "snr_mapping": "sigma_w^2 = sigma_v^2 = E_s / 10^(snr_db/10)",
        "flags": {
            "complex_gaussian": "total variance, split equally between real and imaginary parts",
            "relay_complex_mode": "componentwise tanh unless configured otherwise",
            "summary": "type-7 empirical quantiles of real and imaginary parts",
            "map_estimator": "empirical mode of post-burn-in codeword samples, ties to smallest index",
            "symbol_proposal": "uniform over the M constellation points",
            "random_scan": "one component per iteration",
            "synthetic_datasets_per_iteration": "plan abc.n_datasets (1 unless set)",
            "sd_current_rho": "carried from the last acceptance",
            "annealing": "max(N - 10 n, eps_min) during burn-in only",
            "acf_normalisation": "sample variance",
            "frames_per_cell_note": "binomial 95% half-width at SER 0.01 with 2000 frames, K = 2 is about 0.004",
        },
        "plan": plan_dict,
    }
    if extra:
        meta.update(extra)
    return meta
