"""Acceptance suite: one test per criterion, each printing a single pass/fail line.

The SER sweeps are long (tens of minutes on one core); set RELAYSIM_THREADS
to spread frames over several workers. Results do not depend on it.
"""

import itertools
import json
import os
import subprocess
import sys
import time
import warnings

import numpy as np
import pytest
from scipy import stats

from relaysim import cli, harness
from relaysim.abc import AbcSpec, DistanceMetric, SummarySpec, estimate_summary_covariance
from relaysim.detectors import exact_posterior_known_channels, ses_zf_detect
from relaysim.diagnostics import codeword_frequencies, ks_to_cdf, total_variation
from relaysim.model import RelayFunction, default_config, draw_channels, simulate_forward
from relaysim.numerics import RngStream
from relaysim.samplers import ProposalScales, run_mcmc_abc, run_mcmc_av, tune_proposals

pytestmark = pytest.mark.acceptance

SNRS = (0, 5, 10, 15, 20, 25, 30)
FRAMES = 2000
DIVERSITY_FRAMES = 5000
DIVERSITY_D = 4  # synthetic datasets averaged per acceptance weight, same for every L
SEED = 0
HERE = os.path.dirname(__file__)


def band(a, b, n_symbols_a, n_symbols_b):
    """3 sigma binomial band on the difference of two SER estimates."""
    return 3 * np.hypot(harness.binomial_sigma(a, n_symbols_a), harness.binomial_sigma(b, n_symbols_b))


@pytest.fixture(scope="module")
def l5_row():
    plan = harness.ExperimentPlan(default_config(), L_grid=(5,), snr_grid=SNRS, frames=FRAMES, seed=SEED)
    t0 = time.perf_counter()
    recs = harness.run_ser_sweep(plan)
    wall = time.perf_counter() - t0
    table = {(r.snr_db, r.detector): r for r in recs}
    for snr in SNRS:
        print(f"  L=5 {snr:>2} dB  " + "  ".join(f"{d}={table[(float(snr), d)].ser:.4f}"
                                                  for d in ("omap", "mcmc-abc", "ses-zf")))
    return table, wall


def test_c1_detector_ordering(l5_row, acceptance_report):
    table, wall = l5_row
    bad = []
    for snr in SNRS:
        om = table[(float(snr), "omap")]
        for det in ("mcmc-abc", "ses-zf"):
            r = table[(float(snr), det)]
            assert r.failures == 0 and om.failures == 0
            if om.ser - r.ser > band(om.ser, r.ser, 2 * om.frames, 2 * r.frames):
                bad.append(f"{det}@{snr}dB")
    ok = not bad and wall < 30 * 60
    acceptance_report(1, ok, f"OMAP lowest SER at L=5 over 0-30 dB, {FRAMES} frames; violations={bad or 'none'}; "
                             f"row wall time {wall / 60:.1f} min (limit 30)")
    assert ok


def test_c2_ses_zf_error_floor(l5_row, acceptance_report):
    table, _ = l5_row
    z20, z30 = table[(20.0, "ses-zf")].ser, table[(30.0, "ses-zf")].ser
    o20, o30 = table[(20.0, "omap")].ser, table[(30.0, "omap")].ser
    ok = z30 >= 0.5 * z20 and o30 < 0.25 * o20
    acceptance_report(2, ok, f"SES-ZF 20/30 dB = {z20:.4f}/{z30:.4f} (need 30 >= 0.5x20); "
                             f"OMAP 20/30 dB = {o20:.4f}/{o30:.4f} (need 30 < 0.25x20)")
    assert ok


def test_c3_spatial_diversity(acceptance_report):
    plan = harness.ExperimentPlan(default_config(), L_grid=(1, 5, 10), snr_grid=(25,), frames=DIVERSITY_FRAMES,
                                  detectors=("mcmc-abc",), abc=harness.AbcSettings(n_datasets=DIVERSITY_D), seed=SEED + 3)
    ser = {r.L: r.ser for r in harness.run_ser_sweep(plan)}
    n = 2 * DIVERSITY_FRAMES
    gaps = [(ser[a] - ser[b], band(ser[a], ser[b], n, n)) for a, b in ((1, 5), (5, 10))]
    ok = all(d > b for d, b in gaps)
    acceptance_report(3, ok, f"MCMC-ABC (D={DIVERSITY_D}) SER at 25 dB, {DIVERSITY_FRAMES} frames: L=1 {ser[1]:.4f}, L=5 {ser[5]:.4f}, "
                             f"L=10 {ser[10]:.4f}; drops {gaps[0][0]:.4f}>{gaps[0][1]:.4f}, {gaps[1][0]:.4f}>{gaps[1][1]:.4f}")
    assert ok


def test_c4_prior_recovery_at_large_tolerance(acceptance_report):
    cfg = harness.config_for_cell(default_config(), 5, 15)
    settings = harness.AbcSettings(weighting="hd", metric="scaled_euclidean")
    summ = settings.summary()
    root = RngStream(SEED, (4,))
    metric = harness.build_metric(settings.metric, estimate_summary_covariance(cfg, summ, 2000, root.child(0)))
    eps_min = harness.tune_tolerance(cfg, summ, metric, "hd", settings.epsilon_quantile, settings.epsilon_factor,
                                     rng=root.child(1).generator())
    g = root.child(2).generator()
    y = simulate_forward(cfg, cfg.symbols(cfg.prior.sample(g)), draw_channels(cfg.csi, g), g)
    spec = AbcSpec(summ, metric, "hd", 1e3 * eps_min)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        scales = tune_proposals(cfg, y, (0.3, 0.5), root.child(3).generator(), ProposalScales(), "abc", spec)
    burn = 5000
    tr = run_mcmc_abc(cfg, y, spec, scales, 100_000, burn, root.child(4))
    sd = np.sqrt(cfg.csi.sigma_g_sq / 2)
    ks = [ks_to_cdf(part(tr.g[burn:, l]), stats.norm(part(cfg.csi.g_hat[l]), sd).cdf)
          for l in range(cfg.L) for part in (np.real, np.imag)]
    tv = total_variation(codeword_frequencies(tr, cfg.prior.pmf.size), cfg.prior.pmf)
    ok = max(ks) < 0.05 and tv < 0.05
    acceptance_report(4, ok, f"HD-ABC at 1000 x eps_min={eps_min:.3g}: max KS over Re/Im g_l = {max(ks):.4f} "
                             f"(mean {np.mean(ks):.4f}), codeword TV = {tv:.4f}; limits 0.05")
    assert ok


@pytest.fixture(scope="module")
def tolerance_study():
    literal = harness.run_tolerance_study(default_config(), harness.TolerancePlan(seed=SEED))
    calibrated = harness.run_tolerance_study(default_config(),
                                             harness.TolerancePlan(seed=SEED, epsilon_unit="self-distance"))
    return literal, calibrated


def _acf_inversions(res, eps):
    lag50 = [res.acf[("sd", "mahalanobis", e)][50] for e in eps]
    return lag50, sum(b > a for a, b in zip(lag50, lag50[1:]))


def test_c5_tolerance_vs_mixing(tolerance_study, acceptance_report):
    literal, calibrated = tolerance_study
    eps = harness.TolerancePlan().epsilons
    lag50, inv = _acf_inversions(literal, eps)
    lag50_c, inv_c = _acf_inversions(calibrated, eps)
    stuck = sum(literal.stuck[("sd", "mahalanobis", e)] for e in eps)
    ok = inv <= 1
    acceptance_report(5, ok, f"SD+Mahalanobis ACF(50) over eps {list(eps)}: {np.round(lag50, 3).tolist()}, "
                             f"{inv} inversions, {stuck} stuck chains; in self-distance units "
                             f"{np.round(lag50_c, 3).tolist()}, {inv_c} inversions")
    assert ok


def test_c6_weighting_metric_comparison(tolerance_study, acceptance_report):
    literal, calibrated = tolerance_study
    e0 = min(harness.TolerancePlan().epsilons)
    sd_m, hd_se = literal.edf_error[("sd", "mahalanobis", e0)], literal.edf_error[("hd", "scaled_euclidean", e0)]
    sd_c, hd_c = calibrated.edf_error[("sd", "mahalanobis", e0)], calibrated.edf_error[("hd", "scaled_euclidean", e0)]
    ok = sd_m <= hd_se
    acceptance_report(6, ok, f"mean max-EDF error at eps={e0}: SD+Mahalanobis {sd_m:.4f} <= HD+scaled-Euclidean "
                             f"{hd_se:.4f}; in self-distance units {sd_c:.4f} vs {hd_c:.4f}")
    assert ok


def test_c7_linear_relay_oracle(acceptance_report):
    cfg = default_config(L=2, snr_db=15, relay=RelayFunction("linear"))
    summ = SummarySpec(kind="identity")
    eps_min = 0.8
    tv_av, tv_abc = [], []
    for d in range(5):
        root = RngStream(SEED, (7, d))
        g = root.child(0).generator()
        ch = draw_channels(cfg.csi, g)
        y = simulate_forward(cfg, cfg.symbols(cfg.prior.sample(g)), ch, g)
        post = exact_posterior_known_channels(y, ch, cfg)
        tr = run_mcmc_av(cfg, y, ProposalScales(), 100_000, 5000, root.child(1), channels=ch)
        tv_av.append(total_variation(codeword_frequencies(tr, 16), post))
        # tolerance ladder down to eps_min; each rung starts where the previous one stopped
        rng, idx = root.child(2).generator(), None
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for eps in np.geomspace(20.0, eps_min, 12):
                spec = AbcSpec(summ, DistanceMetric.euclidean(), "hd", float(eps))
                idx = int(run_mcmc_abc(cfg, y, spec, ProposalScales(), 2000, 0, rng, channels=ch,
                                       init_index=idx).s_index[-1])
            tr = run_mcmc_abc(cfg, y, spec, ProposalScales(), 100_000, 0, rng, channels=ch, init_index=idx)
        tv_abc.append(total_variation(codeword_frequencies(tr, 16), post))
    ok = max(tv_av) < 0.05 and max(tv_abc) < 0.1
    acceptance_report(7, ok, f"linear relay, clamped channels, 5 datasets: max TV MCMC-AV {max(tv_av):.4f} (<0.05), "
                             f"HD-ABC at eps={eps_min} {max(tv_abc):.4f} (<0.1)")
    assert ok


def naive_ses_zf(y, cfg):
    best, best_score = None, -np.inf
    for j, word in enumerate(itertools.product(cfg.constellation.points, repeat=cfg.K)):
        if cfg.prior.pmf[j] == 0:
            continue
        score = np.log(cfg.prior.pmf[j])
        for l in range(cfg.L):
            for k in range(cfg.K):
                r = word[k] * cfg.csi.h_hat[l]
                fr = complex(np.tanh(r.real), np.tanh(r.imag))
                score -= abs(y[l][k] - fr * cfg.csi.g_hat[l]) ** 2 / cfg.noise.sigma_v_sq
        if score > best_score:
            best, best_score = j, score
    return best


def test_c8_ses_zf_brute_force(acceptance_report):
    cfg = default_config(L=5, snr_db=10)
    g = RngStream(SEED, (8,)).generator()
    agree = 0
    for _ in range(100):
        ch = draw_channels(cfg.csi, g)
        y = simulate_forward(cfg, cfg.symbols(cfg.prior.sample(g)), ch, g)
        agree += ses_zf_detect(y, cfg).s_index == naive_ses_zf(y, cfg)
    acceptance_report(8, agree == 100, f"SES-ZF vs naive exhaustive search: {agree}/100 frames agree")
    assert agree == 100


UNIT_SUITE = [
    "test_numerics.py::test_cn_moments_and_circularity",
    "test_numerics.py::test_cn_parts_are_gaussian",
    "test_numerics.py::test_quantile_examples",
    "test_numerics.py::test_quantile_matches_order_statistic_oracle",
    "test_diagnostics.py::test_acf_of_ar1",
    "test_diagnostics.py::test_ks_null_calibration",
    "test_abc.py::test_metric_axioms",
    "test_abc.py::test_tolerance_schedule_values",
    "test_abc.py::test_weight_values",
]


def test_c9_statistical_unit_suite(acceptance_report):
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider"]
                          + [os.path.join(HERE, t) for t in UNIT_SUITE], capture_output=True, text=True)
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    ok = proc.returncode == 0
    acceptance_report(9, ok, f"CN moments, quantile oracle, AR(1) ACF, KS calibration, metric axioms, "
                             f"schedule, weights: {summary}")
    assert ok, proc.stdout


def test_c10_determinism(tmp_path, acceptance_report):
    plan = json.load(open(os.path.join(HERE, os.pardir, "plans", "quick.json")))
    plan.update({"L_grid": [1, 5], "snr_grid": [10, 25], "frames": 12, "detectors": ["mcmc-abc", "mcmc-av", "ses-zf", "omap"],
                 "sampler": {"N": 3000, "burn_in": 1000, "tune": True}})
    plan["tolerance"].update({"datasets": 3, "baseline_N": 4000, "N": 2000, "burn_in": 500})
    p = tmp_path / "plan.json"
    p.write_text(json.dumps(plan))
    outs = {}
    for threads in (1, 4):
        d = tmp_path / f"t{threads}"
        for cmd in ("sweep", "tolerance-study", "tune"):
            assert cli.main([cmd, "--config", str(p), "--out", str(d), "--threads", str(threads), "--quiet"]) == 0
        assert cli.main(["simulate", "--config", str(p), "--out", str(d), "--frames", "5", "--quiet"]) == 0
        outs[threads] = {f: (d / f).read_bytes()
                         for f in ("ser.csv", "acf.csv", "edf.csv", "edf_grid.csv", "scales.json", "frames.csv")}
    same = [f for f in outs[1] if outs[1][f] == outs[4][f]]
    ok = len(same) == len(outs[1])
    acceptance_report(10, ok, f"1 vs 4 threads, bitwise identical: {sorted(same)}")
    assert ok
