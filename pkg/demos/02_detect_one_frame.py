"""Run every detector on the same frame and compare their decisions."""

import warnings

import numpy as np

from relaysim import (AbcSpec, DistanceMetric, ProposalScales, RngStream, SummarySpec, default_config,
                      draw_channels, estimate_summary_covariance, map_from_trace, omap_detect, run_mcmc_abc,
                      run_mcmc_av, ses_zf_detect, simulate_forward)
from relaysim.diagnostics import acceptance_rate, codeword_frequencies
from relaysim.harness import tune_tolerance

cfg = default_config(L=5, snr_db=20)
g = RngStream(7).generator()
s = cfg.prior.sample(g)
ch = draw_channels(cfg.csi, g)
y, w = simulate_forward(cfg, cfg.symbols(s), ch, g, return_noise=True)
print("sent", cfg.symbols(s), "(index", s, ")")

# ABC needs a summary, a metric with a covariance and a tolerance
summ = SummarySpec(pooling="per_symbol")
cov = estimate_summary_covariance(cfg, summ, 2000, RngStream(8))
metric = DistanceMetric.mahalanobis(cov)
eps = tune_tolerance(cfg, summ, metric, "sd", 0.5, 0.25, rng=RngStream(9).generator())
print("tolerance from the self-distance rule:", round(eps, 3))

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    abc = run_mcmc_abc(cfg, y, AbcSpec(summ, metric, "sd", eps), ProposalScales(), 20000, 5000, RngStream(10))
    av = run_mcmc_av(cfg, y, ProposalScales(), 20000, 5000, RngStream(11))

for name, d in (("mcmc-abc", map_from_trace(abc)), ("mcmc-av", map_from_trace(av)),
                ("ses-zf", ses_zf_detect(y, cfg)), ("omap", omap_detect(y, ch, w, cfg))):
    print(f"{name:9s} -> {d.symbols(cfg)}")

print("ABC acceptance after burn-in:", round(acceptance_rate(abc), 3))
freq = codeword_frequencies(abc, 16)
top = np.argsort(freq)[::-1][:3]
print("most visited codewords:", [(int(i), round(float(freq[i]), 3)) for i in top])
