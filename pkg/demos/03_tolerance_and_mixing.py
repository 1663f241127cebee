"""How the tolerance trades posterior accuracy for chain mixing."""

import warnings

import numpy as np

from relaysim import (AbcSpec, DistanceMetric, ProposalScales, RngStream, SummarySpec, default_config,
                      draw_channels, estimate_summary_covariance, run_mcmc_abc, simulate_forward)
from relaysim.diagnostics import acceptance_rate, acf_curve, DegenerateSeries
from relaysim.harness import self_distances

cfg = default_config(L=5, snr_db=15)
summ = SummarySpec()
metric = DistanceMetric.mahalanobis(estimate_summary_covariance(cfg, summ, 2000, RngStream(1)))

# typical distance between two datasets with identical parameters
d = self_distances(cfg, summ, metric, 500, RngStream(2).generator())
unit = np.sqrt(np.median(d))
print("median self-distance:", round(float(np.median(d)), 2), " -> unit", round(unit, 2))

g = RngStream(3).generator()
y = simulate_forward(cfg, cfg.symbols(cfg.prior.sample(g)), draw_channels(cfg.csi, g), g)

print(" eps/unit   accept   ACF(10)  ACF(50)   mean Re(g1)")
for e in (0.25, 0.5, 1.0, 2.0):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tr = run_mcmc_abc(cfg, y, AbcSpec(summ, metric, "sd", e * unit), ProposalScales(0.05, 0.05, 0.05),
                          20000, 5000, RngStream(4))
    x = tr.g[5000:, 0].real
    try:
        c = acf_curve(x, 50)
    except DegenerateSeries:
        c = np.ones(51)  # the chain never moved
    print(f"  {e:5.2f}    {acceptance_rate(tr):.3f}    {c[10]:.3f}    {c[50]:.3f}     {x.mean():+.3f}")
