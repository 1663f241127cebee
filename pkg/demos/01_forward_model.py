"""Walk through the relay network model: codebook, prior, channels, one frame."""

import numpy as np

from relaysim import RngStream, codebook, default_config, draw_channels, simulate_forward

spacer = "_" * 60

cfg = default_config(L=3, snr_db=15)
print("constellation:", cfg.constellation.points)
print("codewords (K = 2) as constellation indices, first five rows:")
print(codebook(cfg.M, cfg.K)[:5])
print("prior mass on codewords:", np.round(cfg.prior.pmf, 3))
print("prior mode index:", cfg.prior.mode, "->", cfg.symbols(cfg.prior.mode))
print(spacer)

# noise variances follow from the SNR and the mean symbol energy
print("sigma_w^2 = sigma_v^2 =", cfg.noise.sigma_w_sq)

g = RngStream(1).generator()
s = cfg.prior.sample(g)
ch = draw_channels(cfg.csi, g)  # true channels scatter around the CSI estimates
y, w = simulate_forward(cfg, cfg.symbols(s), ch, g, return_noise=True)
print("sent:", cfg.symbols(s))
print("h:", np.round(ch.h, 3))
print("g:", np.round(ch.g, 3))
print("received (one row per relay):")
print(np.round(y, 3))
print(spacer)

# the tanh relay squashes large inputs, so the outer symbols get compressed
for a in cfg.constellation.points:
    print(f"tanh({a:+.0f}) = {np.tanh(a):+.4f}")
