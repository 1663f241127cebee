"""Likelihood-free symbol detection for nonlinear relay networks."""

from .numerics import (
    ComplexGaussianSpec,
    InvalidParameter,
    RngStream,
    empirical_quantile,
    sample_covariance,
    sample_cn,
)
from .model import (
    ChannelCsi,
    ChannelRealization,
    CodewordPrior,
    Constellation,
    NoiseSpec,
    RelayFunction,
    SystemConfig,
    apply_relay,
    codebook,
    default_config,
    draw_channels,
    linear_likelihood,
    simulate_forward,
    snr_to_noise,
)
from .abc import (
    AbcSpec,
    DistanceMetric,
    SummarySpec,
    ToleranceSchedule,
    WeightingFunction,
    distance,
    estimate_summary_covariance,
    summarize,
    tolerance_at,
    weight,
)
from .samplers import (
    ChainTrace,
    ProposalScales,
    generic_abc_mcmc,
    run_mcmc_abc,
    run_mcmc_av,
    tune_proposals,
)
from .detectors import (
    Detection,
    exact_posterior_known_channels,
    map_from_trace,
    omap_detect,
    ses_zf_detect,
)
from .diagnostics import acf, acf_curve, acceptance_rate, edf, edf_max_distance

__version__ = "0.1.0"
