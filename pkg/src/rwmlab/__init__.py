"""rwmlab: random-walk Metropolis kernels, limit theory and diagnostics for
discontinuous product target densities on the hypercube and half-line."""

from .diagnostics import (
    BoundaryStats,
    RunSummary,
    boundary_count,
    esjd,
    estimate_J,
    estimate_lambda,
    estimate_P_d,
    fd_statistics,
    iact,
    omega_inv,
    uniform_accept_oracle,
)
from .diffusion import (
    DiffusionConfig,
    chain_vs_diffusion_autocorr,
    reflected_bm_autocorr,
    simulate_reflected_langevin,
)
from .harness import ExperimentConfig, chain_rng, run_experiment, uniform_start_experiment
from .kernels import (
    JumpChainStep,
    KernelConfig,
    StuckChainError,
    couple_geometrics,
    coupled_rwm_rwh_step,
    mwg_step,
    pseudo_rwm_step,
    rwh_step,
    rwm_step,
)
from .targets import GSpec, TargetDensity, log_density_ratio, normalize, sample_iid
from . import theory

__version__ = "0.1.0"
