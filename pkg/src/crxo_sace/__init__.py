"""Bayesian survivor-average-causal-effect estimation for two-period
cluster-randomized crossover trials, with a simulation study harness."""

from .core import (
    ModelConfig,
    ParameterState,
    PosteriorDraws,
    PriorSpec,
    StratumLabel,
    TrialData,
    initial_strata,
    validate,
)
from .design import DesignMatrices, build_designs, stratum_views
from .estimands import SaceSummary, hpd_interval, sace_ldiff, sace_rom, summarize
from .gibbs import ChainResult, build_sweep_plan, init_state, run_chain
from .pg import active_backend, sample_pg1
from .rng import RngStream, sample_invgamma, sample_mvn
from .simulate import (
    SimulationScenario,
    generate_trial,
    scenario_preset,
    tau_from_icc,
    true_sace,
    variances_from_correlations,
)

__version__ = "0.1.0"
