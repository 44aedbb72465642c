"""The blocked Gibbs sampler: initialization, conjugate conditional updates
for the outcome and strata models, Polya-Gamma augmentation, stratum
membership augmentation, and the chain driver.

Every conditional update is split into a ``*_conditional`` function that
returns the analytic parameters (mean and precision for normal blocks, shape
and rate for inverse-gamma blocks) and an ``update_*`` function that draws
from it and writes the state.  The tests verify the conditional parameters
against brute-force evaluations of the joint density.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import estimands
from .core import (
    ModelConfig,
    ParameterState,
    PosteriorDraws,
    PriorSpec,
    StratumLabel,
    TrialData,
    VARIANCE_FIELDS,
    initial_strata,
)
from .design import DesignMatrices, StratumViews, stratum_views
from .pg import sample_pg1
from .rng import sample_invgamma, sample_mvn_from_precision
from .simulate import tau_from_icc

__all__ = [
    "ChainError",
    "ChainResult",
    "SweepPlan",
    "build_sweep_plan",
    "init_state",
    "run_chain",
    "sweep",
]

# Latent-scale intracluster correlation used to benchmark the strata-model
# variance initialization (no analogue of the outcome moment decomposition
# exists on the latent scale).
_INIT_PS_ICC = 0.05
_VARIANCE_FLOOR = 0.01

_PROB_LO = 1e-300
_PROB_HI = 1.0 - 1e-16


class ChainError(RuntimeError):
    """A conditional update failed; the chain is aborted and reported."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


def log1pexp(x: np.ndarray) -> np.ndarray:
    """Overflow-safe log(1 + exp(x))."""
    x = np.asarray(x, dtype=np.float64)
    capped = np.exp(np.minimum(x, 37.0))
    return np.where(x > 37.0, x, np.log1p(capped))


# ---------------------------------------------------------------------------
# Accessor tables for the two outcome strata and two strata-model components.

_OUT = {
    "11": dict(theta="theta_11", xi="xi_11", gamma="gamma_11", sigma2="sigma2_11",
               s2c="sigma2_c_11", s2cp="sigma2_cp_11", coef="out_coef_11",
               err="out_err_11", cluster="out_cluster_11", cp="out_cp_11"),
    "10": dict(theta="theta_10", xi="xi_10", gamma="gamma_10", sigma2="sigma2_10",
               s2c="sigma2_c_10", s2cp="sigma2_cp_10", coef="out_coef_10",
               err="out_err_10", cluster="out_cluster_10", cp="out_cp_10"),
}

_PS = {
    "z": dict(theta="theta_z", eta="eta_z", nu="nu_z", tau2c="tau2_c_z",
              tau2cp="tau2_cp_z", omega="omega_z", coef="ps_coef_z",
              cluster="ps_cluster_z", cp="ps_cp_z",
              label=StratumLabel.ALWAYS_SURVIVOR, other="w"),
    "w": dict(theta="theta_w", eta="eta_w", nu="nu_w", tau2c="tau2_c_w",
              tau2cp="tau2_cp_w", omega="omega_w", coef="ps_coef_w",
              cluster="ps_cluster_w", cp="ps_cp_w",
              label=StratumLabel.PROTECTED, other="z"),
}


def _out_design(g: str, dm: DesignMatrices):
    return dm.D_out_11 if g == "11" else dm.D_out_10


def _out_cp_index(g: str, dm: DesignMatrices):
    # gamma_10 spans only treatment-1 cluster-periods.
    return dm.cp_idx if g == "11" else dm.cp1_idx


def _out_rows(g: str, views: StratumViews):
    return views.rows_y11 if g == "11" else views.rows_y10


def outcome_location(g: str, state: ParameterState, dm: DesignMatrices,
                     rows: np.ndarray) -> np.ndarray:
    """Linear predictor (fixed effects plus both random effects) for rows."""
    f = _OUT[g]
    d = _out_design(g, dm)[rows]
    cp = _out_cp_index(g, dm)[rows]
    return (d @ getattr(state, f["theta"])
            + getattr(state, f["xi"])[dm.cluster_idx[rows]]
            + getattr(state, f["gamma"])[cp])


def ps_predictor(comp: str, state: ParameterState, dm: DesignMatrices) -> np.ndarray:
    """Latent multinomial score for component z or w, all individuals."""
    f = _PS[comp]
    return (dm.D_ps @ getattr(state, f["theta"])
            + getattr(state, f["eta"])[dm.cluster_idx]
            + getattr(state, f["nu"])[dm.cp_idx])


# ---------------------------------------------------------------------------
# Outcome model conditionals (always-survivor "11" and protected "10").


def outcome_coef_conditional(g: str, state, views, dm, data, priors: PriorSpec):
    """Mean and precision of the coefficient conditional for stratum g."""
    f = _OUT[g]
    rows = _out_rows(g, views)
    d = _out_design(g, dm)
    mu0, cov0 = getattr(priors, f["coef"]).params(d.shape[1])
    prec0 = np.linalg.inv(cov0)
    sigma2 = getattr(state, f["sigma2"])
    drows = d[rows]
    resid = (data.log_outcome[rows]
             - getattr(state, f["xi"])[dm.cluster_idx[rows]]
             - getattr(state, f["gamma"])[_out_cp_index(g, dm)[rows]])
    prec = drows.T @ drows / sigma2 + prec0
    b = drows.T @ resid / sigma2 + prec0 @ mu0
    mean = np.linalg.solve(prec, b)
    return mean, prec


def update_outcome_coefficients(g, state, views, dm, data, priors, rng):
    f = _OUT[g]
    mean, prec = outcome_coef_conditional(g, state, views, dm, data, priors)
    try:
        draw = sample_mvn_from_precision(mean, prec, rng)
    except np.linalg.LinAlgError as e:
        raise ChainError(f"outcome_coef_{g}", str(e))
    setattr(state, f["theta"], draw)
    return draw


def outcome_error_conditional(g: str, state, views, dm, data, priors: PriorSpec):
    """(shape, rate) of the error-variance conditional for stratum g."""
    f = _OUT[g]
    rows = _out_rows(g, views)
    prior = getattr(priors, f["err"])
    resid = data.log_outcome[rows] - outcome_location(g, state, dm, rows)
    return prior.shape + rows.shape[0] / 2.0, prior.rate + 0.5 * float(resid @ resid)


def update_outcome_error_variance(g, state, views, dm, data, priors, rng):
    shape, rate = outcome_error_conditional(g, state, views, dm, data, priors)
    val = sample_invgamma(shape, rate, rng)
    setattr(state, _OUT[g]["sigma2"], val)
    return val


def outcome_cluster_conditional(g: str, state, views, dm, data, priors: PriorSpec):
    """Per-cluster mean and precision (diagonal) of the cluster-effect conditional."""
    f = _OUT[g]
    rows = _out_rows(g, views)
    sigma2 = getattr(state, f["sigma2"])
    s2c = getattr(state, f["s2c"])
    cl = dm.cluster_idx[rows]
    resid = (data.log_outcome[rows]
             - _out_design(g, dm)[rows] @ getattr(state, f["theta"])
             - getattr(state, f["gamma"])[_out_cp_index(g, dm)[rows]])
    counts = np.bincount(cl, minlength=dm.n_clusters)
    sums = np.bincount(cl, weights=resid, minlength=dm.n_clusters)
    prec = 1.0 / s2c + counts / sigma2
    mean = (sums / sigma2) / prec
    return mean, prec


def update_outcome_cluster_effects(g, state, views, dm, data, priors, rng):
    f = _OUT[g]
    mean, prec = outcome_cluster_conditional(g, state, views, dm, data, priors)
    draw = mean + rng.standard_normal(mean.shape[0]) / np.sqrt(prec)
    setattr(state, f["xi"], draw)
    return draw


def outcome_cluster_var_conditional(g: str, state, dm, priors: PriorSpec):
    f = _OUT[g]
    prior = getattr(priors, f["cluster"])
    xi = getattr(state, f["xi"])
    return prior.shape + dm.n_clusters / 2.0, prior.rate + 0.5 * float(xi @ xi)


def update_outcome_cluster_variance(g, state, views, dm, data, priors, rng):
    shape, rate = outcome_cluster_var_conditional(g, state, dm, priors)
    val = sample_invgamma(shape, rate, rng)
    setattr(state, _OUT[g]["s2c"], val)
    return val


def outcome_cp_conditional(g: str, state, views, dm, data, priors: PriorSpec):
    """Cluster-period effect conditional; for "10" only treated cluster-periods."""
    f = _OUT[g]
    rows = _out_rows(g, views)
    sigma2 = getattr(state, f["sigma2"])
    s2cp = getattr(state, f["s2cp"])
    size = dm.n_cp if g == "11" else dm.n_cp1
    idx = _out_cp_index(g, dm)[rows]
    resid = (data.log_outcome[rows]
             - _out_design(g, dm)[rows] @ getattr(state, f["theta"])
             - getattr(state, f["xi"])[dm.cluster_idx[rows]])
    counts = np.bincount(idx, minlength=size)
    sums = np.bincount(idx, weights=resid, minlength=size)
    prec = 1.0 / s2cp + counts / sigma2
    mean = (sums / sigma2) / prec
    return mean, prec


def update_outcome_clusterperiod_effects(g, state, views, dm, data, priors, rng):
    f = _OUT[g]
    mean, prec = outcome_cp_conditional(g, state, views, dm, data, priors)
    draw = mean + rng.standard_normal(mean.shape[0]) / np.sqrt(prec)
    setattr(state, f["gamma"], draw)
    return draw


def outcome_cp_var_conditional(g: str, state, dm, priors: PriorSpec):
    f = _OUT[g]
    prior = getattr(priors, f["cp"])
    gamma = getattr(state, f["gamma"])
    return prior.shape + gamma.shape[0] / 2.0, prior.rate + 0.5 * float(gamma @ gamma)


def update_outcome_clusterperiod_variance(g, state, views, dm, data, priors, rng):
    shape, rate = outcome_cp_var_conditional(g, state, dm, priors)
    val = sample_invgamma(shape, rate, rng)
    setattr(state, _OUT[g]["s2cp"], val)
    return val


# ---------------------------------------------------------------------------
# Polya-Gamma latents and strata-model conditionals.


def pg_tilts(state, dm) -> tuple[np.ndarray, np.ndarray]:
    """Exponential-tilt parameters of the two PG conditionals, per individual."""
    z = ps_predictor("z", state, dm)
    w = ps_predictor("w", state, dm)
    return z - log1pexp(w), w - log1pexp(z)


def update_pg_component(comp: str, state, views, dm, data, priors, rng):
    """Redraw one component's PG vector at the current predictors.

    Each component's vector is refreshed immediately before that component's
    coefficient/random-effect blocks: the w-side tilt depends on the z-side
    predictor, so an ω_w drawn before the z blocks move would be conditioned
    on a stale state.
    """
    f = _PS[comp]
    own = ps_predictor(comp, state, dm)
    other = ps_predictor(f["other"], state, dm)
    setattr(state, f["omega"], sample_pg1(own - log1pexp(other), rng))


def update_pg_latents(state, views, dm, data, priors, rng):
    """Refresh both PG vectors at the current predictors (both drawn from
    their exact conditionals; the sweep itself uses the per-component form)."""
    update_pg_component("z", state, views, dm, data, priors, rng)
    update_pg_component("w", state, views, dm, data, priors, rng)


def ps_coef_conditional(comp: str, state, dm, priors: PriorSpec):
    """Mean and precision of the strata-model coefficient conditional."""
    f = _PS[comp]
    mu0, cov0 = getattr(priors, f["coef"]).params(dm.D_ps.shape[1])
    prec0 = np.linalg.inv(cov0)
    omega = getattr(state, f["omega"])
    u = (np.asarray(state.labels) == f["label"]).astype(np.float64)
    other = ps_predictor(f["other"], state, dm)
    offset = (getattr(state, f["eta"])[dm.cluster_idx]
              + getattr(state, f["nu"])[dm.cp_idx])
    pseudo = log1pexp(other) - offset
    d = dm.D_ps
    prec = (d * omega[:, None]).T @ d + prec0
    b = d.T @ (omega * pseudo + (u - 0.5)) + prec0 @ mu0
    mean = np.linalg.solve(prec, b)
    return mean, prec


def update_strata_coefficients(comp, state, views, dm, data, priors, rng):
    f = _PS[comp]
    mean, prec = ps_coef_conditional(comp, state, dm, priors)
    try:
        draw = sample_mvn_from_precision(mean, prec, rng)
    except np.linalg.LinAlgError as e:
        raise ChainError(f"ps_coef_{comp}", str(e))
    setattr(state, f["theta"], draw)
    return draw


def ps_cluster_conditional(comp: str, state, dm, priors: PriorSpec):
    f = _PS[comp]
    omega = getattr(state, f["omega"])
    u = (np.asarray(state.labels) == f["label"]).astype(np.float64)
    other = ps_predictor(f["other"], state, dm)
    fixed = dm.D_ps @ getattr(state, f["theta"]) + getattr(state, f["nu"])[dm.cp_idx]
    resid = log1pexp(other) - fixed
    cl = dm.cluster_idx
    prec = np.bincount(cl, weights=omega, minlength=dm.n_clusters) \
        + 1.0 / getattr(state, f["tau2c"])
    b = np.bincount(cl, weights=omega * resid + (u - 0.5), minlength=dm.n_clusters)
    return b / prec, prec


def update_strata_cluster_effects(comp, state, views, dm, data, priors, rng):
    f = _PS[comp]
    mean, prec = ps_cluster_conditional(comp, state, dm, priors)
    draw = mean + rng.standard_normal(mean.shape[0]) / np.sqrt(prec)
    setattr(state, f["eta"], draw)
    return draw


def ps_cluster_var_conditional(comp: str, state, dm, priors: PriorSpec):
    f = _PS[comp]
    prior = getattr(priors, f["cluster"])
    eta = getattr(state, f["eta"])
    return prior.shape + dm.n_clusters / 2.0, prior.rate + 0.5 * float(eta @ eta)


def update_strata_cluster_variance(comp, state, views, dm, data, priors, rng):
    shape, rate = ps_cluster_var_conditional(comp, state, dm, priors)
    val = sample_invgamma(shape, rate, rng)
    setattr(state, _PS[comp]["tau2c"], val)
    return val


def ps_cp_conditional(comp: str, state, dm, priors: PriorSpec):
    f = _PS[comp]
    omega = getattr(state, f["omega"])
    u = (np.asarray(state.labels) == f["label"]).astype(np.float64)
    other = ps_predictor(f["other"], state, dm)
    fixed = dm.D_ps @ getattr(state, f["theta"]) + getattr(state, f["eta"])[dm.cluster_idx]
    resid = log1pexp(other) - fixed
    cp = dm.cp_idx
    prec = np.bincount(cp, weights=omega, minlength=dm.n_cp) \
        + 1.0 / getattr(state, f["tau2cp"])
    b = np.bincount(cp, weights=omega * resid + (u - 0.5), minlength=dm.n_cp)
    return b / prec, prec


def update_strata_clusterperiod_effects(comp, state, views, dm, data, priors, rng):
    f = _PS[comp]
    mean, prec = ps_cp_conditional(comp, state, dm, priors)
    draw = mean + rng.standard_normal(mean.shape[0]) / np.sqrt(prec)
    setattr(state, f["nu"], draw)
    return draw


def ps_cp_var_conditional(comp: str, state, dm, priors: PriorSpec):
    f = _PS[comp]
    prior = getattr(priors, f["cp"])
    nu = getattr(state, f["nu"])
    return prior.shape + nu.shape[0] / 2.0, prior.rate + 0.5 * float(nu @ nu)


def update_strata_clusterperiod_variance(comp, state, views, dm, data, priors, rng):
    shape, rate = ps_cp_var_conditional(comp, state, dm, priors)
    val = sample_invgamma(shape, rate, rng)
    setattr(state, _PS[comp]["tau2cp"], val)
    return val


# ---------------------------------------------------------------------------
# Stratum membership augmentation.


def membership_probabilities(state, dm, data):
    """(rows treated+survived, P(always)), (rows control+died, P(protected)).

    Treated survivors weigh the two candidate log-normal outcome densities by
    the multinomial scores; control deaths depend on the scores alone.  The
    other two observed cells are deterministic.
    """
    a, s = data.treatment, data.survived
    z = ps_predictor("z", state, dm)
    w = ps_predictor("w", state, dm)

    rows1 = np.flatnonzero((a == 1) & (s == 1))
    ylog = data.log_outcome[rows1]
    m11 = outcome_location("11", state, dm, rows1)
    m10 = outcome_location("10", state, dm, rows1)
    with np.errstate(divide="ignore", invalid="ignore"):
        lf11 = -0.5 * np.log(2.0 * np.pi * state.sigma2_11) \
            - (ylog - m11) ** 2 / (2.0 * state.sigma2_11)
        lf10 = -0.5 * np.log(2.0 * np.pi * state.sigma2_10) \
            - (ylog - m10) ** 2 / (2.0 * state.sigma2_10)
        logit = (lf11 + z[rows1]) - (lf10 + w[rows1])
    if np.any(np.isnan(logit)):
        bad = rows1[int(np.flatnonzero(np.isnan(logit))[0])]
        raise ChainError("membership", f"non-finite log-density for record {bad}")
    p1 = np.clip(expit(logit), _PROB_LO, _PROB_HI)

    rows0 = np.flatnonzero((a == 0) & (s == 0))
    p0 = np.clip(expit(w[rows0]), _PROB_LO, _PROB_HI)
    return rows1, p1, rows0, p0


def update_strata_membership(state, views, dm, data, priors, rng):
    rows1, p1, rows0, p0 = membership_probabilities(state, dm, data)
    u = rng.random(rows1.shape[0])
    state.labels[rows1] = np.where(u < p1, StratumLabel.ALWAYS_SURVIVOR,
                                   StratumLabel.PROTECTED).astype(np.int8)
    u = rng.random(rows0.shape[0])
    state.labels[rows0] = np.where(u < p0, StratumLabel.PROTECTED,
                                   StratumLabel.NEVER_SURVIVOR).astype(np.int8)
    return state.labels


# ---------------------------------------------------------------------------
# Sweep plan and chain driver.

SweepPlan = tuple[str, ...]

_DISPATCH = {
    "outcome_coef_11": lambda *a: update_outcome_coefficients("11", *a),
    "outcome_err_11": lambda *a: update_outcome_error_variance("11", *a),
    "outcome_coef_10": lambda *a: update_outcome_coefficients("10", *a),
    "outcome_err_10": lambda *a: update_outcome_error_variance("10", *a),
    "outcome_cluster_11": lambda *a: update_outcome_cluster_effects("11", *a),
    "outcome_cluster_var_11": lambda *a: update_outcome_cluster_variance("11", *a),
    "outcome_cluster_10": lambda *a: update_outcome_cluster_effects("10", *a),
    "outcome_cluster_var_10": lambda *a: update_outcome_cluster_variance("10", *a),
    "outcome_cp_11": lambda *a: update_outcome_clusterperiod_effects("11", *a),
    "outcome_cp_var_11": lambda *a: update_outcome_clusterperiod_variance("11", *a),
    "outcome_cp_10": lambda *a: update_outcome_clusterperiod_effects("10", *a),
    "outcome_cp_var_10": lambda *a: update_outcome_clusterperiod_variance("10", *a),
    "pg_z": lambda *a: update_pg_component("z", *a),
    "pg_w": lambda *a: update_pg_component("w", *a),
    "ps_coef_z": lambda *a: update_strata_coefficients("z", *a),
    "ps_coef_w": lambda *a: update_strata_coefficients("w", *a),
    "ps_cluster_z": lambda *a: update_strata_cluster_effects("z", *a),
    "ps_cluster_var_z": lambda *a: update_strata_cluster_variance("z", *a),
    "ps_cluster_w": lambda *a: update_strata_cluster_effects("w", *a),
    "ps_cluster_var_w": lambda *a: update_strata_cluster_variance("w", *a),
    "ps_cp_z": lambda *a: update_strata_clusterperiod_effects("z", *a),
    "ps_cp_var_z": lambda *a: update_strata_clusterperiod_variance("z", *a),
    "ps_cp_w": lambda *a: update_strata_clusterperiod_effects("w", *a),
    "ps_cp_var_w": lambda *a: update_strata_clusterperiod_variance("w", *a),
    "membership": update_strata_membership,
}


def build_sweep_plan(config: ModelConfig) -> SweepPlan:
    """Ordered update list: outcome blocks, PG latents, strata blocks,
    membership last; disabled random-effect updates absent."""
    plan = [
        "outcome_coef_11", "outcome_err_11",
        "outcome_coef_10", "outcome_err_10",
        "outcome_cluster_11", "outcome_cluster_var_11",
        "outcome_cluster_10", "outcome_cluster_var_10",
    ]
    if config.outcome_clusterperiod_re:
        plan += ["outcome_cp_11", "outcome_cp_var_11",
                 "outcome_cp_10", "outcome_cp_var_10"]
    for comp in ("z", "w"):
        plan += [f"pg_{comp}", f"ps_coef_{comp}"]
        if config.ps_cluster_re:
            plan += [f"ps_cluster_{comp}", f"ps_cluster_var_{comp}"]
        if config.ps_clusterperiod_re:
            plan += [f"ps_cp_{comp}", f"ps_cp_var_{comp}"]
    plan.append("membership")
    return tuple(plan)


def _moment_benchmarks(data: TrialData) -> tuple[float, float, float]:
    """Crude variance decomposition of survivor log outcomes:
    (within cluster-period, between cluster, between cluster-period)."""
    rows = np.flatnonzero(data.survived == 1)
    y = data.log_outcome[rows]
    key = (data.cluster_id[rows] - 1) * (data.n_periods + 1) + data.period[rows]
    cp_keys, cp_inv = np.unique(key, return_inverse=True)
    cp_mean = np.bincount(cp_inv, weights=y) / np.bincount(cp_inv)
    within = float(np.mean((y - cp_mean[cp_inv]) ** 2))

    cl_keys, cl_inv = np.unique(data.cluster_id[rows], return_inverse=True)
    cl_mean = np.bincount(cl_inv, weights=y) / np.bincount(cl_inv)
    between_cl = float(np.var(cl_mean)) if cl_mean.shape[0] > 1 else 0.0

    cp_cluster = cp_keys // (data.n_periods + 1)
    _, cp_cl_inv = np.unique(cp_cluster, return_inverse=True)
    between_cp = float(np.mean((cp_mean - cl_mean[cp_cl_inv]) ** 2))
    return (max(within, _VARIANCE_FLOOR), max(between_cl, _VARIANCE_FLOOR),
            max(between_cp, _VARIANCE_FLOOR))


def init_state(data: TrialData, dm: DesignMatrices, config: ModelConfig,
               rng: np.random.Generator) -> ParameterState:
    """Initial Gibbs state: zero random effects, coefficients from the prior
    with the variance capped at one, moment-benchmarked variances jittered by
    a +-50% uniform band, and coin-flip stratum labels for ambiguous cells."""
    if data.n_periods != 2:
        raise ChainError("init", "estimation supports two-period trials only")
    if not np.any(data.survived == 1):
        raise ChainError("init", "no outcome information: no survivors in the data")

    labels = initial_strata(data, rng)

    def coef_init(prior, dim):
        mu, cov = prior.params(dim)
        sd = np.sqrt(np.minimum(np.diag(cov), 1.0))
        return mu + sd * rng.standard_normal(dim)

    priors = config.priors
    theta_11 = coef_init(priors.out_coef_11, dm.D_out_11.shape[1])
    theta_10 = coef_init(priors.out_coef_10, dm.D_out_10.shape[1])
    theta_z = coef_init(priors.ps_coef_z, dm.D_ps.shape[1])
    theta_w = coef_init(priors.ps_coef_w, dm.D_ps.shape[1])

    within, between_cl, between_cp = _moment_benchmarks(data)
    tau_bench = tau_from_icc(_INIT_PS_ICC)

    def band(benchmark):
        return benchmark * rng.uniform(0.5, 1.5)

    I, n_cp, n_cp1 = dm.n_clusters, dm.n_cp, dm.n_cp1
    return ParameterState(
        theta_11=theta_11, theta_10=theta_10, theta_z=theta_z, theta_w=theta_w,
        xi_11=np.zeros(I), xi_10=np.zeros(I),
        gamma_11=np.zeros(n_cp), gamma_10=np.zeros(n_cp1),
        eta_z=np.zeros(I), eta_w=np.zeros(I),
        nu_z=np.zeros(n_cp), nu_w=np.zeros(n_cp),
        sigma2_11=band(within), sigma2_10=band(within),
        sigma2_c_11=band(between_cl), sigma2_c_10=band(between_cl),
        sigma2_cp_11=band(between_cp), sigma2_cp_10=band(between_cp),
        tau2_c_z=band(tau_bench), tau2_c_w=band(tau_bench),
        tau2_cp_z=band(tau_bench), tau2_cp_w=band(tau_bench),
        omega_z=np.full(data.n_individuals, 0.25),
        omega_w=np.full(data.n_individuals, 0.25),
        labels=labels,
    )


def sweep(state: ParameterState, dm: DesignMatrices, data: TrialData,
          config: ModelConfig, rng: np.random.Generator,
          plan: SweepPlan | None = None,
          record_contrasts: bool = True) -> tuple[float, float]:
    """One full Gibbs sweep; returns the SACE contrasts evaluated at their
    in-sweep position (right after the always-survivor coefficient draw).

    ``record_contrasts=False`` skips the contrast arithmetic (used on sweeps
    that will not be retained); the draw sequence is unchanged.
    """
    if plan is None:
        plan = build_sweep_plan(config)
    views = stratum_views(dm, state, data)
    mu_ldiff = mu_rom = float("nan")
    for step in plan:
        _DISPATCH[step](state, views, dm, data, config.priors, rng)
        if record_contrasts and step == "outcome_coef_11":
            mu_ldiff = estimands.sace_ldiff(state, dm, data)
            mu_rom = estimands.sace_rom(state, dm, data)
    return mu_ldiff, mu_rom


@dataclass
class ChainResult:
    chain_id: int
    draws: PosteriorDraws | None
    error: str | None
    error_stage: str | None
    sweeps_completed: int

    @property
    def ok(self) -> bool:
        return self.error is None


def _enabled_variances(config: ModelConfig) -> np.ndarray:
    enabled = {name: True for name in VARIANCE_FIELDS}
    if not config.outcome_clusterperiod_re:
        enabled["sigma2_cp_11"] = enabled["sigma2_cp_10"] = False
    if not config.ps_cluster_re:
        enabled["tau2_c_z"] = enabled["tau2_c_w"] = False
    if not config.ps_clusterperiod_re:
        enabled["tau2_cp_z"] = enabled["tau2_cp_w"] = False
    return np.array([enabled[name] for name in VARIANCE_FIELDS])


def run_chain(data: TrialData, dm: DesignMatrices, config: ModelConfig,
              chain_id: int, rng: np.random.Generator) -> ChainResult:
    """Run one chain: initialize, sweep, and record retained draws.

    Any update failure aborts the chain and is returned as a structured
    error instead of raising.
    """
    n_keep = (config.iterations - config.burn_in) // config.thinning
    chain_col = np.full(n_keep, chain_id, dtype=np.int64)
    iter_col = np.zeros(n_keep, dtype=np.int64)
    ldiff_col = np.full(n_keep, np.nan)
    rom_col = np.full(n_keep, np.nan)
    counts_col = np.zeros((n_keep, 3), dtype=np.int64)
    var_col = np.full((n_keep, len(VARIANCE_FIELDS)), np.nan)
    var_mask = _enabled_variances(config)

    it = 0
    k = 0
    try:
        state = init_state(data, dm, config, rng)
        plan = build_sweep_plan(config)
        for it in range(1, config.iterations + 1):
            keep = it > config.burn_in and (it - config.burn_in) % config.thinning == 0
            mu_ldiff, mu_rom = sweep(state, dm, data, config, rng, plan,
                                     record_contrasts=keep)
            if keep:
                iter_col[k] = it
                ldiff_col[k] = mu_ldiff
                rom_col[k] = mu_rom
                counts_col[k] = np.bincount(state.labels, minlength=3)
                vals = np.array([getattr(state, name) for name in VARIANCE_FIELDS])
                var_col[k, var_mask] = vals[var_mask]
                k += 1
    except ChainError as e:
        return ChainResult(chain_id=chain_id, draws=None, error=str(e),
                           error_stage=e.stage, sweeps_completed=it)
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as e:
        # Numeric blowups outside a named update stage (e.g. degenerate
        # inverse-gamma parameters) are chain failures, not crashes.
        return ChainResult(chain_id=chain_id, draws=None, error=str(e),
                           error_stage="numeric", sweeps_completed=it)

    draws = PosteriorDraws(
        chain_id=chain_col[:k], iteration=iter_col[:k], mu_ldiff=ldiff_col[:k],
        mu_rom=rom_col[:k], strata_counts=counts_col[:k], variances=var_col[:k],
        n_individuals=data.n_individuals,
    )
    return ChainResult(chain_id=chain_id, draws=draws, error=None,
                       error_stage=None, sweeps_completed=config.iterations)
