"""Shared test fixtures: a frozen 2-cluster instance and brute-force
log-density oracles for the conditional-correctness checks.

The oracles evaluate the augmented joint log density from first principles
(explicit sums over individuals) so that every conditional update can be
checked against a quadratic reconstructed by finite differences, which is
exact for Gaussian conditionals up to float round-off.
"""

from __future__ import annotations

import math

import numpy as np

from crxo_sace.core import (
    GaussianPrior,
    InverseGammaPrior,
    ModelConfig,
    ParameterState,
    PriorSpec,
    StratumLabel,
    TrialData,
)
from crxo_sace.design import build_designs

ALWAYS = StratumLabel.ALWAYS_SURVIVOR
PROT = StratumLabel.PROTECTED
NEVER = StratumLabel.NEVER_SURVIVOR


def tiny_instance(seed: int = 11):
    """Fixed 2-cluster, 12-individual trial with frozen labels and latents.

    Every observed (treatment, survival) cell and every stratum is occupied;
    priors are kept tight enough (coefficient variance 10) that all
    conditionals are well conditioned.
    """
    rng = np.random.default_rng(seed)
    cluster = np.repeat([1, 1, 2, 2], 3)
    period = np.repeat([1, 2, 1, 2], 3)
    treat = np.repeat([1, 0, 0, 1], 3)
    survived = np.array([1, 1, 0, 1, 0, 0, 1, 1, 0, 1, 1, 1])
    labels = np.array([ALWAYS, PROT, NEVER,
                       ALWAYS, PROT, NEVER,
                       ALWAYS, ALWAYS, NEVER,
                       ALWAYS, PROT, ALWAYS], dtype=np.int8)
    X = rng.normal(0.0, 1.0, size=(12, 3))
    ylog = np.where(survived == 1, rng.normal(0.5, 1.0, size=12), np.nan)
    data = TrialData(cluster_id=cluster, period=period, treatment=treat,
                     survived=survived, log_outcome=ylog, covariates=X,
                     covariate_names=("x1", "x2", "x3"), n_clusters=2)
    dm = build_designs(data)

    priors = PriorSpec(
        out_coef_11=GaussianPrior(0.0, 10.0),
        out_coef_10=GaussianPrior(0.0, 10.0),
        ps_coef_z=GaussianPrior(0.0, 10.0),
        ps_coef_w=GaussianPrior(0.0, 10.0),
        out_err_11=InverseGammaPrior(2.0, 1.5),
        out_err_10=InverseGammaPrior(2.5, 2.0),
        out_cluster_11=InverseGammaPrior(2.0, 1.0),
        out_cluster_10=InverseGammaPrior(2.0, 1.0),
        out_cp_11=InverseGammaPrior(2.0, 1.0),
        out_cp_10=InverseGammaPrior(2.0, 1.0),
        ps_cluster_z=InverseGammaPrior(2.0, 1.0),
        ps_cluster_w=InverseGammaPrior(2.0, 1.0),
        ps_cp_z=InverseGammaPrior(2.0, 1.0),
        ps_cp_w=InverseGammaPrior(2.0, 1.0),
    )
    config = ModelConfig.for_model("A", iterations=10, burn_in=5, n_chains=1,
                                   seed=0, priors=priors)

    state = ParameterState(
        theta_11=rng.normal(0, 0.5, dm.D_out_11.shape[1]),
        theta_10=rng.normal(0, 0.5, dm.D_out_10.shape[1]),
        theta_z=rng.normal(0, 0.5, dm.D_ps.shape[1]),
        theta_w=rng.normal(0, 0.5, dm.D_ps.shape[1]),
        xi_11=rng.normal(0, 0.3, 2), xi_10=rng.normal(0, 0.3, 2),
        gamma_11=rng.normal(0, 0.3, dm.n_cp), gamma_10=rng.normal(0, 0.3, dm.n_cp1),
        eta_z=rng.normal(0, 0.3, 2), eta_w=rng.normal(0, 0.3, 2),
        nu_z=rng.normal(0, 0.3, dm.n_cp), nu_w=rng.normal(0, 0.3, dm.n_cp),
        sigma2_11=0.8, sigma2_10=1.3,
        sigma2_c_11=0.5, sigma2_c_10=0.7,
        sigma2_cp_11=0.3, sigma2_cp_10=0.4,
        tau2_c_z=0.6, tau2_c_w=0.9,
        tau2_cp_z=0.35, tau2_cp_w=0.45,
        omega_z=rng.uniform(0.05, 0.6, 12),
        omega_w=rng.uniform(0.05, 0.6, 12),
        labels=labels,
    )
    return data, dm, config, state


# ---------------------------------------------------------------------------
# Brute-force log densities (plain loops; no reuse of the sampler's algebra).


def _row_location(g, state, dm, data, i):
    cl = dm.cluster_idx[i]
    if g == "11":
        d = dm.D_out_11[i]
        return float(d @ state.theta_11 + state.xi_11[cl]
                     + state.gamma_11[dm.cp_idx[i]])
    d = dm.D_out_10[i]
    return float(d @ state.theta_10 + state.xi_10[cl]
                 + state.gamma_10[dm.cp1_idx[i]])


def outcome_loglik(state, dm, data) -> float:
    """Sum of log-normal outcome log densities over observed survivors,
    dropping the constant-in-parameters -log y Jacobian."""
    total = 0.0
    for i in range(data.n_individuals):
        if data.survived[i] != 1:
            continue
        if state.labels[i] == ALWAYS:
            m, v = _row_location("11", state, dm, data, i), state.sigma2_11
        elif state.labels[i] == PROT:
            m, v = _row_location("10", state, dm, data, i), state.sigma2_10
        else:
            continue
        y = data.log_outcome[i]
        total += -0.5 * math.log(2 * math.pi * v) - (y - m) ** 2 / (2 * v)
    return total


def _ps_scores(state, dm, i):
    cl = dm.cluster_idx[i]
    cp = dm.cp_idx[i]
    z = float(dm.D_ps[i] @ state.theta_z + state.eta_z[cl] + state.nu_z[cp])
    w = float(dm.D_ps[i] @ state.theta_w + state.eta_w[cl] + state.nu_w[cp])
    return z, w


def pg_augmented_loglik(comp, state, dm, data) -> float:
    """Quadratic augmented form for one multinomial component given its PG
    vector: sum_i (u_i - 1/2) phi_i - omega_i phi_i^2 / 2."""
    total = 0.0
    for i in range(data.n_individuals):
        z, w = _ps_scores(state, dm, i)
        if comp == "z":
            phi = z - math.log1p(math.exp(w))
            u = 1.0 if state.labels[i] == ALWAYS else 0.0
            omega = state.omega_z[i]
        else:
            phi = w - math.log1p(math.exp(z))
            u = 1.0 if state.labels[i] == PROT else 0.0
            omega = state.omega_w[i]
        total += (u - 0.5) * phi - 0.5 * omega * phi * phi
    return total


def gaussian_block_logprior(x, mean, cov) -> float:
    d = x - mean
    return float(-0.5 * d @ np.linalg.solve(cov, d))


def iid_normal_logprior(x, var) -> float:
    return float(-0.5 * np.sum(np.asarray(x) ** 2) / var
                 - 0.5 * len(np.asarray(x)) * math.log(2 * math.pi * var))


def multinomial_loglik(state, dm, data) -> float:
    """Exact (unaugmented) multinomial log likelihood of the labels."""
    total = 0.0
    for i in range(data.n_individuals):
        z, w = _ps_scores(state, dm, i)
        denom = math.log(1.0 + math.exp(z) + math.exp(w))
        if state.labels[i] == ALWAYS:
            total += z - denom
        elif state.labels[i] == PROT:
            total += w - denom
        else:
            total += -denom
    return total


# ---------------------------------------------------------------------------
# Finite-difference quadratic reconstruction (exact for quadratics).


def fd_gaussian_params(logf, x0: np.ndarray, h: float = 1e-2):
    """Recover (mean, precision) of a quadratic log density around x0."""
    x0 = np.asarray(x0, dtype=np.float64)
    k = x0.shape[0]
    H = np.empty((k, k))
    grad = np.empty(k)
    f0 = logf(x0)
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = h
        fp, fm = logf(x0 + ei), logf(x0 - ei)
        grad[i] = (fp - fm) / (2 * h)
        H[i, i] = -(fp - 2 * f0 + fm) / (h * h)
        for j in range(i + 1, k):
            ej = np.zeros(k)
            ej[j] = h
            fpp = logf(x0 + ei + ej)
            fpm = logf(x0 + ei - ej)
            fmp = logf(x0 - ei + ej)
            fmm = logf(x0 - ei - ej)
            H[i, j] = H[j, i] = -(fpp - fpm - fmp + fmm) / (4 * h * h)
    mean = x0 + np.linalg.solve(H, grad)
    return mean, H
