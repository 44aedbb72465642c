"""Trial simulation: the two-period CRXO data-generating process,
correlation-to-variance algebra, the large-cluster ground-truth oracle, and
the replicated operating-characteristics study harness."""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import ModelConfig, StratumLabel, TrialData
from .rng import RngStream

__all__ = [
    "SimulationScenario",
    "PotentialOutcomeTable",
    "TruthValues",
    "StudyReport",
    "variances_from_correlations",
    "correlations_from_variances",
    "tau_from_icc",
    "generate_potential_outcomes",
    "generate_trial",
    "true_sace",
    "run_study",
    "scenario_preset",
    "SCENARIO_PRESETS",
    "write_replicates_csv",
    "write_aggregate_csv",
]

LOGISTIC_LATENT_VAR = math.pi ** 2 / 3.0

# Clusters used by the ground-truth oracle; Monte Carlo error on the SACE
# truth is ~0.002 at this size.
TRUTH_ORACLE_CLUSTERS = 5000


def variances_from_correlations(error_var: float, bpc: float, wpc: float) -> tuple[float, float]:
    """Solve the BPC/WPC definitions for cluster and cluster-period variances.

    BPC = s2_C / T and WPC = (s2_C + s2_CP) / T with T the total variance
    s2_C + s2_CP + error_var.
    """
    if not (0.0 <= bpc <= wpc < 1.0):
        raise ValueError("need 0 <= bpc <= wpc < 1")
    if error_var <= 0:
        raise ValueError("error variance must be positive")
    total = error_var / (1.0 - wpc)
    return bpc * total, (wpc - bpc) * total


def correlations_from_variances(s2_c: float, s2_cp: float, error_var: float) -> tuple[float, float]:
    total = s2_c + s2_cp + error_var
    return s2_c / total, (s2_c + s2_cp) / total


def tau_from_icc(icc: float) -> float:
    """Cluster variance on the latent logistic scale from the ICC:
    icc = tau2 / (tau2 + pi^2/3)."""
    if not 0.0 <= icc < 1.0:
        raise ValueError("icc must be in [0, 1)")
    return icc * LOGISTIC_LATENT_VAR / (1.0 - icc)


@dataclass(frozen=True)
class SimulationScenario:
    """One data-generating configuration.

    Coefficient tuples are ordered (intercept, covariates, period-2 effect).
    ``bpc``/``wpc`` drive the outcome random-effect variances through each
    stratum's error variance; ``icc`` drives the strata-model cluster
    variance on the latent scale.  ``strata_bpc``/``strata_wpc``, when set,
    additionally put cluster-period random effects into strata generation,
    with variances from the same algebra on the latent scale (total pi^2/3);
    at strata_bpc = strata_wpc = icc that variant coincides with ``icc``.
    """

    name: str = "custom"
    n_clusters: int = 18
    size_lo: int = 50
    size_hi: int = 150
    cov_means: tuple[float, ...] = (0.75, 0.25, -0.75)
    cov_sds: tuple[float, ...] = (math.sqrt(0.94), math.sqrt(1.32), math.sqrt(1.66))
    z_coef: tuple[float, ...] = (0.1, 0.2, -0.4, 0.1, 0.05)
    w_coef: tuple[float, ...] = (-0.1, -0.4, -0.3, -0.1, 0.025)
    y11_active: tuple[float, ...] = (0.25, 0.15, -0.5, 0.7, 0.05)
    y11_control: tuple[float, ...] = (0.9, 0.3, -0.15, 0.1, 0.05)
    y10_active: tuple[float, ...] = (0.2, 0.25, -0.3, 0.15, 0.075)
    err_var_11: float = 1.0
    err_var_10: float = 1.25
    bpc: float = 0.03
    wpc: float = 0.035
    icc: float = 0.035
    strata_bpc: float | None = None
    strata_wpc: float | None = None
    covariate_names: tuple[str, ...] = ("x1", "x2", "x3")
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.size_lo <= self.size_hi):
            raise ValueError("cluster-period size range must satisfy 0 < lo <= hi")
        if not (0.0 <= self.bpc <= self.wpc < 1.0):
            raise ValueError("need 0 <= bpc <= wpc < 1")
        if not 0.0 <= self.icc < 1.0:
            raise ValueError("icc must be in [0, 1)")
        if (self.strata_bpc is None) != (self.strata_wpc is None):
            raise ValueError("strata_bpc and strata_wpc must be set together")
        if self.strata_bpc is not None and not (0.0 <= self.strata_bpc <= self.strata_wpc < 1.0):
            raise ValueError("need 0 <= strata_bpc <= strata_wpc < 1")
        k = len(self.cov_means)
        for name in ("cov_sds",):
            if len(getattr(self, name)) != k:
                raise ValueError(f"{name} must have {k} entries")
        for name in ("z_coef", "w_coef", "y11_active", "y11_control", "y10_active"):
            if len(getattr(self, name)) != k + 2:
                raise ValueError(f"{name} must have {k + 2} entries (intercept, covariates, period)")
        if len(self.covariate_names) != k:
            raise ValueError("covariate_names length mismatch")
        if self.err_var_11 <= 0 or self.err_var_10 <= 0:
            raise ValueError("error variances must be positive")

    @property
    def n_covariates(self) -> int:
        return len(self.cov_means)

    def outcome_variances(self, stratum: str) -> tuple[float, float]:
        err = self.err_var_11 if stratum == "11" else self.err_var_10
        return variances_from_correlations(err, self.bpc, self.wpc)

    def strata_variances(self) -> tuple[float, float]:
        """(cluster, cluster-period) latent-scale variances for Z and W."""
        if self.strata_bpc is not None:
            total = LOGISTIC_LATENT_VAR / (1.0 - self.strata_wpc)
            return self.strata_bpc * total, (self.strata_wpc - self.strata_bpc) * total
        return tau_from_icc(self.icc), 0.0

    def content_key(self) -> str:
        """Hash of the physical generating process (seed and name excluded):
        identical keys mean identical ground truth."""
        payload = {
            "n_clusters": self.n_clusters,
            "size": [self.size_lo, self.size_hi],
            "cov_means": list(self.cov_means),
            "cov_sds": list(self.cov_sds),
            "z_coef": list(self.z_coef),
            "w_coef": list(self.w_coef),
            "y11_active": list(self.y11_active),
            "y11_control": list(self.y11_control),
            "y10_active": list(self.y10_active),
            "err_var": [self.err_var_11, self.err_var_10],
            "bpc_wpc_icc": [self.bpc, self.wpc, self.icc],
            "strata_bpc_wpc": [self.strata_bpc, self.strata_wpc],
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class PotentialOutcomeTable:
    """Complete potential outcomes for every generated individual.

    Monotonicity holds by construction: the harmed pattern (s1=0, s0=1) is
    never generated.  Log outcomes are NaN where the potential survival
    status is 0.
    """

    cluster_id: np.ndarray   # 1-based
    period: np.ndarray       # 1 or 2
    covariates: np.ndarray   # (n, p)
    stratum: np.ndarray      # StratumLabel values
    s1: np.ndarray
    s0: np.ndarray
    log_y1: np.ndarray
    log_y0: np.ndarray

    @property
    def n_individuals(self) -> int:
        return self.cluster_id.shape[0]


def _linpred(coef, X, period2):
    c = np.asarray(coef)
    return c[0] + X @ c[1:-1] + c[-1] * period2


def generate_potential_outcomes(scenario: SimulationScenario,
                                rng: np.random.Generator) -> PotentialOutcomeTable:
    I = scenario.n_clusters
    J = 2
    sizes = rng.integers(scenario.size_lo, scenario.size_hi + 1, size=(I, J))
    n = int(sizes.sum())

    cluster_id = np.repeat(np.repeat(np.arange(1, I + 1), J), sizes.ravel())
    period = np.repeat(np.tile(np.arange(1, J + 1), I), sizes.ravel())
    cp_of_row = np.repeat(np.arange(I * J), sizes.ravel())
    cl0 = cluster_id - 1
    period2 = (period == 2).astype(np.float64)

    means = np.asarray(scenario.cov_means)
    sds = np.asarray(scenario.cov_sds)
    X = means + rng.standard_normal((n, means.shape[0])) * sds

    # Principal strata from the multinomial expit of the latent Z/W scores.
    tau2_c, tau2_cp = scenario.strata_variances()
    eta_z = rng.standard_normal(I) * math.sqrt(tau2_c)
    eta_w = rng.standard_normal(I) * math.sqrt(tau2_c)
    nu_z = rng.standard_normal(I * J) * math.sqrt(tau2_cp)
    nu_w = rng.standard_normal(I * J) * math.sqrt(tau2_cp)
    z = _linpred(scenario.z_coef, X, period2) + eta_z[cl0] + nu_z[cp_of_row]
    w = _linpred(scenario.w_coef, X, period2) + eta_w[cl0] + nu_w[cp_of_row]

    shift = np.maximum(np.maximum(z, w), 0.0)
    ez = np.exp(z - shift)
    ew = np.exp(w - shift)
    denom = np.exp(-shift) + ez + ew
    p11 = ez / denom
    p10 = ew / denom
    u = rng.random(n)
    stratum = np.where(u < p11, StratumLabel.ALWAYS_SURVIVOR,
                       np.where(u < p11 + p10, StratumLabel.PROTECTED,
                                StratumLabel.NEVER_SURVIVOR)).astype(np.int8)

    s1 = (stratum != StratumLabel.NEVER_SURVIVOR).astype(np.int64)
    s0 = (stratum == StratumLabel.ALWAYS_SURVIVOR).astype(np.int64)

    # Outcome random effects and errors; always-survivor draws are shared
    # across the two arms (the generating equations reuse the same terms).
    s2c_11, s2cp_11 = scenario.outcome_variances("11")
    s2c_10, s2cp_10 = scenario.outcome_variances("10")
    xi_11 = rng.standard_normal(I) * math.sqrt(s2c_11)
    gamma_11 = rng.standard_normal(I * J) * math.sqrt(s2cp_11)
    eps_11 = rng.standard_normal(n) * math.sqrt(scenario.err_var_11)
    xi_10 = rng.standard_normal(I) * math.sqrt(s2c_10)
    gamma_10 = rng.standard_normal(I * J) * math.sqrt(s2cp_10)
    eps_10 = rng.standard_normal(n) * math.sqrt(scenario.err_var_10)

    log_y1 = np.full(n, np.nan)
    log_y0 = np.full(n, np.nan)
    always = stratum == StratumLabel.ALWAYS_SURVIVOR
    re_11 = xi_11[cl0] + gamma_11[cp_of_row] + eps_11
    log_y1[always] = (_linpred(scenario.y11_active, X, period2) + re_11)[always]
    log_y0[always] = (_linpred(scenario.y11_control, X, period2) + re_11)[always]
    protected = stratum == StratumLabel.PROTECTED
    re_10 = xi_10[cl0] + gamma_10[cp_of_row] + eps_10
    log_y1[protected] = (_linpred(scenario.y10_active, X, period2) + re_10)[protected]

    return PotentialOutcomeTable(
        cluster_id=cluster_id, period=period, covariates=X, stratum=stratum,
        s1=s1, s0=s0, log_y1=log_y1, log_y0=log_y0,
    )


def generate_trial(scenario: SimulationScenario,
                   rng: np.random.Generator) -> tuple[TrialData, PotentialOutcomeTable]:
    """One observed trial: potential outcomes, 1:1 sequence randomization,
    then masking by assigned treatment and survival."""
    table = generate_potential_outcomes(scenario, rng)
    I = scenario.n_clusters
    start_active = np.zeros(I, dtype=np.int64)
    order = rng.permutation(I)
    start_active[order[: I // 2]] = 1

    cl0 = table.cluster_id - 1
    treatment = np.where(table.period % 2 == 1, start_active[cl0], 1 - start_active[cl0])
    survived = np.where(treatment == 1, table.s1, table.s0)
    log_outcome = np.where(treatment == 1, table.log_y1, table.log_y0)
    log_outcome = np.where(survived == 1, log_outcome, np.nan)

    data = TrialData(
        cluster_id=table.cluster_id, period=table.period, treatment=treatment,
        survived=survived, log_outcome=log_outcome, covariates=table.covariates,
        covariate_names=scenario.covariate_names, n_clusters=I, n_periods=2,
    )
    return data, table


@dataclass(frozen=True)
class TruthValues:
    mu_ldiff: float
    mu_rom: float
    pi: tuple[float, float, float]  # (pi_00, pi_10, pi_11)
    n_individuals: int
    oracle_clusters: int

    def to_dict(self) -> dict:
        return {
            "mu_ldiff": self.mu_ldiff, "mu_rom": self.mu_rom,
            "pi_00": self.pi[0], "pi_10": self.pi[1], "pi_11": self.pi[2],
            "n_individuals": self.n_individuals,
            "oracle_clusters": self.oracle_clusters,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TruthValues":
        return cls(mu_ldiff=d["mu_ldiff"], mu_rom=d["mu_rom"],
                   pi=(d["pi_00"], d["pi_10"], d["pi_11"]),
                   n_individuals=d["n_individuals"],
                   oracle_clusters=d["oracle_clusters"])


def _truth_cache_dir() -> Path:
    env = os.environ.get("CRXO_SACE_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "crxo_sace" / "truth"


def true_sace(scenario: SimulationScenario, cache: bool = True) -> TruthValues:
    """Ground-truth SACE contrasts and strata proportions.

    Generates potential outcomes for a large number of clusters (seeded from
    the scenario's content hash, so the truth is keyed by the generating
    process and independent of the trial seed), restricts to the
    always-survivor stratum, and takes the difference in mean log outcomes
    and the ratio of mean outcomes.  Results are cached on disk.
    """
    key = scenario.content_key()
    cache_file = _truth_cache_dir() / f"{key}.json"
    if cache and cache_file.exists():
        return TruthValues.from_dict(json.loads(cache_file.read_text()))

    oracle = replace(scenario, n_clusters=TRUTH_ORACLE_CLUSTERS)
    seed = int(key[:16], 16)
    rng = RngStream(seed=seed, stream_id=0).generator()
    table = generate_potential_outcomes(oracle, rng)

    always = table.stratum == StratumLabel.ALWAYS_SURVIVOR
    ldiff = float(np.mean(table.log_y1[always]) - np.mean(table.log_y0[always]))
    rom = float(np.mean(np.exp(table.log_y1[always])) / np.mean(np.exp(table.log_y0[always])))
    n = table.n_individuals
    counts = np.bincount(table.stratum, minlength=3)
    pi = (counts[StratumLabel.NEVER_SURVIVOR] / n,
          counts[StratumLabel.PROTECTED] / n,
          counts[StratumLabel.ALWAYS_SURVIVOR] / n)
    truth = TruthValues(mu_ldiff=ldiff, mu_rom=rom, pi=pi,
                        n_individuals=n, oracle_clusters=TRUTH_ORACLE_CLUSTERS)
    if cache:
        cache_file.parent.mkdir(parents=True, exist_ok=True)
        cache_file.write_text(json.dumps(truth.to_dict(), indent=1))
    return truth


def scenario_preset(name: str, seed: int = 0) -> SimulationScenario:
    if name not in SCENARIO_PRESETS:
        raise ValueError(f"unknown scenario preset {name!r}; known: {sorted(SCENARIO_PRESETS)}")
    return replace(SCENARIO_PRESETS[name], seed=seed)


SCENARIO_PRESETS = {
    "scenario1": SimulationScenario(name="scenario1", bpc=0.01, wpc=0.02, icc=0.02),
    "scenario2": SimulationScenario(name="scenario2", bpc=0.03, wpc=0.035, icc=0.035),
    "scenario3": SimulationScenario(name="scenario3", bpc=0.05, wpc=0.10, icc=0.10),
    # Rehearsal preset shaped like a large ICU trial: 50 clusters,
    # cluster-period sizes averaging ~269, strata near (0.176, 0.063, 0.761),
    # and a small positive active-arm effect on log length of stay.
    "peptic_like": SimulationScenario(
        name="peptic_like",
        n_clusters=50,
        size_lo=54, size_hi=484,
        cov_means=(0.0, 0.0, 0.0),
        cov_sds=(1.0, 0.5, 1.0),
        covariate_names=("age_z", "sex_c", "apache_z"),
        z_coef=(1.50, -0.15, 0.05, -0.30, 0.02),
        w_coef=(-1.05, -0.05, 0.02, -0.10, 0.01),
        y11_active=(2.468, 0.10, 0.05, 0.25, 0.02),
        y11_control=(2.400, 0.10, 0.05, 0.25, 0.02),
        y10_active=(2.60, 0.08, 0.04, 0.20, 0.02),
        err_var_11=0.95, err_var_10=1.10,
        bpc=0.105, wpc=0.114, icc=0.035,
    ),
}


# ---------------------------------------------------------------------------
# Replicated operating-characteristics study.

# Desk-scale defaults (the published tables use 1000 replicates of 10000
# iterations with 2500 burn-in; these are the sanctioned scaled substitutes).
DEFAULT_STUDY_REPLICATES = 200
DEFAULT_STUDY_ITERATIONS = 5000
DEFAULT_STUDY_BURN_IN = 1500

# Stream-id layout: replicate r owns ids [r*STRIDE, (r+1)*STRIDE); id 0 within
# the block generates the trial, the rest seed chains per (model, chain).
_STUDY_STREAM_STRIDE = 1024
_MAX_CHAINS_PER_MODEL = 64

REPLICATE_COLUMNS = (
    "replicate", "model", "failed", "error",
    "mu_ldiff_mean", "mu_ldiff_hpd_lo", "mu_ldiff_hpd_hi",
    "mu_rom_mean", "mu_rom_hpd_lo", "mu_rom_hpd_hi",
    "pi_00_mean", "pi_10_mean", "pi_11_mean",
    "missing_fraction", "n_chains_failed",
)

AGGREGATE_COLUMNS = (
    "model", "n_replicates", "n_failed", "error_rate",
    "ldiff_truth", "ldiff_bias", "ldiff_rmse", "ldiff_coverage",
    "rom_truth", "rom_bias", "rom_rmse", "rom_coverage",
    "pi_00_truth", "pi_00_bias", "pi_00_rmse",
    "pi_10_truth", "pi_10_bias", "pi_10_rmse",
    "pi_11_truth", "pi_11_bias", "pi_11_rmse",
)


@dataclass(frozen=True)
class StudyReport:
    scenario_name: str
    truth: TruthValues
    replicates: list[dict]
    aggregates: list[dict]

    def aggregate(self, model: str) -> dict:
        for row in self.aggregates:
            if row["model"] == model:
                return row
        raise KeyError(model)


def _replicate_worker(args) -> list[dict]:
    """Fit every model to one simulated replicate; returns one row per model.

    Module-level so process pools can pickle it.  All randomness is keyed by
    (seed, replicate, model, chain) stream ids, never by scheduling order.
    """
    from .core import PosteriorDraws
    from .design import build_designs
    from .estimands import summarize
    from .gibbs import run_chain

    scenario, models, base, seed, rep, mass = args
    data_rng = RngStream(seed, rep * _STUDY_STREAM_STRIDE).generator()
    data, _ = generate_trial(scenario, data_rng)
    dm = build_designs(data)

    rows = []
    for m_idx, name in enumerate(models):
        config = ModelConfig.for_model(
            name, iterations=base.iterations, burn_in=base.burn_in,
            thinning=base.thinning, n_chains=base.n_chains, seed=seed,
            priors=base.priors)
        parts, failures, messages = [], 0, []
        for chain in range(config.n_chains):
            sid = rep * _STUDY_STREAM_STRIDE + 1 + m_idx * _MAX_CHAINS_PER_MODEL + chain
            result = run_chain(data, dm, config, chain, RngStream(seed, sid).generator())
            if result.ok:
                parts.append(result.draws)
            else:
                failures += 1
                messages.append(result.error)
        row = {c: "" for c in REPLICATE_COLUMNS}
        row.update(replicate=rep, model=name, n_chains_failed=failures)
        if not parts:
            row.update(failed=True, error="; ".join(messages))
            rows.append(row)
            continue
        summary = summarize(PosteriorDraws.pool(parts), mass=mass)
        row.update(
            failed=False, error="; ".join(messages),
            mu_ldiff_mean=summary.mu_ldiff_mean,
            mu_ldiff_hpd_lo=summary.mu_ldiff_hpd[0],
            mu_ldiff_hpd_hi=summary.mu_ldiff_hpd[1],
            mu_rom_mean=summary.mu_rom_mean,
            mu_rom_hpd_lo=summary.mu_rom_hpd[0],
            mu_rom_hpd_hi=summary.mu_rom_hpd[1],
            pi_00_mean=summary.pi_mean[0],
            pi_10_mean=summary.pi_mean[1],
            pi_11_mean=summary.pi_mean[2],
            missing_fraction=summary.missing_fraction,
        )
        rows.append(row)
    return rows


def _aggregate_rows(models, replicate_rows, truth: TruthValues,
                    n_replicates: int) -> list[dict]:
    out = []
    for name in models:
        rows = [r for r in replicate_rows if r["model"] == name]
        good = [r for r in rows if not r["failed"]]
        n_failed = len(rows) - len(good)
        agg = {"model": name, "n_replicates": n_replicates,
               "n_failed": n_failed, "error_rate": n_failed / n_replicates}
        specs = (("ldiff", "mu_ldiff_mean", "mu_ldiff_hpd_lo", "mu_ldiff_hpd_hi", truth.mu_ldiff),
                 ("rom", "mu_rom_mean", "mu_rom_hpd_lo", "mu_rom_hpd_hi", truth.mu_rom))
        for label, mean_c, lo_c, hi_c, target in specs:
            agg[f"{label}_truth"] = target
            if good:
                est = np.array([r[mean_c] for r in good])
                lo = np.array([r[lo_c] for r in good])
                hi = np.array([r[hi_c] for r in good])
                agg[f"{label}_bias"] = float(np.mean(est) - target)
                agg[f"{label}_rmse"] = float(np.sqrt(np.mean((est - target) ** 2)))
                agg[f"{label}_coverage"] = float(np.mean((lo <= target) & (target <= hi)))
            else:
                agg[f"{label}_bias"] = agg[f"{label}_rmse"] = agg[f"{label}_coverage"] = float("nan")
        for k, label in enumerate(("pi_00", "pi_10", "pi_11")):
            target = truth.pi[k]
            agg[f"{label}_truth"] = target
            if good:
                est = np.array([r[f"{label}_mean"] for r in good])
                agg[f"{label}_bias"] = float(np.mean(est) - target)
                agg[f"{label}_rmse"] = float(np.sqrt(np.mean((est - target) ** 2)))
            else:
                agg[f"{label}_bias"] = agg[f"{label}_rmse"] = float("nan")
        out.append(agg)
    return out


def run_study(scenario: SimulationScenario, models, n_replicates: int,
              seed: int, base_config: ModelConfig | None = None,
              parallelism: int = 1, hpd_mass: float = 0.95) -> StudyReport:
    """Replicated bias/RMSE/coverage study of the listed model variants.

    Each replicate simulates one trial and fits every model to it.  Chain
    failures are recorded and disclosed; metrics aggregate over successes
    against the scenario's cached ground truth.  Results are byte-identical
    for any ``parallelism`` because all randomness is stream-indexed.
    """
    if n_replicates < 1:
        raise ValueError("n_replicates must be >= 1")
    models = list(models)
    if len(models) * _MAX_CHAINS_PER_MODEL >= _STUDY_STREAM_STRIDE:
        raise ValueError("too many models for the stream layout")
    if base_config is None:
        base_config = ModelConfig(iterations=DEFAULT_STUDY_ITERATIONS,
                                  burn_in=DEFAULT_STUDY_BURN_IN, n_chains=1)
    if base_config.n_chains > _MAX_CHAINS_PER_MODEL:
        raise ValueError("too many chains for the stream layout")
    truth = true_sace(scenario)

    jobs = [(scenario, models, base_config, seed, rep, hpd_mass)
            for rep in range(n_replicates)]
    if parallelism <= 1:
        results = [_replicate_worker(j) for j in jobs]
    else:
        import concurrent.futures as cf
        with cf.ProcessPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(_replicate_worker, jobs))

    replicate_rows = [row for rows in results for row in rows]
    aggregates = _aggregate_rows(models, replicate_rows, truth, n_replicates)
    return StudyReport(scenario_name=scenario.name, truth=truth,
                       replicates=replicate_rows, aggregates=aggregates)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _write_csv(path, columns, rows) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def write_replicates_csv(report: StudyReport, path) -> None:
    _write_csv(path, REPLICATE_COLUMNS, report.replicates)


def write_aggregate_csv(report: StudyReport, path) -> None:
    _write_csv(path, AGGREGATE_COLUMNS, report.aggregates)
