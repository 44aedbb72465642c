"""Domain types for two-period cluster-randomized crossover survival/outcome data.

Holds the immutable trial data, the model configuration with priors, the
mutable Gibbs sampler state, and the retained posterior draws.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, fields
from enum import IntEnum

import numpy as np

__all__ = [
    "StratumLabel",
    "TrialData",
    "GaussianPrior",
    "InverseGammaPrior",
    "PriorSpec",
    "ModelConfig",
    "MODEL_NAMES",
    "ParameterState",
    "PosteriorDraws",
    "VARIANCE_FIELDS",
    "validate",
    "initial_strata",
]


class StratumLabel(IntEnum):
    """Principal stratum: joint survival status (under active, under control).

    The harmed stratum (0, 1) has no member here, which is how survival
    monotonicity is enforced structurally.
    """

    NEVER_SURVIVOR = 0  # (0, 0)
    PROTECTED = 1       # (1, 0)
    ALWAYS_SURVIVOR = 2  # (1, 1)

    @property
    def survives_active(self) -> bool:
        return self is not StratumLabel.NEVER_SURVIVOR

    @property
    def survives_control(self) -> bool:
        return self is StratumLabel.ALWAYS_SURVIVOR

    @property
    def survival_pair(self) -> tuple[int, int]:
        return (int(self.survives_active), int(self.survives_control))


def _as_array(x, dtype):
    arr = np.asarray(x, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TrialData:
    """Individual-level records of one cross-sectional CRXO trial.

    Arrays are aligned by individual (row) and immutable after construction.
    ``log_outcome`` is NaN exactly where ``survived == 0``.  A cluster may be
    missing a period entirely; all design bookkeeping downstream is derived
    from the (cluster, period) pairs actually present.
    """

    cluster_id: np.ndarray      # int in 1..n_clusters
    period: np.ndarray          # int in 1..n_periods
    treatment: np.ndarray       # 0/1
    survived: np.ndarray        # 0/1
    log_outcome: np.ndarray     # float, NaN for non-survivors
    covariates: np.ndarray      # (n, p) float
    covariate_names: tuple[str, ...]
    n_clusters: int
    n_periods: int = 2

    def __post_init__(self):
        object.__setattr__(self, "cluster_id", _as_array(self.cluster_id, np.int64))
        object.__setattr__(self, "period", _as_array(self.period, np.int64))
        object.__setattr__(self, "treatment", _as_array(self.treatment, np.int64))
        object.__setattr__(self, "survived", _as_array(self.survived, np.int64))
        object.__setattr__(self, "log_outcome", _as_array(self.log_outcome, np.float64))
        cov = np.asarray(self.covariates, dtype=np.float64)
        if cov.ndim != 2:
            raise ValueError("covariates must be a 2-D (n, p) array")
        cov.setflags(write=False)
        object.__setattr__(self, "covariates", cov)
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))
        n = self.cluster_id.shape[0]
        for name in ("period", "treatment", "survived", "log_outcome"):
            if getattr(self, name).shape[0] != n:
                raise ValueError(f"{name} length does not match cluster_id")
        if cov.shape[0] != n:
            raise ValueError("covariates row count does not match cluster_id")
        if cov.shape[1] != len(self.covariate_names):
            raise ValueError("covariate_names length does not match covariate columns")

    @property
    def n_individuals(self) -> int:
        return self.cluster_id.shape[0]

    @property
    def n_covariates(self) -> int:
        return self.covariates.shape[1]


def validate(data: TrialData) -> list[str]:
    """Check all TrialData invariants; return a list of violation messages.

    Each message names the offending record index (or cluster) and the rule.
    An empty list means the data are well formed.
    """
    problems: list[str] = []
    n = data.n_individuals
    cid, per = data.cluster_id, data.period
    trt, sur, ylog = data.treatment, data.survived, data.log_outcome

    bad = np.flatnonzero((cid < 1) | (cid > data.n_clusters))
    problems += [f"record {i}: cluster_id outside 1..{data.n_clusters}" for i in bad]
    bad = np.flatnonzero((per < 1) | (per > data.n_periods))
    problems += [f"record {i}: period outside 1..{data.n_periods}" for i in bad]
    bad = np.flatnonzero((trt != 0) & (trt != 1))
    problems += [f"record {i}: treatment not binary" for i in bad]
    bad = np.flatnonzero((sur != 0) & (sur != 1))
    problems += [f"record {i}: survived not binary" for i in bad]

    has_outcome = ~np.isnan(ylog)
    bad = np.flatnonzero(has_outcome & (sur == 0))
    problems += [f"record {i}: outcome present for non-survivor" for i in bad]
    bad = np.flatnonzero(~has_outcome & (sur == 1))
    problems += [f"record {i}: outcome missing for survivor" for i in bad]
    bad = np.flatnonzero(has_outcome & ~np.isfinite(ylog))
    problems += [f"record {i}: non-finite log outcome" for i in bad]

    if not np.all(np.isfinite(data.covariates)):
        rows = np.flatnonzero(~np.isfinite(data.covariates).all(axis=1))
        problems += [f"record {i}: missing or non-finite covariate" for i in rows]

    # Treatment structure: constant within cluster-period, alternating across
    # the periods a cluster actually has.
    for i in np.unique(cid):
        in_cluster = cid == i
        start_arm = None
        for j in np.unique(per[in_cluster]):
            rows = in_cluster & (per == j)
            arms = np.unique(trt[rows])
            if arms.size > 1:
                problems.append(f"cluster {i} period {j}: treatment varies within cluster-period")
                continue
            implied = int(arms[0]) if j % 2 == 1 else 1 - int(arms[0])
            if start_arm is None:
                start_arm = implied
            elif implied != start_arm:
                problems.append(f"cluster {i}: non-alternating sequence")
                break
    return problems


def initial_strata(data: TrialData, rng: np.random.Generator) -> np.ndarray:
    """Initial stratum labels: deterministic cells fixed, ambiguous cells a fair coin.

    Survivor under control -> always-survivor; death under active ->
    never-survivor.  Survivor under active is always-survivor or protected
    with probability 1/2 each; death under control is protected or
    never-survivor with probability 1/2 each.
    """
    n = data.n_individuals
    labels = np.empty(n, dtype=np.int8)
    coin = rng.random(n) < 0.5
    a, s = data.treatment, data.survived
    labels[(a == 0) & (s == 1)] = StratumLabel.ALWAYS_SURVIVOR
    labels[(a == 1) & (s == 0)] = StratumLabel.NEVER_SURVIVOR
    m = (a == 1) & (s == 1)
    labels[m] = np.where(coin[m], StratumLabel.ALWAYS_SURVIVOR, StratumLabel.PROTECTED)
    m = (a == 0) & (s == 0)
    labels[m] = np.where(coin[m], StratumLabel.PROTECTED, StratumLabel.NEVER_SURVIVOR)
    return labels


def labels_consistent(data: TrialData, labels: np.ndarray) -> bool:
    """True iff every label is admissible for its observed (treatment, survival)."""
    a, s = data.treatment, data.survived
    ok = np.ones(data.n_individuals, dtype=bool)
    ok &= ~((a == 0) & (s == 1)) | (labels == StratumLabel.ALWAYS_SURVIVOR)
    ok &= ~((a == 1) & (s == 0)) | (labels == StratumLabel.NEVER_SURVIVOR)
    ok &= ~((a == 1) & (s == 1)) | np.isin(labels, (StratumLabel.ALWAYS_SURVIVOR, StratumLabel.PROTECTED))
    ok &= ~((a == 0) & (s == 0)) | np.isin(labels, (StratumLabel.PROTECTED, StratumLabel.NEVER_SURVIVOR))
    return bool(ok.all())


@dataclass(frozen=True)
class GaussianPrior:
    """Normal prior for a coefficient block.

    ``mean``/``variance`` may be scalars (expanded to the block dimension,
    variance on the diagonal), 1-D arrays (diagonal), or for the variance a
    full covariance matrix.
    """

    mean: float | np.ndarray = 0.0
    variance: float | np.ndarray = 1000.0

    def params(self, dim: int) -> tuple[np.ndarray, np.ndarray]:
        """Return (mean vector, covariance matrix) for a block of size ``dim``."""
        mu = np.asarray(self.mean, dtype=np.float64)
        if mu.ndim == 0:
            mu = np.full(dim, float(mu))
        if mu.shape != (dim,):
            raise ValueError(f"prior mean has shape {mu.shape}, expected ({dim},)")
        v = np.asarray(self.variance, dtype=np.float64)
        if v.ndim == 0:
            cov = np.eye(dim) * float(v)
        elif v.ndim == 1:
            if v.shape != (dim,):
                raise ValueError(f"prior variance has shape {v.shape}, expected ({dim},)")
            cov = np.diag(v)
        else:
            if v.shape != (dim, dim):
                raise ValueError(f"prior covariance has shape {v.shape}, expected ({dim},{dim})")
            cov = v.copy()
        return mu, cov

    def check(self, name: str) -> None:
        v = np.asarray(self.variance, dtype=np.float64)
        if v.ndim == 2:
            if not np.allclose(v, v.T):
                raise ValueError(f"{name}: covariance not symmetric")
            if np.any(np.linalg.eigvalsh(v) <= 0):
                raise ValueError(f"{name}: covariance not positive definite")
        elif np.any(v <= 0):
            raise ValueError(f"{name}: variance must be positive")


@dataclass(frozen=True)
class InverseGammaPrior:
    shape: float = 0.001
    rate: float = 0.001

    def check(self, name: str) -> None:
        if self.shape <= 0 or self.rate <= 0:
            raise ValueError(f"{name}: inverse-gamma shape/rate must be positive")


@dataclass(frozen=True)
class PriorSpec:
    """Priors for every sampled block; defaults are the diffuse specification.

    Outcome-model blocks are per stratum (always-survivor "11", protected
    "10"); strata-model blocks are per multinomial component (z for
    always-survivor, w for protected).
    """

    out_coef_11: GaussianPrior = GaussianPrior()
    out_coef_10: GaussianPrior = GaussianPrior()
    out_err_11: InverseGammaPrior = InverseGammaPrior()
    out_err_10: InverseGammaPrior = InverseGammaPrior()
    out_cluster_11: InverseGammaPrior = InverseGammaPrior()
    out_cluster_10: InverseGammaPrior = InverseGammaPrior()
    out_cp_11: InverseGammaPrior = InverseGammaPrior()
    out_cp_10: InverseGammaPrior = InverseGammaPrior()
    ps_coef_z: GaussianPrior = GaussianPrior()
    ps_coef_w: GaussianPrior = GaussianPrior()
    ps_cluster_z: InverseGammaPrior = InverseGammaPrior()
    ps_cluster_w: InverseGammaPrior = InverseGammaPrior()
    ps_cp_z: InverseGammaPrior = InverseGammaPrior()
    ps_cp_w: InverseGammaPrior = InverseGammaPrior()

    def check(self) -> None:
        for f in fields(self):
            getattr(self, f.name).check(f.name)


MODEL_NAMES = ("1", "2", "3", "4", "A")

_MODEL_TOGGLES = {
    # (ps_cluster_re, ps_clusterperiod_re, outcome_clusterperiod_re)
    "1": (True, False, True),
    "2": (False, False, True),
    "3": (True, False, False),
    "4": (False, False, False),
    "A": (True, True, True),
}


@dataclass(frozen=True)
class ModelConfig:
    """Random-effect toggles, chain schedule, seed, and priors.

    Outcome cluster random effects are always present.  The named model
    variants map onto the three toggles; see :meth:`for_model`.
    """

    ps_cluster_re: bool = True
    ps_clusterperiod_re: bool = False
    outcome_clusterperiod_re: bool = True
    iterations: int = 10_000
    burn_in: int = 2_500
    thinning: int = 1
    n_chains: int = 4
    seed: int = 0
    priors: PriorSpec = PriorSpec()

    def __post_init__(self):
        if self.iterations <= 0:
            raise ValueError("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if self.n_chains < 1:
            raise ValueError("n_chains must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        self.priors.check()

    @classmethod
    def for_model(cls, name: str, **kwargs) -> "ModelConfig":
        if name not in _MODEL_TOGGLES:
            raise ValueError(f"unknown model {name!r}; expected one of {MODEL_NAMES}")
        ps_c, ps_cp, out_cp = _MODEL_TOGGLES[name]
        return cls(ps_cluster_re=ps_c, ps_clusterperiod_re=ps_cp,
                   outcome_clusterperiod_re=out_cp, **kwargs)

    @property
    def model_name(self) -> str:
        toggles = (self.ps_cluster_re, self.ps_clusterperiod_re, self.outcome_clusterperiod_re)
        for name, t in _MODEL_TOGGLES.items():
            if t == toggles:
                return name
        return "custom"


_STATE_SCALARS = (
    "sigma2_11", "sigma2_10", "sigma2_c_11", "sigma2_c_10",
    "sigma2_cp_11", "sigma2_cp_10", "tau2_c_z", "tau2_c_w",
    "tau2_cp_z", "tau2_cp_w",
)

_STATE_VECTORS = (
    "theta_11", "theta_10", "theta_z", "theta_w",
    "xi_11", "xi_10", "gamma_11", "gamma_10",
    "eta_z", "eta_w", "nu_z", "nu_w",
    "omega_z", "omega_w", "labels",
)


@dataclass
class ParameterState:
    """Full mutable Gibbs state for one chain.

    Vectors for disabled random effects are kept (identically zero) so linear
    predictors can be written uniformly; they are simply never updated.
    ``gamma_10`` spans only the treatment-1 cluster-periods.
    """

    theta_11: np.ndarray
    theta_10: np.ndarray
    theta_z: np.ndarray
    theta_w: np.ndarray
    xi_11: np.ndarray
    xi_10: np.ndarray
    gamma_11: np.ndarray
    gamma_10: np.ndarray
    eta_z: np.ndarray
    eta_w: np.ndarray
    nu_z: np.ndarray
    nu_w: np.ndarray
    sigma2_11: float
    sigma2_10: float
    sigma2_c_11: float
    sigma2_c_10: float
    sigma2_cp_11: float
    sigma2_cp_10: float
    tau2_c_z: float
    tau2_c_w: float
    tau2_cp_z: float
    tau2_cp_w: float
    omega_z: np.ndarray
    omega_w: np.ndarray
    labels: np.ndarray  # int8 StratumLabel values

    def variances(self) -> dict[str, float]:
        return {name: float(getattr(self, name)) for name in _STATE_SCALARS}

    def copy(self) -> "ParameterState":
        kwargs = {}
        for f in fields(self):
            v = getattr(self, f.name)
            kwargs[f.name] = v.copy() if isinstance(v, np.ndarray) else v
        return ParameterState(**kwargs)

    def to_bytes(self) -> bytes:
        """Bit-exact serialization (npz)."""
        buf = io.BytesIO()
        arrays = {name: getattr(self, name) for name in _STATE_VECTORS}
        scalars = np.array([getattr(self, name) for name in _STATE_SCALARS])
        np.savez(buf, _scalars=scalars, **arrays)
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "ParameterState":
        with np.load(io.BytesIO(blob)) as z:
            kwargs = {name: z[name] for name in _STATE_VECTORS}
            scalars = z["_scalars"]
        for name, val in zip(_STATE_SCALARS, scalars):
            kwargs[name] = float(val)
        return cls(**kwargs)


VARIANCE_FIELDS = _STATE_SCALARS


@dataclass
class PosteriorDraws:
    """Retained per-iteration SACE contrasts, strata counts, and variances.

    ``mu_ldiff``/``mu_rom`` are NaN for draws where no individual was labeled
    always-survivor (missing contrast).  Strata proportions are exact sample
    proportions: counts over ``n_individuals``.
    """

    chain_id: np.ndarray        # (n,)
    iteration: np.ndarray       # (n,) 1-based sweep index
    mu_ldiff: np.ndarray        # (n,)
    mu_rom: np.ndarray          # (n,)
    strata_counts: np.ndarray   # (n, 3) int: never, protected, always
    variances: np.ndarray       # (n, len(VARIANCE_FIELDS)); NaN when not sampled
    n_individuals: int

    @property
    def n_draws(self) -> int:
        return self.chain_id.shape[0]

    @property
    def strata_proportions(self) -> np.ndarray:
        """(n, 3) array of (pi_00, pi_10, pi_11) sample proportions."""
        return self.strata_counts / float(self.n_individuals)

    def variance(self, name: str) -> np.ndarray:
        return self.variances[:, VARIANCE_FIELDS.index(name)]

    @classmethod
    def pool(cls, parts: list["PosteriorDraws"]) -> "PosteriorDraws":
        if not parts:
            raise ValueError("no draws to pool")
        n_ind = parts[0].n_individuals
        if any(p.n_individuals != n_ind for p in parts):
            raise ValueError("cannot pool draws over different datasets")
        return cls(
            chain_id=np.concatenate([p.chain_id for p in parts]),
            iteration=np.concatenate([p.iteration for p in parts]),
            mu_ldiff=np.concatenate([p.mu_ldiff for p in parts]),
            mu_rom=np.concatenate([p.mu_rom for p in parts]),
            strata_counts=np.concatenate([p.strata_counts for p in parts]),
            variances=np.concatenate([p.variances for p in parts]),
            n_individuals=n_ind,
        )
