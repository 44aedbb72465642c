"""Per-draw SACE contrasts, strata proportions, posterior summaries, and
highest-posterior-density intervals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import VARIANCE_FIELDS, PosteriorDraws, StratumLabel, TrialData
from .design import DesignMatrices


__all__ = [
    "sace_ldiff",
    "sace_rom",
    "strata_proportions",
    "hpd_interval",
    "summarize",
    "split_rhat",
    "SaceSummary",
]


def _logmeanexp(x: np.ndarray) -> float:
    # max-shifted; called twice per sweep, so kept free of scipy overhead
    m = x.max()
    return float(m + np.log(np.mean(np.exp(x - m))))


def _out11_blocks(dm: DesignMatrices):
    """Column slices of the always-survivor design: covariate and period blocks."""
    p = dm.D_out_10.shape[1] - dm.n_periods  # covariate count
    beta = slice(2, 2 + p)
    delta = slice(2 + p, 1 + p + dm.n_periods)
    beta1 = slice(1 + p + dm.n_periods, 1 + 2 * p + dm.n_periods)
    return p, beta, delta, beta1


def sace_ldiff(state, dm: DesignMatrices, data: TrialData) -> float:
    """Difference-in-means SACE on the log scale at the current draw.

    Treatment main effect plus the treatment-by-covariate effects evaluated
    at the covariate mean of the currently-labeled always-survivors.  NaN
    when no individual is labeled always-survivor (missing contrast).
    """
    labels = np.asarray(state.labels)
    rows = labels == StratumLabel.ALWAYS_SURVIVOR
    n = int(rows.sum())
    if n == 0:
        return float("nan")
    _, _, _, beta1 = _out11_blocks(dm)
    xbar = data.covariates[rows].mean(axis=0)
    theta = state.theta_11
    return float(theta[1] + theta[beta1] @ xbar)


def sace_rom(state, dm: DesignMatrices, data: TrialData) -> float:
    """Ratio-of-means SACE on the raw outcome scale at the current draw.

    exp(treatment effect) times the ratio of always-survivor sample means of
    the exponentiated linear predictor with and without the treatment-by-
    covariate terms; evaluated through log-sum-exp.
    """
    labels = np.asarray(state.labels)
    rows = labels == StratumLabel.ALWAYS_SURVIVOR
    n = int(rows.sum())
    if n == 0:
        return float("nan")
    _, beta_sl, delta_sl, beta1_sl = _out11_blocks(dm)
    theta = state.theta_11
    d = dm.D_out_11[rows]
    base = d[:, beta_sl] @ theta[beta_sl] + d[:, delta_sl] @ theta[delta_sl]
    shifted = base + d[:, beta_sl] @ theta[beta1_sl]
    return float(np.exp(theta[1] + _logmeanexp(shifted) - _logmeanexp(base)))


def strata_proportions(state) -> np.ndarray:
    """Sample proportions (pi_00, pi_10, pi_11) of the current labels."""
    labels = np.asarray(state.labels)
    counts = np.bincount(labels, minlength=3)
    return counts / labels.shape[0]


def hpd_interval(draws, mass: float) -> tuple[float, float]:
    """Shortest contiguous window of the sorted draws holding ceil(mass*n)
    points; ties broken toward the smallest lower endpoint."""
    if not 0.0 < mass < 1.0:
        raise ValueError("mass must be in (0, 1)")
    arr = np.asarray(draws, dtype=np.float64).ravel()
    arr = arr[np.isfinite(arr)]
    n = arr.shape[0]
    if n < 50:
        raise ValueError("need at least 50 finite draws for an HPD interval")
    srt = np.sort(arr)
    m = int(np.ceil(mass * n))
    if m >= n:
        return float(srt[0]), float(srt[-1])
    widths = srt[m - 1:] - srt[: n - m + 1]
    i = int(np.argmin(widths))
    return float(srt[i]), float(srt[i + m - 1])


def split_rhat(chains: list[np.ndarray]) -> float | None:
    """Split-chain potential scale reduction; None when not computable."""
    halves = []
    for c in chains:
        c = np.asarray(c, dtype=np.float64)
        c = c[np.isfinite(c)]
        h = c.shape[0] // 2
        if h >= 2:
            halves.append(c[:h])
            halves.append(c[h: 2 * h])
    if len(halves) < 2:
        return None
    n = min(h.shape[0] for h in halves)
    stacked = np.stack([h[:n] for h in halves])
    means = stacked.mean(axis=1)
    within = stacked.var(axis=1, ddof=1).mean()
    between = n * means.var(ddof=1)
    if within <= 0:
        return None
    var_hat = (n - 1) / n * within + between / n
    return float(np.sqrt(var_hat / within))


@dataclass(frozen=True)
class SaceSummary:
    """Pooled posterior summary: means and HPD intervals for the contrasts,
    strata proportions, and sampled variance components."""

    mu_ldiff_mean: float
    mu_ldiff_hpd: tuple[float, float]
    mu_rom_mean: float
    mu_rom_hpd: tuple[float, float]
    pi_mean: tuple[float, float, float]
    pi_hpd: tuple[tuple[float, float], ...]
    variance_mean: dict[str, float]
    variance_hpd: dict[str, tuple[float, float]]
    missing_fraction: float
    n_draws: int
    n_chains: int
    rhat_mu_ldiff: float | None
    mass: float

    def to_flat_dict(self) -> dict[str, float]:
        out = {
            "mu_ldiff_mean": self.mu_ldiff_mean,
            "mu_ldiff_hpd_lo": self.mu_ldiff_hpd[0],
            "mu_ldiff_hpd_hi": self.mu_ldiff_hpd[1],
            "mu_rom_mean": self.mu_rom_mean,
            "mu_rom_hpd_lo": self.mu_rom_hpd[0],
            "mu_rom_hpd_hi": self.mu_rom_hpd[1],
        }
        for name, k in (("pi_00", 0), ("pi_10", 1), ("pi_11", 2)):
            out[f"{name}_mean"] = self.pi_mean[k]
            out[f"{name}_hpd_lo"] = self.pi_hpd[k][0]
            out[f"{name}_hpd_hi"] = self.pi_hpd[k][1]
        for name in VARIANCE_FIELDS:
            if name in self.variance_mean:
                out[f"{name}_mean"] = self.variance_mean[name]
                out[f"{name}_hpd_lo"] = self.variance_hpd[name][0]
                out[f"{name}_hpd_hi"] = self.variance_hpd[name][1]
        out["missing_fraction"] = self.missing_fraction
        out["n_draws"] = self.n_draws
        out["n_chains"] = self.n_chains
        if self.rhat_mu_ldiff is not None:
            out["rhat_mu_ldiff"] = self.rhat_mu_ldiff
        out["hpd_mass"] = self.mass
        return out


def _finite_summary(values: np.ndarray, mass: float) -> tuple[float, tuple[float, float]]:
    """Mean and HPD over finite draws; NaN summaries when a component has too
    few finite draws to summarize (a degenerate block under the diffuse
    prior, e.g. an inverse-gamma variance that left double range)."""
    finite = values[np.isfinite(values)]
    if finite.size < 50:
        return float("nan"), (float("nan"), float("nan"))
    return float(finite.mean()), hpd_interval(finite, mass)


def summarize(draws: PosteriorDraws, mass: float = 0.95) -> SaceSummary:
    """Pool retained draws across chains into means and HPD intervals."""
    ldiff = draws.mu_ldiff
    rom = draws.mu_rom
    missing = float(np.mean(~np.isfinite(ldiff))) if ldiff.size else 1.0

    props = draws.strata_proportions
    pi_mean = tuple(float(x) for x in props.mean(axis=0))
    pi_hpd = tuple(hpd_interval(props[:, k], mass) for k in range(3))

    var_mean: dict[str, float] = {}
    var_hpd: dict[str, tuple[float, float]] = {}
    for j, name in enumerate(VARIANCE_FIELDS):
        col = draws.variances[:, j]
        if np.all(np.isnan(col)):
            continue
        var_mean[name], var_hpd[name] = _finite_summary(col, mass)

    chain_ids = np.unique(draws.chain_id)
    rhat = split_rhat([ldiff[draws.chain_id == c] for c in chain_ids])

    ld_mean, ld_hpd = _finite_summary(ldiff, mass)
    rom_mean, rom_hpd = _finite_summary(rom, mass)
    return SaceSummary(
        mu_ldiff_mean=ld_mean,
        mu_ldiff_hpd=ld_hpd,
        mu_rom_mean=rom_mean,
        mu_rom_hpd=rom_hpd,
        pi_mean=pi_mean,
        pi_hpd=pi_hpd,
        variance_mean=var_mean,
        variance_hpd=var_hpd,
        missing_fraction=missing,
        n_draws=draws.n_draws,
        n_chains=int(chain_ids.shape[0]),
        rhat_mu_ldiff=rhat,
        mass=mass,
    )
