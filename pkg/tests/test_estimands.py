import math
from fractions import Fraction

import numpy as np
import pytest

from crxo_sace.core import PosteriorDraws, StratumLabel, TrialData
from crxo_sace.design import build_designs
from crxo_sace.estimands import (
    hpd_interval,
    sace_ldiff,
    sace_rom,
    split_rhat,
    strata_proportions,
    summarize,
)

from helpers import tiny_instance

ALWAYS = StratumLabel.ALWAYS_SURVIVOR


def exhaustive_hpd(draws, mass):
    """Independent oracle: try every window over the sorted draws."""
    srt = sorted(float(x) for x in draws if math.isfinite(x))
    n = len(srt)
    m = math.ceil(mass * n)
    best = None
    for i in range(n - m + 1):
        width = srt[i + m - 1] - srt[i]
        if best is None or width < best[0]:
            best = (width, srt[i], srt[i + m - 1])
    return best[1], best[2]


class TestSaceLdiff:
    def test_no_interaction_returns_treatment_effect(self):
        data, dm, _, state = tiny_instance()
        s = state.copy()
        s.theta_11 = np.zeros_like(s.theta_11)
        s.theta_11[1] = 0.37
        assert sace_ldiff(s, dm, data) == pytest.approx(0.37, abs=0)

    def test_hand_instance(self):
        # alpha1 = 0.5, one interaction 0.2 with covariate mean -1 -> 0.3
        data, dm, _, state = tiny_instance()
        s = state.copy()
        s.theta_11 = np.zeros_like(s.theta_11)
        s.theta_11[1] = 0.5
        s.theta_11[6] = 0.2  # interaction with x1 (layout: 1,a,x1..x3,per,a*x1..)
        rows = np.asarray(s.labels) == ALWAYS
        xbar = data.covariates[rows].mean(axis=0)
        expected = 0.5 + 0.2 * xbar[0]
        assert sace_ldiff(s, dm, data) == pytest.approx(expected, rel=1e-12)

    def test_covariate_shift_invariance_without_interactions(self):
        data, dm, _, state = tiny_instance()
        s = state.copy()
        s.theta_11[6:9] = 0.0
        before = sace_ldiff(s, dm, data)
        shifted = TrialData(
            cluster_id=data.cluster_id, period=data.period,
            treatment=data.treatment, survived=data.survived,
            log_outcome=data.log_outcome, covariates=data.covariates + 5.0,
            covariate_names=data.covariate_names, n_clusters=data.n_clusters)
        dm2 = build_designs(shifted)
        assert sace_ldiff(s, dm2, shifted) == pytest.approx(before, rel=1e-12)

    def test_missing_when_no_always_survivors(self):
        data, dm, _, state = tiny_instance()
        s = state.copy()
        s.labels = np.full_like(s.labels, StratumLabel.NEVER_SURVIVOR)
        assert math.isnan(sace_ldiff(s, dm, data))


class TestSaceRom:
    def test_pure_treatment_effect(self):
        data, dm, _, state = tiny_instance()
        s = state.copy()
        s.theta_11 = np.zeros_like(s.theta_11)
        s.theta_11[1] = math.log(2.0)
        assert sace_rom(s, dm, data) == pytest.approx(2.0, rel=1e-12)

    def test_no_interaction_collapses_to_exp_alpha1(self):
        data, dm, _, state = tiny_instance()
        s = state.copy()
        s.theta_11[6:9] = 0.0
        assert sace_rom(s, dm, data) == pytest.approx(np.exp(s.theta_11[1]), rel=1e-12)

    def test_matches_direct_formula(self):
        data, dm, _, state = tiny_instance()
        s = state.copy()
        rows = np.flatnonzero(np.asarray(s.labels) == ALWAYS)
        theta = s.theta_11
        beta, delta, beta1 = theta[2:5], theta[5], theta[6:9]
        num, den = 0.0, 0.0
        for r in rows:
            x = data.covariates[r]
            kap = 1.0 if data.period[r] == 2 else 0.0
            den += math.exp(x @ beta + delta * kap)
            num += math.exp(x @ beta + delta * kap + x @ beta1)
        expected = math.exp(theta[1]) * num / den
        assert sace_rom(s, dm, data) == pytest.approx(expected, rel=1e-12)

    def test_always_positive(self):
        data, dm, _, state = tiny_instance()
        rng = np.random.default_rng(3)
        for _ in range(50):
            s = state.copy()
            s.theta_11 = rng.normal(0, 2, s.theta_11.shape[0])
            assert sace_rom(s, dm, data) > 0


class TestStrataProportions:
    def test_all_always(self):
        class S:
            labels = np.full(10, ALWAYS, dtype=np.int8)
        assert strata_proportions(S()).tolist() == [0.0, 0.0, 1.0]

    def test_split_counts(self):
        class S:
            labels = np.array([0, 0, 1, 2], dtype=np.int8)
        assert strata_proportions(S()).tolist() == [0.5, 0.25, 0.25]

    def test_rational_sum_is_exactly_one(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            labels = rng.integers(0, 3, size=rng.integers(3, 500))
            counts = np.bincount(labels, minlength=3)
            total = sum(Fraction(int(c), len(labels)) for c in counts)
            assert total == 1


class TestHpdInterval:
    def test_uniform_grid_ties_break_low(self):
        draws = np.arange(1.0, 101.0)
        lo, hi = hpd_interval(draws, 0.95)
        assert (lo, hi) == (1.0, 95.0)

    def test_exponential_hpd_shorter_than_equal_tailed(self):
        rng = np.random.default_rng(1)
        draws = rng.exponential(size=20_000)
        lo, hi = hpd_interval(draws, 0.95)
        q_lo, q_hi = np.quantile(draws, [0.025, 0.975])
        assert hi - lo < q_hi - q_lo

    def test_symmetric_hpd_close_to_equal_tailed(self):
        rng = np.random.default_rng(2)
        draws = rng.normal(size=50_000)
        lo, hi = hpd_interval(draws, 0.95)
        q_lo, q_hi = np.quantile(draws, [0.025, 0.975])
        assert abs(lo - q_lo) < 0.05 and abs(hi - q_hi) < 0.05

    def test_width_monotone_in_mass(self):
        rng = np.random.default_rng(3)
        draws = rng.normal(size=5_000)
        widths = []
        for mass in (0.5, 0.8, 0.9, 0.95, 0.99):
            lo, hi = hpd_interval(draws, mass)
            widths.append(hi - lo)
        assert all(a <= b for a, b in zip(widths, widths[1:]))

    def test_constant_draws(self):
        lo, hi = hpd_interval(np.full(100, 3.25), 0.95)
        assert (lo, hi) == (3.25, 3.25)

    def test_too_few_draws(self):
        with pytest.raises(ValueError):
            hpd_interval(np.arange(10.0), 0.95)

    def test_bad_mass(self):
        with pytest.raises(ValueError):
            hpd_interval(np.arange(100.0), 1.0)

    def test_matches_exhaustive_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            n = int(rng.integers(60, 400))
            draws = rng.normal(size=n) * rng.uniform(0.1, 3)
            mass = float(rng.uniform(0.5, 0.99))
            assert hpd_interval(draws, mass) == exhaustive_hpd(draws, mass)


def _draws(chain_ids, ldiff, rom=None, n_individuals=100):
    n = len(ldiff)
    ldiff = np.asarray(ldiff, dtype=np.float64)
    rom = np.abs(ldiff) + 0.5 if rom is None else np.asarray(rom, dtype=np.float64)
    counts = np.tile([30, 20, 50], (n, 1))
    variances = np.ones((n, 10))
    return PosteriorDraws(chain_id=np.asarray(chain_ids), iteration=np.arange(n),
                          mu_ldiff=ldiff, mu_rom=rom, strata_counts=counts,
                          variances=variances, n_individuals=n_individuals)


class TestSummarize:
    def test_constant_draws(self):
        d = _draws(np.zeros(200, dtype=int), np.full(200, 1.5))
        s = summarize(d)
        assert s.mu_ldiff_mean == 1.5
        assert s.mu_ldiff_hpd == (1.5, 1.5)
        assert s.missing_fraction == 0.0

    def test_pooling_covers_disjoint_chains(self):
        rng = np.random.default_rng(5)
        a = rng.normal(0.0, 0.01, 300)
        b = rng.normal(10.0, 0.01, 300)
        d = _draws(np.repeat([0, 1], 300), np.concatenate([a, b]))
        s = summarize(d)
        assert s.mu_ldiff_hpd[0] < 0.1 and s.mu_ldiff_hpd[1] > 9.9
        assert s.n_chains == 2
        assert s.rhat_mu_ldiff > 2  # disjoint chains scream non-convergence

    def test_missing_fraction(self):
        vals = np.concatenate([np.full(50, np.nan), np.ones(150)])
        d = _draws(np.zeros(200, dtype=int), vals)
        s = summarize(d)
        assert s.missing_fraction == 0.25
        assert s.mu_ldiff_mean == 1.0


def test_split_rhat_unit_for_iid():
    rng = np.random.default_rng(6)
    chains = [rng.normal(size=4000) for _ in range(4)]
    r = split_rhat(chains)
    assert abs(r - 1.0) < 0.02
