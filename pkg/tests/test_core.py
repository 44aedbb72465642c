import numpy as np
import pytest

from crxo_sace.core import (
    ModelConfig,
    ParameterState,
    StratumLabel,
    TrialData,
    initial_strata,
    labels_consistent,
    validate,
)

from helpers import tiny_instance


def toy_data(**overrides):
    base = dict(
        cluster_id=[1, 1, 2, 2],
        period=[1, 2, 1, 2],
        treatment=[1, 0, 0, 1],
        survived=[1, 1, 1, 0],
        log_outcome=[0.3, -0.1, 0.9, np.nan],
        covariates=np.zeros((4, 2)),
        covariate_names=("x1", "x2"),
        n_clusters=2,
    )
    base.update(overrides)
    return TrialData(**base)


class TestValidate:
    def test_well_formed(self):
        assert validate(toy_data()) == []

    def test_outcome_present_for_non_survivor(self):
        data = toy_data(survived=[1, 1, 1, 0], log_outcome=[0.3, -0.1, 0.9, 0.2])
        problems = validate(data)
        assert any("outcome present for non-survivor" in p and "3" in p for p in problems)

    def test_non_alternating_sequence(self):
        data = toy_data(treatment=[1, 1, 0, 1])
        assert any("non-alternating sequence" in p for p in validate(data))

    def test_treatment_varies_within_cluster_period(self):
        data = toy_data(cluster_id=[1, 1, 1, 1], period=[1, 1, 2, 2],
                        treatment=[1, 0, 0, 1])
        assert any("varies within cluster-period" in p for p in validate(data))

    def test_missing_period_is_legal(self):
        data = toy_data(cluster_id=[1, 1, 2, 2], period=[1, 2, 1, 1],
                        treatment=[1, 0, 0, 0],
                        survived=[1, 1, 1, 1],
                        log_outcome=[0.3, -0.1, 0.9, 0.1])
        assert validate(data) == []

    def test_outcome_missing_for_survivor(self):
        data = toy_data(log_outcome=[0.3, np.nan, 0.9, np.nan])
        assert any("outcome missing for survivor" in p for p in validate(data))


class TestInitialStrata:
    def test_deterministic_cells(self):
        rng = np.random.default_rng(0)
        data = toy_data()
        for _ in range(20):
            labels = initial_strata(data, rng)
            # (a=0, s=1) rows are always-survivors; (a=1, s=0) never-survivors.
            assert labels[1] == StratumLabel.ALWAYS_SURVIVOR
            assert labels[2] == StratumLabel.ALWAYS_SURVIVOR
            assert labels[3] == StratumLabel.NEVER_SURVIVOR
            assert labels_consistent(data, labels)

    def test_fair_coin_on_treated_survivors(self):
        n = 10_000
        data = TrialData(
            cluster_id=np.ones(n, dtype=int), period=np.ones(n, dtype=int),
            treatment=np.ones(n, dtype=int), survived=np.ones(n, dtype=int),
            log_outcome=np.zeros(n), covariates=np.zeros((n, 1)),
            covariate_names=("x",), n_clusters=1)
        labels = initial_strata(data, np.random.default_rng(7))
        frac = np.mean(labels == StratumLabel.ALWAYS_SURVIVOR)
        assert 0.49 <= frac <= 0.51


class TestStratumLabel:
    def test_survival_pairs(self):
        assert StratumLabel.ALWAYS_SURVIVOR.survival_pair == (1, 1)
        assert StratumLabel.PROTECTED.survival_pair == (1, 0)
        assert StratumLabel.NEVER_SURVIVOR.survival_pair == (0, 0)

    def test_harmed_is_unrepresentable(self):
        pairs = {lab.survival_pair for lab in StratumLabel}
        assert (0, 1) not in pairs and len(pairs) == 3


class TestModelConfig:
    @pytest.mark.parametrize("name,toggles", [
        ("1", (True, False, True)),
        ("2", (False, False, True)),
        ("3", (True, False, False)),
        ("4", (False, False, False)),
        ("A", (True, True, True)),
    ])
    def test_model_mapping(self, name, toggles):
        cfg = ModelConfig.for_model(name)
        assert (cfg.ps_cluster_re, cfg.ps_clusterperiod_re,
                cfg.outcome_clusterperiod_re) == toggles
        assert cfg.model_name == name

    def test_burn_in_bound(self):
        with pytest.raises(ValueError):
            ModelConfig(iterations=100, burn_in=100)

    def test_thinning_bound(self):
        with pytest.raises(ValueError):
            ModelConfig(thinning=0)


def test_parameter_state_roundtrip_bit_exact():
    _, _, _, state = tiny_instance()
    blob = state.to_bytes()
    back = ParameterState.from_bytes(blob)
    for name in ("theta_11", "theta_10", "theta_z", "theta_w", "xi_11",
                 "gamma_10", "omega_z", "labels"):
        a, b = getattr(state, name), getattr(back, name)
        assert a.dtype == b.dtype
        assert np.array_equal(a, b)
    assert back.sigma2_11 == state.sigma2_11
    assert back.tau2_cp_w == state.tau2_cp_w
