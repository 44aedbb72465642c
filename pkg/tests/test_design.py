import numpy as np

from crxo_sace.core import StratumLabel, TrialData
from crxo_sace.design import build_designs, stratum_views

from helpers import tiny_instance

ALWAYS = StratumLabel.ALWAYS_SURVIVOR
PROT = StratumLabel.PROTECTED
NEVER = StratumLabel.NEVER_SURVIVOR


class Labels:
    def __init__(self, labels):
        self.labels = np.asarray(labels, dtype=np.int8)


def small_trial(I=2, per_cp=1, p=3, seed=0):
    rng = np.random.default_rng(seed)
    cluster, period, treat = [], [], []
    for i in range(1, I + 1):
        start = 1 if i % 2 == 1 else 0
        for j in (1, 2):
            a = start if j == 1 else 1 - start
            cluster += [i] * per_cp
            period += [j] * per_cp
            treat += [a] * per_cp
    n = len(cluster)
    survived = np.ones(n, dtype=int)
    return TrialData(
        cluster_id=cluster, period=period, treatment=treat, survived=survived,
        log_outcome=rng.normal(size=n), covariates=rng.normal(size=(n, p)),
        covariate_names=tuple(f"x{k}" for k in range(1, p + 1)), n_clusters=I)


class TestBuildDesigns:
    def test_minimal_indicator_shapes(self):
        dm = build_designs(small_trial(I=2, per_cp=1))
        assert dm.P.shape == (4, 2)
        assert np.all(dm.P.sum(axis=0) == 2)
        assert np.all(dm.P.sum(axis=1) == 1)
        assert dm.L.shape == (4, 4)
        assert np.all(dm.L.sum(axis=0) == 1)
        assert np.all(dm.L.sum(axis=1) == 1)

    def test_cluster_period_key_formula(self):
        # cluster 3, period 2 in a 5-cluster trial -> key 3 + 5*(2-1) = 8
        data = small_trial(I=5, per_cp=1)
        dm = build_designs(data)
        row = np.flatnonzero((data.cluster_id == 3) & (data.period == 2))[0]
        key_1based = dm.cp_key[dm.cp_idx[row]] + 1
        assert key_1based == 3 + 5 * (2 - 1)
        assert np.flatnonzero(dm.L[row])[0] == dm.cp_idx[row]

    def test_column_counts(self):
        dm = build_designs(small_trial(p=3))
        assert dm.D_out_11.shape[1] == 9  # 1 + 1 + 3 + 1 + 3
        assert dm.D_out_10.shape[1] == 5
        assert dm.D_ps.shape[1] == 5

    def test_interaction_block_is_product(self):
        data = small_trial(I=4, per_cp=3)
        dm = build_designs(data)
        a = dm.D_out_11[:, 1:2]
        X = dm.D_out_11[:, 2:5]
        assert np.array_equal(dm.D_out_11[:, 6:9], a * X)

    def test_missing_cluster_period_compacted(self):
        data = small_trial(I=3, per_cp=2)
        keep = ~((data.cluster_id == 2) & (data.period == 2))
        data2 = TrialData(
            cluster_id=data.cluster_id[keep], period=data.period[keep],
            treatment=data.treatment[keep], survived=data.survived[keep],
            log_outcome=data.log_outcome[keep], covariates=data.covariates[keep],
            covariate_names=data.covariate_names, n_clusters=3)
        dm = build_designs(data2)
        assert dm.n_cp == 5  # six cells minus the absent one
        assert dm.L.shape[1] == 5
        missing_key = (2 - 1) + 3 * (2 - 1)
        assert missing_key not in set(dm.cp_key.tolist())
        # gamma_10 support: only the observed treated cluster-periods
        assert dm.n_cp1 == int(dm.cp_treated.sum())

    def test_row_order_stability_under_permutation(self):
        data = small_trial(I=3, per_cp=2, seed=5)
        perm = np.random.default_rng(1).permutation(data.n_individuals)
        data_p = TrialData(
            cluster_id=data.cluster_id[perm], period=data.period[perm],
            treatment=data.treatment[perm], survived=data.survived[perm],
            log_outcome=data.log_outcome[perm], covariates=data.covariates[perm],
            covariate_names=data.covariate_names, n_clusters=3)
        dm, dm_p = build_designs(data), build_designs(data_p)
        # identical structures after undoing the permutation on rows
        assert np.array_equal(dm.cp_idx[perm], dm_p.cp_idx)
        assert np.array_equal(dm.cluster_idx[perm], dm_p.cluster_idx)
        assert np.array_equal(dm.cp_key, dm_p.cp_key)


class TestStratumViews:
    def test_all_never_survivors(self):
        data = small_trial()
        dm = build_designs(data)
        views = stratum_views(dm, Labels([NEVER] * 4), data)
        assert views.n_y11 == 0 and views.n_y10 == 0

    def test_single_protected_survivor(self):
        data = small_trial()
        dm = build_designs(data)
        treated = int(np.flatnonzero(data.treatment == 1)[0])
        labels = [NEVER] * 4
        labels[treated] = PROT
        views = stratum_views(dm, Labels(labels), data)
        assert views.rows_y10.tolist() == [treated]
        assert views.n_y11 == 0

    def test_counts_match_brute_force(self):
        data, dm, _, state = tiny_instance()
        views = stratum_views(dm, state, data)
        tally_11 = sum(1 for i in range(data.n_individuals)
                       if state.labels[i] == ALWAYS and data.survived[i] == 1)
        tally_10 = sum(1 for i in range(data.n_individuals)
                       if state.labels[i] == PROT and data.survived[i] == 1)
        assert views.n_y11 == tally_11
        assert views.n_y10 == tally_10

    def test_protected_view_is_treated_only(self):
        data, dm, _, state = tiny_instance()
        views = stratum_views(dm, state, data)
        assert np.all(data.treatment[views.rows_y10] == 1)

    def test_protected_view_single_cluster_period_per_cluster(self):
        # two-period design: a cluster's observable protected outcomes all sit
        # in its single treated period
        data, dm, _, state = tiny_instance()
        views = stratum_views(dm, state, data)
        for i in np.unique(dm.cluster_idx[views.rows_y10]):
            rows = views.rows_y10[dm.cluster_idx[views.rows_y10] == i]
            assert np.unique(dm.cp_idx[rows]).size == 1
