"""Design structures: outcome/strata design matrices, cluster and
cluster-period indicators, and the per-sweep stratum submatrix views.

Cluster-periods are indexed by the key cluster + I*(period-1) (0-based in
code).  Cluster-periods absent from the data get no column: indexing is
compacted through a lookup, and for complete two-period trials the compacted
index equals the key.  Random effects for the protected-stratum outcome model
exist only on treatment-1 cluster-periods, so those get a second compacted
index of their own.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import StratumLabel, TrialData

__all__ = ["DesignMatrices", "StratumViews", "build_designs", "stratum_views"]


@dataclass(frozen=True)
class DesignMatrices:
    """All fixed design structures for one trial, immutable after build."""

    D_out_11: np.ndarray   # (N, 2p+3): 1, treatment, X, period dummy, treatment*X
    D_out_10: np.ndarray   # (N, p+2): 1, X, period dummy
    D_ps: np.ndarray       # (N, p+2): 1, X, period dummy
    P: np.ndarray          # (N, I) cluster indicator
    L: np.ndarray          # (N, n_cp) cluster-period indicator, compacted
    cluster_idx: np.ndarray   # (N,) 0-based cluster index
    cp_idx: np.ndarray        # (N,) 0-based compacted cluster-period index
    cp1_idx: np.ndarray       # (N,) index into treated cluster-periods, -1 off-treatment
    cp_key: np.ndarray        # (n_cp,) key cluster_idx + I*(period-1) per column
    cp_cluster: np.ndarray    # (n_cp,) cluster index of each cluster-period
    cp_period: np.ndarray     # (n_cp,) period of each cluster-period
    cp_treated: np.ndarray    # (n_cp,) bool: treatment 1 in that cluster-period
    cp1_to_cp: np.ndarray     # (n_cp1,) compacted cp index of each treated cp
    n_clusters: int
    n_periods: int

    @property
    def n_rows(self) -> int:
        return self.D_ps.shape[0]

    @property
    def n_cp(self) -> int:
        return self.cp_key.shape[0]

    @property
    def n_cp1(self) -> int:
        return self.cp1_to_cp.shape[0]

    @property
    def row_index(self) -> np.ndarray:
        """(n, 3) map of each design row to (cluster, period, ordinal within
        its cluster-period), in record order."""
        ordinal = np.zeros(self.n_rows, dtype=np.int64)
        seen: dict[int, int] = {}
        for r, cp in enumerate(self.cp_idx):
            k = seen.get(int(cp), 0)
            ordinal[r] = k
            seen[int(cp)] = k + 1
        cluster = self.cp_cluster[self.cp_idx] + 1
        period = self.cp_period[self.cp_idx]
        return np.column_stack([cluster, period, ordinal])


def build_designs(data: TrialData) -> DesignMatrices:
    n = data.n_individuals
    p = data.n_covariates
    I = data.n_clusters

    cluster_idx = data.cluster_id - 1
    period0 = data.period - 1
    key_per_row = cluster_idx + I * period0

    cp_key = np.unique(key_per_row)
    cp_lookup = {int(k): j for j, k in enumerate(cp_key)}
    cp_idx = np.array([cp_lookup[int(k)] for k in key_per_row], dtype=np.int64)
    cp_cluster = cp_key % I
    cp_period = cp_key // I + 1

    # Treatment is constant within a cluster-period (validated upstream).
    cp_treated = np.zeros(cp_key.shape[0], dtype=bool)
    cp_treated[cp_idx] = data.treatment == 1
    cp1_to_cp = np.flatnonzero(cp_treated)
    cp1_lookup = np.full(cp_key.shape[0], -1, dtype=np.int64)
    cp1_lookup[cp1_to_cp] = np.arange(cp1_to_cp.shape[0])
    cp1_idx = cp1_lookup[cp_idx]

    ones = np.ones((n, 1))
    treat = data.treatment.astype(np.float64)[:, None]
    # Period dummies with period 1 as reference.
    kappa = np.zeros((n, data.n_periods - 1))
    for j in range(2, data.n_periods + 1):
        kappa[:, j - 2] = (data.period == j).astype(np.float64)
    X = data.covariates

    D_out_11 = np.hstack([ones, treat, X, kappa, treat * X])
    D_out_10 = np.hstack([ones, X, kappa])
    D_ps = np.hstack([ones, X, kappa])

    P = np.zeros((n, I), dtype=np.int8)
    P[np.arange(n), cluster_idx] = 1
    L = np.zeros((n, cp_key.shape[0]), dtype=np.int8)
    L[np.arange(n), cp_idx] = 1

    return DesignMatrices(
        D_out_11=D_out_11, D_out_10=D_out_10, D_ps=D_ps, P=P, L=L,
        cluster_idx=cluster_idx, cp_idx=cp_idx, cp1_idx=cp1_idx,
        cp_key=cp_key, cp_cluster=cp_cluster, cp_period=cp_period,
        cp_treated=cp_treated, cp1_to_cp=cp1_to_cp,
        n_clusters=I, n_periods=data.n_periods,
    )


@dataclass(frozen=True)
class StratumViews:
    """Row-index views of the observed-outcome submatrices, one Gibbs sweep's worth."""

    rows_y11: np.ndarray
    rows_y10: np.ndarray

    @property
    def n_y11(self) -> int:
        return self.rows_y11.shape[0]

    @property
    def n_y10(self) -> int:
        return self.rows_y10.shape[0]


def stratum_views(dm: DesignMatrices, state, data: TrialData) -> StratumViews:
    """Rows with observed outcomes per stratum under the current labels.

    ``state`` only needs a ``labels`` attribute.  rows_y10 members are
    necessarily treatment-1 rows (a protected patient's outcome can only be
    observed under active treatment).
    """
    labels = np.asarray(state.labels)
    survived = data.survived == 1
    rows_y11 = np.flatnonzero((labels == StratumLabel.ALWAYS_SURVIVOR) & survived)
    rows_y10 = np.flatnonzero((labels == StratumLabel.PROTECTED) & survived)
    return StratumViews(rows_y11=rows_y11, rows_y10=rows_y10)
