"""Contingency-table audits of treatment allocations across sensitive groups.

Three statistics are reported for a groups-by-treatments table: Cramér's V
with its Pearson chi-square test, and the natural-log Bayes factor of
dependence against independence under independent multinomial sampling
(rows fixed) with Dirichlet priors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2:
            raise ValueError("contingency table must be 2-d")
        if np.any(c < 0):
            raise ValueError("counts must be nonnegative")
        c = np.array(c, dtype=np.int64)
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def nonzero(self) -> np.ndarray:
        """The table restricted to rows and columns with positive totals."""
        c = self.counts
        return c[c.sum(axis=1) > 0][:, c.sum(axis=0) > 0]

    def is_degenerate(self) -> bool:
        nz = self.nonzero()
        return nz.shape[0] < 2 or nz.shape[1] < 2


@dataclass(frozen=True)
class FairnessReport:
    cramers_v: float
    chi2: float
    dof: int
    p_value: float
    log_bf: float
    degenerate: bool = False


def contingency(assignment, sensitive, n_treatments: int) -> ContingencyTable:
    """Cross-tabulate groups (rows) against assigned treatments (columns)."""
    d = np.asarray(getattr(assignment, "treatments", assignment), dtype=np.int64)
    s = np.asarray(getattr(sensitive, "labels", sensitive), dtype=np.int64)
    if len(d) != len(s):
        raise ValueError(f"assignment has {len(d)} rows, sensitive has {len(s)}")
    k = getattr(sensitive, "k", int(s.max()) + 1 if len(s) else 1)
    counts = np.zeros((k, n_treatments), dtype=np.int64)
    np.add.at(counts, (s, d), 1)
    return ContingencyTable(counts)


def cramers_v(table: ContingencyTable) -> tuple[float, float, int, float]:
    """Cramér's V, Pearson chi-square, degrees of freedom and upper-tail p-value.

    Empty rows and columns are dropped first. A table with a single nonzero
    row or column carries no association information and returns
    ``(0.0, 0.0, 0, 1.0)``.
    """
    obs = table.nonzero().astype(float)
    r, c = obs.shape
    if r < 2 or c < 2:
        return 0.0, 0.0, 0, 1.0
    n = obs.sum()
    expected = np.outer(obs.sum(axis=1), obs.sum(axis=0)) / n
    chi2 = float(((obs - expected) ** 2 / expected).sum())
    dof = (r - 1) * (c - 1)
    v = math.sqrt(chi2 / (n * (min(r, c) - 1)))
    # rounding can push perfect association a hair above one
    v = min(v, 1.0)
    p = float(stats.chi2.sf(chi2, dof))
    return v, chi2, dof, p


def log_bayes_factor(table: ContingencyTable, prior_concentration: float = 1.0) -> float:
    """Natural-log Bayes factor of dependence vs. independence.

    Rows are treated as independent multinomial samples with their totals
    fixed. Under dependence each row has its own category probabilities with
    a symmetric Dirichlet(``prior_concentration``) prior; under independence
    all rows share one probability vector with the same prior. Multinomial
    coefficients cancel, leaving gamma-function sums over cell, row and
    column counts. Positive values favour dependence. Treatments nobody
    received are dropped before evaluation.

    Degenerate tables (a single nonzero row or column) return ``-inf``.
    """
    if prior_concentration <= 0:
        raise ValueError("prior_concentration must be positive")
    if table.is_degenerate():
        return -math.inf
    # never-assigned treatments carry no evidence either way
    n = table.nonzero().astype(float)
    a = float(prior_concentration)
    c = n.shape[1]
    rows = n.sum(axis=1)
    cols = n.sum(axis=0)
    total = n.sum()

    def log_dirmult(counts, size):
        # log E[prod theta^counts] under Dirichlet(a, ..., a)
        return (
            special.gammaln(c * a) - special.gammaln(c * a + size)
            + np.sum(special.gammaln(a + counts), axis=-1) - c * special.gammaln(a)
        )

    log_m1 = float(np.sum(log_dirmult(n, rows)))
    log_m0 = float(log_dirmult(cols, total))
    return log_m1 - log_m0


def fairness_report(assignment, sensitive, n_treatments: int, prior_concentration: float = 1.0) -> FairnessReport:
    table = contingency(assignment, sensitive, n_treatments)
    v, chi2, dof, p = cramers_v(table)
    return FairnessReport(v, chi2, dof, p, log_bayes_factor(table, prior_concentration), table.is_degenerate())
