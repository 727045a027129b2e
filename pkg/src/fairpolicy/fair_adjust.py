"""Marginal-quantile (MQ) adjustment and its conditional-quantile (CQ) inverse.

A feature is pushed through its within-group empirical cdf and then through
the pooled empirical quantile function. The within-group cdf maps the group
minimum to 0, the maximum to 1 and spaces the order statistics evenly in
between (Hyndman and Fan's definition 7). Tied values are spread uniformly
over the cdf interval their tie block occupies, so mass points do not leak
group membership.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _rng
from .data_model import CONTINUOUS, KINDS, FeatureTable, ScoreMatrix, SensitiveVector


def empirical_cdf(values) -> np.ndarray:
    """``(Rank - 1) / (m - 1)`` with ``Rank(a_i) = #{j : a_j <= a_i}``.

    Tied values all receive the upper end of their block, before any
    randomization.
    """
    a = np.asarray(values, dtype=float)
    m = len(a)
    if m < 2:
        raise ValueError(f"empirical cdf needs at least 2 values, got {m}")
    rank = np.searchsorted(np.sort(a), a, side="right")
    return (rank - 1) / (m - 1)


def _tie_bounds(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper cdf bounds of each value's tie block within ``a``."""
    m = len(a)
    srt = np.sort(a)
    below = np.searchsorted(srt, a, side="left")  # #{a_j < a_i}
    upto = np.searchsorted(srt, a, side="right")  # #{a_j <= a_i}
    return below / (m - 1), (upto - 1) / (m - 1)


def _stratified_uniform(rng: np.random.Generator, block: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """One draw on ``(lo, hi]`` per entry, stratified within each tie block.

    The ``c`` members of a block get a random permutation of the ``c``
    equal-width slices of their interval and a uniform position inside
    their slice. Each draw is marginally uniform on ``(lo, hi]``, while the
    block's draws as a whole cover the interval evenly.
    """
    n = len(block)
    order = np.lexsort((rng.random(n), block))
    sorted_block = block[order]
    start = np.r_[0, np.flatnonzero(np.diff(sorted_block)) + 1]
    sizes = np.diff(np.r_[start, n])
    slot = np.empty(n)
    slot[order] = np.arange(n) - np.repeat(start, sizes)
    count = np.empty(n)
    count[order] = np.repeat(sizes, sizes)
    return hi - (hi - lo) * (slot + rng.random(n)) / count


def marginal_quantile(sorted_pool: np.ndarray, p) -> np.ndarray:
    """Linear-interpolation quantile: ``c = 1 + (N-1) p`` between order statistics."""
    n = len(sorted_pool)
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    c = (n - 1) * p
    lo = np.floor(c).astype(np.int64)
    kappa = c - lo
    hi = np.minimum(lo + 1, n - 1)
    a, b = sorted_pool[lo], sorted_pool[hi]
    # this form (plus the clamp) is exactly monotone in p under rounding
    return np.minimum(a + kappa * (b - a), b)


def marginal_cdf(sorted_pool: np.ndarray, t: float) -> float:
    """Right inverse of :func:`marginal_quantile`: ``sup{p : quantile(p) <= t}``."""
    n = len(sorted_pool)
    k = int(np.searchsorted(sorted_pool, t, side="right"))
    if k == 0:
        return 0.0
    if k == n:
        return 1.0
    lo, hi = sorted_pool[k - 1], sorted_pool[k]
    return float(((k - 1) + (t - lo) / (hi - lo)) / (n - 1))


@dataclass(frozen=True)
class GroupCdf:
    """Stored ``(a, p)`` pairs of one group, sorted by ``p`` (``a`` is then nondecreasing)."""

    a: np.ndarray
    p: np.ndarray

    def pairs(self) -> list[tuple[float, float]]:
        return list(zip(self.a.tolist(), self.p.tolist()))


@dataclass(frozen=True)
class ColumnCdf:
    name: str
    kind: str
    groups: tuple[GroupCdf | None, ...]
    pool: np.ndarray  # pooled sorted sample, the marginal quantile function's support

    def to_cdf(self, values, labels, rng: np.random.Generator) -> np.ndarray:
        """Map new values to cdf scale with the stored within-group tables.

        Exact hits on a tie block draw uniformly on the block's interval,
        values between stored points are linearly interpolated, values
        outside the group's range are clamped to 0 or 1.
        """
        x = np.asarray(values, dtype=float)
        labels = np.asarray(labels)
        out = np.empty(len(x))
        for s in range(len(self.groups)):
            idx = np.flatnonzero(labels == s)
            if idx.size == 0:
                continue
            g = self.groups[s]
            if g is None:
                raise ValueError(f"no fitted cdf for group {s} in column {self.name!r}")
            out[idx] = _group_to_cdf(g, x[idx], rng)
        return out

    def to_adjusted(self, p) -> np.ndarray:
        return marginal_quantile(self.pool, p)

    def to_marginal_cdf(self, t: float) -> float:
        """Largest ``p`` whose marginal quantile is ``<= t``.

        Thus ``to_adjusted(p_i) <= t`` exactly when ``p_i <= to_marginal_cdf(t)``.
        Thresholds below the pooled minimum return 0.
        """
        return marginal_cdf(self.pool, t)


def _group_to_cdf(g: GroupCdf, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    v, first, counts = np.unique(g.a, return_index=True, return_counts=True)
    last = first + counts - 1
    m = len(g.a)
    j = np.searchsorted(v, x, side="left")
    jc = np.minimum(j, len(v) - 1)
    exact = (j < len(v)) & (v[jc] == x)
    out = np.empty(len(x))

    hit = np.flatnonzero(exact)
    tied = counts[jc[hit]] > 1
    # tie block k covers cdf values (first_k / (m-1), last_k / (m-1)]
    blk = jc[hit[tied]]
    out[hit[tied]] = _stratified_uniform(rng, blk, first[blk] / (m - 1), last[blk] / (m - 1))
    out[hit[~tied]] = g.p[first[jc[hit[~tied]]]]

    miss = np.flatnonzero(~exact)
    jm = j[miss]
    low = jm == 0
    high = jm == len(v)
    out[miss[low]] = 0.0
    out[miss[high]] = 1.0
    mid = miss[~low & ~high]
    k = j[mid]
    # interpolate between the neighbouring blocks' cdf bounds, not their random draws
    a0, p0 = v[k - 1], last[k - 1] / (m - 1)
    a1, p1 = v[k], first[k] / (m - 1)
    out[mid] = p0 + (p1 - p0) * (x[mid] - a0) / (a1 - a0)
    return out


@dataclass(frozen=True)
class CdfModel:
    """Per-column within-group cdf tables plus the pooled marginal sample."""

    columns: tuple[ColumnCdf, ...]

    def transform(self, features: FeatureTable, sensitive: SensitiveVector, seed: int,
                  stream: int = _rng.EVAL_FEATURES) -> "AdjustedFeatures":
        """Adjust fresh data with the stored tables (no refitting)."""
        p = np.empty((features.n, len(self.columns)))
        for j, (col, fitted) in enumerate(zip(features.columns, self.columns)):
            p[:, j] = fitted.to_cdf(col.values, sensitive.labels, _rng.stream(seed, stream, j))
        adj = np.column_stack([c.to_adjusted(p[:, j]) for j, c in enumerate(self.columns)])
        return AdjustedFeatures(p, adj, seed, tuple(c.name for c in self.columns), self)


@dataclass(frozen=True)
class AdjustedFeatures:
    p_values: np.ndarray
    adjusted: np.ndarray
    rng_seed: int
    names: tuple[str, ...]
    model: CdfModel

    @property
    def n(self) -> int:
        return self.p_values.shape[0]

    def take(self, rows) -> "AdjustedFeatures":
        return AdjustedFeatures(self.p_values[rows], self.adjusted[rows], self.rng_seed, self.names, self.model)


def fit_column(values, kind: str, sensitive: SensitiveVector, rng: np.random.Generator,
               name: str = "") -> tuple[np.ndarray, np.ndarray, ColumnCdf]:
    """MQ-adjust one column; also return the fitted tables for later inversion.

    Groups are processed in label order and, within a group, tied rows draw
    their randomized cdf value in row order.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown column kind {kind!r}")
    a = np.asarray(values, dtype=float)
    labels = sensitive.labels
    if len(a) != len(labels):
        raise ValueError("values and sensitive labels differ in length")
    p = np.empty(len(a))
    groups: list[GroupCdf | None] = []
    for s in range(sensitive.k):
        idx = np.flatnonzero(labels == s)
        if idx.size == 0:
            groups.append(None)
            continue
        if idx.size == 1:
            raise ValueError(
                f"sensitive group {sensitive.group_names[s]!r} has a single member; "
                "the within-group cdf is undefined"
            )
        a_s = a[idx]
        lo, hi = _tie_bounds(a_s)
        p_s = hi.copy()
        tied = np.flatnonzero(lo < hi)
        if tied.size:
            p_s[tied] = _stratified_uniform(rng, lo[tied], lo[tied], hi[tied])
        p[idx] = p_s
        order = np.lexsort((p_s, a_s))
        groups.append(GroupCdf(a_s[order], p_s[order]))
    pool = np.sort(a)
    adjusted = marginal_quantile(pool, p)
    return p, adjusted, ColumnCdf(name, kind, tuple(groups), pool)


def mq_adjust_column(values, kind: str, sensitive: SensitiveVector, rng: np.random.Generator):
    """Return ``(p, adjusted)`` for one column."""
    p, adjusted, _ = fit_column(values, kind, sensitive, rng)
    return p, adjusted


def mq_adjust_table(features: FeatureTable, sensitive: SensitiveVector, seed: int) -> AdjustedFeatures:
    """Adjust every column independently, column ``j`` on stream ``(seed, features, j)``."""
    ps, adjs, fitted = [], [], []
    for j, col in enumerate(features.columns):
        p, adj, cdf = fit_column(col.values, col.kind, sensitive, _rng.stream(seed, _rng.FEATURES, j), col.name)
        ps.append(p)
        adjs.append(adj)
        fitted.append(cdf)
    return AdjustedFeatures(
        np.column_stack(ps), np.column_stack(adjs), seed, tuple(features.names), CdfModel(tuple(fitted))
    )


def fit_scores(scores: ScoreMatrix, sensitive: SensitiveVector, seed: int,
               stream: int = _rng.SCORES) -> tuple[ScoreMatrix, CdfModel]:
    cols, fitted = [], []
    for d, name in enumerate(scores.treatment_names):
        _, adj, cdf = fit_column(scores.values[:, d], CONTINUOUS, sensitive,
                                 _rng.stream(seed, stream, d), name)
        cols.append(adj)
        fitted.append(cdf)
    return ScoreMatrix(np.column_stack(cols), scores.treatment_names), CdfModel(tuple(fitted))


def mq_adjust_scores(scores: ScoreMatrix, sensitive: SensitiveVector, seed: int,
                     stream: int = _rng.SCORES) -> ScoreMatrix:
    """MQ-adjust each score column as a continuous variable.

    Uses a stream separate from feature adjustment, so adding or dropping
    score adjustment never changes the adjusted features.
    """
    return fit_scores(scores, sensitive, seed, stream)[0]


def cq_lookup(p: float, pairs) -> float:
    """Map a cdf-scale threshold back to the original scale for one group.

    ``pairs`` is a :class:`GroupCdf` or a sequence of ``(a, p)`` tuples
    sorted by ``p``. An exact match on ``p`` returns its ``a``; otherwise
    the bracketing pairs are interpolated linearly. Thresholds outside the
    stored range clamp to the group minimum or maximum.
    """
    if isinstance(pairs, GroupCdf):
        a_arr, p_arr = pairs.a, pairs.p
    else:
        if len(pairs) == 0:
            raise ValueError("cq_lookup needs at least one (a, p) pair")
        arr = np.asarray(pairs, dtype=float)
        a_arr, p_arr = arr[:, 0], arr[:, 1]
    i = int(np.searchsorted(p_arr, p, side="left"))
    if i < len(p_arr) and p_arr[i] == p:
        return float(a_arr[i])
    if i == 0:
        return float(a_arr[0])
    if i == len(p_arr):
        return float(a_arr[-1])
    a0, a1 = a_arr[i - 1], a_arr[i]
    p0, p1 = p_arr[i - 1], p_arr[i]
    return float(a0 + ((a1 - a0) / (p1 - p0)) * (p - p0))


def blend_features(original: FeatureTable, adjusted: AdjustedFeatures, lam: float) -> FeatureTable:
    """``(1 - lam) * A + lam * A_adjusted``; the result is all-continuous."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    mixed = (1.0 - lam) * original.matrix() + lam * adjusted.adjusted
    return original.with_values(mixed, kind=CONTINUOUS)
