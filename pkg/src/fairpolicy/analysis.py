"""Benchmark comparison, partial-adjustment sweep and winners/losers clustering."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .data_model import CONTINUOUS, DISCRETE, Column, Dataset, FeatureTable, ScoreMatrix, validate_dataset
from .fair_adjust import blend_features, fit_scores, mq_adjust_scores, mq_adjust_table
from .fairness_metrics import FairnessReport, fairness_report
from .policy_tree import ADJUSTED, PolicyTree, fit_tree, predict_tree, to_cdf_scale
from .prob_split_tree import ProbSplitPolicy, predict_prob, transform
from .scores import all_in_one_policy, blackbox_policy, blend_scores, policy_value, program_shares

log = logging.getLogger(__name__)

TARGETS = ("A", "scores", "both")


@dataclass
class AnalysisConfig:
    depth: int = 3
    n_points: int = 100
    seed: int = 0
    train_frac: float = 2.0 / 3.0
    lambdas: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)
    targets: tuple[str, ...] = TARGETS
    prior_concentration: float = 1.0
    k_min: int = 2
    k_max: int = 10
    min_share: float = 0.01

    def __post_init__(self):
        if not 0 <= self.depth <= 3:
            raise ValueError("depth must lie in 0..3")
        if self.n_points < 1:
            raise ValueError("n_points must be at least 1")
        if not 0.0 < self.train_frac < 1.0:
            raise ValueError("train_frac must lie in (0, 1)")
        bad = [t for t in self.targets if t not in TARGETS]
        if bad:
            raise ValueError(f"unknown adjustment targets {bad}; choose from {TARGETS}")
        lams = list(self.lambdas)
        if any(not 0.0 <= x <= 1.0 for x in lams) or lams != sorted(lams):
            raise ValueError("lambdas must be sorted and lie in [0, 1]")


@dataclass
class ComparisonRow:
    policy: str
    interpretable: bool
    policy_value: float
    fairness: FairnessReport
    program_shares: np.ndarray


@dataclass
class Comparison:
    rows: list[ComparisonRow]
    trees: dict[str, PolicyTree] = field(default_factory=dict)
    prob_policies: dict[str, ProbSplitPolicy] = field(default_factory=dict)
    assignments: dict[str, np.ndarray] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def row(self, name: str) -> ComparisonRow:
        for r in self.rows:
            if r.policy == name:
                return r
        raise KeyError(name)


@dataclass
class SweepPoint:
    target: str
    lam: float
    policy_value: float
    cramers_v: float


@dataclass
class Cluster:
    mean_delta: float
    size: int
    covariate_means: dict[str, float]


@dataclass
class ClusterSummary:
    k: int
    clusters: list[Cluster]
    silhouette: float
    flagged: bool = False
    note: str = ""
    inertia: float = 0.0


# policy names as they appear in reports
OBSERVED = "Observed"
BLACKBOX = "Blackbox"
BLACKBOX_FAIR = "Blackbox fair"
ALL_IN_ONE = "All in one"
TREE_INCL_S = "Tree unadjusted incl. S"
TREE_EXCL_S = "Tree unadjusted excl. S"
TREE_A = "Tree adjust A"
TREE_SCORES = "Tree adjust scores"
TREE_BOTH = "Tree adjust A and scores"
PROB_A = "Prob. split tree adjust A"
PROB_BOTH = "Prob. split tree adjust A and scores"


def split_indices(n: int, train_frac: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    perm = _rng.stream(seed, _rng.SPLIT).permutation(n)
    n_train = int(round(train_frac * n))
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def _with_sensitive(features: FeatureTable, data: Dataset) -> FeatureTable:
    sens = data.sensitive
    if sens.attributes is not None:
        extra = [Column(name, DISCRETE, sens.attributes[:, j]) for j, name in enumerate(sens.attribute_names)]
    else:
        extra = [Column("sensitive_group", DISCRETE, sens.labels)]
    return FeatureTable(tuple(features.columns) + tuple(extra))


def _row(name, interpretable, assignment, scores: ScoreMatrix, sensitive, prior) -> ComparisonRow:
    t = scores.n_treatments
    return ComparisonRow(name, interpretable, policy_value(assignment, scores),
                         fairness_report(assignment, sensitive, t, prior), program_shares(assignment, t))


def run_comparison(data: Dataset, config: AnalysisConfig, split=None) -> Comparison:
    """Fit every benchmark and tree policy on the training split and audit it on the evaluation split."""
    problems = validate_dataset(data.features, data.sensitive, data.scores)
    if problems:
        raise ValueError("invalid dataset: " + "; ".join(problems))
    train_idx, eval_idx = split if split is not None else split_indices(data.n, config.train_frac, config.seed)
    train, ev = data.take(train_idx), data.take(eval_idx)
    prior = config.prior_concentration
    seed = config.seed
    g_eval = ev.scores
    rows: list[ComparisonRow] = []
    out = Comparison(rows)

    def add(name, interpretable, assignment):
        d = np.asarray(getattr(assignment, "treatments", assignment))
        out.assignments[name] = d
        rows.append(_row(name, interpretable, d, g_eval, ev.sensitive, prior))

    if ev.observed is not None:
        add(OBSERVED, False, ev.observed.treatments)
    else:
        out.notes.append("no observed assignment supplied; Observed row omitted")
    add(BLACKBOX, False, blackbox_policy(g_eval))
    add(BLACKBOX_FAIR, False, blackbox_policy(mq_adjust_scores(g_eval, ev.sensitive, seed, _rng.EVAL_SCORES)))
    _, best = all_in_one_policy(train.scores)
    add(ALL_IN_ONE, True, np.full(ev.n, best))

    fit = dict(depth=config.depth, n_points=config.n_points)
    adj_train = mq_adjust_table(train.features, train.sensitive, seed)
    adj_eval = adj_train.model.transform(ev.features, ev.sensitive, seed)
    scores_adj, _ = fit_scores(train.scores, train.sensitive, seed)

    incl = _with_sensitive(train.features, train)
    tree = fit_tree(incl, train.scores, **fit)
    out.trees[TREE_INCL_S] = tree
    add(TREE_INCL_S, True, predict_tree(tree, _with_sensitive(ev.features, ev)))

    tree = fit_tree(train.features, train.scores, **fit)
    out.trees[TREE_EXCL_S] = tree
    add(TREE_EXCL_S, True, predict_tree(tree, ev.features))

    # adjusted-scale trees: same inputs as the fully adjusted end of the sweep
    adj_features = train.features.with_values(adj_train.adjusted, kind=CONTINUOUS)
    tree_a = fit_tree(adj_features, train.scores, scale=ADJUSTED, **fit)
    out.trees[TREE_A] = tree_a
    add(TREE_A, False, predict_tree(tree_a, adj_eval.adjusted))

    tree = fit_tree(train.features, scores_adj, **fit)
    out.trees[TREE_SCORES] = tree
    add(TREE_SCORES, True, predict_tree(tree, ev.features))

    tree_both = fit_tree(adj_features, scores_adj, scale=ADJUSTED, **fit)
    out.trees[TREE_BOTH] = tree_both
    add(TREE_BOTH, False, predict_tree(tree_both, adj_eval.adjusted))

    for name, src, key in ((PROB_A, tree_a, 1), (PROB_BOTH, tree_both, 2)):
        policy = transform(to_cdf_scale(src, adj_train.model), adj_train, train.features, train.sensitive)
        out.prob_policies[name] = policy
        add(name, True, predict_prob(policy, ev.features, ev.sensitive, _rng.stream(seed, _rng.PREDICT, key)))
    return out


def partial_sweep(data: Dataset, config: AnalysisConfig, lambdas=None, targets=None, split=None) -> list[SweepPoint]:
    """Refit the tree on linear blends of original and adjusted inputs.

    ``target`` selects what is blended: the features (``"A"``), the scores
    (``"scores"``) or both. Blended features are treated as continuous.
    """
    lambdas = list(config.lambdas if lambdas is None else lambdas)
    targets = list(config.targets if targets is None else targets)
    if any(not 0.0 <= x <= 1.0 for x in lambdas):
        raise ValueError("lambdas must lie in [0, 1]")
    train_idx, eval_idx = split if split is not None else split_indices(data.n, config.train_frac, config.seed)
    train, ev = data.take(train_idx), data.take(eval_idx)
    seed = config.seed
    adj_train = mq_adjust_table(train.features, train.sensitive, seed)
    adj_eval = adj_train.model.transform(ev.features, ev.sensitive, seed)
    scores_adj, _ = fit_scores(train.scores, train.sensitive, seed)
    t = ev.scores.n_treatments
    points = []
    for target in targets:
        for lam in lambdas:
            if target in ("A", "both"):
                x_train = blend_features(train.features, adj_train, lam)
                x_eval = blend_features(ev.features, adj_eval, lam)
            else:
                x_train, x_eval = train.features, ev.features
            g_train = blend_scores(train.scores, scores_adj, lam) if target in ("scores", "both") else train.scores
            tree = fit_tree(x_train, g_train, depth=config.depth, n_points=config.n_points)
            d = predict_tree(tree, x_eval)
            rep = fairness_report(d, ev.sensitive, t, config.prior_concentration)
            points.append(SweepPoint(target, float(lam), policy_value(d, ev.scores), rep.cramers_v))
            log.info("sweep %s lambda=%.3f value=%.4f V=%.4f", target, lam, points[-1].policy_value, rep.cramers_v)
    return points


def winners_losers(policy_a, policy_b, scores) -> np.ndarray:
    """Per-row score change from switching ``policy_a`` to ``policy_b``."""
    a = np.asarray(getattr(policy_a, "treatments", policy_a), dtype=np.int64)
    b = np.asarray(getattr(policy_b, "treatments", policy_b), dtype=np.int64)
    g = np.asarray(getattr(scores, "values", scores), dtype=float)
    if len(a) != len(b) or len(a) != g.shape[0]:
        raise ValueError("policies and scores must have the same number of rows")
    rows = np.arange(len(a))
    return g[rows, b] - g[rows, a]


def kmeans_cluster(delta, covariates: dict[str, np.ndarray] | None = None, k_range=range(2, 11),
                   min_share: float = 0.01, seed: int = 0, n_init: int = 10) -> ClusterSummary:
    """K-means++ on the standardized score change, with k picked by silhouette.

    Only solutions whose smallest cluster holds at least ``min_share`` of
    the rows are eligible. If none is, the best silhouette overall is
    returned and flagged. Clusters are reported in increasing order of mean
    change.
    """
    from sklearn.cluster import KMeans
    from sklearn.metrics import silhouette_score

    delta = np.asarray(delta, dtype=float)
    covariates = covariates or {}
    ks = sorted(set(k_range))
    if any(k < 2 or k > 10 for k in ks):
        raise ValueError("k_range must lie within 2..10")
    if not 0.0 < min_share < 0.5:
        raise ValueError("min_share must lie in (0, 0.5)")
    n = len(delta)

    def summary(labels, k, sil, flagged=False, note="", inertia=0.0):
        clusters = []
        for c in range(k):
            m = labels == c
            clusters.append(Cluster(float(delta[m].mean()), int(m.sum()),
                                    {name: float(np.asarray(v)[m].mean()) for name, v in covariates.items()}))
        clusters.sort(key=lambda c: c.mean_delta)
        return ClusterSummary(k, clusters, sil, flagged, note, inertia)

    sd = delta.std()
    n_distinct = len(np.unique(delta))
    if n_distinct < 2 or sd == 0:
        return summary(np.zeros(n, dtype=int), 1, 0.0, True, "no variation in score changes; single cluster")
    z = ((delta - delta.mean()) / sd)[:, None]

    fits = []
    for k in ks:
        if k > n_distinct or k >= n:
            continue
        km = KMeans(n_clusters=k, init="k-means++", n_init=n_init, max_iter=300, tol=0.0, random_state=seed)
        labels = km.fit_predict(z)
        if len(np.unique(labels)) < 2:
            continue
        sil = float(silhouette_score(z, labels, metric="euclidean"))
        smallest = np.bincount(labels, minlength=k).min()
        fits.append((k, labels, sil, smallest >= min_share * n, float(km.inertia_)))
    if not fits:
        return summary(np.zeros(n, dtype=int), 1, 0.0, True, "too few distinct values to cluster")
    feasible = [f for f in fits if f[3]]
    if feasible:
        k, labels, sil, _, inertia = max(feasible, key=lambda f: (f[2], -f[0]))
        return summary(labels, k, sil, inertia=inertia)
    k, labels, sil, _, inertia = max(fits, key=lambda f: (f[2], -f[0]))
    return summary(labels, k, sil, True, f"no k satisfied min_share={min_share}; constraint ignored", inertia)


def cluster_comparison(comp: Comparison, data: Dataset, config: AnalysisConfig, split=None) -> ClusterSummary:
    """Cluster the evaluation rows by their gain from the fairness-aware probabilistic split tree."""
    _, eval_idx = split if split is not None else split_indices(data.n, config.train_frac, config.seed)
    ev = data.take(eval_idx)
    delta = winners_losers(comp.assignments[TREE_EXCL_S], comp.assignments[PROB_BOTH], ev.scores)
    covs = dict(ev.covariates) or {name: ev.features.columns[j].values for j, name in enumerate(ev.features.names)}
    return kmeans_cluster(delta, covs, range(config.k_min, config.k_max + 1), config.min_share,
                          seed=config.seed)

