"""Globally optimal policy trees of depth at most three.

The search is exhaustive over a fixed grid of candidate thresholds. Rows are
binned by candidate (bin ``k`` holds values in ``(t_{k-1}, t_k]``) and score
sums are accumulated per bin, so the value of every split at every level can
be read off cumulative sums instead of re-scanning rows. For a node with
``r`` levels left, the best value of each first split ``(feature, k)`` is
computed from an ``r``-dimensional histogram; the winning split is then
expanded recursively on its actual rows.

Ties between equal-valued trees are broken locally at each node: a leaf
beats any split, then the lower feature index, then the lower threshold.
Leaves take the lowest-index treatment among maximizers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data_model import CONTINUOUS, DISCRETE

MAX_DEPTH = 3
RAW = "raw"
CDF = "cdf"
ADJUSTED = "adjusted"  # marginal-quantile scale, maps to CDF through the pooled sample


@dataclass
class Node:
    treatment: int | None = None
    feature: int | None = None
    threshold: float | None = None
    left: "Node | None" = None
    right: "Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def nodes(self):
        yield self
        if not self.is_leaf:
            yield from self.left.nodes()
            yield from self.right.nodes()


@dataclass
class PolicyTree:
    root: Node
    feature_names: tuple[str, ...]
    scale: str = RAW
    max_depth: int = MAX_DEPTH
    treatment_names: tuple[str, ...] = ()
    train_value: float | None = None

    @property
    def depth(self) -> int:
        return self.root.depth()

    def predict(self, features) -> np.ndarray:
        return predict_tree(self, features).treatments

    def to_dict(self) -> dict:
        def enc(node: Node) -> dict:
            if node.is_leaf:
                d = {"leaf": int(node.treatment)}
                if self.treatment_names:
                    d["treatment"] = self.treatment_names[node.treatment]
                return d
            return {
                "feature": self.feature_names[node.feature],
                "feature_index": int(node.feature),
                "threshold": float(node.threshold),
                "scale": self.scale,
                "left": enc(node.left),
                "right": enc(node.right),
            }

        return {
            "scale": self.scale,
            "depth": self.depth,
            "max_depth": self.max_depth,
            "feature_names": list(self.feature_names),
            "treatment_names": list(self.treatment_names),
            "train_value": self.train_value,
            "root": enc(self.root),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PolicyTree":
        def dec(d: dict) -> Node:
            if "leaf" in d:
                return Node(treatment=int(d["leaf"]))
            return Node(feature=int(d["feature_index"]), threshold=float(d["threshold"]),
                        left=dec(d["left"]), right=dec(d["right"]))

        return cls(dec(doc["root"]), tuple(doc["feature_names"]), doc.get("scale", RAW),
                   doc.get("max_depth", MAX_DEPTH), tuple(doc.get("treatment_names", ())),
                   doc.get("train_value"))

    def render(self) -> str:
        lines: list[str] = []

        def name(d: int) -> str:
            return self.treatment_names[d] if self.treatment_names else str(d)

        def walk(node: Node, indent: int):
            pad = "  " * indent
            if node.is_leaf:
                lines.append(f"{pad}-> {name(node.treatment)}")
                return
            var = self.feature_names[node.feature]
            lines.append(f"{pad}{var} <= {node.threshold:.6g}")
            walk(node.left, indent + 1)
            lines.append(f"{pad}{var} > {node.threshold:.6g}")
            walk(node.right, indent + 1)

        walk(self.root, 0)
        return "\n".join(lines)


def enumerate_candidates(column, kind: str, n_points: int = 100) -> np.ndarray:
    """Split thresholds for one feature.

    Continuous columns use the empirical quantiles at ``k / (n_points + 1)``;
    discrete columns use midpoints between consecutive observed values.
    Thresholds that would send every row left are dropped.
    """
    if n_points < 1:
        raise ValueError("n_points must be at least 1")
    x = np.asarray(column, dtype=float)
    if x.size == 0:
        return np.empty(0)
    if kind == DISCRETE:
        u = np.unique(x)
        return (u[:-1] + u[1:]) / 2.0
    if kind != CONTINUOUS:
        raise ValueError(f"unknown column kind {kind!r}")
    probs = np.arange(1, n_points + 1) / (n_points + 1)
    q = np.unique(np.quantile(x, probs))
    return q[q < x.max()]


def candidate_grid(features, kinds: Sequence[str] | None = None, n_points: int = 100) -> list[np.ndarray]:
    X = np.asarray(features, dtype=float)
    kinds = kinds or [CONTINUOUS] * X.shape[1]
    return [enumerate_candidates(X[:, j], kinds[j], n_points) for j in range(X.shape[1])]


def _best_one_split(region: np.ndarray) -> np.ndarray:
    """Best value of a depth-at-most-one tree over the bin axis ``-2``.

    ``region`` has shape ``(..., B, T)``: score sums per bin and treatment.
    """
    cum = np.cumsum(region, axis=-2)
    tot = cum[..., -1, :]
    best = tot.max(axis=-1)
    if region.shape[-2] > 1:
        left = cum[..., :-1, :]
        right = tot[..., None, :] - left
        split = (left.max(axis=-1) + right.max(axis=-1)).max(axis=-1)
        best = np.maximum(best, split)
    return best


class _Searcher:
    def __init__(self, bins: np.ndarray, n_bins: Sequence[int], scores: np.ndarray):
        self.bins = bins
        self.n_bins = list(n_bins)
        self.scores = scores
        self.t = scores.shape[1]

    def _hist(self, rows: np.ndarray, feats: Sequence[int]) -> np.ndarray:
        shape = [self.n_bins[f] for f in feats]
        flat = np.zeros(len(rows), dtype=np.int64)
        for f, b in zip(feats, shape):
            flat = flat * b + self.bins[rows, f]
        size = int(np.prod(shape))
        g = self.scores[rows]
        h = np.stack([np.bincount(flat, weights=g[:, d], minlength=size) for d in range(self.t)], axis=-1)
        return h.reshape(*shape, self.t)

    def _splittable(self) -> list[int]:
        return [f for f, b in enumerate(self.n_bins) if b > 1]

    def scan(self, rows: np.ndarray, levels: int) -> dict[int, np.ndarray]:
        """Value of the best tree with ``levels`` levels for each first split ``(f, k)``."""
        out = {}
        feats = range(len(self.n_bins))
        for f0 in self._splittable():
            k0 = self.n_bins[f0] - 1
            if levels == 1:
                cum = np.cumsum(self._hist(rows, [f0]), axis=0)
                left = cum[:k0]
                right = cum[-1] - left
                out[f0] = left.max(axis=-1) + right.max(axis=-1)
            elif levels == 2:
                best_l = np.full(k0, -np.inf)
                best_r = np.full(k0, -np.inf)
                for f1 in feats:
                    cum = np.cumsum(self._hist(rows, [f0, f1]), axis=0)
                    left = cum[:k0]
                    right = cum[-1] - left
                    best_l = np.maximum(best_l, _best_one_split(left))
                    best_r = np.maximum(best_r, _best_one_split(right))
                out[f0] = best_l + best_r
            elif levels == 3:
                out[f0] = self._scan3(rows, f0)
            else:
                raise ValueError(f"unsupported depth {levels}")
        return out

    def _scan3(self, rows: np.ndarray, f0: int) -> np.ndarray:
        k0 = self.n_bins[f0] - 1
        cum = np.cumsum(self._hist(rows, [f0]), axis=0)
        # either child may be a single leaf
        best = [cum[:k0].max(axis=-1), (cum[-1] - cum[:k0]).max(axis=-1)]
        for f1 in self._splittable():
            k1 = self.n_bins[f1] - 1
            acc = [[np.full((k0, k1), -np.inf) for _ in range(2)] for _ in range(2)]
            for f2 in range(len(self.n_bins)):
                cum0 = np.cumsum(self._hist(rows, [f0, f1, f2]), axis=0)
                for side, region in enumerate((cum0[:k0], cum0[-1] - cum0[:k0])):
                    cum1 = np.cumsum(region, axis=1)
                    ll = cum1[:, :k1]
                    lr = cum1[:, -1:] - ll
                    acc[side][0] = np.maximum(acc[side][0], _best_one_split(ll))
                    acc[side][1] = np.maximum(acc[side][1], _best_one_split(lr))
            for side in range(2):
                best[side] = np.maximum(best[side], (acc[side][0] + acc[side][1]).max(axis=1))
        return best[0] + best[1]


def fit_tree(features, scores, depth: int = 3, candidates: Sequence[np.ndarray] | None = None,
             kinds: Sequence[str] | None = None, n_points: int = 100,
             feature_names: Sequence[str] | None = None, scale: str = RAW,
             treatment_names: Sequence[str] = ()) -> PolicyTree:
    """Fit the policy tree maximizing the summed scores of assigned treatments.

    Args:
        features: ``(n, F)`` matrix of split variables.
        scores: ``(n, T)`` score matrix (or :class:`ScoreMatrix`).
        depth: maximum depth, 0 to 3.
        candidates: per-feature sorted thresholds; built with
            :func:`enumerate_candidates` when omitted.

    Returns:
        The fitted :class:`PolicyTree`; ``train_value`` holds its mean score
        on the training rows.
    """
    X = np.asarray(getattr(features, "matrix", lambda: features)(), dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    G = np.asarray(getattr(scores, "values", scores), dtype=float)
    if not treatment_names and hasattr(scores, "treatment_names"):
        treatment_names = scores.treatment_names
    if feature_names is None:
        feature_names = getattr(features, "names", None) or [f"x{j}" for j in range(X.shape[1])]
    if kinds is None and hasattr(features, "kinds"):
        kinds = features.kinds
    if not 0 <= depth <= MAX_DEPTH:
        raise ValueError(f"depth must lie in 0..{MAX_DEPTH}, got {depth}")
    if X.shape[0] < 1 or X.shape[0] != G.shape[0]:
        raise ValueError("features and scores need the same positive number of rows")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain non-finite values")
    if candidates is None:
        candidates = candidate_grid(X, kinds, n_points)
    candidates = [np.unique(np.asarray(c, dtype=float)) for c in candidates]
    if len(candidates) != X.shape[1]:
        raise ValueError("need one candidate list per feature")

    bins = np.column_stack([np.searchsorted(c, X[:, j], side="left") for j, c in enumerate(candidates)])
    searcher = _Searcher(bins, [len(c) + 1 for c in candidates], G)

    def grow(rows: np.ndarray, levels: int, fallback: int) -> Node:
        if rows.size == 0:
            return Node(treatment=fallback)
        sums = G[rows].sum(axis=0)
        leaf_d = int(np.argmax(sums))
        if levels == 0:
            return Node(treatment=leaf_d)
        scanned = searcher.scan(rows, levels)
        if not scanned:
            return Node(treatment=leaf_d)
        best = max(float(v.max()) for v in scanned.values())
        tol = 1e-9 * max(1.0, float(np.abs(G[rows]).sum()))
        if best <= sums[leaf_d] + tol:
            return Node(treatment=leaf_d)
        for f in sorted(scanned):
            hits = np.flatnonzero(scanned[f] >= best - tol)
            if hits.size:
                k = int(hits[0])
                break
        go_left = bins[rows, f] <= k
        return Node(feature=f, threshold=float(candidates[f][k]),
                    left=grow(rows[go_left], levels - 1, leaf_d),
                    right=grow(rows[~go_left], levels - 1, leaf_d))

    root = grow(np.arange(X.shape[0]), depth, 0)
    tree = PolicyTree(root, tuple(feature_names), scale, depth, tuple(treatment_names))
    d = tree.predict(X)
    tree.train_value = float(G[np.arange(len(d)), d].mean())
    return tree


def to_cdf_scale(tree: PolicyTree, model) -> PolicyTree:
    """Re-express a tree fitted on adjusted features with cdf-scale thresholds.

    ``model`` is the :class:`~fairpolicy.fair_adjust.CdfModel` that produced
    the adjusted features. Routing of every row is unchanged because the
    marginal quantile function is nondecreasing.
    """
    if tree.scale != ADJUSTED:
        raise ValueError(f"expected a tree on the adjusted scale, got {tree.scale!r}")

    def conv(node: Node) -> Node:
        if node.is_leaf:
            return Node(treatment=node.treatment)
        p = model.columns[node.feature].to_marginal_cdf(node.threshold)
        return Node(feature=node.feature, threshold=p, left=conv(node.left), right=conv(node.right))

    return PolicyTree(conv(tree.root), tree.feature_names, CDF, tree.max_depth,
                      tree.treatment_names, tree.train_value)


def predict_tree(tree: PolicyTree, features):
    """Route rows with ``value <= threshold`` to the left child."""
    from .data_model import Assignment

    X = np.asarray(getattr(features, "matrix", lambda: features)(), dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    used = [n.feature for n in tree.root.nodes() if not n.is_leaf]
    if used and max(used) >= X.shape[1]:
        raise ValueError("tree uses a feature index beyond the input columns")
    if used and not np.all(np.isfinite(X[:, sorted(set(used))])):
        raise ValueError("features contain non-finite values")
    out = np.empty(X.shape[0], dtype=np.int64)

    def walk(node: Node, rows: np.ndarray):
        if node.is_leaf:
            out[rows] = node.treatment
            return
        left = X[rows, node.feature] <= node.threshold
        walk(node.left, rows[left])
        walk(node.right, rows[~left])

    walk(tree.root, np.arange(X.shape[0]))
    n_t = len(tree.treatment_names) or None
    return Assignment(out, n_t)
