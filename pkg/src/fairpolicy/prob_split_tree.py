"""Group-specific raw-scale trees recovered from a cdf-scale policy tree.

Each cdf-scale threshold ``p`` is mapped back per sensitive group through the
group's stored ``(a, p)`` table. Where a raw value ``a == g`` spans a range
of randomized cdf values, the split becomes probabilistic: units exactly at
``g`` go left with the share that went left in the cdf-scale tree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import DISCRETE, Assignment, FeatureTable, SensitiveVector
from .fair_adjust import AdjustedFeatures, cq_lookup
from .policy_tree import Node, PolicyTree, predict_tree


@dataclass
class ProbNode:
    treatment: int | None = None
    feature: int | None = None
    threshold: float | None = None
    share_left: float = 1.0
    left: "ProbNode | None" = None
    right: "ProbNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    @property
    def probabilistic(self) -> bool:
        return not self.is_leaf and self.share_left < 1.0

    def nodes(self):
        yield self
        if not self.is_leaf:
            yield from self.left.nodes()
            yield from self.right.nodes()

    def depth(self) -> int:
        return 0 if self.is_leaf else 1 + max(self.left.depth(), self.right.depth())


@dataclass
class ProbSplitPolicy:
    group_trees: tuple[ProbNode, ...]
    group_names: tuple[str, ...]
    feature_names: tuple[str, ...]
    treatment_names: tuple[str, ...]
    source: PolicyTree
    seed: int | None = None

    @property
    def k(self) -> int:
        return len(self.group_trees)

    def to_dict(self) -> dict:
        def enc(node: ProbNode) -> dict:
            if node.is_leaf:
                return {"leaf": int(node.treatment)}
            return {
                "feature": self.feature_names[node.feature],
                "feature_index": int(node.feature),
                "threshold": float(node.threshold),
                "share_left": float(node.share_left),
                "strict": bool(node.probabilistic),
                "left": enc(node.left),
                "right": enc(node.right),
            }

        return {
            "group_names": list(self.group_names),
            "feature_names": list(self.feature_names),
            "treatment_names": list(self.treatment_names),
            "seed": self.seed,
            "groups": [enc(t) for t in self.group_trees],
            "source": self.source.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ProbSplitPolicy":
        def dec(d: dict) -> ProbNode:
            if "leaf" in d:
                return ProbNode(treatment=int(d["leaf"]))
            return ProbNode(feature=int(d["feature_index"]), threshold=float(d["threshold"]),
                            share_left=float(d["share_left"]), left=dec(d["left"]), right=dec(d["right"]))

        return cls(tuple(dec(g) for g in doc["groups"]), tuple(doc["group_names"]),
                   tuple(doc["feature_names"]), tuple(doc["treatment_names"]),
                   PolicyTree.from_dict(doc["source"]), doc.get("seed"))


def _floor_to_support(g: float, support: np.ndarray) -> float:
    below = support[support <= g]
    return float(below[-1]) if below.size else float(g)


def transform(tree_cdf: PolicyTree, adjusted: AdjustedFeatures, features: FeatureTable,
              sensitive: SensitiveVector) -> ProbSplitPolicy:
    """Translate a tree fitted on within-group cdf values into per-group raw-scale trees.

    For group ``s`` and an internal node splitting feature ``j`` at cdf value
    ``p``, the raw threshold is ``g = cq_lookup(p)`` over the whole group's
    stored pairs. Among the training rows reaching the node with
    ``a_ij == g`` in group ``s``, the share with ``p_ij <= p`` becomes the
    node's left share; an empty set gives share 1. A deterministic split on
    a discrete feature is stated at the largest support value ``<= g``.
    """
    P = adjusted.p_values
    A = features.matrix()
    labels = sensitive.labels
    model = adjusted.model

    def build(node: Node, rows: np.ndarray, s: int) -> ProbNode:
        if node.is_leaf:
            return ProbNode(treatment=node.treatment)
        j, p = node.feature, node.threshold
        table = model.columns[j].groups[s]
        if table is None:
            raise ValueError(f"group {sensitive.group_names[s]!r} has no fitted cdf for {features.names[j]!r}")
        g = cq_lookup(p, table)
        at_g = rows[(labels[rows] == s) & (A[rows, j] == g)]
        share = float(np.mean(P[at_g, j] <= p)) if at_g.size else 1.0
        threshold = g
        col = features.columns[j]
        if share == 1.0 and col.kind == DISCRETE:
            threshold = _floor_to_support(g, col.support)
        go_left = P[rows, j] <= p
        return ProbNode(feature=j, threshold=threshold, share_left=share,
                        left=build(node.left, rows[go_left], s),
                        right=build(node.right, rows[~go_left], s))

    rows = np.arange(features.n)
    trees = tuple(build(tree_cdf.root, rows, s) for s in range(sensitive.k))
    return ProbSplitPolicy(trees, sensitive.group_names, tuple(features.names),
                           tuple(tree_cdf.treatment_names), tree_cdf, adjusted.rng_seed)


def predict_prob(policy: ProbSplitPolicy, features, sensitive, rng: np.random.Generator) -> Assignment:
    """Route each row through its group's tree.

    Values below the threshold go left, values above go right, and values
    equal to it go left with probability ``share_left``. One uniform per row
    per tree level is drawn up front, so the outcome depends only on the
    generator state.
    """
    X = np.asarray(getattr(features, "matrix", lambda: features)(), dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    labels = np.asarray(getattr(sensitive, "labels", sensitive))
    depth = max(t.depth() for t in policy.group_trees)
    u = rng.random((X.shape[0], max(depth, 1)))
    out = np.empty(X.shape[0], dtype=np.int64)

    def walk(node: ProbNode, rows: np.ndarray, level: int):
        if node.is_leaf:
            out[rows] = node.treatment
            return
        x = X[rows, node.feature]
        left = (x < node.threshold) | ((x == node.threshold) & (u[rows, level] < node.share_left))
        walk(node.left, rows[left], level + 1)
        walk(node.right, rows[~left], level + 1)

    for s, tree in enumerate(policy.group_trees):
        walk(tree, np.flatnonzero(labels == s), 0)
    return Assignment(out, len(policy.treatment_names) or None)


def condense(policy: ProbSplitPolicy) -> dict:
    """One tree that first branches on the sensitive group, for rendering."""
    if policy.k == 1:
        return policy.to_dict()["groups"][0]
    groups = policy.to_dict()["groups"]
    return {"split": "sensitive group",
            "branches": [{"group": name, "tree": tree} for name, tree in zip(policy.group_names, groups)]}


def render(policy: ProbSplitPolicy) -> str:
    """Plain-text rendering: one block per group, shares as percentages."""
    names = policy.treatment_names
    lines: list[str] = []

    def walk(node: ProbNode, indent: int):
        pad = "  " * indent
        if node.is_leaf:
            lines.append(f"{pad}-> {names[node.treatment] if names else node.treatment}")
            return
        var = policy.feature_names[node.feature]
        g = f"{node.threshold:.6g}"
        if node.probabilistic:
            pct = 100.0 * node.share_left
            lines.append(f"{pad}{var} < {g}, or {var} = {g} with prob. {pct:.1f}%")
            walk(node.left, indent + 1)
            lines.append(f"{pad}{var} > {g}, or {var} = {g} with prob. {100.0 - pct:.1f}%")
        else:
            lines.append(f"{pad}{var} <= {g}")
            walk(node.left, indent + 1)
            lines.append(f"{pad}{var} > {g}")
        walk(node.right, indent + 1)

    for name, tree in zip(policy.group_names, policy.group_trees):
        if policy.k > 1:
            lines.append(f"[{name}]")
            walk(tree, 1)
        else:
            walk(tree, 0)
    return "\n".join(lines)


def check_equivalence(policy: ProbSplitPolicy, adjusted: AdjustedFeatures, features: FeatureTable,
                      sensitive: SensitiveVector, rng: np.random.Generator) -> float:
    """Share of training rows where the raw-scale policy agrees with its cdf-scale source."""
    a = predict_prob(policy, features, sensitive, rng).treatments
    b = predict_tree(policy.source, adjusted.p_values).treatments
    return float(np.mean(a == b))
