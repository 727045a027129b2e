"""Typed containers shared across the package.

All containers are frozen dataclasses wrapping numpy arrays. Arrays are
marked read-only on construction so instances can be shared freely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

CONTINUOUS = "continuous"
DISCRETE = "discrete"
KINDS = (CONTINUOUS, DISCRETE)


class DataError(ValueError):
    """Raised when a container is constructed from inconsistent data."""


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Column:
    name: str
    kind: str
    values: np.ndarray
    support: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"column {self.name!r}: unknown kind {self.kind!r}")
        object.__setattr__(self, "values", _frozen(self.values))
        if self.kind == DISCRETE:
            support = np.unique(self.values) if self.support is None else self.support
            object.__setattr__(self, "support", _frozen(support))
        elif self.support is not None:
            raise DataError(f"column {self.name!r}: support given for continuous column")


@dataclass(frozen=True)
class FeatureTable:
    """Decision-relevant features, one :class:`Column` per feature."""

    columns: tuple[Column, ...]

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        if not self.columns:
            raise DataError("feature table needs at least one column")
        lengths = {len(c.values) for c in self.columns}
        if len(lengths) != 1:
            raise DataError(f"columns have different lengths: {sorted(lengths)}")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise DataError("duplicate column names")

    @classmethod
    def from_arrays(cls, data, names: Sequence[str], kinds: Sequence[str] | None = None):
        data = np.asarray(data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        kinds = kinds or [CONTINUOUS] * data.shape[1]
        return cls(tuple(Column(n, k, data[:, j]) for j, (n, k) in enumerate(zip(names, kinds))))

    @property
    def n(self) -> int:
        return len(self.columns[0].values)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def kinds(self) -> list[str]:
        return [c.kind for c in self.columns]

    def matrix(self) -> np.ndarray:
        return np.column_stack([c.values for c in self.columns])

    def take(self, rows) -> "FeatureTable":
        # keep the declared support so subsets still validate against it
        return FeatureTable(
            tuple(Column(c.name, c.kind, c.values[rows], c.support) for c in self.columns)
        )

    def with_values(self, matrix, kind: str | None = None) -> "FeatureTable":
        """Same names, new values. ``kind`` overrides every column's kind."""
        matrix = np.asarray(matrix, dtype=float)
        cols = []
        for j, c in enumerate(self.columns):
            k = kind or c.kind
            support = c.support if (k == DISCRETE and kind is None) else None
            cols.append(Column(c.name, k, matrix[:, j], support))
        return FeatureTable(tuple(cols))


@dataclass(frozen=True)
class SensitiveVector:
    """Joint sensitive-group label per observation.

    ``attributes`` optionally keeps the component attributes the joint label
    was built from (one integer column per attribute), so a policy may use
    them directly as features.
    """

    labels: np.ndarray
    group_names: tuple[str, ...]
    attributes: np.ndarray | None = None
    attribute_names: tuple[str, ...] = ()

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.size and not np.all(np.equal(np.mod(labels, 1), 0)):
            raise DataError("sensitive labels must be integers")
        object.__setattr__(self, "labels", _frozen(labels, dtype=np.int64))
        object.__setattr__(self, "group_names", tuple(self.group_names))
        if len(self.group_names) < 1:
            raise DataError("need at least one sensitive group")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.k):
            raise DataError(f"sensitive labels must lie in 0..{self.k - 1}")
        if self.attributes is not None:
            attrs = _frozen(np.atleast_2d(np.asarray(self.attributes).T).T, dtype=np.int64)
            if attrs.shape[0] != len(self.labels):
                raise DataError("attribute rows do not match labels")
            object.__setattr__(self, "attributes", attrs)
            object.__setattr__(self, "attribute_names", tuple(self.attribute_names))

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def k(self) -> int:
        return len(self.group_names)

    def counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def take(self, rows) -> "SensitiveVector":
        attrs = None if self.attributes is None else self.attributes[rows]
        return SensitiveVector(self.labels[rows], self.group_names, attrs, self.attribute_names)

    @classmethod
    def from_attributes(cls, columns: dict[str, Sequence]) -> "SensitiveVector":
        """Cross-product encode one or more discrete attributes into joint groups.

        Groups are every combination of observed levels, ordered
        lexicographically, so empty combinations are kept (and flagged later
        by validation).
        """
        names = list(columns)
        raw = [np.asarray(columns[n]) for n in names]
        levels, codes = [], []
        for col in raw:
            lev, code = np.unique(col, return_inverse=True)
            levels.append(lev)
            codes.append(code)
        sizes = [len(lev) for lev in levels]
        labels = np.ravel_multi_index(codes, sizes) if codes else np.zeros(0, dtype=int)
        group_names = []
        for idx in np.ndindex(*sizes):
            group_names.append("|".join(f"{n}={levels[j][i]}" for j, (n, i) in enumerate(zip(names, idx))))
        return cls(labels, tuple(group_names), np.column_stack(codes), tuple(names))


@dataclass(frozen=True)
class ScoreMatrix:
    values: np.ndarray
    treatment_names: tuple[str, ...] = ()

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2:
            raise DataError("scores must be a 2-d array")
        object.__setattr__(self, "values", _frozen(vals))
        names = tuple(self.treatment_names) or tuple(f"d{d}" for d in range(vals.shape[1]))
        if len(names) != vals.shape[1]:
            raise DataError("treatment_names length does not match score columns")
        object.__setattr__(self, "treatment_names", names)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def n_treatments(self) -> int:
        return self.values.shape[1]

    def take(self, rows) -> "ScoreMatrix":
        return ScoreMatrix(self.values[rows], self.treatment_names)


@dataclass(frozen=True)
class Assignment:
    treatments: np.ndarray
    n_treatments: int | None = None

    def __post_init__(self):
        t = np.asarray(self.treatments)
        if t.size and not np.all(np.equal(np.mod(t, 1), 0)):
            raise DataError("treatments must be integers")
        object.__setattr__(self, "treatments", _frozen(t, dtype=np.int64))
        if t.size and self.treatments.min() < 0:
            raise DataError("treatment indices must be nonnegative")
        if self.n_treatments is not None and t.size and self.treatments.max() >= self.n_treatments:
            raise DataError(f"treatment index out of range 0..{self.n_treatments - 1}")

    def __len__(self) -> int:
        return len(self.treatments)

    def take(self, rows) -> "Assignment":
        return Assignment(self.treatments[rows], self.n_treatments)


@dataclass(frozen=True)
class NuisanceEstimates:
    """Outcome regressions ``mu``, propensities ``e``, outcomes and observed treatments."""

    mu: np.ndarray
    e: np.ndarray | None = None
    y: np.ndarray | None = None
    d_obs: np.ndarray | None = None
    treatment_names: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "mu", _frozen(np.atleast_2d(self.mu)))
        n, t = self.mu.shape
        if self.e is not None:
            e = _frozen(self.e)
            if e.shape != (n, t):
                raise DataError("propensity matrix shape differs from mu")
            if np.any(e < 0) or np.any(e > 1):
                raise DataError("propensities must lie in [0, 1]")
            rowsum = e.sum(axis=1)
            if np.any((rowsum < 0.99) | (rowsum > 1.01)):
                raise DataError("propensity rows must sum to 1 (within 0.01)")
            object.__setattr__(self, "e", e)
        if self.y is not None:
            object.__setattr__(self, "y", _frozen(self.y))
        if self.d_obs is not None:
            d = _frozen(self.d_obs, dtype=np.int64)
            if d.size and (d.min() < 0 or d.max() >= t):
                raise DataError("observed treatment index out of range")
            object.__setattr__(self, "d_obs", d)
        object.__setattr__(self, "treatment_names", tuple(self.treatment_names))

    @property
    def n(self) -> int:
        return self.mu.shape[0]


@dataclass(frozen=True)
class Dataset:
    """Everything one run needs: features, sensitive groups, scores."""

    features: FeatureTable
    sensitive: SensitiveVector
    scores: ScoreMatrix
    observed: Assignment | None = None
    covariates: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.features.n

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(
            self.features.take(rows),
            self.sensitive.take(rows),
            self.scores.take(rows),
            None if self.observed is None else self.observed.take(rows),
            {k: np.asarray(v)[rows] for k, v in self.covariates.items()},
        )


def validate_dataset(features: FeatureTable, sensitive: SensitiveVector, scores: ScoreMatrix) -> list[str]:
    """Check the cross-container invariants.

    Returns a list of human-readable violations; an empty list means the
    inputs may be fed to any fitting routine.
    """
    problems: list[str] = []
    n = features.n
    if n < 2:
        problems.append(f"need at least 2 observations, got {n}")
    if sensitive.n != n:
        problems.append(f"length mismatch: features have {n} rows, sensitive has {sensitive.n}")
    if scores.n != n:
        problems.append(f"length mismatch: features have {n} rows, scores have {scores.n}")
    if scores.n_treatments < 2:
        problems.append("scores need at least 2 treatment columns")

    for col in features.columns:
        bad = ~np.isfinite(col.values)
        if bad.any():
            problems.append(f"missing or non-finite value in column {col.name!r} at row {int(np.flatnonzero(bad)[0])}")
        if col.kind == DISCRETE:
            if np.any(np.diff(col.support) <= 0):
                problems.append(f"support of column {col.name!r} is not strictly increasing")
            outside = ~np.isin(col.values, col.support) & np.isfinite(col.values)
            if outside.any():
                i = int(np.flatnonzero(outside)[0])
                problems.append(f"unsupported discrete value {col.values[i]!r} in column {col.name!r} at row {i}")

    bad = ~np.isfinite(scores.values)
    if bad.any():
        for i, d in np.argwhere(bad)[:5]:
            problems.append(f"non-finite score at row {int(i)}, column {scores.treatment_names[d]!r}")

    if sensitive.n == n:
        for s, c in enumerate(sensitive.counts()):
            if c == 0:
                problems.append(f"empty sensitive group {sensitive.group_names[s]!r}")
            elif c == 1:
                problems.append(f"singleton sensitive group {sensitive.group_names[s]!r}")
    return problems
