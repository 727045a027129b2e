import numpy as np
import pytest

from fairpolicy.data_model import (
    Assignment, Column, DataError, Dataset, FeatureTable, NuisanceEstimates, ScoreMatrix, SensitiveVector,
    validate_dataset,
)


def _inputs(n=100, k=4, seed=0):
    rng = np.random.default_rng(seed)
    feats = FeatureTable((
        Column("x", "continuous", rng.normal(size=n)),
        Column("b", "discrete", rng.integers(0, 2, n).astype(float), np.array([0.0, 1.0])),
    ))
    sens = SensitiveVector(np.arange(n) % k, tuple(f"g{s}" for s in range(k)))
    scores = ScoreMatrix(rng.normal(size=(n, 3)), ("a", "b", "c"))
    return feats, sens, scores


class TestValidateDataset:
    def test_consistent_inputs_pass(self):
        assert validate_dataset(*_inputs()) == []

    def test_empty_group_reported(self):
        feats, _, scores = _inputs()
        sens = SensitiveVector(np.arange(100) % 3, ("g0", "g1", "g2", "g3"))
        report = validate_dataset(feats, sens, scores)
        assert any("empty sensitive group" in r and "g3" in r for r in report)

    def test_non_finite_score_names_cell(self):
        feats, sens, scores = _inputs()
        vals = scores.values.copy()
        vals[7, 2] = np.nan
        report = validate_dataset(feats, sens, ScoreMatrix(vals, scores.treatment_names))
        assert any("row 7" in r and "'c'" in r for r in report)

    def test_length_mismatch(self):
        feats, sens, scores = _inputs()
        report = validate_dataset(feats, sens.take(np.arange(50)), scores)
        assert any("length mismatch" in r for r in report)

    def test_unsupported_discrete_value(self):
        feats, sens, scores = _inputs()
        bad = feats.columns[1].values.copy()
        bad[3] = 2.0
        feats = FeatureTable((feats.columns[0], Column("b", "discrete", bad, np.array([0.0, 1.0]))))
        assert any("unsupported discrete value" in r for r in validate_dataset(feats, sens, scores))

    def test_singleton_group_flagged(self):
        feats, _, scores = _inputs()
        labels = np.zeros(100, dtype=int)
        labels[0] = 1
        report = validate_dataset(feats, SensitiveVector(labels, ("a", "b")), scores)
        assert any("singleton" in r for r in report)

    def test_pure(self):
        args = _inputs()
        assert validate_dataset(*args) == validate_dataset(*args)


class TestContainers:
    def test_arrays_read_only(self):
        feats, sens, scores = _inputs()
        with pytest.raises(ValueError):
            feats.columns[0].values[0] = 1.0
        with pytest.raises(ValueError):
            scores.values[0, 0] = 1.0

    def test_discrete_support_inferred(self):
        c = Column("d", "discrete", [3, 1, 3, 2])
        assert c.support.tolist() == [1.0, 2.0, 3.0]

    def test_unknown_kind(self):
        with pytest.raises(DataError):
            Column("d", "ordinal", [1, 2])

    def test_sensitive_cross_product(self):
        sv = SensitiveVector.from_attributes({"female": [0, 1, 0, 1], "foreign": [0, 0, 1, 1]})
        assert sv.k == 4
        assert len(set(sv.labels.tolist())) == 4
        assert sv.group_names[0] == "female=0|foreign=0"

    def test_assignment_range(self):
        with pytest.raises(DataError):
            Assignment(np.array([0, 3]), 3)

    def test_nuisance_row_sums(self):
        mu = np.zeros((2, 2))
        with pytest.raises(DataError):
            NuisanceEstimates(mu, np.array([[0.5, 0.2], [0.5, 0.5]]), np.zeros(2), np.zeros(2, int), ("a", "b"))

    def test_dataset_take(self):
        feats, sens, scores = _inputs()
        ds = Dataset(feats, sens, scores, Assignment(np.zeros(100, int), 3))
        sub = ds.take(np.arange(10))
        assert sub.n == 10 and len(sub.observed) == 10
