"""Synthetic labour-market style data with known group structure.

Two binary sensitive attributes (``female``, ``foreign``) give four groups.
Decision-relevant features are an age-like continuous variable, an
earnings-like variable with a mass point at zero, and a binary degree
indicator, each with a group-specific distribution on a bounded range. True outcome regressions depend on the
features only, so a fairness-unaware policy inherits group differences
through the features.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data_model import (
    CONTINUOUS, DISCRETE, Assignment, Column, Dataset, FeatureTable, NuisanceEstimates, SensitiveVector,
)
from .scores import aipw_scores, iapo_scores

TREATMENTS = ("no_program", "job_search", "vocational", "computer")


AGE_RANGE = (18.0, 65.0)
EARNINGS_MAX = 100.0


def tilted_uniform(rng: np.random.Generator, theta) -> np.ndarray:
    """Draws on [0, 1] with density proportional to ``exp(theta * u)``, one per entry of ``theta``."""
    theta = np.asarray(theta, dtype=float)
    v = rng.random(theta.shape)
    flat = np.abs(theta) < 1e-9
    t = np.where(flat, 1.0, theta)
    return np.where(flat, v, np.log1p(v * np.expm1(t)) / t)


@dataclass
class SyntheticSpec:
    n: int = 15000
    p_female: float = 0.45
    p_foreign: float = 0.35
    # group order: (female, foreign) = (0,0), (0,1), (1,0), (1,1)
    # exponential tilts of bounded densities; group means differ by about 0.3 to 1.1 standard deviations
    age_tilt: tuple[float, ...] = (1.5, -2.5, 2.5, -1.0)
    earnings_tilt: tuple[float, ...] = (-1.0, -3.0, -2.0, -4.0)
    zero_earnings: tuple[float, ...] = (0.15, 0.35, 0.25, 0.45)
    degree_rate: tuple[float, ...] = (0.45, 0.25, 0.40, 0.20)
    baseline: float = 15.0
    effect_scale: float = 1.0
    noise_sd: float = 2.0
    score_type: str = "aipw"

    @property
    def group_probs(self) -> np.ndarray:
        f, g = self.p_female, self.p_foreign
        return np.array([(1 - f) * (1 - g), (1 - f) * g, f * (1 - g), f * g])

    def validate(self):
        if self.n < 100:
            raise ValueError("synthetic n must be at least 100")
        for name in ("age_tilt", "earnings_tilt", "zero_earnings", "degree_rate"):
            if len(getattr(self, name)) != 4:
                raise ValueError(f"{name} needs one entry per group (4)")
        if not np.isclose(self.group_probs.sum(), 1.0):
            raise ValueError("group probabilities must sum to 1")
        if self.score_type not in ("aipw", "iapo"):
            raise ValueError("score_type must be 'aipw' or 'iapo'")

    @classmethod
    def no_shift(cls, **kw) -> "SyntheticSpec":
        """Features identically distributed across groups."""
        base = dict(age_tilt=(0.5,) * 4, earnings_tilt=(-2.0,) * 4,
                    zero_earnings=(0.25,) * 4, degree_rate=(0.35,) * 4)
        base.update(kw)
        return cls(**base)


@dataclass
class SyntheticData:
    dataset: Dataset
    nuisance: NuisanceEstimates
    truth: dict = field(default_factory=dict)


def true_outcomes(age, earnings, degree, baseline: float = 15.0, scale: float = 1.0) -> np.ndarray:
    """Conditional mean outcome of each treatment given the features."""
    z_age = (age - 40.0) / 10.0
    emp = (earnings > 0).astype(float)
    log_e = np.log1p(earnings) / 4.0
    effects = np.column_stack([
        np.zeros_like(age),
        0.4 + 0.6 * emp - 0.2 * log_e,
        1.0 - 0.9 * z_age + 0.3 * (1 - degree),
        0.9 + 0.9 * z_age + 0.4 * degree,
    ])
    return baseline + 0.5 * log_e[:, None] + scale * effects


def generate_synthetic(spec: SyntheticSpec, rng: np.random.Generator) -> SyntheticData:
    spec.validate()
    n = spec.n
    group = rng.choice(4, size=n, p=spec.group_probs)
    female = (group >= 2).astype(int)
    foreign = (group % 2).astype(int)

    # bounded supports with densities bounded away from zero keep the tails short
    age = AGE_RANGE[0] + (AGE_RANGE[1] - AGE_RANGE[0]) * tilted_uniform(rng, np.asarray(spec.age_tilt)[group])
    earnings = EARNINGS_MAX * tilted_uniform(rng, np.asarray(spec.earnings_tilt)[group])  # thousands
    earnings[rng.random(n) < np.asarray(spec.zero_earnings)[group]] = 0.0
    degree = (rng.random(n) < np.asarray(spec.degree_rate)[group]).astype(float)

    mu = true_outcomes(age, earnings, degree, spec.baseline, spec.effect_scale)
    t = mu.shape[1]
    # caseworkers favour job search and mildly track group membership
    logits = np.column_stack([
        np.full(n, 1.8), np.full(n, 0.6), -0.6 + 0.5 * foreign, -0.8 + 0.4 * female,
    ]) + 0.2 * rng.standard_normal((n, t))
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    e /= e.sum(axis=1, keepdims=True)
    d_obs = (rng.random(n)[:, None] > np.cumsum(e, axis=1)).sum(axis=1)
    d_obs = np.minimum(d_obs, t - 1)
    y = mu[np.arange(n), d_obs] + spec.noise_sd * rng.standard_normal(n)

    nuisance = NuisanceEstimates(mu, e, y, d_obs, TREATMENTS)
    scores = aipw_scores(nuisance) if spec.score_type == "aipw" else iapo_scores(nuisance)
    features = FeatureTable((
        Column("age", CONTINUOUS, age),
        Column("earnings", CONTINUOUS, earnings),
        Column("degree", DISCRETE, degree, np.array([0.0, 1.0])),
    ))
    sensitive = SensitiveVector.from_attributes({"female": female, "foreign": foreign})
    covariates = {"age": age, "earnings": earnings, "degree": degree,
                  "female": female.astype(float), "foreign": foreign.astype(float)}
    dataset = Dataset(features, sensitive, scores, Assignment(d_obs, t), covariates)

    truth = {
        "group_names": list(sensitive.group_names),
        "group_score_means": [mu[group == s].mean(axis=0).tolist() for s in range(4)],
        "group_sizes": np.bincount(group, minlength=4).tolist(),
    }
    return SyntheticData(dataset, nuisance, truth)
