"""Score construction from nuisance estimates, benchmark policies and policy evaluation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import Assignment, NuisanceEstimates, ScoreMatrix
from .fairness_metrics import FairnessReport, fairness_report


@dataclass(frozen=True)
class PolicyEvalReport:
    policy_value: float
    program_shares: np.ndarray
    fairness: FairnessReport


def _treatments(assignment) -> np.ndarray:
    return np.asarray(getattr(assignment, "treatments", assignment), dtype=np.int64)


def _values(scores) -> np.ndarray:
    return np.asarray(getattr(scores, "values", scores), dtype=float)


def iapo_scores(nuisance: NuisanceEstimates) -> ScoreMatrix:
    """Individualized average potential outcomes: the outcome regressions themselves."""
    return ScoreMatrix(nuisance.mu, nuisance.treatment_names)


def aipw_scores(nuisance: NuisanceEstimates) -> ScoreMatrix:
    """Doubly robust scores ``mu_d + 1{D=d} (Y - mu_d) / e_d``."""
    if nuisance.e is None or nuisance.y is None or nuisance.d_obs is None:
        raise ValueError("AIPW scores need propensities, outcomes and observed treatments")
    mu = nuisance.mu
    rows = np.arange(nuisance.n)
    d = nuisance.d_obs
    e_obs = nuisance.e[rows, d]
    if np.any(e_obs <= 0):
        i = int(np.flatnonzero(e_obs <= 0)[0])
        raise ValueError(f"zero propensity for the observed treatment at row {i}")
    out = np.array(mu, dtype=float)
    out[rows, d] += (nuisance.y - mu[rows, d]) / e_obs
    return ScoreMatrix(out, nuisance.treatment_names)


def policy_value(assignment, scores) -> float:
    """Mean score of the assigned treatments."""
    d = _treatments(assignment)
    g = _values(scores)
    if len(d) != g.shape[0]:
        raise ValueError(f"assignment has {len(d)} rows, scores have {g.shape[0]}")
    return float(g[np.arange(len(d)), d].mean())


def blackbox_policy(scores) -> Assignment:
    """Per-row argmax; ``np.argmax`` returns the first maximum, i.e. the lowest index."""
    g = _values(scores)
    return Assignment(np.argmax(g, axis=1), g.shape[1])


def all_in_one_policy(scores) -> tuple[Assignment, int]:
    g = _values(scores)
    best = int(np.argmax(g.mean(axis=0)))
    return Assignment(np.full(g.shape[0], best), g.shape[1]), best


def blend_scores(original: ScoreMatrix, adjusted: ScoreMatrix, lam: float) -> ScoreMatrix:
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    if original.values.shape != adjusted.values.shape:
        raise ValueError("score matrices differ in shape")
    if lam == 0.0:
        return original
    if lam == 1.0:
        return adjusted
    return ScoreMatrix((1.0 - lam) * original.values + lam * adjusted.values, original.treatment_names)


def program_shares(assignment, n_treatments: int) -> np.ndarray:
    d = _treatments(assignment)
    return np.bincount(d, minlength=n_treatments) / len(d)


def evaluate_policy(assignment, scores: ScoreMatrix, sensitive, prior_concentration: float = 1.0) -> PolicyEvalReport:
    m = scores.n_treatments
    return PolicyEvalReport(
        policy_value(assignment, scores),
        program_shares(assignment, m),
        fairness_report(assignment, sensitive, m, prior_concentration),
    )
