"""Fairness-aware interpretable policy learning.

Pre-process decision-relevant features (and/or scores) to be independent of
sensitive groups, fit globally optimal shallow policy trees, translate them
back to group-specific trees with probabilistic splits, and audit any
allocation for policy value and fairness.
"""

__version__ = "0.1.0"

from .data_model import (  # noqa: E402
    Assignment, Column, Dataset, FeatureTable, NuisanceEstimates, ScoreMatrix, SensitiveVector, validate_dataset,
)
from .fair_adjust import (  # noqa: E402
    AdjustedFeatures, CdfModel, blend_features, cq_lookup, empirical_cdf, mq_adjust_column, mq_adjust_scores,
    mq_adjust_table,
)
from .fairness_metrics import (  # noqa: E402
    ContingencyTable, FairnessReport, contingency, cramers_v, fairness_report, log_bayes_factor,
)
from .policy_tree import PolicyTree, enumerate_candidates, fit_tree, predict_tree  # noqa: E402
from .prob_split_tree import ProbSplitPolicy, condense, predict_prob, transform  # noqa: E402
from .scores import (  # noqa: E402
    aipw_scores, all_in_one_policy, blackbox_policy, blend_scores, iapo_scores, policy_value,
)
