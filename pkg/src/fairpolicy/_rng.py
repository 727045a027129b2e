"""Derived random streams.

Every randomized stage draws from its own generator keyed by
``(seed, stage, index)`` so results never depend on call order.
"""

import numpy as np

FEATURES = 1
SCORES = 2
PREDICT = 3
EVAL_FEATURES = 4
EVAL_SCORES = 5
SPLIT = 6
SYNTH = 7
KMEANS = 8


def stream(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), *(int(k) for k in keys)])
