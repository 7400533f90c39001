"""Adaptive peer-learning engine with a multivariate Elo learner model."""

__version__ = "0.1.0"

from .elo import (  # noqa: F401
    Band,
    EloConfig,
    apply_attempt,
    competency_band,
    expected_correctness,
    k_factor,
    revert_delta,
)
from .engine import Engine  # noqa: F401
from .grading import final_grade, rating_to_mark  # noqa: F401
