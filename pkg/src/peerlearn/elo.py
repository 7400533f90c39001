"""Multivariate Elo learner model.

Each student carries an independent rating per topic; each resource carries
one difficulty rating shared across its tags.  A correct answer moves rating
points from the resource to the student, an incorrect answer moves them the
other way, with step size shrinking as either side accumulates attempts.

Ratings are stored as fixed-point integers (``SCALE`` units per rating
point).  Every update quantizes its delta once and records the quantized
value, so reverting a delta subtracts exactly what was added and replaying a
delta ledger reproduces state bit-exactly; float accumulation could not
guarantee either.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum
from statistics import fmean
from typing import Iterable, Mapping

from .errors import ValidationError

# Fixed-point resolution: 1e-9 rating points.
SCALE = 10**9


class Band(str, Enum):
    RED = "red"
    YELLOW = "yellow"
    BLUE = "blue"


@dataclass(frozen=True)
class EloConfig:
    initial_rating: float = 1000.0
    k_numerator: float = 40.0  # step size at zero attempts
    k_decay: float = 0.05  # per-attempt decay of the step size
    yellow_threshold: float = 1000.0
    blue_threshold: float = 1200.0


DEFAULT_CONFIG = EloConfig()


def logistic(diff: float) -> float:
    """Win expectancy for a rating advantage of ``diff`` points.

    Classic Elo curve: 1 / (1 + 10^(-diff/400)).
    """
    return 1.0 / (1.0 + 10.0 ** (-diff / 400.0))


def expected_correctness(
    student_ratings: Mapping[str, float], resource_rating: float, tags: Iterable[str]
) -> float:
    """Probability the student answers the resource correctly.

    Uses the mean of the student's ratings over the resource's tags against
    the resource's single difficulty rating.
    """
    tags = list(tags)
    if not tags:
        raise ValidationError("resource must have at least one tag")
    mean_rating = fmean(student_ratings[t] for t in tags)
    return logistic(mean_rating - resource_rating)


def k_factor(attempts: int, a: float = 40.0, b: float = 0.05) -> float:
    """Step size after ``attempts`` prior attempts: a / (1 + b * attempts)."""
    return a / (1.0 + b * attempts)


def competency_band(rating: float, config: EloConfig = DEFAULT_CONFIG) -> Band:
    if rating < config.yellow_threshold:
        return Band.RED
    if rating < config.blue_threshold:
        return Band.YELLOW
    return Band.BLUE


@dataclass
class TopicRating:
    rating_n: int  # fixed-point, SCALE units per point
    attempts: int = 0


@dataclass
class LearnerState:
    """Per-student ratings, lazily initialized per topic.

    ``snapshots`` keeps at most one entry per calendar day with activity,
    mapping ISO date -> {topic: rating_n}; the implicit initial snapshot is
    all topics at the initial rating.
    """

    ratings: dict[str, TopicRating] = field(default_factory=dict)
    snapshots: dict[str, dict[str, int]] = field(default_factory=dict)

    def rating_n(self, topic: str, config: EloConfig = DEFAULT_CONFIG) -> int:
        tr = self.ratings.get(topic)
        return tr.rating_n if tr else to_fixed(config.initial_rating)

    def rating(self, topic: str, config: EloConfig = DEFAULT_CONFIG) -> float:
        return from_fixed(self.rating_n(topic, config))

    def attempts(self, topic: str) -> int:
        tr = self.ratings.get(topic)
        return tr.attempts if tr else 0

    def ensure(self, topic: str, config: EloConfig = DEFAULT_CONFIG) -> TopicRating:
        tr = self.ratings.get(topic)
        if tr is None:
            tr = TopicRating(rating_n=to_fixed(config.initial_rating))
            self.ratings[topic] = tr
        return tr


@dataclass
class ResourceRating:
    """One difficulty scalar per resource, shared across its tags."""

    rating_n: int
    attempts: int = 0


@dataclass
class RatingDelta:
    """Exact, reversible record of one attempt's rating movement."""

    per_topic_n: dict[str, int]
    resource_delta_n: int
    applied: bool = False


def to_fixed(rating: float) -> int:
    return round(rating * SCALE)


def from_fixed(rating_n: int) -> float:
    return rating_n / SCALE


def _quantize_step(step: float, k: float) -> int:
    """Quantize a raw step, never exceeding the k-factor in magnitude."""
    cap = int(k * SCALE)
    return max(-cap, min(cap, round(step * SCALE)))


def compute_attempt_deltas(
    learner: LearnerState,
    resource: ResourceRating,
    tags: Iterable[str],
    correct: bool,
    config: EloConfig = DEFAULT_CONFIG,
) -> RatingDelta:
    """Compute (without applying) the rating deltas for one scored attempt.

    Per tag, the student's rating moves by k(attempts_t) * (s - p_t) where
    p_t compares that topic's rating alone against the resource.  The
    resource moves by -k(resource.attempts) * (s - p_bar) where p_bar uses
    the tag-mean rating.  All expectations use pre-attempt ratings.
    """
    tags = sorted(set(tags))
    if not tags:
        raise ValidationError("resource must have at least one tag")
    s = 1.0 if correct else 0.0
    q = from_fixed(resource.rating_n)

    per_topic: dict[str, int] = {}
    for t in tags:
        p_t = logistic(learner.rating(t, config) - q)
        k = k_factor(learner.attempts(t), config.k_numerator, config.k_decay)
        per_topic[t] = _quantize_step(k * (s - p_t), k)

    p_bar = expected_correctness(
        {t: learner.rating(t, config) for t in tags}, q, tags
    )
    k_res = k_factor(resource.attempts, config.k_numerator, config.k_decay)
    resource_delta = -_quantize_step(k_res * (s - p_bar), k_res)
    return RatingDelta(per_topic_n=per_topic, resource_delta_n=resource_delta)


def apply_delta(
    learner: LearnerState,
    resource: ResourceRating,
    delta: RatingDelta,
    config: EloConfig = DEFAULT_CONFIG,
    snapshot_date: str | None = None,
) -> None:
    """Apply a computed delta: move ratings, bump counters, snapshot the day."""
    for t, d in delta.per_topic_n.items():
        tr = learner.ensure(t, config)
        tr.rating_n += d
        tr.attempts += 1
    resource.rating_n += delta.resource_delta_n
    resource.attempts += 1
    delta.applied = True
    if snapshot_date is not None:
        learner.snapshots[snapshot_date] = {
            t: tr.rating_n for t, tr in learner.ratings.items()
        }


def apply_attempt(
    learner: LearnerState,
    resource: ResourceRating,
    tags: Iterable[str],
    correct: bool,
    config: EloConfig = DEFAULT_CONFIG,
    snapshot_date: str | None = None,
) -> RatingDelta:
    """Score one attempt: compute deltas against current state and apply them."""
    delta = compute_attempt_deltas(learner, resource, tags, correct, config)
    apply_delta(learner, resource, delta, config, snapshot_date)
    return delta


def revert_delta(
    learner: LearnerState, resource: ResourceRating, delta: RatingDelta
) -> bool:
    """Undo an applied delta exactly; no-op (with a warning) if not applied.

    Subtracts the stored fixed-point values, so the prior ratings come back
    bit-exactly regardless of what happened in between.
    """
    if not delta.applied:
        warnings.warn("revert of an unapplied delta is a no-op", RuntimeWarning)
        return False
    for t, d in delta.per_topic_n.items():
        tr = learner.ratings[t]
        tr.rating_n -= d
        tr.attempts -= 1
    resource.rating_n -= delta.resource_delta_n
    resource.attempts -= 1
    delta.applied = False
    return True
