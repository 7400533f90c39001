"""Badges, engagement vectors, rating-to-mark, round marks, final grades.

The grade pipeline: each participation round is worth two marks (one for
answering enough questions correctly, one for authoring an effective
question), the overall rating adds up to two more via a clamped linear map,
and the final grade takes the best of the configured assessment rubrics so
opting out of the peer-learning component can never hurt.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from statistics import fmean
from typing import Iterable, Optional, Sequence

from .elo import Band
from .errors import ValidationError


def rating_to_mark(rating: float) -> float:
    """Clamp-map a rating onto [0, 2]: min(max(0, (rating - 1000) / 100), 2)."""
    return min(max(0.0, (rating - 1000.0) / 100.0), 2.0)


def overall_rating(topic_ratings: Sequence[float]) -> float:
    """Mean rating across every knowledge unit the instructor set."""
    if not topic_ratings:
        raise ValidationError("overall rating needs at least one topic")
    return fmean(topic_ratings)


@dataclass
class RoundConfig:
    round_index: int
    start: str  # ISO timestamp, inclusive
    end: str  # ISO timestamp, exclusive
    answer_quota: int = 10
    authoring_quota: int = 1

    def __post_init__(self):
        if self.round_index < 1:
            raise ValidationError("round indexes start at 1")
        if self.start >= self.end:
            raise ValidationError(
                "round window must end after it starts", round=self.round_index
            )
        if self.answer_quota < 1 or self.authoring_quota < 1:
            raise ValidationError("round quotas must be positive")

    def contains(self, timestamp: str) -> bool:
        return self.start <= timestamp < self.end

    def to_json(self) -> dict:
        return {
            "round_index": self.round_index,
            "start": self.start,
            "end": self.end,
            "answer_quota": self.answer_quota,
            "authoring_quota": self.authoring_quota,
        }

    @staticmethod
    def validate_schedule(rounds: list["RoundConfig"]) -> None:
        if not rounds:
            raise ValidationError("configure at least one round")
        indexes = [r.round_index for r in rounds]
        if indexes != list(range(1, len(rounds) + 1)):
            raise ValidationError("round indexes must be 1..R in order", indexes=indexes)
        for prev, cur in zip(rounds, rounds[1:]):
            if cur.start < prev.end:
                raise ValidationError(
                    "round windows must not overlap",
                    rounds=[prev.round_index, cur.round_index],
                )


def round_mark(correct_answers: int, effective_questions: int, config: RoundConfig) -> int:
    """0, 1, or 2 marks for one round of answering and authoring."""
    mark = 0
    if correct_answers >= config.answer_quota:
        mark += 1
    if effective_questions >= config.authoring_quota:
        mark += 1
    return mark


def is_effective_question(
    published: bool, mean_stars: Optional[float], rating_count: int, endorsed: bool
) -> bool:
    """"Correct and effective": published and peer-endorsed or staff-endorsed.

    Peer endorsement means a mean rating of at least 3.5 stars over at least
    three ratings; instructors can endorse explicitly as an override.
    """
    if not published:
        return False
    if endorsed:
        return True
    return rating_count >= 3 and mean_stars is not None and mean_stars >= 3.5


@dataclass
class GradeRubric:
    """One assessment rubric; the remaining weight passes other marks through."""

    exam_weight: float
    ripple_weight: float

    def __post_init__(self):
        if self.exam_weight < 0 or self.ripple_weight < 0:
            raise ValidationError("rubric weights must be non-negative")
        if self.exam_weight + self.ripple_weight > 1.0 + 1e-12:
            raise ValidationError("rubric weights must sum to at most 1")

    @property
    def other_weight(self) -> float:
        return 1.0 - self.exam_weight - self.ripple_weight


DEFAULT_RUBRICS = (GradeRubric(0.4, 0.1), GradeRubric(0.5, 0.0))


def final_grade(
    exam_pct: float,
    other_pct: float,
    ripple_marks: float,
    rubrics: Iterable[GradeRubric] = DEFAULT_RUBRICS,
    max_ripple_marks: float = 10.0,
) -> float:
    """Best grade over the configured rubrics, as a percentage.

    ``exam_pct`` and ``other_pct`` are percentages in [0, 100];
    ``ripple_marks`` is the platform total (rounds plus rating mark).
    """
    if not 0 <= exam_pct <= 100 or not 0 <= other_pct <= 100:
        raise ValidationError("component percentages must be in [0, 100]")
    if not 0 <= ripple_marks <= max_ripple_marks:
        raise ValidationError(
            "platform marks out of range", marks=ripple_marks, max=max_ripple_marks
        )
    rubrics = list(rubrics)
    if not rubrics:
        raise ValidationError("at least one rubric required")
    ripple_pct = 100.0 * ripple_marks / max_ripple_marks
    return max(
        r.exam_weight * exam_pct + r.ripple_weight * ripple_pct + r.other_weight * other_pct
        for r in rubrics
    )


class BadgeCategory(str, Enum):
    ENGAGEMENT = "engagement"
    COMPETENCY = "competency"


class BadgeTier(str, Enum):
    BRONZE = "bronze"
    SILVER = "silver"
    GOLD = "gold"


@dataclass
class Badge:
    id: str
    category: BadgeCategory
    tier: BadgeTier
    criterion: str
    awarded_at: str

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "category": self.category.value,
            "tier": self.tier.value,
            "criterion": self.criterion,
            "awarded_at": self.awarded_at,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Badge":
        return cls(
            id=data["id"],
            category=BadgeCategory(data["category"]),
            tier=BadgeTier(data["tier"]),
            criterion=data["criterion"],
            awarded_at=data["awarded_at"],
        )


ENGAGEMENT_TIERS = ((BadgeTier.BRONZE, 1), (BadgeTier.SILVER, 10), (BadgeTier.GOLD, 50))
ENGAGEMENT_AXES = ("authored", "answered", "rated", "achievements")


def evaluate_badges(
    held: dict[str, Badge],
    counters: Sequence[int],
    topic_bands: dict[str, tuple[Band, int]],
    awarded_at: str,
) -> list[Badge]:
    """Badges newly earned given current holdings; awards are permanent.

    Runs to a fixed point because the achievements axis counts badges,
    including ones earned earlier in the same evaluation; that is what makes
    re-running with no new activity award nothing.
    """
    new: list[Badge] = []
    have = set(held)

    def award(badge_id: str, category: BadgeCategory, tier: BadgeTier, criterion: str):
        if badge_id not in have:
            have.add(badge_id)
            new.append(Badge(badge_id, category, tier, criterion, awarded_at))

    # competency first: a topic at or above yellow with real activity, a topic
    # in blue, and the full-mastery gold for all topics blue
    bands = list(topic_bands.items())
    for topic_id, (band, attempts) in bands:
        if attempts > 0 and band in (Band.YELLOW, Band.BLUE):
            award(
                f"competency-{topic_id}-adequate",
                BadgeCategory.COMPETENCY,
                BadgeTier.BRONZE,
                f"reach adequate competency in {topic_id}",
            )
        if band == Band.BLUE:
            award(
                f"competency-{topic_id}-mastery",
                BadgeCategory.COMPETENCY,
                BadgeTier.SILVER,
                f"reach mastery in {topic_id}",
            )
    if bands and all(band == Band.BLUE for _, (band, _) in bands):
        award(
            "competency-all-mastery",
            BadgeCategory.COMPETENCY,
            BadgeTier.GOLD,
            "reach mastery in every topic",
        )

    # engagement axes, iterated because achievements counts badges
    while True:
        counts = {
            "authored": counters[0],
            "answered": counters[1],
            "rated": counters[2],
            "achievements": len(have),
        }
        before = len(new)
        for axis in ENGAGEMENT_AXES:
            for tier, threshold in ENGAGEMENT_TIERS:
                if counts[axis] >= threshold:
                    award(
                        f"engagement-{axis}-{tier.value}",
                        BadgeCategory.ENGAGEMENT,
                        tier,
                        f"{threshold}+ {axis} events",
                    )
        if len(new) == before:
            return new
