"""Repository search and personal-fit recommendation.

The fit score is a pluggable heuristic over three observable signals: how
close the resource's predicted success probability sits to a desirable
difficulty target, how well peers rated it, and whether the student has seen
it before.  Swap ``personal_fit`` for a collaborative-filtering scorer by
passing a different callable to ``build_cards``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from . import elo
from .content import ResourceKind, Status
from .errors import ValidationError


class SortKey(str, Enum):
    DIFFICULTY = "difficulty"
    QUALITY = "quality"
    RESPONSES = "responses"
    RECOMMENDED = "recommended"


class StatusFilter(str, Enum):
    ATTEMPTED = "attempted"
    NOT_ATTEMPTED = "not_attempted"
    INCORRECTLY_ANSWERED = "incorrectly_answered"
    OWN_DELETED = "own_deleted"


@dataclass
class SearchQuery:
    """Conjunctive filters; empty subsets mean no restriction."""

    kinds: set[ResourceKind] = field(default_factory=set)
    topics: set[str] = field(default_factory=set)
    status_filter: set[StatusFilter] = field(default_factory=set)
    keywords: str = ""
    sort_key: SortKey = SortKey.RECOMMENDED
    limit: Optional[int] = None

    def __post_init__(self):
        if self.limit is not None and self.limit < 1:
            raise ValidationError("limit must be positive")


@dataclass
class FitWeights:
    w_gap: float = 0.5
    w_quality: float = 0.3
    w_novelty: float = 0.2

    def __post_init__(self):
        total = self.w_gap + self.w_quality + self.w_novelty
        if min(self.w_gap, self.w_quality, self.w_novelty) < 0 or abs(total - 1.0) > 1e-9:
            raise ValidationError(
                "fit weights must be non-negative and sum to 1",
                weights=[self.w_gap, self.w_quality, self.w_novelty],
            )


@dataclass
class ResourceCard:
    """The five signals shown on a resource card, in icon order."""

    resource_id: str
    personal_fit: float
    quality: Optional[float]  # mean stars, None when unrated
    difficulty: float  # Elo rating
    attempts_count: int
    comments_count: int
    kind: str = ""
    status: str = ""
    created_at: str = ""
    tags: list[str] = field(default_factory=list)
    author_id: str = ""
    body_preview: str = ""
    rating_count: int = 0


def personal_fit(
    expected_p: float,
    mean_stars: Optional[float],
    attempted_before: bool,
    weights: FitWeights = FitWeights(),
    target_success: float = 0.65,
) -> float:
    """Weighted blend of difficulty match, peer quality, and novelty in [0, 1]."""
    gap = 1.0 - abs(expected_p - target_success) / max(target_success, 1.0 - target_success)
    quality = 0.5 if mean_stars is None else (mean_stars - 1.0) / 4.0
    novelty = 0.25 if attempted_before else 1.0
    return weights.w_gap * gap + weights.w_quality * quality + weights.w_novelty * novelty


def matches_query(engine, caller_id: str, resource, query: SearchQuery) -> bool:
    if resource.status == Status.DELETED:
        # deleted resources surface only to their author through OwnDeleted
        return (
            StatusFilter.OWN_DELETED in query.status_filter
            and resource.author_id == caller_id
        )
    if resource.status != Status.PUBLISHED:
        return False
    if query.kinds and resource.kind not in query.kinds:
        return False
    if query.topics and not (set(resource.tags) & query.topics):
        return False
    if query.keywords and query.keywords.lower() not in resource.body.lower():
        return False
    if query.status_filter:
        mine = [
            a
            for a in engine.attempts_for_student(resource.offering_id, caller_id)
            if a.resource_id == resource.id
        ]
        ok = False
        if StatusFilter.ATTEMPTED in query.status_filter and mine:
            ok = True
        if StatusFilter.NOT_ATTEMPTED in query.status_filter and not mine:
            ok = True
        if StatusFilter.INCORRECTLY_ANSWERED in query.status_filter and any(
            a.correct is False for a in mine
        ):
            ok = True
        if not ok:
            return False
    return True


def build_card(
    engine,
    caller_id: str,
    resource,
    scorer: Optional[Callable[..., float]] = None,
) -> ResourceCard:
    offering = engine.offerings[resource.offering_id]
    cfg = engine._elo_config(offering)
    learner = engine.learner(resource.offering_id, caller_id)
    summary = engine.resource_quality(resource.id)
    attempts = engine.attempts_for_resource(resource.id)
    mine = [a for a in attempts if a.student_id == caller_id]
    comments = sum(1 for c in engine.comments if c.resource_id == resource.id)

    fit = 0.0
    if resource.tags:
        p = elo.expected_correctness(
            {t: learner.rating(t, cfg) for t in resource.tags},
            elo.from_fixed(resource.rating_n),
            resource.tags,
        )
        score = scorer or personal_fit
        fit = score(
            p,
            summary["mean_stars"],
            bool(mine),
            FitWeights(*offering.config.fit_weights),
            offering.config.target_success,
        )
    return ResourceCard(
        resource_id=resource.id,
        personal_fit=fit,
        quality=summary["mean_stars"],
        difficulty=elo.from_fixed(resource.rating_n),
        attempts_count=len(attempts),
        comments_count=comments,
        kind=resource.kind.value,
        status=resource.status.value,
        created_at=resource.created_at,
        tags=list(resource.tags),
        author_id=resource.author_id,
        body_preview=resource.body[:160],
        rating_count=summary["count"],
    )


def sort_cards(cards: list[ResourceCard], sort_key: SortKey) -> list[ResourceCard]:
    """Stable descending sort; ties break newest-first, then by resource id."""

    def value(card: ResourceCard) -> float:
        if sort_key == SortKey.DIFFICULTY:
            return card.difficulty
        if sort_key == SortKey.QUALITY:
            return card.quality if card.quality is not None else float("-inf")
        if sort_key == SortKey.RESPONSES:
            return float(card.attempts_count)
        return card.personal_fit

    indexed = sorted(
        range(len(cards)),
        key=lambda i: (-value(cards[i]), _desc_str(cards[i].created_at), cards[i].resource_id),
    )
    return [cards[i] for i in indexed]


def _desc_str(s: str) -> tuple:
    # invert character order so lexicographically later (newer) sorts first
    return tuple(-ord(c) for c in s)


def filter_resources(
    engine, caller_id: str, offering_id: str, query: SearchQuery
) -> list[ResourceCard]:
    """Published resources matching every filter, as scored cards."""
    engine._require_enrolled(offering_id, caller_id)
    cards = [
        build_card(engine, caller_id, r)
        for r in engine.resources.values()
        if r.offering_id == offering_id and matches_query(engine, caller_id, r, query)
    ]
    cards = sort_cards(cards, query.sort_key)
    if query.limit is not None:
        cards = cards[: query.limit]
    return cards


def recommend(engine, caller_id: str, offering_id: str, n: int) -> list[ResourceCard]:
    """Top-n published resources by personal fit."""
    if n < 1:
        raise ValidationError("n must be at least 1")
    query = SearchQuery(sort_key=SortKey.RECOMMENDED, limit=n)
    return filter_resources(engine, caller_id, offering_id, query)
