"""Learning resources: MCQs, worked examples, notes, and their lifecycle.

Lifecycle is a closed graph:

    draft -> pending_moderation -> {published, draft}
    published -> {pending_moderation (flags / re-moderated edit), deleted}
    draft -> deleted

Deletion is soft and terminal; a deleted resource stays visible to its
author, who revises it by authoring a new resource from the old content.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from .errors import LifecycleError, ValidationError


class ResourceKind(str, Enum):
    MCQ = "mcq"
    WORKED_EXAMPLE = "worked_example"
    NOTE = "note"


class Status(str, Enum):
    DRAFT = "draft"
    PENDING_MODERATION = "pending_moderation"
    PUBLISHED = "published"
    DELETED = "deleted"


ALLOWED_TRANSITIONS = {
    Status.DRAFT: {Status.PENDING_MODERATION, Status.DELETED},
    Status.PENDING_MODERATION: {Status.PUBLISHED, Status.DRAFT},
    Status.PUBLISHED: {Status.PENDING_MODERATION, Status.DELETED},
    Status.DELETED: set(),
}


def check_transition(current: Status, target: Status) -> None:
    if target not in ALLOWED_TRANSITIONS[current]:
        raise LifecycleError(
            f"cannot move a {current.value} resource to {target.value}",
            current=current.value,
            target=target.value,
        )


@dataclass
class McqContent:
    """Multiple-choice body: 2-10 choices, one correct, with an explanation."""

    choices: list[str]
    correct_index: int
    explanation: str

    def validate(self) -> None:
        if not 2 <= len(self.choices) <= 10:
            raise ValidationError(
                "an MCQ needs between 2 and 10 choices", choices=len(self.choices)
            )
        if not 0 <= self.correct_index < len(self.choices):
            raise ValidationError(
                f"correct_index {self.correct_index} out of range for "
                f"{len(self.choices)} choices",
                correct_index=self.correct_index,
            )
        if not self.explanation or not self.explanation.strip():
            raise ValidationError("an MCQ needs a non-empty explanation")
        if any(not c or not str(c).strip() for c in self.choices):
            raise ValidationError("MCQ choices must be non-empty")


@dataclass
class WorkedExampleContent:
    steps: list[str]
    final_solution: str

    def validate(self) -> None:
        if not self.steps:
            raise ValidationError("a worked example needs at least one step")
        if not self.final_solution or not self.final_solution.strip():
            raise ValidationError("a worked example needs a final solution")


KindContent = Union[McqContent, WorkedExampleContent, None]


def validate_kind_content(kind: ResourceKind, content: KindContent) -> None:
    if kind == ResourceKind.MCQ:
        if not isinstance(content, McqContent):
            raise ValidationError("MCQ resources need MCQ content")
        content.validate()
    elif kind == ResourceKind.WORKED_EXAMPLE:
        if not isinstance(content, WorkedExampleContent):
            raise ValidationError("worked examples need steps and a final solution")
        content.validate()
    elif content is not None:
        raise ValidationError("notes carry their material in the body")


@dataclass
class Resource:
    id: str
    offering_id: str
    author_id: str
    kind: ResourceKind
    body: str  # sanitized portable markup; math inline, media by reference
    tags: list[str]  # topic ids, non-empty, ordered by topic ordinal
    status: Status
    content: KindContent
    created_at: str
    edited_at: str
    # Elo difficulty, fixed-point (see elo.SCALE); shared across tags.
    rating_n: int = 0
    elo_attempts: int = 0
    endorsed: bool = False

    def is_attemptable(self) -> bool:
        return self.status == Status.PUBLISHED


@dataclass
class AttemptRecord:
    """One student-resource interaction.

    MCQs record the chosen answer and correctness; notes and worked examples
    record engagement only.  ``delta`` is present iff this attempt moved
    ratings (the student's first attempt of a published MCQ).
    """

    id: str
    student_id: str
    resource_id: str
    chosen_index: Optional[int]
    correct: Optional[bool]
    timestamp: str
    delta: Optional["RatingDeltaRef"] = None


# The engine stores the concrete elo.RatingDelta on the attempt; this alias
# keeps content types import-light.
RatingDeltaRef = object


@dataclass
class QualityRating:
    rater_id: str
    resource_id: str
    stars: int
    timestamp: str

    def validate(self) -> None:
        if not isinstance(self.stars, int) or not 1 <= self.stars <= 5:
            raise ValidationError("stars must be an integer from 1 to 5", stars=self.stars)


@dataclass
class Comment:
    id: str
    author_id: str
    resource_id: str
    text: str
    timestamp: str

    def validate(self) -> None:
        if not self.text or not self.text.strip():
            raise ValidationError("comments must have text")


@dataclass
class Flag:
    flagger_id: str
    resource_id: str
    reason: str
    timestamp: str


@dataclass
class PeerReview:
    reviewer_id: str
    resource_id: str
    approve: bool
    rationale: str
    timestamp: str


def quality_summary(ratings: list[QualityRating]) -> dict:
    """Mean stars and count over the live (latest per rater) ratings."""
    if not ratings:
        return {"mean_stars": None, "count": 0}
    return {
        "mean_stars": sum(r.stars for r in ratings) / len(ratings),
        "count": len(ratings),
    }
