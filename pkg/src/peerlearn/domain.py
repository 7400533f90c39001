"""Core domain entities: offerings, topics, users, roles, enrolment tickets.

An offering is one course instance.  Its topic list defines the knowledge
units that resources are tagged with and learner ratings are tracked
against; the list stays editable for the whole semester.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import UnknownRoleError, ValidationError


class Role(str, Enum):
    INSTRUCTOR = "instructor"
    STUDENT = "student"


class ModerationPolicy(str, Enum):
    NONE = "none"
    STAFF = "staff"
    COMPETENT_STUDENT = "competent_student"


class TicketKind(str, Enum):
    INVITATION = "invitation"
    ACCESS_CODE = "access_code"


# LMS launch roles collapse onto the two platform roles.  The mapping is
# total on these six labels and pure in the label.
LMS_ROLE_MAP = {
    "Instructor": Role.INSTRUCTOR,
    "Teaching Assistant": Role.INSTRUCTOR,
    "Grader": Role.INSTRUCTOR,
    "Student": Role.STUDENT,
    "Guest": Role.STUDENT,
    "Observer": Role.STUDENT,
}


@dataclass
class Topic:
    id: str
    name: str
    ordinal: int


@dataclass
class User:
    id: str
    display_name: str
    # None until the user answers the consent form for the first time.
    research_consent: Optional[bool] = None
    # Set the first time an already-recorded answer is changed; a user who
    # ever changed their response is permanently excluded from research
    # exports even if consent is currently granted.
    consent_changed: bool = False

    def research_eligible(self) -> bool:
        return self.research_consent is True and not self.consent_changed


@dataclass
class LaunchRecord:
    """Normalized launch context.

    LMS launches arrive with the raw LMS role label; standalone signups are
    normalized into a synthetic record so both modes share one code path.
    """

    lms_role: str
    offering_ref: str
    user_ref: str


@dataclass
class EnrolmentTicket:
    kind: TicketKind
    code: str
    offering_id: str
    expiry: Optional[str] = None  # ISO timestamp
    # Single-use bookkeeping for invitations.
    used: bool = False
    email: Optional[str] = None


@dataclass
class OfferingConfig:
    """Per-offering tunables, resolved from service defaults at creation."""

    initial_rating: float = 1000.0
    k_numerator: float = 40.0
    k_decay: float = 0.05
    yellow_threshold: float = 1000.0
    blue_threshold: float = 1200.0
    competence_threshold: float = 1100.0
    review_quorum: int = 3
    target_success: float = 0.65
    fit_weights: tuple[float, float, float] = (0.5, 0.3, 0.2)  # gap, quality, novelty

    def validate(self) -> None:
        w = self.fit_weights
        if len(w) != 3 or any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-9:
            raise ValidationError(
                "fit weights must be non-negative and sum to 1", weights=list(w)
            )
        if self.yellow_threshold > self.blue_threshold:
            raise ValidationError("band thresholds must be ordered")


@dataclass
class Offering:
    id: str
    university_name: str
    course_code: str
    course_name: str
    semester: str
    teaching_start: str  # ISO date
    topics: list[Topic] = field(default_factory=list)
    moderation_policy: ModerationPolicy = ModerationPolicy.NONE
    flag_threshold: int = 3
    created_from_lms: bool = False
    config: OfferingConfig = field(default_factory=OfferingConfig)

    def topic_ids(self) -> set[str]:
        return {t.id for t in self.topics}

    def topic_by_id(self, topic_id: str) -> Topic:
        for t in self.topics:
            if t.id == topic_id:
                return t
        raise ValidationError("unknown topic", topic=topic_id)

    def topic_by_name(self, name: str) -> Optional[Topic]:
        for t in self.topics:
            if t.name == name:
                return t
        return None


def map_lms_role(launch: LaunchRecord) -> Role:
    """Map an LMS role label onto the platform role."""
    try:
        return LMS_ROLE_MAP[launch.lms_role]
    except KeyError:
        raise UnknownRoleError(
            f"LMS role {launch.lms_role!r} is not in the mapping table",
            lms_role=launch.lms_role,
            known=sorted(LMS_ROLE_MAP),
        ) from None


def validate_topic_names(names: list[str]) -> None:
    if not names:
        raise ValidationError("an offering needs at least one topic")
    seen = set()
    for name in names:
        if not name or not name.strip():
            raise ValidationError("topic names must be non-empty")
        if name in seen:
            raise ValidationError(f"duplicate topic name {name!r}", duplicate=name)
        seen.add(name)


def topics_to_csv(topics: list[Topic]) -> str:
    """Export a topic list as UTF-8 CSV with header ``ordinal,name``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["ordinal", "name"])
    for t in sorted(topics, key=lambda t: t.ordinal):
        writer.writerow([t.ordinal, t.name])
    return buf.getvalue()


def topics_from_csv(text: str) -> list[str]:
    """Parse a ``ordinal,name`` CSV back into an ordered list of names."""
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if row]
    if not rows or [c.strip() for c in rows[0]] != ["ordinal", "name"]:
        raise ValidationError("topics CSV must start with header 'ordinal,name'")
    parsed = []
    for row in rows[1:]:
        if len(row) != 2:
            raise ValidationError("topics CSV rows must be 'ordinal,name'", row=row)
        try:
            parsed.append((int(row[0]), row[1]))
        except ValueError:
            raise ValidationError("ordinal must be an integer", row=row) from None
    parsed.sort(key=lambda p: p[0])
    names = [name for _, name in parsed]
    validate_topic_names(names)
    return names
