"""Event-sourced application core.

Every state change flows through exactly one EventRecord: commands validate
against live state, resolve all non-deterministic inputs (ids, timestamps,
generated codes, rating deltas) into the event payload, then hand the event
to an apply handler.  Apply handlers are deterministic functions of
(state, payload), so replaying the log from an empty engine reproduces the
live state bit-exactly; that property is what makes delta reversal and the
state-hash checks possible.

Engine instances are single-writer: callers (the HTTP service, the
simulator) serialize mutating calls per offering.  Queries never mutate.
"""

from __future__ import annotations

import hashlib
import json
import secrets
from dataclasses import dataclass, field
from datetime import datetime, timezone
from statistics import fmean
from typing import Iterable, Optional

from . import elo
from .content import (
    AttemptRecord,
    Comment,
    Flag,
    McqContent,
    PeerReview,
    QualityRating,
    Resource,
    ResourceKind,
    Status,
    WorkedExampleContent,
    check_transition,
    quality_summary,
    validate_kind_content,
)
from .domain import (
    EnrolmentTicket,
    ModerationPolicy,
    Offering,
    OfferingConfig,
    Role,
    TicketKind,
    Topic,
    User,
    map_lms_role,
    validate_topic_names,
)
from .domain import LaunchRecord  # noqa: F401  (re-exported for callers)
from .errors import (
    AlreadyUsedError,
    AuthorizationError,
    ConflictError,
    EligibilityError,
    InvalidCodeError,
    LifecycleError,
    NotFoundError,
    ValidationError,
)
from .grading import Badge, RoundConfig, evaluate_badges


@dataclass
class EventRecord:
    seq: int
    kind: str
    at: str
    payload: dict

    def to_json(self) -> dict:
        return {"seq": self.seq, "kind": self.kind, "at": self.at, "payload": self.payload}

    @classmethod
    def from_json(cls, data: dict) -> "EventRecord":
        return cls(seq=data["seq"], kind=data["kind"], at=data["at"], payload=data["payload"])


@dataclass
class Enrolment:
    role: Role
    enrolled_at: str


def _iso(at: Optional[datetime | str]) -> str:
    if at is None:
        return datetime.now(timezone.utc).isoformat()
    if isinstance(at, datetime):
        if at.tzinfo is None:
            at = at.replace(tzinfo=timezone.utc)
        return at.isoformat()
    datetime.fromisoformat(at)  # validate
    return at


def _day(at_iso: str) -> str:
    return at_iso[:10]


class Engine:
    """Live state plus the append-only event log that produced it."""

    def __init__(self, store=None, defaults: Optional[OfferingConfig] = None):
        self.store = store
        self.defaults = defaults or OfferingConfig()
        self.events: list[EventRecord] = []
        self.users: dict[str, User] = {}
        self.offerings: dict[str, Offering] = {}
        self.enrolments: dict[str, dict[str, Enrolment]] = {}
        self.tickets: dict[str, EnrolmentTicket] = {}
        self.resources: dict[str, Resource] = {}
        self.learners: dict[str, dict[str, elo.LearnerState]] = {}
        self.attempts: dict[str, AttemptRecord] = {}
        self.quality: dict[str, dict[str, QualityRating]] = {}
        self.comments: list[Comment] = []
        self.flags: dict[str, dict[str, Flag]] = {}
        self.reviews: dict[str, list[PeerReview]] = {}
        self.badges: dict[str, dict[str, dict[str, Badge]]] = {}
        self.rounds: dict[str, list[RoundConfig]] = {}
        self.engagement: dict[str, dict[str, list[int]]] = {}  # [authored, answered, rated]
        self.outbox: list[dict] = []
        # derived indexes (not serialized)
        self._attempts_by_resource: dict[str, list[str]] = {}
        self._attempts_by_student: dict[tuple[str, str], list[str]] = {}

    # ------------------------------------------------------------------
    # event plumbing
    # ------------------------------------------------------------------

    def _next_seq(self) -> int:
        return len(self.events) + 1

    def _commit(self, kind: str, at: str, payload: dict) -> EventRecord:
        event = EventRecord(seq=self._next_seq(), kind=kind, at=at, payload=payload)
        self._apply(event)
        self.events.append(event)
        if self.store is not None:
            self.store.append(event)
            if self.store.snapshot_due(event.seq):
                self.store.write_snapshot(self)
        return event

    def _apply(self, event: EventRecord) -> None:
        handler = getattr(self, f"_apply_{event.kind}", None)
        if handler is None:
            raise ValidationError(f"unknown event kind {event.kind!r}")
        handler(event.payload)

    def apply_events(self, events: Iterable[EventRecord]) -> None:
        for event in events:
            if event.seq != self._next_seq():
                raise ValidationError(
                    f"event sequence gap: expected {self._next_seq()}, got {event.seq}"
                )
            self._apply(event)
            self.events.append(event)

    @classmethod
    def replay(cls, events: Iterable[EventRecord], defaults: Optional[OfferingConfig] = None) -> "Engine":
        engine = cls(defaults=defaults)
        engine.apply_events(events)
        return engine

    # ------------------------------------------------------------------
    # lookups and guards
    # ------------------------------------------------------------------

    def _user(self, user_id: str) -> User:
        try:
            return self.users[user_id]
        except KeyError:
            raise NotFoundError(f"unknown user {user_id!r}") from None

    def _offering(self, offering_id: str) -> Offering:
        try:
            return self.offerings[offering_id]
        except KeyError:
            raise NotFoundError(f"unknown offering {offering_id!r}") from None

    def _resource(self, resource_id: str) -> Resource:
        try:
            return self.resources[resource_id]
        except KeyError:
            raise NotFoundError(f"unknown resource {resource_id!r}") from None

    def role_of(self, offering_id: str, user_id: str) -> Optional[Role]:
        enr = self.enrolments.get(offering_id, {}).get(user_id)
        return enr.role if enr else None

    def _require_enrolled(self, offering_id: str, user_id: str) -> Role:
        role = self.role_of(offering_id, user_id)
        if role is None:
            raise AuthorizationError(
                f"user {user_id!r} is not enrolled in offering {offering_id!r}"
            )
        return role

    def _require_instructor(self, offering_id: str, user_id: str) -> None:
        if self._require_enrolled(offering_id, user_id) != Role.INSTRUCTOR:
            raise AuthorizationError("instructor role required")

    def _elo_config(self, offering: Offering) -> elo.EloConfig:
        c = offering.config
        return elo.EloConfig(
            initial_rating=c.initial_rating,
            k_numerator=c.k_numerator,
            k_decay=c.k_decay,
            yellow_threshold=c.yellow_threshold,
            blue_threshold=c.blue_threshold,
        )

    def learner(self, offering_id: str, user_id: str) -> elo.LearnerState:
        state = self.learners.get(offering_id, {}).get(user_id)
        return state if state is not None else elo.LearnerState()

    def _materialize_learner(self, offering_id: str, user_id: str) -> elo.LearnerState:
        per_offering = self.learners.setdefault(offering_id, {})
        state = per_offering.get(user_id)
        if state is None:
            state = elo.LearnerState()
            per_offering[user_id] = state
        return state

    def _counters(self, offering_id: str, user_id: str) -> list[int]:
        return self.engagement.setdefault(offering_id, {}).setdefault(user_id, [0, 0, 0])

    # ------------------------------------------------------------------
    # users and consent
    # ------------------------------------------------------------------

    def register_user(self, display_name: str, at=None, user_id: Optional[str] = None) -> User:
        if not display_name or not display_name.strip():
            raise ValidationError("display name must be non-empty")
        at = _iso(at)
        user_id = user_id or f"usr{self._next_seq():06d}"
        if user_id in self.users:
            raise ConflictError(f"user id {user_id!r} already exists")
        self._commit("user_registered", at, {"user_id": user_id, "display_name": display_name})
        return self.users[user_id]

    def _apply_user_registered(self, p: dict) -> None:
        self.users[p["user_id"]] = User(id=p["user_id"], display_name=p["display_name"])

    def set_consent(self, user_id: str, research_consent: bool, at=None) -> User:
        user = self._user(user_id)
        if user.research_consent is not None and user.research_consent == research_consent:
            return user  # unchanged answer, nothing to record
        self._commit(
            "consent_set",
            _iso(at),
            {"user_id": user_id, "research_consent": bool(research_consent)},
        )
        return user

    def _apply_consent_set(self, p: dict) -> None:
        user = self.users[p["user_id"]]
        if user.research_consent is not None:
            user.consent_changed = True
        user.research_consent = p["research_consent"]

    # ------------------------------------------------------------------
    # offerings, topics, enrolment
    # ------------------------------------------------------------------

    def create_offering(
        self,
        creator_id: str,
        meta: dict,
        topics: list[str],
        at=None,
        moderation_policy: ModerationPolicy | str = ModerationPolicy.NONE,
        flag_threshold: int = 3,
        created_from_lms: bool = False,
        config: Optional[OfferingConfig] = None,
    ) -> Offering:
        self._user(creator_id)
        validate_topic_names(topics)
        moderation_policy = ModerationPolicy(moderation_policy)
        if flag_threshold < 1:
            raise ValidationError("flag threshold must be positive")
        cfg = config or self.defaults
        cfg.validate()
        at = _iso(at)
        seq = self._next_seq()
        offering_id = f"off{seq:06d}"
        payload = {
            "offering_id": offering_id,
            "creator_id": creator_id,
            "university_name": meta.get("university_name", ""),
            "course_code": meta.get("course_code", ""),
            "course_name": meta.get("course_name", ""),
            "semester": meta.get("semester", ""),
            "teaching_start": meta.get("teaching_start", _day(at)),
            "topics": [
                {"id": f"top{seq:06d}x{i}", "name": name, "ordinal": i}
                for i, name in enumerate(topics)
            ],
            "moderation_policy": moderation_policy.value,
            "flag_threshold": flag_threshold,
            "created_from_lms": created_from_lms,
            "config": _config_dict(cfg),
            "at": at,
        }
        self._commit("offering_created", at, payload)
        return self.offerings[offering_id]

    def _apply_offering_created(self, p: dict) -> None:
        offering = Offering(
            id=p["offering_id"],
            university_name=p["university_name"],
            course_code=p["course_code"],
            course_name=p["course_name"],
            semester=p["semester"],
            teaching_start=p["teaching_start"],
            topics=[Topic(**t) for t in p["topics"]],
            moderation_policy=ModerationPolicy(p["moderation_policy"]),
            flag_threshold=p["flag_threshold"],
            created_from_lms=p["created_from_lms"],
            config=_config_from_dict(p["config"]),
        )
        self.offerings[offering.id] = offering
        self.enrolments[offering.id] = {
            p["creator_id"]: Enrolment(role=Role.INSTRUCTOR, enrolled_at=p["at"])
        }

    def update_topics(
        self, instructor_id: str, offering_id: str, topics: list[dict], at=None
    ) -> Offering:
        """Replace the topic list: entries are {"id": existing-or-None, "name": str}."""
        offering = self._offering(offering_id)
        self._require_instructor(offering_id, instructor_id)
        validate_topic_names([t["name"] for t in topics])
        known = offering.topic_ids()
        for t in topics:
            if t.get("id") and t["id"] not in known:
                raise ValidationError(f"unknown topic id {t['id']!r}", topic=t["id"])
        seq = self._next_seq()
        resolved = [
            {
                "id": t["id"] if t.get("id") else f"top{seq:06d}x{i}",
                "name": t["name"],
                "ordinal": i,
            }
            for i, t in enumerate(topics)
        ]
        surviving = {t["id"] for t in resolved}
        orphans = [
            r.id
            for r in self.resources.values()
            if r.offering_id == offering_id
            and r.status != Status.DELETED
            and not (set(r.tags) & surviving)
        ]
        if orphans:
            raise ValidationError(
                "topic removal would leave resources without any valid topic",
                resources=sorted(orphans),
            )
        self._commit(
            "topics_updated", _iso(at), {"offering_id": offering_id, "topics": resolved}
        )
        return offering

    def _apply_topics_updated(self, p: dict) -> None:
        offering = self.offerings[p["offering_id"]]
        offering.topics = [Topic(**t) for t in p["topics"]]
        surviving = offering.topic_ids()
        for r in self.resources.values():
            # deleted resources keep their historical tags untouched
            if r.offering_id == offering.id and r.status != Status.DELETED:
                r.tags = [t for t in r.tags if t in surviving]

    def set_moderation_policy(
        self,
        instructor_id: str,
        offering_id: str,
        policy: ModerationPolicy | str,
        flag_threshold: Optional[int] = None,
        at=None,
    ) -> Offering:
        offering = self._offering(offering_id)
        self._require_instructor(offering_id, instructor_id)
        policy = ModerationPolicy(policy)
        threshold = offering.flag_threshold if flag_threshold is None else flag_threshold
        if threshold < 1:
            raise ValidationError("flag threshold must be positive")
        self._commit(
            "policy_set",
            _iso(at),
            {
                "offering_id": offering_id,
                "moderation_policy": policy.value,
                "flag_threshold": threshold,
            },
        )
        return offering

    def _apply_policy_set(self, p: dict) -> None:
        offering = self.offerings[p["offering_id"]]
        offering.moderation_policy = ModerationPolicy(p["moderation_policy"])
        offering.flag_threshold = p["flag_threshold"]

    def issue_ticket(
        self,
        instructor_id: str,
        offering_id: str,
        kind: TicketKind | str,
        email: Optional[str] = None,
        code: Optional[str] = None,
        expiry: Optional[str] = None,
        at=None,
    ) -> EnrolmentTicket:
        self._offering(offering_id)
        self._require_instructor(offering_id, instructor_id)
        kind = TicketKind(kind)
        if kind == TicketKind.INVITATION and not email:
            raise ValidationError("invitations need a recipient address")
        code = code or secrets.token_urlsafe(8)
        if code in self.tickets:
            raise ConflictError(f"ticket code {code!r} already exists")
        at = _iso(at)
        self._commit(
            "ticket_issued",
            at,
            {
                "offering_id": offering_id,
                "kind": kind.value,
                "code": code,
                "expiry": expiry,
                "email": email,
                "at": at,
            },
        )
        return self.tickets[code]

    def _apply_ticket_issued(self, p: dict) -> None:
        ticket = EnrolmentTicket(
            kind=TicketKind(p["kind"]),
            code=p["code"],
            offering_id=p["offering_id"],
            expiry=p["expiry"],
            email=p["email"],
        )
        self.tickets[ticket.code] = ticket
        if ticket.kind == TicketKind.INVITATION:
            self.outbox.append(
                {
                    "kind": "invitation",
                    "to": p["email"],
                    "offering_id": p["offering_id"],
                    "code": p["code"],
                    "at": p["at"],
                }
            )

    def enrol(self, offering_id: str, user_id: str, code: str, at=None) -> Enrolment:
        """Self-enrolment with an access code or a single-use invitation token."""
        self._offering(offering_id)
        self._user(user_id)
        existing = self.enrolments.get(offering_id, {}).get(user_id)
        if existing is not None:
            return existing  # idempotent for an already-enrolled user
        ticket = self.tickets.get(code)
        if ticket is None or ticket.offering_id != offering_id:
            raise InvalidCodeError("code does not match this offering")
        at = _iso(at)
        if ticket.expiry is not None and at > ticket.expiry:
            raise InvalidCodeError("code has expired")
        if ticket.kind == TicketKind.INVITATION and ticket.used:
            raise AlreadyUsedError("invitation token was already used")
        self._commit(
            "enrolled",
            at,
            {
                "offering_id": offering_id,
                "user_id": user_id,
                "role": Role.STUDENT.value,
                "via": ticket.kind.value,
                "code": code,
                "at": at,
            },
        )
        return self.enrolments[offering_id][user_id]

    def add_member(
        self,
        instructor_id: str,
        offering_id: str,
        user_id: str,
        role: Role | str = Role.STUDENT,
        at=None,
    ) -> Enrolment:
        """Instructor adds a user directly, optionally with an explicit role."""
        self._offering(offering_id)
        self._require_instructor(offering_id, instructor_id)
        self._user(user_id)
        role = Role(role)
        existing = self.enrolments.get(offering_id, {}).get(user_id)
        if existing is not None:
            return existing
        at = _iso(at)
        self._commit(
            "enrolled",
            at,
            {
                "offering_id": offering_id,
                "user_id": user_id,
                "role": role.value,
                "via": "instructor",
                "code": None,
                "at": at,
            },
        )
        return self.enrolments[offering_id][user_id]

    def enrol_from_launch(self, launch: LaunchRecord, at=None) -> Enrolment:
        """Normalize an LMS launch into an enrolment with the mapped role."""
        self._offering(launch.offering_ref)
        self._user(launch.user_ref)
        role = map_lms_role(launch)
        existing = self.enrolments.get(launch.offering_ref, {}).get(launch.user_ref)
        if existing is not None:
            return existing
        at = _iso(at)
        self._commit(
            "enrolled",
            at,
            {
                "offering_id": launch.offering_ref,
                "user_id": launch.user_ref,
                "role": role.value,
                "via": "lms",
                "code": None,
                "at": at,
            },
        )
        return self.enrolments[launch.offering_ref][launch.user_ref]

    def _apply_enrolled(self, p: dict) -> None:
        self.enrolments.setdefault(p["offering_id"], {})[p["user_id"]] = Enrolment(
            role=Role(p["role"]), enrolled_at=p["at"]
        )
        if p["via"] == TicketKind.INVITATION.value:
            self.tickets[p["code"]].used = True

    # ------------------------------------------------------------------
    # cross-offering import
    # ------------------------------------------------------------------

    def import_resources(
        self,
        instructor_id: str,
        target_offering_id: str,
        query: dict,
        topic_map: Optional[dict[str, str]] = None,
        at=None,
    ) -> list[Resource]:
        """Copy published resources from other offerings into the target.

        ``query`` supports university, course, offering_id, topics (names),
        min_rating (mean stars), resource_type, keywords.  ``topic_map``
        maps source topic names to target topic ids or names; identical
        names map automatically.
        """
        target = self._offering(target_offering_id)
        self._require_instructor(target_offering_id, instructor_id)
        topic_map = dict(topic_map or {})

        matches = self._match_import_query(target_offering_id, query)
        target_by_name = {t.name: t.id for t in target.topics}
        target_ids = target.topic_ids()

        def resolve(source_name: str) -> Optional[str]:
            mapped = topic_map.get(source_name, source_name)
            if mapped in target_ids:
                return mapped
            return target_by_name.get(mapped)

        unmapped: set[str] = set()
        copies = []
        at = _iso(at)
        seq = self._next_seq()
        for i, source in enumerate(matches):
            source_offering = self.offerings[source.offering_id]
            new_tags = []
            for tag in source.tags:
                name = source_offering.topic_by_id(tag).name
                resolved = resolve(name)
                if resolved is None:
                    unmapped.add(name)
                else:
                    new_tags.append(resolved)
            copies.append(
                {
                    "resource_id": f"res{seq:06d}x{i}",
                    "source_id": source.id,
                    "offering_id": target_offering_id,
                    "author_id": source.author_id,
                    "kind": source.kind.value,
                    "body": source.body,
                    "tags": _order_tags(target, new_tags),
                    "content": _content_dict(source.content),
                    "at": at,
                }
            )
        if unmapped:
            raise ValidationError(
                "source topics have no mapping to target topics",
                unmapped=sorted(unmapped),
            )
        if not copies:
            return []
        self._commit(
            "resources_imported",
            at,
            {
                "offering_id": target_offering_id,
                "instructor_id": instructor_id,
                "resources": copies,
                "initial_rating": target.config.initial_rating,
            },
        )
        return [self.resources[c["resource_id"]] for c in copies]

    def _match_import_query(self, target_offering_id: str, query: dict) -> list[Resource]:
        university = query.get("university")
        course = query.get("course")
        offering_id = query.get("offering_id")
        topics = set(query.get("topics") or [])
        min_rating = query.get("min_rating")
        resource_type = query.get("resource_type")
        keywords = (query.get("keywords") or "").lower()

        out = []
        for r in self.resources.values():
            if r.offering_id == target_offering_id or r.status != Status.PUBLISHED:
                continue
            source = self.offerings[r.offering_id]
            if university is not None and source.university_name != university:
                continue
            if course is not None and course not in (source.course_code, source.course_name):
                continue
            if offering_id is not None and r.offering_id != offering_id:
                continue
            if topics:
                tag_names = {source.topic_by_id(t).name for t in r.tags}
                if not (tag_names & topics):
                    continue
            if resource_type is not None and r.kind != ResourceKind(resource_type):
                continue
            if min_rating is not None:
                summary = self.resource_quality(r.id)
                if summary["mean_stars"] is None or summary["mean_stars"] < min_rating:
                    continue
            if keywords and keywords not in r.body.lower():
                continue
            out.append(r)
        return out

    def load_resource_records(
        self,
        instructor_id: str,
        offering_id: str,
        records: list[dict],
        topic_map: Optional[dict[str, str]] = None,
        at=None,
    ) -> list[Resource]:
        """Load interchange records (see reports.export_resources_jsonl).

        Only published records are loaded; topics resolve by name, with
        ``topic_map`` overrides.  The importing instructor becomes the author
        of the copies.
        """
        target = self._offering(offering_id)
        self._require_instructor(offering_id, instructor_id)
        topic_map = dict(topic_map or {})
        target_by_name = {t.name: t.id for t in target.topics}
        target_ids = target.topic_ids()

        unmapped: set[str] = set()
        copies = []
        at = _iso(at)
        seq = self._next_seq()
        i = 0
        for record in records:
            if record.get("status") != Status.PUBLISHED.value:
                continue
            kind = ResourceKind(record["kind"])
            content = _content_from_dict(kind, record.get("content"))
            tags = []
            for name in record.get("topics", []):
                mapped = topic_map.get(name, name)
                resolved = mapped if mapped in target_ids else target_by_name.get(mapped)
                if resolved is None:
                    unmapped.add(name)
                else:
                    tags.append(resolved)
            if not unmapped:
                self._validate_resource_fields(target, record.get("body"), tags, kind, content)
            copies.append(
                {
                    "resource_id": f"res{seq:06d}x{i}",
                    "source_id": record.get("resource_id"),
                    "offering_id": offering_id,
                    "author_id": instructor_id,
                    "kind": kind.value,
                    "body": record["body"],
                    "tags": _order_tags(target, tags),
                    "content": _content_dict(content),
                    "at": at,
                }
            )
            i += 1
        if unmapped:
            raise ValidationError(
                "record topics have no mapping to target topics",
                unmapped=sorted(unmapped),
            )
        if not copies:
            return []
        self._commit(
            "resources_imported",
            at,
            {
                "offering_id": offering_id,
                "instructor_id": instructor_id,
                "resources": copies,
                "initial_rating": target.config.initial_rating,
            },
        )
        return [self.resources[c["resource_id"]] for c in copies]

    def _apply_resources_imported(self, p: dict) -> None:
        for c in p["resources"]:
            resource = Resource(
                id=c["resource_id"],
                offering_id=c["offering_id"],
                author_id=c["author_id"],
                kind=ResourceKind(c["kind"]),
                body=c["body"],
                tags=list(c["tags"]),
                status=Status.PUBLISHED,
                content=_content_from_dict(ResourceKind(c["kind"]), c["content"]),
                created_at=c["at"],
                edited_at=c["at"],
                rating_n=elo.to_fixed(p["initial_rating"]),
                elo_attempts=0,
            )
            self.resources[resource.id] = resource

    # ------------------------------------------------------------------
    # authoring and lifecycle
    # ------------------------------------------------------------------

    def author_resource(
        self,
        author_id: str,
        offering_id: str,
        kind: ResourceKind | str,
        body: str,
        tags: list[str],
        content=None,
        as_draft: bool = False,
        at=None,
    ) -> Resource:
        offering = self._offering(offering_id)
        self._require_enrolled(offering_id, author_id)
        kind = ResourceKind(kind)
        self._validate_resource_fields(offering, body, tags, kind, content)
        if as_draft:
            status = Status.DRAFT
        elif offering.moderation_policy == ModerationPolicy.NONE:
            status = Status.PUBLISHED
        else:
            status = Status.PENDING_MODERATION
        at = _iso(at)
        resource_id = f"res{self._next_seq():06d}"
        self._commit(
            "resource_authored",
            at,
            {
                "resource_id": resource_id,
                "offering_id": offering_id,
                "author_id": author_id,
                "kind": kind.value,
                "body": body,
                "tags": _order_tags(offering, tags),
                "content": _content_dict(content),
                "status": status.value,
                "initial_rating": offering.config.initial_rating,
                "at": at,
            },
        )
        return self.resources[resource_id]

    def _validate_resource_fields(self, offering, body, tags, kind, content) -> None:
        if not body or not body.strip():
            raise ValidationError("resource body must be non-empty")
        if not tags:
            raise ValidationError("resources must be tagged with at least one topic")
        unknown = [t for t in tags if t not in offering.topic_ids()]
        if unknown:
            raise ValidationError("tags must be offering topics", unknown=unknown)
        validate_kind_content(kind, content)

    def _apply_resource_authored(self, p: dict) -> None:
        kind = ResourceKind(p["kind"])
        resource = Resource(
            id=p["resource_id"],
            offering_id=p["offering_id"],
            author_id=p["author_id"],
            kind=kind,
            body=p["body"],
            tags=list(p["tags"]),
            status=Status(p["status"]),
            content=_content_from_dict(kind, p["content"]),
            created_at=p["at"],
            edited_at=p["at"],
            rating_n=elo.to_fixed(p["initial_rating"]),
        )
        self.resources[resource.id] = resource
        self._counters(p["offering_id"], p["author_id"])[0] += 1

    def edit_resource(
        self,
        author_id: str,
        resource_id: str,
        body: Optional[str] = None,
        tags: Optional[list[str]] = None,
        content=...,
        at=None,
    ) -> Resource:
        """Author edits; a published resource goes back through moderation."""
        resource = self._resource(resource_id)
        offering = self._offering(resource.offering_id)
        if resource.author_id != author_id:
            raise AuthorizationError("only the author may edit a resource")
        if resource.status == Status.DELETED:
            raise LifecycleError("deleted resources are read-only; author a new one")
        new_body = resource.body if body is None else body
        new_tags = resource.tags if tags is None else tags
        new_content = resource.content if content is ... else content
        self._validate_resource_fields(offering, new_body, new_tags, resource.kind, new_content)
        if (
            resource.status == Status.PUBLISHED
            and offering.moderation_policy != ModerationPolicy.NONE
        ):
            new_status = Status.PENDING_MODERATION
        else:
            new_status = resource.status
        at = _iso(at)
        self._commit(
            "resource_edited",
            at,
            {
                "resource_id": resource_id,
                "body": new_body,
                "tags": _order_tags(offering, new_tags),
                "content": _content_dict(new_content),
                "status": new_status.value,
                "at": at,
            },
        )
        return resource

    def _apply_resource_edited(self, p: dict) -> None:
        resource = self.resources[p["resource_id"]]
        resource.body = p["body"]
        resource.tags = list(p["tags"])
        resource.content = _content_from_dict(resource.kind, p["content"])
        new_status = Status(p["status"])
        if new_status != resource.status:
            resource.status = new_status
            self.reviews.pop(resource.id, None)
            self.flags.pop(resource.id, None)
        resource.edited_at = p["at"]

    def submit_resource(self, author_id: str, resource_id: str, at=None) -> Resource:
        """Submit a draft: auto-published under no moderation, queued otherwise."""
        resource = self._resource(resource_id)
        offering = self._offering(resource.offering_id)
        if resource.author_id != author_id:
            raise AuthorizationError("only the author may submit a resource")
        if resource.status != Status.DRAFT:
            raise LifecycleError("only drafts can be submitted", current=resource.status.value)
        if offering.moderation_policy == ModerationPolicy.NONE:
            new_status = Status.PUBLISHED  # straight through the (empty) queue
        else:
            new_status = Status.PENDING_MODERATION
        self._commit(
            "resource_submitted",
            _iso(at),
            {"resource_id": resource_id, "status": new_status.value},
        )
        return resource

    def _apply_resource_submitted(self, p: dict) -> None:
        resource = self.resources[p["resource_id"]]
        resource.status = Status(p["status"])
        self.reviews.pop(resource.id, None)
        self.flags.pop(resource.id, None)

    def moderate(
        self,
        instructor_id: str,
        resource_id: str,
        decision: str,
        note: Optional[str] = None,
        at=None,
    ) -> Resource:
        resource = self._resource(resource_id)
        self._require_instructor(resource.offering_id, instructor_id)
        if decision not in ("approve", "reject"):
            raise ValidationError("decision must be approve or reject", decision=decision)
        if resource.status != Status.PENDING_MODERATION:
            raise LifecycleError(
                "only resources awaiting moderation can be moderated",
                current=resource.status.value,
            )
        target = Status.PUBLISHED if decision == "approve" else Status.DRAFT
        check_transition(resource.status, target)
        at = _iso(at)
        self._commit(
            "moderated",
            at,
            {
                "resource_id": resource_id,
                "instructor_id": instructor_id,
                "decision": decision,
                "note": note,
                "status": target.value,
                "at": at,
            },
        )
        return resource

    def _apply_moderated(self, p: dict) -> None:
        resource = self.resources[p["resource_id"]]
        resource.status = Status(p["status"])
        self.flags.pop(resource.id, None)
        self.reviews.pop(resource.id, None)
        if p["decision"] == "reject":
            self.outbox.append(
                {
                    "kind": "moderation_note",
                    "to": resource.author_id,
                    "resource_id": resource.id,
                    "note": p["note"] or "",
                    "at": p["at"],
                }
            )

    def peer_review(
        self,
        reviewer_id: str,
        resource_id: str,
        approve: bool,
        rationale: str,
        at=None,
    ) -> dict:
        """Competent-student moderation: quorum of eligible peer verdicts."""
        resource = self._resource(resource_id)
        offering = self._offering(resource.offering_id)
        role = self._require_enrolled(resource.offering_id, reviewer_id)
        if offering.moderation_policy != ModerationPolicy.COMPETENT_STUDENT:
            raise ValidationError("offering does not use competent-student moderation")
        if role != Role.STUDENT:
            raise ValidationError("instructors moderate directly instead of peer-reviewing")
        if resource.status != Status.PENDING_MODERATION:
            raise LifecycleError(
                "only resources awaiting moderation can be reviewed",
                current=resource.status.value,
            )
        if reviewer_id == resource.author_id:
            raise ConflictError("authors cannot review their own resource")
        if any(r.reviewer_id == reviewer_id for r in self.reviews.get(resource_id, [])):
            raise ConflictError("reviewer already reviewed this submission")
        learner = self.learner(resource.offering_id, reviewer_id)
        cfg = self._elo_config(offering)
        tag_mean = fmean(learner.rating(t, cfg) for t in resource.tags)
        if tag_mean < offering.config.competence_threshold:
            raise EligibilityError(
                "reviewer rating below the competence threshold",
                tag_mean=tag_mean,
                threshold=offering.config.competence_threshold,
            )
        if not rationale or not rationale.strip():
            raise ValidationError("reviews need a rationale")

        existing = self.reviews.get(resource_id, [])
        approvals = sum(1 for r in existing if r.approve) + (1 if approve else 0)
        total = len(existing) + 1
        decided: Optional[str] = None
        if total >= offering.config.review_quorum:
            decided = (
                Status.PUBLISHED.value
                if approvals > total - approvals
                else Status.DRAFT.value
            )
        at = _iso(at)
        self._commit(
            "peer_reviewed",
            at,
            {
                "resource_id": resource_id,
                "reviewer_id": reviewer_id,
                "approve": bool(approve),
                "rationale": rationale,
                "decided": decided,
                "at": at,
            },
        )
        return {
            "approvals": approvals,
            "rejections": total - approvals,
            "quorum": offering.config.review_quorum,
            "status": self.resources[resource_id].status.value,
        }

    def _apply_peer_reviewed(self, p: dict) -> None:
        resource = self.resources[p["resource_id"]]
        self.reviews.setdefault(resource.id, []).append(
            PeerReview(
                reviewer_id=p["reviewer_id"],
                resource_id=resource.id,
                approve=p["approve"],
                rationale=p["rationale"],
                timestamp=p["at"],
            )
        )
        if p["decided"] is not None:
            resource.status = Status(p["decided"])
            self.reviews.pop(resource.id, None)
            if resource.status == Status.DRAFT:
                self.outbox.append(
                    {
                        "kind": "peer_review_outcome",
                        "to": resource.author_id,
                        "resource_id": resource.id,
                        "note": "returned to draft by peer review",
                        "at": p["at"],
                    }
                )

    # ------------------------------------------------------------------
    # attempts, ratings, comments, flags
    # ------------------------------------------------------------------

    def attempt_resource(
        self,
        student_id: str,
        resource_id: str,
        chosen_index: Optional[int] = None,
        at=None,
    ) -> dict:
        """Attempt an MCQ (answer required) or view a note / worked example.

        Only the first attempt of a published MCQ moves ratings; repeats are
        recorded for engagement and the peer answer distribution.
        """
        resource = self._resource(resource_id)
        offering = self._offering(resource.offering_id)
        self._require_enrolled(resource.offering_id, student_id)
        if not resource.is_attemptable():
            raise LifecycleError(
                "resource is not attemptable", current=resource.status.value
            )
        correct: Optional[bool] = None
        if resource.kind == ResourceKind.MCQ:
            if chosen_index is None:
                raise ValidationError("MCQ attempts need a chosen answer")
            if not 0 <= chosen_index < len(resource.content.choices):
                raise ValidationError(
                    "chosen answer out of range", chosen_index=chosen_index
                )
            correct = chosen_index == resource.content.correct_index
        elif chosen_index is not None:
            raise ValidationError("only MCQs take a chosen answer")

        prior = self._attempts_by_student.get((resource.offering_id, student_id), [])
        scored = resource.kind == ResourceKind.MCQ and not any(
            self.attempts[a].resource_id == resource_id for a in prior
        )
        delta_payload = None
        if scored:
            cfg = self._elo_config(offering)
            learner = self.learner(resource.offering_id, student_id)
            delta = elo.compute_attempt_deltas(
                learner,
                elo.ResourceRating(rating_n=resource.rating_n, attempts=resource.elo_attempts),
                resource.tags,
                bool(correct),
                cfg,
            )
            delta_payload = {
                "per_topic_n": delta.per_topic_n,
                "resource_delta_n": delta.resource_delta_n,
            }
        at = _iso(at)
        attempt_id = f"att{self._next_seq():06d}"
        self._commit(
            "attempted",
            at,
            {
                "attempt_id": attempt_id,
                "offering_id": resource.offering_id,
                "student_id": student_id,
                "resource_id": resource_id,
                "chosen_index": chosen_index,
                "correct": correct,
                "delta": delta_payload,
                "at": at,
            },
        )
        result = {
            "attempt_id": attempt_id,
            "correct": correct,
            "scored": scored,
        }
        if resource.kind == ResourceKind.MCQ:
            result["correct_index"] = resource.content.correct_index
            result["answer_distribution"] = self.answer_distribution(resource_id)
            result["explanation"] = resource.content.explanation
        if delta_payload is not None:
            result["delta"] = {
                "per_topic": {
                    t: elo.from_fixed(d) for t, d in delta_payload["per_topic_n"].items()
                },
                "resource": elo.from_fixed(delta_payload["resource_delta_n"]),
            }
        return result

    def _apply_attempted(self, p: dict) -> None:
        delta = None
        if p["delta"] is not None:
            delta = elo.RatingDelta(
                per_topic_n={t: int(d) for t, d in p["delta"]["per_topic_n"].items()},
                resource_delta_n=int(p["delta"]["resource_delta_n"]),
            )
        attempt = AttemptRecord(
            id=p["attempt_id"],
            student_id=p["student_id"],
            resource_id=p["resource_id"],
            chosen_index=p["chosen_index"],
            correct=p["correct"],
            timestamp=p["at"],
            delta=delta,
        )
        self.attempts[attempt.id] = attempt
        self._attempts_by_resource.setdefault(p["resource_id"], []).append(attempt.id)
        self._attempts_by_student.setdefault(
            (p["offering_id"], p["student_id"]), []
        ).append(attempt.id)
        if p["chosen_index"] is not None:
            self._counters(p["offering_id"], p["student_id"])[1] += 1
        if delta is not None:
            resource = self.resources[p["resource_id"]]
            learner = self._materialize_learner(p["offering_id"], p["student_id"])
            offering = self.offerings[p["offering_id"]]
            mirror = elo.ResourceRating(rating_n=resource.rating_n, attempts=resource.elo_attempts)
            elo.apply_delta(learner, mirror, delta, self._elo_config(offering), _day(p["at"]))
            resource.rating_n = mirror.rating_n
            resource.elo_attempts = mirror.attempts

    def rate_resource(self, rater_id: str, resource_id: str, stars: int, at=None) -> dict:
        resource = self._resource(resource_id)
        self._require_enrolled(resource.offering_id, rater_id)
        rating = QualityRating(
            rater_id=rater_id, resource_id=resource_id, stars=stars, timestamp=_iso(at)
        )
        rating.validate()
        mine = self._attempts_by_student.get((resource.offering_id, rater_id), [])
        if not any(self.attempts[a].resource_id == resource_id for a in mine):
            raise ValidationError("attempt or view the resource before rating it")
        self._commit(
            "quality_rated",
            rating.timestamp,
            {
                "offering_id": resource.offering_id,
                "rater_id": rater_id,
                "resource_id": resource_id,
                "stars": stars,
                "at": rating.timestamp,
            },
        )
        return self.resource_quality(resource_id)

    def _apply_quality_rated(self, p: dict) -> None:
        self.quality.setdefault(p["resource_id"], {})[p["rater_id"]] = QualityRating(
            rater_id=p["rater_id"],
            resource_id=p["resource_id"],
            stars=p["stars"],
            timestamp=p["at"],
        )
        self._counters(p["offering_id"], p["rater_id"])[2] += 1

    def comment(self, author_id: str, resource_id: str, text: str, at=None) -> Comment:
        resource = self._resource(resource_id)
        self._require_enrolled(resource.offering_id, author_id)
        at = _iso(at)
        record = Comment(
            id=f"com{self._next_seq():06d}",
            author_id=author_id,
            resource_id=resource_id,
            text=text,
            timestamp=at,
        )
        record.validate()
        self._commit(
            "commented",
            at,
            {
                "comment_id": record.id,
                "offering_id": resource.offering_id,
                "author_id": author_id,
                "resource_id": resource_id,
                "text": text,
                "at": at,
            },
        )
        return record

    def _apply_commented(self, p: dict) -> None:
        self.comments.append(
            Comment(
                id=p["comment_id"],
                author_id=p["author_id"],
                resource_id=p["resource_id"],
                text=p["text"],
                timestamp=p["at"],
            )
        )

    def flag_resource(self, flagger_id: str, resource_id: str, reason: str, at=None) -> dict:
        """Flag inappropriate content; enough live flags unpublish the resource."""
        resource = self._resource(resource_id)
        offering = self._offering(resource.offering_id)
        self._require_enrolled(resource.offering_id, flagger_id)
        if resource.status != Status.PUBLISHED:
            raise LifecycleError("only published resources can be flagged")
        if not reason or not reason.strip():
            raise ValidationError("flags need a reason")
        live = set(self.flags.get(resource_id, {}))
        live.add(flagger_id)
        unpublish = len(live) >= offering.flag_threshold
        at = _iso(at)
        self._commit(
            "flagged",
            at,
            {
                "offering_id": resource.offering_id,
                "flagger_id": flagger_id,
                "resource_id": resource_id,
                "reason": reason,
                "unpublish": unpublish,
                "at": at,
            },
        )
        return {"status": resource.status.value, "flags": len(self.flags[resource_id])}

    def _apply_flagged(self, p: dict) -> None:
        self.flags.setdefault(p["resource_id"], {})[p["flagger_id"]] = Flag(
            flagger_id=p["flagger_id"],
            resource_id=p["resource_id"],
            reason=p["reason"],
            timestamp=p["at"],
        )
        if p["unpublish"]:
            self.resources[p["resource_id"]].status = Status.PENDING_MODERATION

    def delete_resource(self, actor_id: str, resource_id: str, at=None) -> Resource:
        """Soft-delete and give every affected student their rating back.

        All rating deltas attributed to this resource are reverted exactly,
        so replaying the surviving delta ledger from initial ratings equals
        the post-deletion state.
        """
        resource = self._resource(resource_id)
        role = self.role_of(resource.offering_id, actor_id)
        if actor_id != resource.author_id and role != Role.INSTRUCTOR:
            raise AuthorizationError("only the author or an instructor may delete")
        if resource.status not in (Status.DRAFT, Status.PUBLISHED):
            raise LifecycleError(
                "resource cannot be deleted in its current status",
                current=resource.status.value,
            )
        check_transition(resource.status, Status.DELETED)
        self._commit(
            "resource_deleted",
            _iso(at),
            {"resource_id": resource_id, "actor_id": actor_id},
        )
        return resource

    def _apply_resource_deleted(self, p: dict) -> None:
        resource = self.resources[p["resource_id"]]
        offering = self.offerings[resource.offering_id]
        cfg = self._elo_config(offering)
        mirror = elo.ResourceRating(rating_n=resource.rating_n, attempts=resource.elo_attempts)
        for attempt_id in self._attempts_by_resource.get(resource.id, []):
            attempt = self.attempts[attempt_id]
            if attempt.delta is not None and attempt.delta.applied:
                learner = self._materialize_learner(resource.offering_id, attempt.student_id)
                elo.revert_delta(learner, mirror, attempt.delta)
        resource.rating_n = mirror.rating_n
        resource.elo_attempts = mirror.attempts
        resource.status = Status.DELETED
        self.flags.pop(resource.id, None)
        self.reviews.pop(resource.id, None)
        _ = cfg  # config reserved for future per-offering reversal policies

    def endorse_resource(self, instructor_id: str, resource_id: str, at=None) -> Resource:
        """Instructor marks a question as correct and effective for grading."""
        resource = self._resource(resource_id)
        self._require_instructor(resource.offering_id, instructor_id)
        if resource.endorsed:
            return resource
        self._commit(
            "endorsed",
            _iso(at),
            {"resource_id": resource_id, "instructor_id": instructor_id},
        )
        return resource

    def _apply_endorsed(self, p: dict) -> None:
        self.resources[p["resource_id"]].endorsed = True

    # ------------------------------------------------------------------
    # rounds and badges
    # ------------------------------------------------------------------

    def configure_rounds(
        self, instructor_id: str, offering_id: str, rounds: list[dict], at=None
    ) -> list[RoundConfig]:
        self._offering(offering_id)
        self._require_instructor(offering_id, instructor_id)
        parsed = [RoundConfig(**r) for r in rounds]
        RoundConfig.validate_schedule(parsed)
        self._commit(
            "rounds_configured",
            _iso(at),
            {"offering_id": offering_id, "rounds": [r.to_json() for r in parsed]},
        )
        return self.rounds[offering_id]

    def _apply_rounds_configured(self, p: dict) -> None:
        self.rounds[p["offering_id"]] = [RoundConfig(**r) for r in p["rounds"]]

    def award_badges(self, offering_id: str, student_id: str, at=None) -> list[Badge]:
        """Evaluate badge criteria and persist newly earned badges."""
        offering = self._offering(offering_id)
        self._require_enrolled(offering_id, student_id)
        at = _iso(at)
        held = dict(self.badges.get(offering_id, {}).get(student_id, {}))
        learner = self.learner(offering_id, student_id)
        cfg = self._elo_config(offering)
        counters = self.engagement.get(offering_id, {}).get(student_id, [0, 0, 0])
        new = evaluate_badges(
            held=held,
            counters=counters,
            topic_bands={
                t.id: (
                    elo.competency_band(learner.rating(t.id, cfg), cfg),
                    learner.attempts(t.id),
                )
                for t in offering.topics
            },
            awarded_at=at,
        )
        if not new:
            return []
        self._commit(
            "badges_awarded",
            at,
            {
                "offering_id": offering_id,
                "student_id": student_id,
                "badges": [b.to_json() for b in new],
                "at": at,
            },
        )
        return new

    def _apply_badges_awarded(self, p: dict) -> None:
        held = self.badges.setdefault(p["offering_id"], {}).setdefault(p["student_id"], {})
        for b in p["badges"]:
            badge = Badge.from_json(b)
            held[badge.id] = badge

    # ------------------------------------------------------------------
    # queries
    # ------------------------------------------------------------------

    def answer_distribution(self, resource_id: str) -> list[int]:
        resource = self._resource(resource_id)
        if resource.kind != ResourceKind.MCQ:
            raise ValidationError("answer distributions exist only for MCQs")
        counts = [0] * len(resource.content.choices)
        for attempt_id in self._attempts_by_resource.get(resource_id, []):
            chosen = self.attempts[attempt_id].chosen_index
            if chosen is not None:
                counts[chosen] += 1
        return counts

    def resource_quality(self, resource_id: str) -> dict:
        return quality_summary(list(self.quality.get(resource_id, {}).values()))

    def attempts_for_student(self, offering_id: str, student_id: str) -> list[AttemptRecord]:
        ids = self._attempts_by_student.get((offering_id, student_id), [])
        return [self.attempts[a] for a in ids]

    def attempts_for_resource(self, resource_id: str) -> list[AttemptRecord]:
        return [self.attempts[a] for a in self._attempts_by_resource.get(resource_id, [])]

    def students_of(self, offering_id: str) -> list[str]:
        return [
            uid
            for uid, enr in self.enrolments.get(offering_id, {}).items()
            if enr.role == Role.STUDENT
        ]

    def cohort_mean(self, offering_id: str, topic_id: str) -> float:
        offering = self._offering(offering_id)
        cfg = self._elo_config(offering)
        students = self.students_of(offering_id)
        if not students:
            return cfg.initial_rating
        return fmean(
            self.learner(offering_id, uid).rating(topic_id, cfg) for uid in students
        )

    def knowledge_state(self, offering_id: str, student_id: str, mode: str = "current") -> dict:
        """Open learner model data: current per-topic state or the daily series."""
        offering = self._offering(offering_id)
        enr = self.enrolments.get(offering_id, {}).get(student_id)
        if enr is None:
            raise AuthorizationError("student is not enrolled in this offering")
        cfg = self._elo_config(offering)
        learner = self.learner(offering_id, student_id)
        if mode == "current":
            topics = []
            for t in offering.topics:
                rating = learner.rating(t.id, cfg)
                topics.append(
                    {
                        "topic_id": t.id,
                        "topic": t.name,
                        "ordinal": t.ordinal,
                        "rating": rating,
                        "band": elo.competency_band(rating, cfg).value,
                        "cohort_mean": self.cohort_mean(offering_id, t.id),
                    }
                )
            return {"mode": "current", "topics": topics}
        if mode == "overtime":
            initial = {t.id: cfg.initial_rating for t in offering.topics}
            series = [{"date": _day(enr.enrolled_at), "ratings": initial}]
            for date in sorted(learner.snapshots):
                snap = learner.snapshots[date]
                series.append(
                    {
                        "date": date,
                        "ratings": {
                            t.id: elo.from_fixed(snap[t.id])
                            if t.id in snap
                            else cfg.initial_rating
                            for t in offering.topics
                        },
                    }
                )
            return {
                "mode": "overtime",
                "topics": [
                    {"topic_id": t.id, "topic": t.name, "ordinal": t.ordinal}
                    for t in offering.topics
                ],
                "series": series,
            }
        raise ValidationError("mode must be current or overtime", mode=mode)

    def overall_rating_of(self, offering_id: str, student_id: str) -> float:
        offering = self._offering(offering_id)
        cfg = self._elo_config(offering)
        learner = self.learner(offering_id, student_id)
        from .grading import overall_rating

        return overall_rating([learner.rating(t.id, cfg) for t in offering.topics])

    def round_mark_for(
        self,
        offering_id: str,
        student_id: str,
        round_index: int,
        now=None,
        force: bool = False,
    ) -> int:
        """Marks for one participation round (0, 1, or 2)."""
        from .grading import is_effective_question, round_mark

        self._offering(offering_id)
        self._require_enrolled(offering_id, student_id)
        rounds = self.rounds.get(offering_id, [])
        config = next((r for r in rounds if r.round_index == round_index), None)
        if config is None:
            raise ValidationError(f"no round {round_index} configured", round=round_index)
        now = _iso(now)
        if now < config.end and not force:
            raise ValidationError(
                "round window still open; pass force to evaluate early",
                round=round_index,
            )
        correct_resources = {
            a.resource_id
            for a in self.attempts_for_student(offering_id, student_id)
            if a.correct is True and config.contains(a.timestamp)
        }
        effective = 0
        for r in self.resources.values():
            if (
                r.offering_id == offering_id
                and r.author_id == student_id
                and config.contains(r.created_at)
            ):
                summary = self.resource_quality(r.id)
                if is_effective_question(
                    r.status == Status.PUBLISHED,
                    summary["mean_stars"],
                    summary["count"],
                    r.endorsed,
                ):
                    effective += 1
        return round_mark(len(correct_resources), effective, config)

    def ripple_marks(
        self, offering_id: str, student_id: str, now=None, force: bool = False
    ) -> dict:
        """Platform total: per-round marks plus the overall-rating mark."""
        from .grading import rating_to_mark

        rounds = self.rounds.get(offering_id, [])
        per_round = {
            r.round_index: self.round_mark_for(
                offering_id, student_id, r.round_index, now=now, force=force
            )
            for r in rounds
        }
        overall = self.overall_rating_of(offering_id, student_id)
        mark = rating_to_mark(overall)
        return {
            "rounds": per_round,
            "overall_rating": overall,
            "rating_mark": mark,
            "total": sum(per_round.values()) + mark,
            "max_total": 2 * len(rounds) + 2,
        }

    def engagement_vector(self, offering_id: str, student_id: str) -> dict:
        self._offering(offering_id)
        self._require_enrolled(offering_id, student_id)
        counts = self.engagement.get(offering_id, {}).get(student_id, [0, 0, 0])
        badges = len(self.badges.get(offering_id, {}).get(student_id, {}))
        vector = {
            "authored": counts[0],
            "answered": counts[1],
            "rated": counts[2],
            "achievements": badges,
        }
        students = self.students_of(offering_id)
        axes = ("authored", "answered", "rated", "achievements")
        if students:
            rows = []
            for u in students:
                c = self.engagement.get(offering_id, {}).get(u, [0, 0, 0])
                rows.append(
                    {
                        "authored": c[0],
                        "answered": c[1],
                        "rated": c[2],
                        "achievements": len(self.badges.get(offering_id, {}).get(u, {})),
                    }
                )
            cohort = {a: fmean(r[a] for r in rows) for a in axes}
            cohort_max = {a: max(r[a] for r in rows) for a in axes}
        else:
            cohort = {a: 0.0 for a in axes}
            cohort_max = {a: 0 for a in axes}
        return {"student": vector, "cohort_mean": cohort, "cohort_max": cohort_max}

    # ------------------------------------------------------------------
    # serialization
    # ------------------------------------------------------------------

    def to_state_dict(self) -> dict:
        return {
            "users": {
                uid: {
                    "display_name": u.display_name,
                    "research_consent": u.research_consent,
                    "consent_changed": u.consent_changed,
                }
                for uid, u in self.users.items()
            },
            "offerings": {
                oid: {
                    "university_name": o.university_name,
                    "course_code": o.course_code,
                    "course_name": o.course_name,
                    "semester": o.semester,
                    "teaching_start": o.teaching_start,
                    "topics": [
                        {"id": t.id, "name": t.name, "ordinal": t.ordinal} for t in o.topics
                    ],
                    "moderation_policy": o.moderation_policy.value,
                    "flag_threshold": o.flag_threshold,
                    "created_from_lms": o.created_from_lms,
                    "config": _config_dict(o.config),
                }
                for oid, o in self.offerings.items()
            },
            "enrolments": {
                oid: {
                    uid: {"role": e.role.value, "enrolled_at": e.enrolled_at}
                    for uid, e in per.items()
                }
                for oid, per in self.enrolments.items()
            },
            "tickets": {
                code: {
                    "kind": t.kind.value,
                    "offering_id": t.offering_id,
                    "expiry": t.expiry,
                    "used": t.used,
                    "email": t.email,
                }
                for code, t in self.tickets.items()
            },
            "resources": {
                rid: {
                    "offering_id": r.offering_id,
                    "author_id": r.author_id,
                    "kind": r.kind.value,
                    "body": r.body,
                    "tags": list(r.tags),
                    "status": r.status.value,
                    "content": _content_dict(r.content),
                    "created_at": r.created_at,
                    "edited_at": r.edited_at,
                    "rating_n": r.rating_n,
                    "elo_attempts": r.elo_attempts,
                    "endorsed": r.endorsed,
                }
                for rid, r in self.resources.items()
            },
            "learners": {
                oid: {
                    uid: {
                        "ratings": {
                            t: [tr.rating_n, tr.attempts] for t, tr in ls.ratings.items()
                        },
                        "snapshots": {d: dict(s) for d, s in ls.snapshots.items()},
                    }
                    for uid, ls in per.items()
                }
                for oid, per in self.learners.items()
            },
            "attempts": [
                {
                    "id": a.id,
                    "student_id": a.student_id,
                    "resource_id": a.resource_id,
                    "chosen_index": a.chosen_index,
                    "correct": a.correct,
                    "timestamp": a.timestamp,
                    "delta": (
                        None
                        if a.delta is None
                        else {
                            "per_topic_n": dict(a.delta.per_topic_n),
                            "resource_delta_n": a.delta.resource_delta_n,
                            "applied": a.delta.applied,
                        }
                    ),
                }
                for a in self.attempts.values()
            ],
            "quality": {
                rid: {
                    uid: {"stars": q.stars, "timestamp": q.timestamp}
                    for uid, q in per.items()
                }
                for rid, per in self.quality.items()
            },
            "comments": [
                {
                    "id": c.id,
                    "author_id": c.author_id,
                    "resource_id": c.resource_id,
                    "text": c.text,
                    "timestamp": c.timestamp,
                }
                for c in self.comments
            ],
            "flags": {
                rid: {
                    uid: {"reason": f.reason, "timestamp": f.timestamp}
                    for uid, f in per.items()
                }
                for rid, per in self.flags.items()
            },
            "reviews": {
                rid: [
                    {
                        "reviewer_id": r.reviewer_id,
                        "approve": r.approve,
                        "rationale": r.rationale,
                        "timestamp": r.timestamp,
                    }
                    for r in reviews
                ]
                for rid, reviews in self.reviews.items()
            },
            "badges": {
                oid: {
                    uid: {bid: b.to_json() for bid, b in per.items()}
                    for uid, per in users.items()
                }
                for oid, users in self.badges.items()
            },
            "rounds": {
                oid: [r.to_json() for r in rounds] for oid, rounds in self.rounds.items()
            },
            "engagement": {
                oid: {uid: list(c) for uid, c in per.items()}
                for oid, per in self.engagement.items()
            },
            "outbox": [dict(m) for m in self.outbox],
        }

    def state_hash(self) -> str:
        blob = json.dumps(
            self.to_state_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=True
        )
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    @classmethod
    def from_state_dict(cls, state: dict, seq: int, defaults: Optional[OfferingConfig] = None) -> "Engine":
        """Rebuild an engine from a snapshot; ``seq`` is the last applied event."""
        engine = cls(defaults=defaults)
        engine.events = [
            EventRecord(seq=i + 1, kind="__snapshot_placeholder__", at="", payload={})
            for i in range(seq)
        ]
        for uid, u in state["users"].items():
            engine.users[uid] = User(
                id=uid,
                display_name=u["display_name"],
                research_consent=u["research_consent"],
                consent_changed=u["consent_changed"],
            )
        for oid, o in state["offerings"].items():
            engine.offerings[oid] = Offering(
                id=oid,
                university_name=o["university_name"],
                course_code=o["course_code"],
                course_name=o["course_name"],
                semester=o["semester"],
                teaching_start=o["teaching_start"],
                topics=[Topic(**t) for t in o["topics"]],
                moderation_policy=ModerationPolicy(o["moderation_policy"]),
                flag_threshold=o["flag_threshold"],
                created_from_lms=o["created_from_lms"],
                config=_config_from_dict(o["config"]),
            )
        for oid, per in state["enrolments"].items():
            engine.enrolments[oid] = {
                uid: Enrolment(role=Role(e["role"]), enrolled_at=e["enrolled_at"])
                for uid, e in per.items()
            }
        for code, t in state["tickets"].items():
            engine.tickets[code] = EnrolmentTicket(
                kind=TicketKind(t["kind"]),
                code=code,
                offering_id=t["offering_id"],
                expiry=t["expiry"],
                used=t["used"],
                email=t["email"],
            )
        for rid, r in state["resources"].items():
            kind = ResourceKind(r["kind"])
            engine.resources[rid] = Resource(
                id=rid,
                offering_id=r["offering_id"],
                author_id=r["author_id"],
                kind=kind,
                body=r["body"],
                tags=list(r["tags"]),
                status=Status(r["status"]),
                content=_content_from_dict(kind, r["content"]),
                created_at=r["created_at"],
                edited_at=r["edited_at"],
                rating_n=r["rating_n"],
                elo_attempts=r["elo_attempts"],
                endorsed=r["endorsed"],
            )
        for oid, per in state["learners"].items():
            engine.learners[oid] = {}
            for uid, ls in per.items():
                engine.learners[oid][uid] = elo.LearnerState(
                    ratings={
                        t: elo.TopicRating(rating_n=v[0], attempts=v[1])
                        for t, v in ls["ratings"].items()
                    },
                    snapshots={d: {t: n for t, n in s.items()} for d, s in ls["snapshots"].items()},
                )
        for a in state["attempts"]:
            delta = None
            if a["delta"] is not None:
                delta = elo.RatingDelta(
                    per_topic_n=dict(a["delta"]["per_topic_n"]),
                    resource_delta_n=a["delta"]["resource_delta_n"],
                    applied=a["delta"]["applied"],
                )
            attempt = AttemptRecord(
                id=a["id"],
                student_id=a["student_id"],
                resource_id=a["resource_id"],
                chosen_index=a["chosen_index"],
                correct=a["correct"],
                timestamp=a["timestamp"],
                delta=delta,
            )
            engine.attempts[attempt.id] = attempt
            offering_id = engine.resources[attempt.resource_id].offering_id
            engine._attempts_by_resource.setdefault(attempt.resource_id, []).append(attempt.id)
            engine._attempts_by_student.setdefault(
                (offering_id, attempt.student_id), []
            ).append(attempt.id)
        for rid, per in state["quality"].items():
            engine.quality[rid] = {
                uid: QualityRating(
                    rater_id=uid, resource_id=rid, stars=q["stars"], timestamp=q["timestamp"]
                )
                for uid, q in per.items()
            }
        for c in state["comments"]:
            engine.comments.append(
                Comment(
                    id=c["id"],
                    author_id=c["author_id"],
                    resource_id=c["resource_id"],
                    text=c["text"],
                    timestamp=c["timestamp"],
                )
            )
        for rid, per in state["flags"].items():
            engine.flags[rid] = {
                uid: Flag(
                    flagger_id=uid, resource_id=rid, reason=f["reason"], timestamp=f["timestamp"]
                )
                for uid, f in per.items()
            }
        for rid, reviews in state["reviews"].items():
            engine.reviews[rid] = [
                PeerReview(
                    reviewer_id=r["reviewer_id"],
                    resource_id=rid,
                    approve=r["approve"],
                    rationale=r["rationale"],
                    timestamp=r["timestamp"],
                )
                for r in reviews
            ]
        for oid, users in state["badges"].items():
            engine.badges[oid] = {
                uid: {bid: Badge.from_json(b) for bid, b in per.items()}
                for uid, per in users.items()
            }
        for oid, rounds in state["rounds"].items():
            engine.rounds[oid] = [RoundConfig(**r) for r in rounds]
        for oid, per in state["engagement"].items():
            engine.engagement[oid] = {uid: list(c) for uid, c in per.items()}
        engine.outbox = [dict(m) for m in state["outbox"]]
        return engine


def _order_tags(offering: Offering, tags: Iterable[str]) -> list[str]:
    """Deduplicate and order tags by topic ordinal for stable payloads."""
    ordinal = {t.id: t.ordinal for t in offering.topics}
    return sorted(set(tags), key=lambda t: (ordinal.get(t, 1_000_000), t))


def _config_dict(cfg: OfferingConfig) -> dict:
    return {
        "initial_rating": cfg.initial_rating,
        "k_numerator": cfg.k_numerator,
        "k_decay": cfg.k_decay,
        "yellow_threshold": cfg.yellow_threshold,
        "blue_threshold": cfg.blue_threshold,
        "competence_threshold": cfg.competence_threshold,
        "review_quorum": cfg.review_quorum,
        "target_success": cfg.target_success,
        "fit_weights": list(cfg.fit_weights),
    }


def _config_from_dict(data: dict) -> OfferingConfig:
    return OfferingConfig(
        initial_rating=data["initial_rating"],
        k_numerator=data["k_numerator"],
        k_decay=data["k_decay"],
        yellow_threshold=data["yellow_threshold"],
        blue_threshold=data["blue_threshold"],
        competence_threshold=data["competence_threshold"],
        review_quorum=data["review_quorum"],
        target_success=data["target_success"],
        fit_weights=tuple(data["fit_weights"]),
    )


def _content_dict(content) -> Optional[dict]:
    if content is None:
        return None
    if isinstance(content, McqContent):
        return {
            "choices": list(content.choices),
            "correct_index": content.correct_index,
            "explanation": content.explanation,
        }
    if isinstance(content, WorkedExampleContent):
        return {"steps": list(content.steps), "final_solution": content.final_solution}
    if isinstance(content, dict):
        return content
    raise ValidationError(f"unsupported content type {type(content).__name__}")


def _content_from_dict(kind: ResourceKind, data: Optional[dict]):
    if data is None:
        return None
    if kind == ResourceKind.MCQ:
        return McqContent(
            choices=list(data["choices"]),
            correct_index=data["correct_index"],
            explanation=data["explanation"],
        )
    if kind == ResourceKind.WORKED_EXAMPLE:
        return WorkedExampleContent(
            steps=list(data["steps"]), final_solution=data["final_solution"]
        )
    return None


def content_from_request(kind: ResourceKind | str, data: Optional[dict]):
    """Parse client-supplied kind content (API and import helpers)."""
    return _content_from_dict(ResourceKind(kind), data)


def content_to_dict(content) -> Optional[dict]:
    return _content_dict(content)
