"""HTTP/JSON surface over the engine.

Sessions are a bearer-token stub kept in process memory (domain state stays
in the event store; tokens do not survive a restart).  All errors use the
``{code, message, details}`` envelope.  Mutations serialize through one lock,
which trivially satisfies single-writer-per-offering; handlers are sync so
the framework keeps request handling concurrent in its thread pool.
"""

from __future__ import annotations

import secrets
import threading
from dataclasses import asdict
from typing import Optional

from fastapi import Depends, FastAPI, Header, Query, Request, Response
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from . import recommend, reports
from .config import ServiceConfig
from .content import ResourceKind
from .domain import LaunchRecord, TicketKind, topics_from_csv, topics_to_csv
from .engine import Engine, content_from_request
from .errors import (
    AuthenticationError,
    AuthorizationError,
    NotFoundError,
    PeerLearnError,
    ValidationError,
)
from .store import EventStore

STATUS_BY_CODE = {
    "validation": 400,
    "unknown_role": 400,
    "config": 400,
    "unauthenticated": 401,
    "forbidden": 403,
    "not_eligible": 403,
    "not_found": 404,
    "lifecycle": 409,
    "already_used": 409,
    "invalid_code": 409,
    "conflict": 409,
    "store": 500,
    "error": 500,
}


class RegisterBody(BaseModel):
    display_name: str


class LoginBody(BaseModel):
    user_id: str


class ConsentBody(BaseModel):
    research_consent: bool


class OfferingBody(BaseModel):
    university_name: str = ""
    course_code: str = ""
    course_name: str = ""
    semester: str = ""
    teaching_start: str = ""
    topics: list[str]
    moderation_policy: str = "none"
    flag_threshold: int = 3
    created_from_lms: bool = False


class TopicsBody(BaseModel):
    topics: list[dict]


class PolicyBody(BaseModel):
    moderation_policy: str
    flag_threshold: Optional[int] = None


class TicketBody(BaseModel):
    kind: str
    email: Optional[str] = None
    code: Optional[str] = None
    expiry: Optional[str] = None


class EnrolBody(BaseModel):
    code: str


class MemberBody(BaseModel):
    user_id: str
    role: str = "student"


class LaunchBody(BaseModel):
    lms_role: str
    user_id: str


class ImportBody(BaseModel):
    query: dict = {}
    topic_map: dict[str, str] = {}


class ResourceBody(BaseModel):
    kind: str
    body: str
    tags: list[str]
    content: Optional[dict] = None
    draft: bool = False


class EditBody(BaseModel):
    body: Optional[str] = None
    tags: Optional[list[str]] = None
    content: Optional[dict] = None


class ModerateBody(BaseModel):
    decision: str
    note: Optional[str] = None


class ReviewBody(BaseModel):
    verdict: str  # approve | reject
    rationale: str


class AttemptBody(BaseModel):
    chosen_index: Optional[int] = None


class StarsBody(BaseModel):
    stars: int


class CommentBody(BaseModel):
    text: str


class FlagBody(BaseModel):
    reason: str


class RoundsBody(BaseModel):
    rounds: list[dict]


def create_app(config: Optional[ServiceConfig] = None, engine: Optional[Engine] = None) -> FastAPI:
    """Build the service; pass ``engine`` to run purely in memory (tests)."""
    config = config or ServiceConfig()
    if engine is None:
        store = EventStore(
            config.storage_path,
            durable=config.durable,
            snapshot_every=config.snapshot_every,
        )
        engine = store.load(defaults=config.defaults)

    app = FastAPI(title="peerlearn", version="0.1.0")
    app.state.engine = engine
    app.state.config = config
    app.state.tokens: dict[str, str] = {}
    lock = threading.RLock()

    @app.exception_handler(PeerLearnError)
    async def handle_domain_error(request: Request, exc: PeerLearnError):
        status = STATUS_BY_CODE.get(exc.code, 500)
        return JSONResponse(status_code=status, content=exc.envelope())

    def current_user(authorization: Optional[str] = Header(default=None)) -> str:
        if not authorization or not authorization.startswith("Bearer "):
            raise AuthenticationError("missing bearer token")
        token = authorization.removeprefix("Bearer ")
        user_id = app.state.tokens.get(token)
        if user_id is None:
            raise AuthenticationError("unknown or expired token")
        return user_id

    def _card(c) -> dict:
        return asdict(c)

    # -- auth and consent ------------------------------------------------

    @app.post("/auth/register")
    def register(body: RegisterBody):
        with lock:
            user = engine.register_user(body.display_name)
            token = secrets.token_urlsafe(16)
            app.state.tokens[token] = user.id
        return {"user_id": user.id, "display_name": user.display_name, "token": token}

    @app.post("/auth/login")
    def login(body: LoginBody):
        with lock:
            user = engine._user(body.user_id)
            token = secrets.token_urlsafe(16)
            app.state.tokens[token] = user.id
        return {"user_id": user.id, "token": token}

    @app.get("/me")
    def me(user_id: str = Depends(current_user)):
        user = engine._user(user_id)
        return {
            "user_id": user.id,
            "display_name": user.display_name,
            "research_consent": user.research_consent,
            "consent_changed": user.consent_changed,
        }

    @app.post("/consent")
    def set_consent(body: ConsentBody, user_id: str = Depends(current_user)):
        with lock:
            user = engine.set_consent(user_id, body.research_consent)
        return {
            "research_consent": user.research_consent,
            "consent_changed": user.consent_changed,
        }

    # -- offerings, topics, enrolment -------------------------------------

    def _offering_view(offering) -> dict:
        return {
            "id": offering.id,
            "university_name": offering.university_name,
            "course_code": offering.course_code,
            "course_name": offering.course_name,
            "semester": offering.semester,
            "teaching_start": offering.teaching_start,
            "moderation_policy": offering.moderation_policy.value,
            "flag_threshold": offering.flag_threshold,
            "topics": [
                {"id": t.id, "name": t.name, "ordinal": t.ordinal}
                for t in offering.topics
            ],
        }

    @app.post("/offerings")
    def create_offering(body: OfferingBody, user_id: str = Depends(current_user)):
        meta = body.model_dump(exclude={"topics", "moderation_policy", "flag_threshold", "created_from_lms"})
        with lock:
            offering = engine.create_offering(
                user_id,
                meta,
                body.topics,
                moderation_policy=body.moderation_policy,
                flag_threshold=body.flag_threshold,
                created_from_lms=body.created_from_lms,
            )
        return _offering_view(offering)

    @app.get("/offerings")
    def list_offerings(user_id: str = Depends(current_user)):
        return [
            _offering_view(o)
            for o in engine.offerings.values()
            if engine.role_of(o.id, user_id) is not None
        ]

    @app.get("/offerings/{offering_id}")
    def get_offering(offering_id: str, user_id: str = Depends(current_user)):
        engine._require_enrolled(offering_id, user_id)
        return _offering_view(engine._offering(offering_id))

    @app.put("/offerings/{offering_id}/topics")
    def put_topics(offering_id: str, body: TopicsBody, user_id: str = Depends(current_user)):
        with lock:
            offering = engine.update_topics(user_id, offering_id, body.topics)
        return _offering_view(offering)

    @app.get("/offerings/{offering_id}/topics.csv")
    def topics_csv(offering_id: str, user_id: str = Depends(current_user)):
        engine._require_enrolled(offering_id, user_id)
        return PlainTextResponse(
            topics_to_csv(engine._offering(offering_id).topics), media_type="text/csv"
        )

    @app.put("/offerings/{offering_id}/topics.csv")
    async def put_topics_csv(
        offering_id: str, request: Request, user_id: str = Depends(current_user)
    ):
        names = topics_from_csv((await request.body()).decode("utf-8"))
        offering = engine._offering(offering_id)
        by_name = {t.name: t.id for t in offering.topics}
        with lock:
            engine.update_topics(
                user_id,
                offering_id,
                [{"id": by_name.get(n), "name": n} for n in names],
            )
        return _offering_view(offering)

    @app.post("/offerings/{offering_id}/policy")
    def set_policy(offering_id: str, body: PolicyBody, user_id: str = Depends(current_user)):
        with lock:
            offering = engine.set_moderation_policy(
                user_id, offering_id, body.moderation_policy, body.flag_threshold
            )
        return _offering_view(offering)

    @app.post("/offerings/{offering_id}/tickets")
    def issue_ticket(offering_id: str, body: TicketBody, user_id: str = Depends(current_user)):
        with lock:
            ticket = engine.issue_ticket(
                user_id,
                offering_id,
                TicketKind(body.kind),
                email=body.email,
                code=body.code,
                expiry=body.expiry,
            )
        return {
            "kind": ticket.kind.value,
            "code": ticket.code,
            "offering_id": ticket.offering_id,
            "expiry": ticket.expiry,
        }

    @app.post("/offerings/{offering_id}/enrol")
    def enrol(offering_id: str, body: EnrolBody, user_id: str = Depends(current_user)):
        with lock:
            enr = engine.enrol(offering_id, user_id, body.code)
        return {"offering_id": offering_id, "role": enr.role.value}

    @app.post("/offerings/{offering_id}/members")
    def add_member(offering_id: str, body: MemberBody, user_id: str = Depends(current_user)):
        with lock:
            enr = engine.add_member(user_id, offering_id, body.user_id, body.role)
        return {"offering_id": offering_id, "user_id": body.user_id, "role": enr.role.value}

    @app.post("/offerings/{offering_id}/lms-launch")
    def lms_launch(offering_id: str, body: LaunchBody, user_id: str = Depends(current_user)):
        # the caller is the launching LMS integration; the launch names the user
        with lock:
            enr = engine.enrol_from_launch(
                LaunchRecord(body.lms_role, offering_id, body.user_id)
            )
        return {"offering_id": offering_id, "user_id": body.user_id, "role": enr.role.value}

    @app.get("/offerings/{offering_id}/outbox")
    def outbox(offering_id: str, user_id: str = Depends(current_user)):
        engine._require_instructor(offering_id, user_id)
        return [m for m in engine.outbox if m.get("offering_id") == offering_id or m.get("to")]

    @app.post("/offerings/{offering_id}/import")
    def import_resources(offering_id: str, body: ImportBody, user_id: str = Depends(current_user)):
        with lock:
            copies = engine.import_resources(
                user_id, offering_id, body.query, body.topic_map
            )
        return {"imported": [r.id for r in copies]}

    @app.get("/offerings/{offering_id}/resources.jsonl")
    def export_resources_file(offering_id: str, user_id: str = Depends(current_user)):
        engine._require_instructor(offering_id, user_id)
        return PlainTextResponse(
            reports.export_resources_jsonl(engine, offering_id),
            media_type="application/x-ndjson",
        )

    @app.post("/offerings/{offering_id}/resources.jsonl")
    async def import_resources_file(
        offering_id: str, request: Request, user_id: str = Depends(current_user)
    ):
        records = reports.parse_resources_jsonl((await request.body()).decode("utf-8"))
        with lock:
            copies = engine.load_resource_records(user_id, offering_id, records)
        return {"imported": [r.id for r in copies]}

    # -- resources ---------------------------------------------------------

    def _resource_view(resource, caller: str, full: bool) -> dict:
        view = {
            "id": resource.id,
            "offering_id": resource.offering_id,
            "author_id": resource.author_id,
            "kind": resource.kind.value,
            "body": resource.body,
            "tags": list(resource.tags),
            "status": resource.status.value,
            "created_at": resource.created_at,
            "edited_at": resource.edited_at,
            "endorsed": resource.endorsed,
            "quality": engine.resource_quality(resource.id),
            "comments": [
                {"author_id": c.author_id, "text": c.text, "timestamp": c.timestamp}
                for c in engine.comments
                if c.resource_id == resource.id
            ],
        }
        if resource.kind == ResourceKind.MCQ:
            view["choices"] = list(resource.content.choices)
            if full:
                view["correct_index"] = resource.content.correct_index
                view["explanation"] = resource.content.explanation
                view["answer_distribution"] = engine.answer_distribution(resource.id)
        elif resource.kind == ResourceKind.WORKED_EXAMPLE:
            view["steps"] = list(resource.content.steps)
            view["final_solution"] = resource.content.final_solution
        return view

    def _may_see_solution(resource, caller: str) -> bool:
        if caller == resource.author_id:
            return True
        from .domain import Role

        if engine.role_of(resource.offering_id, caller) == Role.INSTRUCTOR:
            return True
        return any(
            a.student_id == caller for a in engine.attempts_for_resource(resource.id)
        )

    @app.post("/offerings/{offering_id}/resources")
    def author_resource(offering_id: str, body: ResourceBody, user_id: str = Depends(current_user)):
        content = content_from_request(body.kind, body.content)
        with lock:
            resource = engine.author_resource(
                user_id,
                offering_id,
                body.kind,
                body.body,
                body.tags,
                content,
                as_draft=body.draft,
            )
        return _resource_view(resource, user_id, full=True)

    @app.get("/offerings/{offering_id}/resources")
    def search_resources(
        offering_id: str,
        user_id: str = Depends(current_user),
        kinds: Optional[str] = None,
        topics: Optional[str] = None,
        status_filter: Optional[str] = None,
        keywords: str = "",
        sort_key: str = "recommended",
        limit: Optional[int] = Query(default=None, ge=1),
    ):
        query = recommend.SearchQuery(
            kinds={ResourceKind(k) for k in kinds.split(",")} if kinds else set(),
            topics=set(topics.split(",")) if topics else set(),
            status_filter=(
                {recommend.StatusFilter(s) for s in status_filter.split(",")}
                if status_filter
                else set()
            ),
            keywords=keywords,
            sort_key=recommend.SortKey(sort_key),
            limit=limit,
        )
        cards = recommend.filter_resources(engine, user_id, offering_id, query)
        return [_card(c) for c in cards]

    @app.get("/offerings/{offering_id}/recommendations")
    def recommendations(
        offering_id: str,
        user_id: str = Depends(current_user),
        n: int = Query(default=10, ge=1),
    ):
        return [_card(c) for c in recommend.recommend(engine, user_id, offering_id, n)]

    @app.get("/resources/{resource_id}")
    def get_resource(resource_id: str, user_id: str = Depends(current_user)):
        resource = engine._resource(resource_id)
        engine._require_enrolled(resource.offering_id, user_id)
        if resource.status.value == "deleted" and resource.author_id != user_id:
            raise NotFoundError("resource not available")
        return _resource_view(resource, user_id, full=_may_see_solution(resource, user_id))

    @app.patch("/resources/{resource_id}")
    def edit_resource(resource_id: str, body: EditBody, user_id: str = Depends(current_user)):
        resource = engine._resource(resource_id)
        content = (
            ...
            if body.content is None
            else content_from_request(resource.kind.value, body.content)
        )
        with lock:
            engine.edit_resource(
                user_id, resource_id, body=body.body, tags=body.tags, content=content
            )
        return _resource_view(resource, user_id, full=True)

    @app.post("/resources/{resource_id}/submit")
    def submit_resource(resource_id: str, user_id: str = Depends(current_user)):
        with lock:
            resource = engine.submit_resource(user_id, resource_id)
        return {"id": resource.id, "status": resource.status.value}

    @app.post("/resources/{resource_id}/moderate")
    def moderate(resource_id: str, body: ModerateBody, user_id: str = Depends(current_user)):
        with lock:
            resource = engine.moderate(user_id, resource_id, body.decision, body.note)
        return {"id": resource.id, "status": resource.status.value}

    @app.post("/resources/{resource_id}/reviews")
    def peer_review(resource_id: str, body: ReviewBody, user_id: str = Depends(current_user)):
        if body.verdict not in ("approve", "reject"):
            raise ValidationError("verdict must be approve or reject")
        with lock:
            tally = engine.peer_review(
                user_id, resource_id, body.verdict == "approve", body.rationale
            )
        return tally

    @app.post("/resources/{resource_id}/attempts")
    def attempt(resource_id: str, body: AttemptBody, user_id: str = Depends(current_user)):
        with lock:
            return engine.attempt_resource(user_id, resource_id, body.chosen_index)

    @app.post("/resources/{resource_id}/ratings")
    def rate(resource_id: str, body: StarsBody, user_id: str = Depends(current_user)):
        with lock:
            return engine.rate_resource(user_id, resource_id, body.stars)

    @app.post("/resources/{resource_id}/comments")
    def comment(resource_id: str, body: CommentBody, user_id: str = Depends(current_user)):
        with lock:
            record = engine.comment(user_id, resource_id, body.text)
        return {"id": record.id, "text": record.text, "timestamp": record.timestamp}

    @app.get("/resources/{resource_id}/comments")
    def comments(resource_id: str, user_id: str = Depends(current_user)):
        resource = engine._resource(resource_id)
        engine._require_enrolled(resource.offering_id, user_id)
        return [
            {"author_id": c.author_id, "text": c.text, "timestamp": c.timestamp}
            for c in engine.comments
            if c.resource_id == resource_id
        ]

    @app.post("/resources/{resource_id}/flags")
    def flag(resource_id: str, body: FlagBody, user_id: str = Depends(current_user)):
        with lock:
            return engine.flag_resource(user_id, resource_id, body.reason)

    @app.delete("/resources/{resource_id}")
    def delete(resource_id: str, user_id: str = Depends(current_user)):
        with lock:
            resource = engine.delete_resource(user_id, resource_id)
        return {"id": resource.id, "status": resource.status.value}

    @app.post("/resources/{resource_id}/endorse")
    def endorse(resource_id: str, user_id: str = Depends(current_user)):
        with lock:
            resource = engine.endorse_resource(user_id, resource_id)
        return {"id": resource.id, "endorsed": resource.endorsed}

    @app.get("/offerings/{offering_id}/moderation-queue")
    def moderation_queue(offering_id: str, user_id: str = Depends(current_user)):
        engine._require_instructor(offering_id, user_id)
        return [
            _resource_view(r, user_id, full=True)
            for r in engine.resources.values()
            if r.offering_id == offering_id and r.status.value == "pending_moderation"
        ]

    # -- learner model, profile, grading ----------------------------------

    @app.get("/offerings/{offering_id}/learner/state")
    def learner_state(
        offering_id: str,
        user_id: str = Depends(current_user),
        mode: str = "current",
        student: Optional[str] = None,
    ):
        target = _resolve_student(offering_id, user_id, student)
        return engine.knowledge_state(offering_id, target, mode=mode)

    def _resolve_student(offering_id: str, caller: str, student: Optional[str]) -> str:
        from .domain import Role

        if student is None or student == caller:
            return caller
        if engine.role_of(offering_id, caller) != Role.INSTRUCTOR:
            raise AuthorizationError("only instructors may view other students")
        return student

    @app.get("/offerings/{offering_id}/profile")
    def profile(
        offering_id: str,
        user_id: str = Depends(current_user),
        student: Optional[str] = None,
    ):
        target = _resolve_student(offering_id, user_id, student)
        vector = engine.engagement_vector(offering_id, target)
        badges = [
            b.to_json()
            for b in engine.badges.get(offering_id, {}).get(target, {}).values()
        ]
        return {"student_id": target, "engagement": vector, "badges": badges}

    @app.post("/offerings/{offering_id}/badges/evaluate")
    def evaluate_badges(
        offering_id: str,
        user_id: str = Depends(current_user),
        student: Optional[str] = None,
    ):
        target = _resolve_student(offering_id, user_id, student)
        with lock:
            new = engine.award_badges(offering_id, target)
        return {"awarded": [b.to_json() for b in new]}

    @app.post("/offerings/{offering_id}/rounds")
    def configure_rounds(offering_id: str, body: RoundsBody, user_id: str = Depends(current_user)):
        with lock:
            rounds = engine.configure_rounds(user_id, offering_id, body.rounds)
        return {"rounds": [r.to_json() for r in rounds]}

    @app.get("/offerings/{offering_id}/grades")
    def grades(
        offering_id: str,
        user_id: str = Depends(current_user),
        student: Optional[str] = None,
        exam: Optional[float] = None,
        other: Optional[float] = None,
        force: bool = True,
    ):
        from .grading import final_grade

        target = _resolve_student(offering_id, user_id, student)
        marks = engine.ripple_marks(offering_id, target, force=force)
        out = dict(marks)
        if exam is not None:
            out["final_grade"] = final_grade(
                exam, other or 0.0, marks["total"], max_ripple_marks=marks["max_total"]
            )
        return out

    @app.get("/offerings/{offering_id}/grades.csv")
    def grades_csv(offering_id: str, user_id: str = Depends(current_user)):
        engine._require_instructor(offering_id, user_id)
        return PlainTextResponse(
            reports.export_grades(engine, offering_id), media_type="text/csv"
        )

    # -- reports -----------------------------------------------------------

    @app.get("/offerings/{offering_id}/reports/{report}.csv")
    def report_csv(
        offering_id: str,
        report: str,
        user_id: str = Depends(current_user),
        research_export: bool = False,
    ):
        engine._require_instructor(offering_id, user_id)
        if report == "knowledge_state":
            text = reports.export_knowledge_state(engine, offering_id, research_export)
        else:
            text = reports.export_report(engine, offering_id, report, research_export)
        return PlainTextResponse(text, media_type="text/csv")

    @app.get("/offerings/{offering_id}/reports/deltas.jsonl")
    def delta_ledger(
        offering_id: str,
        user_id: str = Depends(current_user),
        research_export: bool = False,
    ):
        engine._require_instructor(offering_id, user_id)
        return PlainTextResponse(
            reports.export_delta_ledger(engine, offering_id, research_export),
            media_type="application/x-ndjson",
        )

    @app.get("/offerings/{offering_id}/reports/badges.jsonl")
    def badge_feed(offering_id: str, user_id: str = Depends(current_user)):
        engine._require_instructor(offering_id, user_id)
        return PlainTextResponse(
            reports.export_badges(engine, offering_id),
            media_type="application/x-ndjson",
        )

    # -- system ------------------------------------------------------------

    @app.get("/system/health")
    def health():
        return {"status": "ok", "events": len(engine.events)}

    @app.get("/system/state-hash")
    def state_hash():
        return {"seq": len(engine.events), "sha256": engine.state_hash()}

    @app.post("/system/snapshot")
    def snapshot(response: Response):
        if engine.store is None:
            raise ValidationError("no store attached; snapshots need persistence")
        with lock:
            engine.store.write_snapshot(engine)
        return {"seq": len(engine.events)}

    return app


def serve(config: ServiceConfig) -> None:
    """Run the service; raises a clear startup error on bind/store problems."""
    import errno

    import uvicorn

    app = create_app(config)
    try:
        uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    except OSError as exc:  # pragma: no cover - needs a busy port
        if exc.errno in (errno.EADDRINUSE, errno.EACCES):
            raise SystemExit(
                f"cannot bind {config.host}:{config.port}: {exc.strerror}"
            ) from None
        raise
