"""Course report CSVs and audit exports.

Research exports (``research_export=True``) are filtered to users who
currently consent AND have never changed their answer; such an export never
contains any other user's id in any column.  Operational exports (the
default) include everyone.

Report headers are part of the external contract:

    students        student_id,display_name,role,research_consent
    resources       resource_id,author_id,kind,status,topics,difficulty_rating,attempts,mean_stars,rating_count,created_at
    comments        comment_id,resource_id,author_id,text,timestamp
    knowledge_units topic_id,ordinal,name,resources,attempts,cohort_mean
    attempts        attempt_id,student_id,resource_id,chosen_index,correct,timestamp
    knowledge_state student_id,topic,rating,band,cohort_mean
    grades          student_id,round1..roundR,overall_rating,rating_mark,ripple_total
"""

from __future__ import annotations

import csv
import io
import json

from . import elo
from .errors import ValidationError

REPORT_NAMES = ("students", "resources", "comments", "knowledge_units", "attempts")


def _writer():
    buf = io.StringIO()
    return buf, csv.writer(buf, lineterminator="\n")


def _eligible(engine, offering_id: str, research_export: bool) -> set[str]:
    engine._offering(offering_id)  # not-found guard
    members = set(engine.enrolments.get(offering_id, {}))
    if not research_export:
        return members
    return {uid for uid in members if engine.users[uid].research_eligible()}


def export_report(
    engine, offering_id: str, report: str, research_export: bool = False
) -> str:
    if report not in REPORT_NAMES:
        raise ValidationError(
            f"unknown report {report!r}", known=sorted(REPORT_NAMES)
        )
    builder = globals()[f"_report_{report}"]
    return builder(engine, offering_id, _eligible(engine, offering_id, research_export))


def _report_students(engine, offering_id, eligible) -> str:
    buf, w = _writer()
    w.writerow(["student_id", "display_name", "role", "research_consent"])
    for uid, enr in engine.enrolments.get(offering_id, {}).items():
        if uid not in eligible:
            continue
        user = engine.users[uid]
        w.writerow([uid, user.display_name, enr.role.value, user.research_consent])
    return buf.getvalue()


def _report_resources(engine, offering_id, eligible) -> str:
    buf, w = _writer()
    w.writerow(
        [
            "resource_id",
            "author_id",
            "kind",
            "status",
            "topics",
            "difficulty_rating",
            "attempts",
            "mean_stars",
            "rating_count",
            "created_at",
        ]
    )
    offering = engine.offerings[offering_id]
    names = {t.id: t.name for t in offering.topics}
    for r in engine.resources.values():
        if r.offering_id != offering_id or r.author_id not in eligible:
            continue
        summary = engine.resource_quality(r.id)
        w.writerow(
            [
                r.id,
                r.author_id,
                r.kind.value,
                r.status.value,
                ";".join(names.get(t, t) for t in r.tags),
                round(elo.from_fixed(r.rating_n), 6),
                r.elo_attempts,
                "" if summary["mean_stars"] is None else round(summary["mean_stars"], 4),
                summary["count"],
                r.created_at,
            ]
        )
    return buf.getvalue()


def _report_comments(engine, offering_id, eligible) -> str:
    buf, w = _writer()
    w.writerow(["comment_id", "resource_id", "author_id", "text", "timestamp"])
    for c in engine.comments:
        resource = engine.resources.get(c.resource_id)
        if resource is None or resource.offering_id != offering_id:
            continue
        if c.author_id not in eligible:
            continue
        w.writerow([c.id, c.resource_id, c.author_id, c.text, c.timestamp])
    return buf.getvalue()


def _report_knowledge_units(engine, offering_id, eligible) -> str:
    buf, w = _writer()
    w.writerow(["topic_id", "ordinal", "name", "resources", "attempts", "cohort_mean"])
    offering = engine.offerings[offering_id]
    for t in offering.topics:
        tagged = [
            r
            for r in engine.resources.values()
            if r.offering_id == offering_id and t.id in r.tags
        ]
        attempts = sum(len(engine.attempts_for_resource(r.id)) for r in tagged)
        w.writerow(
            [
                t.id,
                t.ordinal,
                t.name,
                len(tagged),
                attempts,
                round(engine.cohort_mean(offering_id, t.id), 6),
            ]
        )
    return buf.getvalue()


def _report_attempts(engine, offering_id, eligible) -> str:
    buf, w = _writer()
    w.writerow(["attempt_id", "student_id", "resource_id", "chosen_index", "correct", "timestamp"])
    for a in engine.attempts.values():
        resource = engine.resources.get(a.resource_id)
        if resource is None or resource.offering_id != offering_id:
            continue
        if a.student_id not in eligible:
            continue
        w.writerow(
            [
                a.id,
                a.student_id,
                a.resource_id,
                "" if a.chosen_index is None else a.chosen_index,
                "" if a.correct is None else a.correct,
                a.timestamp,
            ]
        )
    return buf.getvalue()


def export_knowledge_state(engine, offering_id: str, research_export: bool = False) -> str:
    """Per-student per-topic open-learner-model rows."""
    eligible = _eligible(engine, offering_id, research_export)
    buf, w = _writer()
    w.writerow(["student_id", "topic", "rating", "band", "cohort_mean"])
    for uid in engine.students_of(offering_id):
        if uid not in eligible:
            continue
        state = engine.knowledge_state(offering_id, uid, mode="current")
        for row in state["topics"]:
            w.writerow(
                [
                    uid,
                    row["topic"],
                    round(row["rating"], 6),
                    row["band"],
                    round(row["cohort_mean"], 6),
                ]
            )
    return buf.getvalue()


def export_delta_ledger(engine, offering_id: str, research_export: bool = False) -> str:
    """Newline-delimited JSON audit trail of every scored attempt's deltas."""
    eligible = _eligible(engine, offering_id, research_export)
    lines = []
    for a in engine.attempts.values():
        resource = engine.resources.get(a.resource_id)
        if resource is None or resource.offering_id != offering_id:
            continue
        if a.student_id not in eligible or a.delta is None:
            continue
        lines.append(
            json.dumps(
                {
                    "attempt_id": a.id,
                    "student_id": a.student_id,
                    "resource_id": a.resource_id,
                    "timestamp": a.timestamp,
                    "applied": a.delta.applied,
                    "per_topic": {
                        t: elo.from_fixed(d) for t, d in a.delta.per_topic_n.items()
                    },
                    "resource_delta": elo.from_fixed(a.delta.resource_delta_n),
                },
                separators=(",", ":"),
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")


def export_grades(engine, offering_id: str, now=None, force: bool = True) -> str:
    """Grade export: per-round marks, overall rating, rating mark, total."""
    engine._offering(offering_id)
    rounds = engine.rounds.get(offering_id, [])
    buf, w = _writer()
    w.writerow(
        ["student_id"]
        + [f"round{r.round_index}" for r in rounds]
        + ["overall_rating", "rating_mark", "ripple_total"]
    )
    for uid in engine.students_of(offering_id):
        marks = engine.ripple_marks(offering_id, uid, now=now, force=force)
        w.writerow(
            [uid]
            + [marks["rounds"][r.round_index] for r in rounds]
            + [
                round(marks["overall_rating"], 6),
                round(marks["rating_mark"], 6),
                round(marks["total"], 6),
            ]
        )
    return buf.getvalue()


INTERCHANGE_SCHEMA = 1


def export_resources_jsonl(engine, offering_id: str) -> str:
    """Portable resource interchange: one JSON record per line.

    Topics travel by name so a file can be loaded into another instance;
    each record carries its schema version.
    """
    offering = engine._offering(offering_id)
    names = {t.id: t.name for t in offering.topics}
    lines = []
    for r in engine.resources.values():
        if r.offering_id != offering_id:
            continue
        from .engine import content_to_dict

        lines.append(
            json.dumps(
                {
                    "schema_version": INTERCHANGE_SCHEMA,
                    "resource_id": r.id,
                    "kind": r.kind.value,
                    "body": r.body,
                    "topics": [names.get(t, t) for t in r.tags],
                    "status": r.status.value,
                    "content": content_to_dict(r.content),
                    "created_at": r.created_at,
                },
                separators=(",", ":"),
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")


def parse_resources_jsonl(text: str) -> list[dict]:
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(
                f"interchange line {lineno} is not JSON: {exc}", line=lineno
            ) from None
        if record.get("schema_version") != INTERCHANGE_SCHEMA:
            raise ValidationError(
                "unsupported interchange schema version",
                line=lineno,
                found=record.get("schema_version"),
                supported=INTERCHANGE_SCHEMA,
            )
        records.append(record)
    return records


def export_badges(engine, offering_id: str) -> str:
    """Badge feed as newline-delimited JSON event records."""
    engine._offering(offering_id)
    lines = []
    for uid, held in engine.badges.get(offering_id, {}).items():
        for badge in held.values():
            record = {"student_id": uid}
            record.update(badge.to_json())
            lines.append(json.dumps(record, separators=(",", ":")))
    return "\n".join(lines) + ("\n" if lines else "")
