"""Shared fixtures: a small offering with users, plus acceptance reporting."""

import pytest

from peerlearn.content import McqContent
from peerlearn.engine import Engine

T0 = "2026-03-02T09:00:00+00:00"


def iso(day: int, hour: int = 9, minute: int = 0) -> str:
    return f"2026-03-{day:02d}T{hour:02d}:{minute:02d}:00+00:00"


META = {
    "university_name": "UQ",
    "course_code": "INFS1200",
    "course_name": "Relational Databases",
    "semester": "S1 2026",
    "teaching_start": "2026-03-02",
}


def make_engine(policy="none", topics=("Relational Models", "SQL", "Security")):
    engine = Engine()
    instructor = engine.register_user("Ida Instructor", at=T0)
    offering = engine.create_offering(
        instructor.id, META, list(topics), at=T0, moderation_policy=policy
    )
    return engine, instructor, offering


def add_students(engine, offering, names, at=T0):
    instructor = next(iter(engine.enrolments[offering.id]))
    students = []
    for name in names:
        user = engine.register_user(name, at=at)
        engine.add_member(instructor, offering.id, user.id, at=at)
        students.append(user)
    return students


def mcq(choices=4, correct=0, explanation="because"):
    return McqContent(
        choices=[f"choice {i}" for i in range(choices)],
        correct_index=correct,
        explanation=explanation,
    )


@pytest.fixture
def course():
    """Engine with one no-moderation offering, an instructor, three students."""
    engine, instructor, offering = make_engine()
    students = add_students(engine, offering, ["Stu A", "Stu B", "Stu C"])
    return engine, instructor, offering, students


# ---------------------------------------------------------------------------
# acceptance criterion reporting: one pass/fail line per criterion at the end
# ---------------------------------------------------------------------------

ACCEPTANCE_RESULTS: dict[str, bool] = {}


def record_criterion(name: str, passed: bool) -> None:
    ACCEPTANCE_RESULTS[name] = passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed in ACCEPTANCE_RESULTS.items():
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}")
