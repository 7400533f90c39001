"""Knowledge-state queries: current view, cohort means, daily series."""

import pytest

from peerlearn.errors import AuthorizationError, ValidationError

from conftest import T0, iso, mcq


class TestCurrentState:
    def test_fresh_student_all_initial_yellow(self, course):
        engine, _, offering, students = course
        state = engine.knowledge_state(offering.id, students[0].id, mode="current")
        assert len(state["topics"]) == 3
        for row in state["topics"]:
            assert row["rating"] == 1000.0
            assert row["band"] == "yellow"
            assert row["cohort_mean"] == 1000.0

    def test_state_after_scored_attempt(self, course):
        engine, _, offering, students = course
        topic = offering.topics[0].id
        resource = engine.author_resource(
            students[0].id, offering.id, "mcq", "q", [topic], mcq(), at=T0
        )
        engine.attempt_resource(students[1].id, resource.id, 0, at=T0)
        state = engine.knowledge_state(offering.id, students[1].id, mode="current")
        row = next(t for t in state["topics"] if t["topic_id"] == topic)
        assert row["rating"] == pytest.approx(1020.0)
        assert row["band"] == "yellow"
        # cohort mean over the three students: (1020 + 1000 + 1000) / 3
        assert row["cohort_mean"] == pytest.approx((1020.0 + 1000.0 + 1000.0) / 3)

    def test_unenrolled_student_rejected(self, course):
        engine, _, offering, _ = course
        outsider = engine.register_user("Out", at=T0)
        with pytest.raises(AuthorizationError):
            engine.knowledge_state(offering.id, outsider.id, mode="current")

    def test_unknown_mode_rejected(self, course):
        engine, _, offering, students = course
        with pytest.raises(ValidationError):
            engine.knowledge_state(offering.id, students[0].id, mode="weekly")


class TestOverTime:
    def test_three_active_days_give_four_snapshots(self, course):
        engine, _, offering, students = course
        topic = offering.topics[0].id
        resources = [
            engine.author_resource(
                students[0].id, offering.id, "mcq", f"q{i}", [topic], mcq(), at=T0
            )
            for i in range(4)
        ]
        solver = students[1]
        engine.attempt_resource(solver.id, resources[0].id, 0, at=iso(3))
        engine.attempt_resource(solver.id, resources[1].id, 0, at=iso(3, 15))  # same day
        engine.attempt_resource(solver.id, resources[2].id, 1, at=iso(5))
        engine.attempt_resource(solver.id, resources[3].id, 0, at=iso(8))
        state = engine.knowledge_state(offering.id, solver.id, mode="overtime")
        assert len(state["series"]) == 4  # initial + 3 active days
        dates = [p["date"] for p in state["series"]]
        assert dates == ["2026-03-02", "2026-03-03", "2026-03-05", "2026-03-08"]

    def test_series_covers_all_offering_topics(self, course):
        engine, _, offering, students = course
        topic = offering.topics[0].id
        resource = engine.author_resource(
            students[0].id, offering.id, "mcq", "q", [topic], mcq(), at=T0
        )
        engine.attempt_resource(students[1].id, resource.id, 0, at=iso(3))
        state = engine.knowledge_state(offering.id, students[1].id, mode="overtime")
        last = state["series"][-1]["ratings"]
        assert set(last) == {t.id for t in offering.topics}
        # untouched topics stay at the initial rating in every snapshot
        untouched = offering.topics[1].id
        assert all(p["ratings"][untouched] == 1000.0 for p in state["series"])
