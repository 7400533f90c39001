"""Content lifecycle: authoring, moderation, attempts, ratings, flags, deletion."""

import pytest

from peerlearn import elo
from peerlearn.content import McqContent, Status, WorkedExampleContent
from peerlearn.engine import Engine
from peerlearn.errors import (
    AuthorizationError,
    ConflictError,
    EligibilityError,
    LifecycleError,
    ValidationError,
)

from conftest import T0, add_students, iso, make_engine, mcq


class TestAuthoring:
    def test_policy_none_publishes_immediately(self, course):
        engine, _, offering, students = course
        r = engine.author_resource(
            students[0].id, offering.id, "mcq", "body", [offering.topics[0].id], mcq(), at=T0
        )
        assert r.status == Status.PUBLISHED

    def test_staff_policy_queues_for_moderation(self):
        engine, instructor, offering = make_engine(policy="staff")
        (student,) = add_students(engine, offering, ["S"])
        r = engine.author_resource(
            student.id, offering.id, "mcq", "body", [offering.topics[0].id], mcq(), at=T0
        )
        assert r.status == Status.PENDING_MODERATION

    def test_correct_index_out_of_bounds_rejected(self, course):
        engine, _, offering, students = course
        bad = McqContent(choices=["a", "b", "c", "d"], correct_index=7, explanation="e")
        with pytest.raises(ValidationError):
            engine.author_resource(
                students[0].id, offering.id, "mcq", "body", [offering.topics[0].id], bad, at=T0
            )

    def test_empty_tags_rejected(self, course):
        engine, _, offering, students = course
        with pytest.raises(ValidationError):
            engine.author_resource(students[0].id, offering.id, "mcq", "body", [], mcq(), at=T0)

    def test_worked_example_needs_steps(self, course):
        engine, _, offering, students = course
        bad = WorkedExampleContent(steps=[], final_solution="x = 2")
        with pytest.raises(ValidationError):
            engine.author_resource(
                students[0].id,
                offering.id,
                "worked_example",
                "body",
                [offering.topics[0].id],
                bad,
                at=T0,
            )

    def test_draft_then_submit_routes_by_policy(self):
        engine, instructor, offering = make_engine(policy="staff")
        (student,) = add_students(engine, offering, ["S"])
        r = engine.author_resource(
            student.id,
            offering.id,
            "note",
            "draft note",
            [offering.topics[0].id],
            None,
            as_draft=True,
            at=T0,
        )
        assert r.status == Status.DRAFT
        engine.submit_resource(student.id, r.id, at=T0)
        assert r.status == Status.PENDING_MODERATION


class TestModeration:
    def _pending(self):
        engine, instructor, offering = make_engine(policy="staff")
        (student,) = add_students(engine, offering, ["S"])
        r = engine.author_resource(
            student.id, offering.id, "mcq", "body", [offering.topics[0].id], mcq(), at=T0
        )
        return engine, instructor, student, r

    def test_approve_publishes(self):
        engine, instructor, _, r = self._pending()
        engine.moderate(instructor.id, r.id, "approve", at=T0)
        assert r.status == Status.PUBLISHED

    def test_reject_returns_to_draft_and_notifies_author(self):
        engine, instructor, student, r = self._pending()
        engine.moderate(instructor.id, r.id, "reject", note="fix choice 2", at=T0)
        assert r.status == Status.DRAFT
        assert any(
            m["kind"] == "moderation_note"
            and m["to"] == student.id
            and m["note"] == "fix choice 2"
            for m in engine.outbox
        )

    def test_student_cannot_moderate(self):
        engine, _, student, r = self._pending()
        with pytest.raises(AuthorizationError):
            engine.moderate(student.id, r.id, "approve", at=T0)

    def test_moderating_published_resource_is_a_state_error(self):
        engine, instructor, _, r = self._pending()
        engine.moderate(instructor.id, r.id, "approve", at=T0)
        with pytest.raises(LifecycleError):
            engine.moderate(instructor.id, r.id, "approve", at=T0)

    def test_edit_of_published_resource_remoderates_under_staff_policy(self):
        engine, instructor, student, r = self._pending()
        engine.moderate(instructor.id, r.id, "approve", at=T0)
        engine.edit_resource(student.id, r.id, body="new body", at=T0)
        assert r.status == Status.PENDING_MODERATION

    def test_edit_under_no_moderation_stays_published(self, course):
        engine, _, offering, students = course
        r = engine.author_resource(
            students[0].id, offering.id, "note", "v1", [offering.topics[0].id], None, at=T0
        )
        engine.edit_resource(students[0].id, r.id, body="v2", at=T0)
        assert r.status == Status.PUBLISHED and r.body == "v2"


class TestPeerReview:
    def _setup(self):
        engine, instructor, offering = make_engine(policy="competent_student")
        students = add_students(engine, offering, ["Author", "R1", "R2", "R3"])
        author, r1, r2, r3 = students
        resource = engine.author_resource(
            author.id, offering.id, "mcq", "body", [offering.topics[0].id], mcq(), at=T0
        )
        # make reviewers competent: raise their tag rating above the threshold
        topic = offering.topics[0].id
        for reviewer in (r1, r2, r3):
            state = engine._materialize_learner(offering.id, reviewer.id)
            state.ensure(topic).rating_n = elo.to_fixed(1150.0)
        return engine, offering, author, (r1, r2, r3), resource

    def test_majority_approval_publishes_at_quorum(self):
        engine, _, _, (r1, r2, r3), resource = self._setup()
        engine.peer_review(r1.id, resource.id, True, "good", at=T0)
        engine.peer_review(r2.id, resource.id, False, "meh", at=T0)
        assert resource.status == Status.PENDING_MODERATION
        tally = engine.peer_review(r3.id, resource.id, True, "good", at=T0)
        assert resource.status == Status.PUBLISHED
        assert tally["approvals"] == 2 and tally["rejections"] == 1

    def test_majority_rejection_returns_to_draft(self):
        engine, _, _, (r1, r2, r3), resource = self._setup()
        engine.peer_review(r1.id, resource.id, True, "ok", at=T0)
        engine.peer_review(r2.id, resource.id, False, "no", at=T0)
        engine.peer_review(r3.id, resource.id, False, "no", at=T0)
        assert resource.status == Status.DRAFT

    def test_below_threshold_reviewer_rejected(self):
        engine, offering, _, (r1, _, _), resource = self._setup()
        state = engine._materialize_learner(offering.id, r1.id)
        state.ensure(offering.topics[0].id).rating_n = elo.to_fixed(1050.0)
        with pytest.raises(EligibilityError):
            engine.peer_review(r1.id, resource.id, True, "good", at=T0)

    def test_author_self_review_is_a_conflict(self):
        engine, offering, author, _, resource = self._setup()
        state = engine._materialize_learner(offering.id, author.id)
        state.ensure(offering.topics[0].id).rating_n = elo.to_fixed(1500.0)
        with pytest.raises(ConflictError):
            engine.peer_review(author.id, resource.id, True, "mine is great", at=T0)


class TestAttempts:
    def _published_mcq(self, course):
        engine, _, offering, students = course
        resource = engine.author_resource(
            students[0].id, offering.id, "mcq", "body", [offering.topics[0].id], mcq(), at=T0
        )
        return engine, offering, students, resource

    def test_first_attempt_scores_and_reveals(self, course):
        engine, offering, students, resource = self._published_mcq(course)
        result = engine.attempt_resource(students[1].id, resource.id, 0, at=T0)
        assert result["correct"] is True
        assert result["correct_index"] == 0
        assert result["explanation"] == "because"
        assert result["scored"] is True
        assert result["delta"]["per_topic"][offering.topics[0].id] == pytest.approx(20.0)
        assert engine.learner(offering.id, students[1].id).rating(
            offering.topics[0].id
        ) == pytest.approx(1020.0)

    def test_second_attempt_recorded_but_not_scored(self, course):
        engine, offering, students, resource = self._published_mcq(course)
        engine.attempt_resource(students[1].id, resource.id, 0, at=T0)
        result = engine.attempt_resource(students[1].id, resource.id, 1, at=T0)
        assert result["scored"] is False and "delta" not in result
        assert len(engine.attempts_for_resource(resource.id)) == 2

    def test_distribution_counts_all_attempts(self, course):
        engine, offering, students, resource = self._published_mcq(course)
        engine.attempt_resource(students[0].id, resource.id, 0, at=T0)
        engine.attempt_resource(students[1].id, resource.id, 0, at=T0)
        engine.attempt_resource(students[2].id, resource.id, 0, at=T0)
        result = engine.attempt_resource(students[2].id, resource.id, 1, at=T0)
        assert result["answer_distribution"] == [3, 1, 0, 0]
        assert sum(result["answer_distribution"]) == len(
            engine.attempts_for_resource(resource.id)
        )

    def test_attempt_on_draft_is_lifecycle_error(self, course):
        engine, _, offering, students = course
        draft = engine.author_resource(
            students[0].id,
            offering.id,
            "mcq",
            "body",
            [offering.topics[0].id],
            mcq(),
            as_draft=True,
            at=T0,
        )
        with pytest.raises(LifecycleError):
            engine.attempt_resource(students[1].id, draft.id, 0, at=T0)

    def test_note_view_records_engagement_without_score(self, course):
        engine, _, offering, students = course
        note = engine.author_resource(
            students[0].id, offering.id, "note", "read me", [offering.topics[0].id], None, at=T0
        )
        result = engine.attempt_resource(students[1].id, note.id, at=T0)
        assert result["correct"] is None and result["scored"] is False
        assert engine.learner(offering.id, students[1].id).rating(
            offering.topics[0].id
        ) == pytest.approx(1000.0)

    def test_mcq_without_choice_rejected(self, course):
        engine, offering, students, resource = self._published_mcq(course)
        with pytest.raises(ValidationError):
            engine.attempt_resource(students[1].id, resource.id, at=T0)


class TestQualityRatings:
    def _attempted(self, course):
        engine, _, offering, students = course
        resource = engine.author_resource(
            students[0].id, offering.id, "mcq", "body", [offering.topics[0].id], mcq(), at=T0
        )
        for s in students:
            engine.attempt_resource(s.id, resource.id, 0, at=T0)
        return engine, students, resource

    def test_mean_and_count(self, course):
        engine, students, resource = self._attempted(course)
        engine.rate_resource(students[0].id, resource.id, 5, at=T0)
        engine.rate_resource(students[1].id, resource.id, 4, at=T0)
        summary = engine.rate_resource(students[2].id, resource.id, 3, at=T0)
        assert summary == {"mean_stars": 4.0, "count": 3}

    def test_rerate_overwrites(self, course):
        engine, students, resource = self._attempted(course)
        engine.rate_resource(students[0].id, resource.id, 3, at=T0)
        summary = engine.rate_resource(students[0].id, resource.id, 5, at=T0)
        assert summary == {"mean_stars": 5.0, "count": 1}

    def test_rating_before_attempt_rejected(self, course):
        engine, _, offering, students = course
        resource = engine.author_resource(
            students[0].id, offering.id, "mcq", "body", [offering.topics[0].id], mcq(), at=T0
        )
        with pytest.raises(ValidationError):
            engine.rate_resource(students[1].id, resource.id, 5, at=T0)

    def test_stars_bounds(self, course):
        engine, students, resource = self._attempted(course)
        with pytest.raises(ValidationError):
            engine.rate_resource(students[0].id, resource.id, 6, at=T0)
        with pytest.raises(ValidationError):
            engine.rate_resource(students[0].id, resource.id, 0, at=T0)

    def test_mean_stays_in_range(self, course):
        engine, students, resource = self._attempted(course)
        for stars, student in zip((1, 5, 3), students):
            engine.rate_resource(student.id, resource.id, stars, at=T0)
        summary = engine.resource_quality(resource.id)
        assert 1.0 <= summary["mean_stars"] <= 5.0


class TestFlags:
    def _published(self, course):
        engine, _, offering, students = course
        resource = engine.author_resource(
            students[0].id, offering.id, "mcq", "body", [offering.topics[0].id], mcq(), at=T0
        )
        return engine, offering, students, resource

    def test_threshold_unpublishes(self, course):
        engine, offering, students, resource = self._published(course)
        instructor = next(iter(engine.enrolments[offering.id]))
        engine.flag_resource(students[1].id, resource.id, "wrong answer", at=T0)
        engine.flag_resource(students[2].id, resource.id, "offensive", at=T0)
        assert resource.status == Status.PUBLISHED
        engine.flag_resource(instructor, resource.id, "agreed", at=T0)
        assert resource.status == Status.PENDING_MODERATION

    def test_duplicate_flag_does_not_advance_count(self, course):
        engine, offering, students, resource = self._published(course)
        engine.flag_resource(students[1].id, resource.id, "bad", at=T0)
        out = engine.flag_resource(students[1].id, resource.id, "still bad", at=T0)
        assert out["flags"] == 1
        assert resource.status == Status.PUBLISHED

    def test_moderation_after_flags_clears_them(self, course):
        engine, offering, students, resource = self._published(course)
        instructor = next(iter(engine.enrolments[offering.id]))
        for s in students:
            engine.flag_resource(s.id, resource.id, "spam", at=T0)
        assert resource.status == Status.PENDING_MODERATION
        engine.moderate(instructor, resource.id, "approve", at=T0)
        assert resource.status == Status.PUBLISHED
        assert resource.id not in engine.flags


class TestDeletion:
    def test_delete_restores_ratings_bit_exact(self, course):
        engine, _, offering, students = course
        topic = offering.topics[0].id
        resource = engine.author_resource(
            students[0].id, offering.id, "mcq", "body", [topic], mcq(), at=T0
        )
        keep = engine.author_resource(
            students[0].id, offering.id, "mcq", "other", [topic], mcq(), at=T0
        )
        engine.attempt_resource(students[1].id, keep.id, 0, at=iso(3))
        before = {
            s.id: engine.learner(offering.id, s.id).rating_n(topic) for s in students
        }
        engine.attempt_resource(students[1].id, resource.id, 0, at=iso(4))
        engine.attempt_resource(students[2].id, resource.id, 1, at=iso(4))
        engine.delete_resource(students[0].id, resource.id, at=iso(5))
        after = {
            s.id: engine.learner(offering.id, s.id).rating_n(topic) for s in students
        }
        assert after == before
        assert resource.status == Status.DELETED

    def test_delete_matches_replay_without_resource_oracle(self, course):
        """Ledger reversal must equal replaying the surviving attempts."""
        engine, _, offering, students = course
        topic = offering.topics[0].id
        doomed = engine.author_resource(
            students[0].id, offering.id, "mcq", "doomed", [topic], mcq(), at=T0
        )
        keep = engine.author_resource(
            students[0].id, offering.id, "mcq", "keep", [topic], mcq(), at=T0
        )
        # interleave attempts across both resources
        engine.attempt_resource(students[1].id, doomed.id, 0, at=iso(3))
        engine.attempt_resource(students[1].id, keep.id, 1, at=iso(3, 10))
        engine.attempt_resource(students[2].id, doomed.id, 1, at=iso(3, 11))
        engine.attempt_resource(students[2].id, keep.id, 0, at=iso(3, 12))
        engine.delete_resource(students[0].id, doomed.id, at=iso(4))

        surviving = [
            e
            for e in engine.events
            if not (
                e.kind in ("attempted", "resource_deleted")
                and e.payload["resource_id"] == doomed.id
            )
        ]
        oracle = Engine.replay(_renumber(surviving))
        for s in students:
            assert engine.learner(offering.id, s.id).rating_n(topic) == oracle.learner(
                offering.id, s.id
            ).rating_n(topic)
        assert engine.resources[keep.id].rating_n == oracle.resources[keep.id].rating_n

    def test_author_still_sees_deleted_resource(self, course):
        engine, _, offering, students = course
        resource = engine.author_resource(
            students[0].id, offering.id, "note", "mine", [offering.topics[0].id], None, at=T0
        )
        engine.delete_resource(students[0].id, resource.id, at=T0)
        from peerlearn.recommend import SearchQuery, StatusFilter, filter_resources

        cards = filter_resources(
            engine,
            students[0].id,
            offering.id,
            SearchQuery(status_filter={StatusFilter.OWN_DELETED}),
        )
        assert [c.resource_id for c in cards] == [resource.id]
        other = filter_resources(
            engine,
            students[1].id,
            offering.id,
            SearchQuery(status_filter={StatusFilter.OWN_DELETED}),
        )
        assert other == []

    def test_non_author_student_cannot_delete(self, course):
        engine, _, offering, students = course
        resource = engine.author_resource(
            students[0].id, offering.id, "note", "x", [offering.topics[0].id], None, at=T0
        )
        with pytest.raises(AuthorizationError):
            engine.delete_resource(students[1].id, resource.id, at=T0)

    def test_instructor_can_delete(self, course):
        engine, instructor, offering, students = course
        resource = engine.author_resource(
            students[0].id, offering.id, "note", "x", [offering.topics[0].id], None, at=T0
        )
        engine.delete_resource(instructor.id, resource.id, at=T0)
        assert resource.status == Status.DELETED

    def test_pending_resource_cannot_be_deleted(self):
        engine, instructor, offering = make_engine(policy="staff")
        (student,) = add_students(engine, offering, ["S"])
        r = engine.author_resource(
            student.id, offering.id, "mcq", "body", [offering.topics[0].id], mcq(), at=T0
        )
        assert r.status == Status.PENDING_MODERATION
        with pytest.raises(LifecycleError):
            engine.delete_resource(instructor.id, r.id, at=T0)

    def test_deleted_is_terminal(self, course):
        engine, _, offering, students = course
        resource = engine.author_resource(
            students[0].id, offering.id, "note", "x", [offering.topics[0].id], None, at=T0
        )
        engine.delete_resource(students[0].id, resource.id, at=T0)
        with pytest.raises(LifecycleError):
            engine.delete_resource(students[0].id, resource.id, at=T0)
        with pytest.raises(LifecycleError):
            engine.edit_resource(students[0].id, resource.id, body="revised", at=T0)


def _renumber(events):
    from peerlearn.engine import EventRecord

    return [
        EventRecord(seq=i + 1, kind=e.kind, at=e.at, payload=e.payload)
        for i, e in enumerate(events)
    ]
