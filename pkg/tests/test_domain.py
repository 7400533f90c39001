"""Core domain: offerings, role mapping, enrolment, topic CSV, imports."""

import copy

import pytest

from peerlearn.domain import (
    LMS_ROLE_MAP,
    LaunchRecord,
    Role,
    TicketKind,
    map_lms_role,
    topics_from_csv,
    topics_to_csv,
)
from peerlearn.engine import Engine
from peerlearn.errors import (
    AlreadyUsedError,
    AuthorizationError,
    InvalidCodeError,
    UnknownRoleError,
    ValidationError,
)

from conftest import META, T0, make_engine, mcq


class TestCreateOffering:
    def test_topics_get_ordinals_in_order(self):
        engine, _, offering = make_engine()
        assert [t.name for t in offering.topics] == [
            "Relational Models",
            "SQL",
            "Security",
        ]
        assert [t.ordinal for t in offering.topics] == [0, 1, 2]

    def test_duplicate_topic_rejected(self):
        engine = Engine()
        user = engine.register_user("I", at=T0)
        with pytest.raises(ValidationError) as err:
            engine.create_offering(user.id, META, ["SQL", "SQL"], at=T0)
        assert "SQL" in str(err.value)

    def test_empty_topics_rejected(self):
        engine = Engine()
        user = engine.register_user("I", at=T0)
        with pytest.raises(ValidationError):
            engine.create_offering(user.id, META, [], at=T0)

    def test_creator_becomes_instructor_and_policy_defaults_to_none(self):
        engine, instructor, offering = make_engine()
        assert engine.role_of(offering.id, instructor.id) == Role.INSTRUCTOR
        assert offering.moderation_policy.value == "none"


class TestRoleMapping:
    @pytest.mark.parametrize(
        "label,expected",
        [
            ("Instructor", Role.INSTRUCTOR),
            ("Teaching Assistant", Role.INSTRUCTOR),
            ("Grader", Role.INSTRUCTOR),
            ("Student", Role.STUDENT),
            ("Guest", Role.STUDENT),
            ("Observer", Role.STUDENT),
        ],
    )
    def test_total_on_the_six_labels(self, label, expected):
        launch = LaunchRecord(lms_role=label, offering_ref="o", user_ref="u")
        assert map_lms_role(launch) == expected

    def test_unmapped_label_errors(self):
        with pytest.raises(UnknownRoleError):
            map_lms_role(LaunchRecord(lms_role="Janitor", offering_ref="o", user_ref="u"))

    def test_pure_function_of_label(self):
        for label in LMS_ROLE_MAP:
            a = map_lms_role(LaunchRecord(label, "o1", "u1"))
            b = map_lms_role(LaunchRecord(label, "o2", "u2"))
            assert a == b

    def test_launch_enrolment_uses_mapped_role(self):
        engine, _, offering = make_engine()
        ta = engine.register_user("TA", at=T0)
        enr = engine.enrol_from_launch(
            LaunchRecord("Teaching Assistant", offering.id, ta.id), at=T0
        )
        assert enr.role == Role.INSTRUCTOR


class TestEnrolment:
    def test_access_code_enrols_as_student(self):
        engine, instructor, offering = make_engine()
        ticket = engine.issue_ticket(
            instructor.id, offering.id, TicketKind.ACCESS_CODE, code="join-me", at=T0
        )
        user = engine.register_user("S", at=T0)
        enr = engine.enrol(offering.id, user.id, ticket.code, at=T0)
        assert enr.role == Role.STUDENT

    def test_invitation_is_single_use(self):
        engine, instructor, offering = make_engine()
        ticket = engine.issue_ticket(
            instructor.id, offering.id, TicketKind.INVITATION, email="s@example.edu", at=T0
        )
        first = engine.register_user("S1", at=T0)
        second = engine.register_user("S2", at=T0)
        engine.enrol(offering.id, first.id, ticket.code, at=T0)
        with pytest.raises(AlreadyUsedError):
            engine.enrol(offering.id, second.id, ticket.code, at=T0)

    def test_invitation_writes_outbox_message(self):
        engine, instructor, offering = make_engine()
        engine.issue_ticket(
            instructor.id, offering.id, TicketKind.INVITATION, email="s@example.edu", at=T0
        )
        assert any(
            m["kind"] == "invitation" and m["to"] == "s@example.edu" for m in engine.outbox
        )

    def test_wrong_offering_code_rejected(self):
        engine, instructor, offering = make_engine()
        other = engine.create_offering(
            instructor.id, META, ["Other Topic"], at=T0
        )
        ticket = engine.issue_ticket(
            instructor.id, other.id, TicketKind.ACCESS_CODE, code="other-code", at=T0
        )
        user = engine.register_user("S", at=T0)
        with pytest.raises(InvalidCodeError):
            engine.enrol(offering.id, user.id, ticket.code, at=T0)

    def test_expired_code_rejected(self):
        engine, instructor, offering = make_engine()
        ticket = engine.issue_ticket(
            instructor.id,
            offering.id,
            TicketKind.ACCESS_CODE,
            code="old",
            expiry="2026-03-01T00:00:00+00:00",
            at="2026-02-01T00:00:00+00:00",
        )
        user = engine.register_user("S", at=T0)
        with pytest.raises(InvalidCodeError):
            engine.enrol(offering.id, user.id, ticket.code, at=T0)

    def test_enrolment_idempotent(self):
        engine, instructor, offering = make_engine()
        ticket = engine.issue_ticket(
            instructor.id, offering.id, TicketKind.ACCESS_CODE, code="c", at=T0
        )
        user = engine.register_user("S", at=T0)
        engine.enrol(offering.id, user.id, ticket.code, at=T0)
        events_before = len(engine.events)
        again = engine.enrol(offering.id, user.id, ticket.code, at=T0)
        assert again.role == Role.STUDENT
        assert len(engine.events) == events_before
        assert len(engine.enrolments[offering.id]) == 2  # instructor + student


class TestTopicsCsv:
    def test_round_trip(self):
        _, _, offering = make_engine()
        text = topics_to_csv(offering.topics)
        assert text.splitlines()[0] == "ordinal,name"
        assert topics_from_csv(text) == ["Relational Models", "SQL", "Security"]

    def test_bad_header_rejected(self):
        with pytest.raises(ValidationError):
            topics_from_csv("name,ordinal\nSQL,0\n")


class TestTopicUpdates:
    def test_rename_reorder_and_add(self):
        engine, instructor, offering = make_engine()
        current = offering.topics
        engine.update_topics(
            instructor.id,
            offering.id,
            [
                {"id": current[1].id, "name": "SQL Queries"},
                {"id": current[0].id, "name": "Relational Models"},
                {"id": None, "name": "Transactions"},
            ],
            at=T0,
        )
        assert [t.name for t in offering.topics] == [
            "SQL Queries",
            "Relational Models",
            "Transactions",
        ]
        assert [t.ordinal for t in offering.topics] == [0, 1, 2]

    def test_removing_a_topic_still_used_solely_by_a_resource_blocks(self):
        engine, instructor, offering = make_engine()
        sql = offering.topics[1]
        engine.author_resource(
            instructor.id, offering.id, "mcq", "only sql", [sql.id], mcq(), at=T0
        )
        keep = [{"id": t.id, "name": t.name} for t in offering.topics if t.id != sql.id]
        with pytest.raises(ValidationError):
            engine.update_topics(instructor.id, offering.id, keep, at=T0)


class TestImportResources:
    def _source_with_content(self):
        engine, instructor, source = make_engine()
        sql = source.topics[1]
        for i in range(3):
            engine.author_resource(
                instructor.id, source.id, "mcq", f"mcq {i} about joins", [sql.id], mcq(), at=T0
            )
        for i in range(2):
            engine.author_resource(
                instructor.id, source.id, "note", f"note {i}", [sql.id], None, at=T0
            )
        return engine, instructor, source

    def test_query_matching_nothing_gives_empty_list(self):
        engine, instructor, source = self._source_with_content()
        target = engine.create_offering(instructor.id, META, ["SQL"], at=T0)
        copies = engine.import_resources(
            instructor.id, target.id, {"resource_type": "worked_example"}, at=T0
        )
        assert copies == []

    def test_type_filter_copies_only_mcqs(self):
        engine, instructor, source = self._source_with_content()
        target = engine.create_offering(instructor.id, META, ["SQL"], at=T0)
        copies = engine.import_resources(
            instructor.id,
            target.id,
            {"offering_id": source.id, "resource_type": "mcq"},
            at=T0,
        )
        assert len(copies) == 3
        assert all(c.offering_id == target.id for c in copies)
        source_ids = {r.id for r in engine.resources.values() if r.offering_id == source.id}
        assert all(c.id not in source_ids for c in copies)

    def test_unmapped_topic_error_lists_offenders(self):
        engine, instructor, source = self._source_with_content()
        target = engine.create_offering(instructor.id, META, ["Joins Only"], at=T0)
        with pytest.raises(ValidationError) as err:
            engine.import_resources(
                instructor.id, target.id, {"offering_id": source.id}, at=T0
            )
        assert "SQL" in str(err.value.details.get("unmapped"))

    def test_topic_map_resolves_names(self):
        engine, instructor, source = self._source_with_content()
        target = engine.create_offering(instructor.id, META, ["Query Languages"], at=T0)
        copies = engine.import_resources(
            instructor.id,
            target.id,
            {"offering_id": source.id},
            topic_map={"SQL": "Query Languages"},
            at=T0,
        )
        assert len(copies) == 5
        target_topic = target.topics[0].id
        assert all(c.tags == [target_topic] for c in copies)

    def test_import_does_not_mutate_source(self):
        engine, instructor, source = self._source_with_content()
        target = engine.create_offering(instructor.id, META, ["SQL"], at=T0)
        before = copy.deepcopy(
            {
                rid: engine.to_state_dict()["resources"][rid]
                for rid, r in engine.resources.items()
                if r.offering_id == source.id
            }
        )
        engine.import_resources(
            instructor.id, target.id, {"offering_id": source.id}, at=T0
        )
        after = {
            rid: engine.to_state_dict()["resources"][rid]
            for rid, r in engine.resources.items()
            if r.offering_id == source.id
        }
        assert before == after

    def test_keyword_and_min_rating_filters(self):
        engine, instructor, source = self._source_with_content()
        # rate one mcq up to qualify for min_rating
        target_resource = next(
            r for r in engine.resources.values() if r.body == "mcq 0 about joins"
        )
        student = engine.register_user("S", at=T0)
        engine.add_member(instructor.id, source.id, student.id, at=T0)
        engine.attempt_resource(student.id, target_resource.id, 0, at=T0)
        engine.rate_resource(student.id, target_resource.id, 5, at=T0)

        target = engine.create_offering(instructor.id, META, ["SQL"], at=T0)
        copies = engine.import_resources(
            instructor.id,
            target.id,
            {"offering_id": source.id, "keywords": "JOINS", "min_rating": 4.0},
            at=T0,
        )
        assert len(copies) == 1

    def test_import_requires_instructor(self):
        engine, instructor, source = self._source_with_content()
        target = engine.create_offering(instructor.id, META, ["SQL"], at=T0)
        student = engine.register_user("S", at=T0)
        engine.add_member(instructor.id, target.id, student.id, at=T0)
        with pytest.raises(AuthorizationError):
            engine.import_resources(student.id, target.id, {}, at=T0)
