"""Search filters, personal fit, sorting, and recommendation."""

import pytest

from peerlearn import elo
from peerlearn.content import ResourceKind
from peerlearn.recommend import (
    FitWeights,
    SearchQuery,
    SortKey,
    StatusFilter,
    filter_resources,
    personal_fit,
    recommend,
    sort_cards,
)
from peerlearn.errors import ValidationError

from conftest import T0, iso, make_engine, add_students, mcq


@pytest.fixture
def repository():
    """2 SQL MCQs, 1 SQL note, 1 Security MCQ, all published."""
    engine, instructor, offering = make_engine()
    students = add_students(engine, offering, ["S1", "S2"])
    sql = offering.topics[1].id
    security = offering.topics[2].id
    r1 = engine.author_resource(
        students[0].id, offering.id, "mcq", "joins in sql", [sql], mcq(), at=iso(2)
    )
    r2 = engine.author_resource(
        students[0].id, offering.id, "mcq", "sql subqueries", [sql], mcq(), at=iso(3)
    )
    note = engine.author_resource(
        students[0].id, offering.id, "note", "sql cheat sheet", [sql], None, at=iso(4)
    )
    sec = engine.author_resource(
        students[0].id, offering.id, "mcq", "injection", [security], mcq(), at=iso(5)
    )
    return engine, offering, students, {"r1": r1, "r2": r2, "note": note, "sec": sec}


class TestFilters:
    def test_kind_and_topic_conjunction(self, repository):
        engine, offering, students, res = repository
        sql = offering.topics[1].id
        cards = filter_resources(
            engine,
            students[1].id,
            offering.id,
            SearchQuery(kinds={ResourceKind.MCQ}, topics={sql}),
        )
        assert {c.resource_id for c in cards} == {res["r1"].id, res["r2"].id}

    def test_empty_query_returns_all_published(self, repository):
        engine, offering, students, res = repository
        cards = filter_resources(engine, students[1].id, offering.id, SearchQuery())
        assert {c.resource_id for c in cards} == {r.id for r in res.values()}

    def test_incorrectly_answered_filter(self, repository):
        engine, offering, students, res = repository
        caller = students[1]
        engine.attempt_resource(caller.id, res["r1"].id, 1, at=T0)  # wrong
        engine.attempt_resource(caller.id, res["r2"].id, 0, at=T0)  # right
        engine.attempt_resource(caller.id, res["sec"].id, 0, at=T0)  # right
        cards = filter_resources(
            engine,
            caller.id,
            offering.id,
            SearchQuery(status_filter={StatusFilter.INCORRECTLY_ANSWERED}),
        )
        assert [c.resource_id for c in cards] == [res["r1"].id]

    def test_keyword_search_case_insensitive(self, repository):
        engine, offering, students, res = repository
        cards = filter_resources(
            engine, students[1].id, offering.id, SearchQuery(keywords="SUBQUERIES")
        )
        assert [c.resource_id for c in cards] == [res["r2"].id]

    def test_conjunctive_combination_equals_intersection(self, repository):
        engine, offering, students, res = repository
        caller = students[1]
        engine.attempt_resource(caller.id, res["r1"].id, 0, at=T0)
        engine.attempt_resource(caller.id, res["sec"].id, 0, at=T0)

        def ids(query):
            return {c.resource_id for c in filter_resources(engine, caller.id, offering.id, query)}

        kinds_only = ids(SearchQuery(kinds={ResourceKind.MCQ}))
        attempted_only = ids(SearchQuery(status_filter={StatusFilter.ATTEMPTED}))
        combined = ids(
            SearchQuery(kinds={ResourceKind.MCQ}, status_filter={StatusFilter.ATTEMPTED})
        )
        assert combined == kinds_only & attempted_only


class TestPersonalFit:
    def test_perfect_score(self):
        fit = personal_fit(0.65, 5.0, False, FitWeights(0.5, 0.3, 0.2))
        assert fit == pytest.approx(1.0)

    def test_gap_term_is_one_at_target(self):
        for weights in (FitWeights(1.0, 0.0, 0.0), FitWeights(0.2, 0.4, 0.4)):
            fit = personal_fit(0.65, None, True, weights)
            baseline = weights.w_gap * 1.0 + weights.w_quality * 0.5 + weights.w_novelty * 0.25
            assert fit == pytest.approx(baseline)

    def test_attempted_is_strictly_lower(self):
        new = personal_fit(0.5, 4.0, False)
        seen = personal_fit(0.5, 4.0, True)
        assert seen < new

    def test_bounds_and_monotonicity(self):
        for p in (0.01, 0.3, 0.65, 0.9, 0.99):
            for stars in (None, 1.0, 3.0, 5.0):
                for attempted in (False, True):
                    fit = personal_fit(p, stars, attempted)
                    assert 0.0 <= fit <= 1.0
        # monotone decreasing in |p - 0.65|
        fits = [personal_fit(p, 3.0, False) for p in (0.65, 0.55, 0.45, 0.35)]
        assert fits == sorted(fits, reverse=True)
        # monotone increasing in stars
        by_stars = [personal_fit(0.5, s, False) for s in (1.0, 2.0, 4.0, 5.0)]
        assert by_stars == sorted(by_stars)


class TestSorting:
    def test_difficulty_descending(self, repository):
        engine, offering, students, res = repository
        res["r1"].rating_n = elo.to_fixed(1100.0)
        res["r2"].rating_n = elo.to_fixed(900.0)
        res["sec"].rating_n = elo.to_fixed(1300.0)
        cards = filter_resources(
            engine,
            students[1].id,
            offering.id,
            SearchQuery(kinds={ResourceKind.MCQ}, sort_key=SortKey.DIFFICULTY),
        )
        assert [c.difficulty for c in cards] == [1300.0, 1100.0, 900.0]

    def test_quality_tie_breaks_newest_first(self, repository):
        engine, offering, students, res = repository
        for student in students:
            engine.attempt_resource(student.id, res["r1"].id, 0, at=T0)
            engine.attempt_resource(student.id, res["r2"].id, 0, at=T0)
            engine.rate_resource(student.id, res["r1"].id, 4, at=T0)
            engine.rate_resource(student.id, res["r2"].id, 4, at=T0)
        cards = filter_resources(
            engine,
            students[1].id,
            offering.id,
            SearchQuery(kinds={ResourceKind.MCQ}, topics={offering.topics[1].id},
                        sort_key=SortKey.QUALITY),
        )
        # both 4.0 stars; r2 was created later so it sorts first
        assert [c.resource_id for c in cards] == [res["r2"].id, res["r1"].id]

    def test_sort_is_permutation_and_deterministic(self, repository):
        engine, offering, students, _ = repository
        cards = filter_resources(engine, students[1].id, offering.id, SearchQuery())
        for key in SortKey:
            ordered = sort_cards(list(cards), key)
            assert sorted(c.resource_id for c in ordered) == sorted(
                c.resource_id for c in cards
            )
            assert [c.resource_id for c in sort_cards(list(cards), key)] == [
                c.resource_id for c in ordered
            ]


class TestRecommend:
    def test_n_larger_than_repository_returns_everything(self, repository):
        engine, offering, students, res = repository
        cards = recommend(engine, students[1].id, offering.id, 50)
        assert len(cards) == len(res)

    def test_orders_can_differ_between_students(self, repository):
        """Students whose success probabilities straddle the target disagree."""
        engine, offering, students, res = repository
        sql = offering.topics[1].id
        security = offering.topics[2].id
        s1, s2 = students
        # s1 is strong in SQL and weak in Security; s2 the opposite
        ls1 = engine._materialize_learner(offering.id, s1.id)
        ls1.ensure(sql).rating_n = elo.to_fixed(1400.0)
        ls1.ensure(security).rating_n = elo.to_fixed(600.0)
        ls2 = engine._materialize_learner(offering.id, s2.id)
        ls2.ensure(sql).rating_n = elo.to_fixed(600.0)
        ls2.ensure(security).rating_n = elo.to_fixed(1400.0)
        order1 = [c.resource_id for c in recommend(engine, s1.id, offering.id, 4)]
        order2 = [c.resource_id for c in recommend(engine, s2.id, offering.id, 4)]
        assert order1 != order2

    def test_fresh_student_falls_to_tie_breaks(self, repository):
        engine, offering, students, res = repository
        cards = recommend(engine, students[1].id, offering.id, 4)
        fits = {c.personal_fit for c in cards}
        assert len(fits) == 1  # identical scores
        # newest-first tie-break: creation order was r1, r2, note, sec
        assert [c.resource_id for c in cards] == [
            res["sec"].id,
            res["note"].id,
            res["r2"].id,
            res["r1"].id,
        ]

    def test_never_returns_drafts_or_foreign_deleted(self, repository):
        engine, offering, students, res = repository
        engine.author_resource(
            students[0].id,
            offering.id,
            "note",
            "secret draft",
            [offering.topics[0].id],
            None,
            as_draft=True,
            at=T0,
        )
        engine.delete_resource(students[0].id, res["note"].id, at=T0)
        cards = recommend(engine, students[1].id, offering.id, 10)
        ids = {c.resource_id for c in cards}
        assert res["note"].id not in ids
        assert all(c.status == "published" for c in cards)

    def test_n_must_be_positive(self, repository):
        engine, offering, students, _ = repository
        with pytest.raises(ValidationError):
            recommend(engine, students[1].id, offering.id, 0)
