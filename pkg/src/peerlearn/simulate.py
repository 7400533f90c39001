"""Synthetic cohort driver for validating rating recovery end to end.

Ground truth is a one-parameter logistic model: each student carries a true
per-topic ability and each question a true difficulty, both on the logit
scale; answers are drawn from sigmoid(ability - difficulty).  The driver
pushes the whole cohort through the engine's public operations and then
compares the engine's estimated ratings against the ground truth with rank
statistics (plus a centered RMSE on the rating scale for difficulties).

Everything is reproducible: one seed fixes the fixture, a run seed fixes the
behaviour draws.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Optional

import numpy as np
from scipy import stats as scipy_stats

from . import recommend
from .content import McqContent
from .engine import Engine
from .errors import ValidationError

# one logit of ability equals this many rating points on the classic curve
ELO_PER_LOGIT = 400.0 / math.log(10.0)

_BASE_TIME = datetime(2026, 3, 2, 9, 0, 0, tzinfo=timezone.utc)


@dataclass
class SyntheticStudent:
    name: str
    true_ability: dict[str, float]  # topic name -> logit
    behaviour: dict = field(
        default_factory=lambda: {"attempt_rate": 1.0, "authoring_rate": 0.0, "rating_style": 0.5}
    )


@dataclass
class SyntheticQuestion:
    name: str
    true_difficulty: float  # logit
    tags: list[str]  # topic names
    latent_quality: float  # in [0, 1]


@dataclass
class CohortFixture:
    seed: int
    topics: list[str]
    students: list[SyntheticStudent]
    questions: list[SyntheticQuestion]


@dataclass
class SimulationReport:
    spearman_by_topic: dict[str, Optional[float]]
    rmse_difficulty: Optional[float]
    attempts_total: int
    seed: int
    policy: str
    mean_true_success: Optional[float]

    def mean_spearman(self) -> Optional[float]:
        values = [v for v in self.spearman_by_topic.values() if v is not None]
        return float(np.mean(values)) if values else None


def generate_cohort(
    n_students: int, n_questions: int, topics: int | list[str], seed: int
) -> CohortFixture:
    """Deterministic fixture: same seed, same cohort."""
    if n_students < 1 or n_questions < 1:
        raise ValidationError("need at least one student and one question")
    if isinstance(topics, int):
        if topics < 1:
            raise ValidationError("need at least one topic")
        topics = [f"Topic {i + 1}" for i in range(topics)]
    rng = np.random.default_rng(seed)
    students = [
        SyntheticStudent(
            name=f"student-{i:04d}",
            true_ability={t: float(a) for t, a in zip(topics, rng.normal(0.0, 1.0, len(topics)))},
            behaviour={
                "attempt_rate": 1.0,
                "authoring_rate": 0.0,
                "rating_style": 0.5,
            },
        )
        for i in range(n_students)
    ]
    questions = [
        SyntheticQuestion(
            name=f"question-{i:04d}",
            true_difficulty=float(rng.normal(0.0, 1.0)),
            tags=[topics[int(rng.integers(len(topics)))]],
            latent_quality=float(rng.uniform()),
        )
        for i in range(n_questions)
    ]
    return CohortFixture(seed=seed, topics=list(topics), students=students, questions=questions)


def _rasch_p(ability: float, difficulty: float) -> float:
    return 1.0 / (1.0 + math.exp(-(ability - difficulty)))


class _Run:
    """One simulation run over a fresh in-memory engine."""

    def __init__(self, fixture: CohortFixture, run_seed: int):
        self.fixture = fixture
        self.rng = np.random.default_rng(run_seed)
        self.engine = Engine()
        self.clock = 0  # minutes; one day per attempt round

        instructor = self.engine.register_user("sim-instructor", at=self._now())
        self.offering = self.engine.create_offering(
            instructor.id,
            {
                "university_name": "Simulated U",
                "course_code": "SIM100",
                "course_name": "Synthetic Cohort",
                "semester": "S1",
                "teaching_start": "2026-03-02",
            },
            fixture.topics,
            at=self._now(),
        )
        self.topic_ids = {t.name: t.id for t in self.offering.topics}
        self.student_ids = []
        for s in fixture.students:
            user = self.engine.register_user(s.name, at=self._now())
            self.engine.add_member(instructor.id, self.offering.id, user.id, at=self._now())
            self.student_ids.append(user.id)

        self.resource_ids = []
        self.correct_index = {}
        for i, q in enumerate(fixture.questions):
            author = self.student_ids[i % len(self.student_ids)]
            correct = int(self.rng.integers(4))
            resource = self.engine.author_resource(
                author,
                self.offering.id,
                "mcq",
                f"{q.name} ({', '.join(q.tags)})",
                [self.topic_ids[t] for t in q.tags],
                McqContent(
                    choices=[f"option {c}" for c in range(4)],
                    correct_index=correct,
                    explanation="simulated",
                ),
                at=self._now(),
            )
            self.resource_ids.append(resource.id)
            self.correct_index[resource.id] = correct

    def _now(self, day: int = 0) -> str:
        return (_BASE_TIME + timedelta(days=day, minutes=self.clock)).isoformat()

    def drive(self, policy: str, attempts_per_student: int) -> SimulationReport:
        fixture = self.fixture
        by_resource = {
            rid: q for rid, q in zip(self.resource_ids, fixture.questions)
        }
        unattempted = {
            sid: list(self.resource_ids) for sid in self.student_ids
        }
        true_p_sum, attempts_total = 0.0, 0

        for round_no in range(attempts_per_student):
            for s_idx, sid in enumerate(self.student_ids):
                student = fixture.students[s_idx]
                if self.rng.uniform() > student.behaviour["attempt_rate"]:
                    continue
                rid = self._choose(policy, sid, unattempted[sid])
                if rid is None:
                    continue
                question = by_resource[rid]
                ability = float(
                    np.mean([student.true_ability[t] for t in question.tags])
                )
                p = _rasch_p(ability, question.true_difficulty)
                correct = bool(self.rng.uniform() < p)
                right = self.correct_index[rid]
                if correct:
                    chosen = right
                else:
                    chosen = int(self.rng.integers(3))
                    if chosen >= right:
                        chosen += 1
                self.clock += 1
                self.engine.attempt_resource(sid, rid, chosen, at=self._now(day=round_no))
                if rid in unattempted[sid]:
                    unattempted[sid].remove(rid)
                true_p_sum += p
                attempts_total += 1
                if self.rng.uniform() < 0.2:
                    noise = self.rng.normal(0.0, student.behaviour["rating_style"])
                    stars = int(min(5, max(1, round(1 + 4 * question.latent_quality + noise))))
                    self.engine.rate_resource(sid, rid, stars, at=self._now(day=round_no))
        return self._report(attempts_total, true_p_sum, policy)

    def _choose(self, policy: str, sid: str, fresh: list[str]) -> Optional[str]:
        if policy == "random":
            pool = fresh if fresh else self.resource_ids
            return pool[int(self.rng.integers(len(pool)))]
        if policy == "recommended":
            cards = recommend.recommend(self.engine, sid, self.offering.id, 1)
            return cards[0].resource_id if cards else None
        raise ValidationError(f"unknown policy {policy!r}")

    def _report(self, attempts_total: int, true_p_sum: float, policy: str) -> SimulationReport:
        fixture = self.fixture
        spearman: dict[str, Optional[float]] = {}
        for topic in fixture.topics:
            tid = self.topic_ids[topic]
            estimated = [
                self.engine.learner(self.offering.id, sid).rating(tid)
                for sid in self.student_ids
            ]
            truth = [s.true_ability[topic] for s in fixture.students]
            if attempts_total == 0 or len(set(estimated)) < 2:
                spearman[topic] = None
                continue
            rho = scipy_stats.spearmanr(estimated, truth).statistic
            spearman[topic] = None if np.isnan(rho) else float(rho)

        if attempts_total == 0:
            rmse = None
        else:
            est = np.array(
                [
                    self.engine.resources[rid].rating_n / 10**9
                    for rid in self.resource_ids
                ]
            )
            truth = np.array(
                [q.true_difficulty for q in fixture.questions]
            ) * ELO_PER_LOGIT
            est_c = est - est.mean()
            truth_c = truth - truth.mean()
            rmse = float(np.sqrt(np.mean((est_c - truth_c) ** 2)))
        return SimulationReport(
            spearman_by_topic=spearman,
            rmse_difficulty=rmse,
            attempts_total=attempts_total,
            seed=fixture.seed,
            policy=policy,
            mean_true_success=(true_p_sum / attempts_total) if attempts_total else None,
        )


def run_simulation(
    fixture: CohortFixture,
    policy: str = "random",
    attempts_per_student: int = 100,
    run_seed: Optional[int] = None,
) -> SimulationReport:
    """Drive the cohort through the engine and score the recovered ratings."""
    if attempts_per_student < 0:
        raise ValidationError("attempts_per_student must be non-negative")
    run = _Run(fixture, fixture.seed if run_seed is None else run_seed)
    return run.drive(policy, attempts_per_student)


def compare_policies(
    fixture: CohortFixture,
    attempts_per_student: int,
    seeds: list[int],
    policy_a: str = "recommended",
    policy_b: str = "random",
) -> dict:
    """Paired per-seed comparison of the mean true success rate experienced."""
    if len(seeds) < 2:
        raise ValidationError("compare_policies needs at least two seeds")
    pairs = []
    for seed in seeds:
        a = run_simulation(fixture, policy_a, attempts_per_student, run_seed=seed)
        b = run_simulation(fixture, policy_b, attempts_per_student, run_seed=seed)
        pairs.append(
            {
                "seed": seed,
                policy_a if policy_a != policy_b else f"{policy_a}_a": a.mean_true_success,
                policy_b if policy_a != policy_b else f"{policy_b}_b": b.mean_true_success,
                "difference": (a.mean_true_success or 0.0) - (b.mean_true_success or 0.0),
            }
        )
    return {
        "policy_a": policy_a,
        "policy_b": policy_b,
        "attempts_per_student": attempts_per_student,
        "pairs": pairs,
        "mean_difference": float(np.mean([p["difference"] for p in pairs])),
    }


def report_to_csv(report: SimulationReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["topic", "spearman"])
    for topic, rho in report.spearman_by_topic.items():
        w.writerow([topic, "" if rho is None else f"{rho:.6f}"])
    mean = report.mean_spearman()
    w.writerow(["mean", "" if mean is None else f"{mean:.6f}"])
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simulate")
    parser.add_argument("--students", type=int, required=True)
    parser.add_argument("--questions", type=int, required=True)
    parser.add_argument("--topics", type=int, default=1)
    parser.add_argument("--attempts", type=int, required=True)
    parser.add_argument("--policy", choices=("random", "recommended"), default="random")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", help="report CSV path (default stdout)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        fixture = generate_cohort(args.students, args.questions, args.topics, args.seed)
        report = run_simulation(fixture, args.policy, args.attempts)
    except ValidationError as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return 2
    text = report_to_csv(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(
        f"attempts={report.attempts_total} "
        f"rmse_difficulty={report.rmse_difficulty} "
        f"mean_spearman={report.mean_spearman()}",
        file=sys.stderr,
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
