"""Synthetic subject generators for the matching toolkit tests."""

import numpy as np

from peerlearn.psm import Subject


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def independent_subjects(n, seed):
    """Treatment assigned by a fair coin, independent of covariates."""
    rng = np.random.default_rng(seed)
    gpa = rng.normal(0, 1, n)
    age = rng.normal(0, 1, n)
    residency = rng.binomial(1, 0.3, n).astype(float)
    program = rng.binomial(1, 0.4, n).astype(float)
    treated = rng.random(n) < 0.5
    outcome = np.clip(65 + 4 * gpa + rng.normal(0, 10, n), 0, 100)
    return _pack(gpa, age, residency, program, treated, outcome)


def known_model_subjects(n, seed, gpa_coef=1.5):
    """Treatment depends on gpa with a known logistic coefficient."""
    rng = np.random.default_rng(seed)
    gpa = rng.normal(0, 1, n)
    age = rng.normal(0, 1, n)
    residency = rng.binomial(1, 0.3, n).astype(float)
    program = rng.binomial(1, 0.4, n).astype(float)
    treated = rng.random(n) < _sigmoid(gpa_coef * gpa)
    outcome = np.clip(65 + rng.normal(0, 10, n), 0, 100)
    return _pack(gpa, age, residency, program, treated, outcome)


def confounded_subjects(n, seed, effect=5.0, strength=0.7, intercept=-1.2):
    """Confounded assignment: covariates drive both treatment and outcome.

    The intercept keeps the treated share near 30% so every treated subject
    has close controls available; one-to-one matching cannot balance arms
    that exhaust the control pool.
    """
    rng = np.random.default_rng(seed)
    gpa = rng.normal(0, 1, n)
    age = rng.normal(0, 1, n)
    residency = rng.binomial(1, 0.3, n).astype(float)
    program = rng.binomial(1, 0.4, n).astype(float)
    logit = intercept + strength * (1.0 * gpa - 0.6 * age + 0.7 * residency + 0.5 * program)
    treated = rng.random(n) < _sigmoid(logit)
    outcome = np.clip(
        60
        + effect * treated
        + 5.0 * gpa
        - 2.5 * age
        + 3.0 * residency
        + 2.0 * program
        + rng.normal(0, 8, n),
        0,
        100,
    )
    return _pack(gpa, age, residency, program, treated, outcome)


def _pack(gpa, age, residency, program, treated, outcome):
    return [
        Subject(
            id=f"s{i:05d}",
            treated=bool(treated[i]),
            covariates={
                "gpa": float(gpa[i]),
                "age": float(age[i]),
                "residency": float(residency[i]),
                "program_level": float(program[i]),
            },
            outcome=float(outcome[i]),
        )
        for i in range(len(gpa))
    ]


def subjects_to_csv(subjects):
    lines = ["id,treated,gpa,age,residency,program_level,outcome"]
    for s in subjects:
        c = s.covariates
        lines.append(
            f"{s.id},{int(s.treated)},{c['gpa']},{c['age']},"
            f"{int(c['residency'])},{int(c['program_level'])},{s.outcome}"
        )
    return "\n".join(lines) + "\n"
