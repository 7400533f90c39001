"""Propensity-score-matching toolkit for quasi-experimental effect estimates.

Pipeline: standardize covariates, fit a logistic propensity model by
Newton/IRLS, greedily match each treated subject to its nearest unused
control within a caliper, then compare outcomes before and after matching
(group means/SDs, Cohen's d, t-test) with covariate balance diagnostics.

The t-test defaults to Welch's unequal-variance form; a pooled-variance
variant is available for replication debates.  The caliper defaults to the
raw propensity-score scale; a logit-scale interpretation is available via
``caliper_scale="logit"``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .errors import ValidationError

COVARIATES = ("gpa", "age", "residency", "program_level")
CSV_HEADER = ("id", "treated", "gpa", "age", "residency", "program_level", "outcome")

_RESIDENCY = {"domestic": 0.0, "international": 1.0}
_PROGRAM = {"bachelor": 0.0, "master": 1.0}


@dataclass
class Subject:
    id: str
    treated: bool
    covariates: dict[str, float]
    outcome: float

    def validate(self) -> None:
        missing = [c for c in COVARIATES if c not in self.covariates]
        if missing:
            raise ValidationError(
                f"subject {self.id} is missing covariates", missing=missing
            )
        for name, value in self.covariates.items():
            if value is None or not math.isfinite(float(value)):
                raise ValidationError(
                    f"subject {self.id} has a non-finite covariate {name}"
                )


@dataclass
class PropensityModel:
    coefficients: np.ndarray  # intercept first, then standardized covariates
    covariate_names: tuple[str, ...]
    means: np.ndarray
    sds: np.ndarray
    log_likelihood: float
    iterations: int
    standard_errors: np.ndarray = None
    ll_path: list[float] = field(default_factory=list)

    def scores(self, subjects: Sequence[Subject]) -> np.ndarray:
        X = _design_matrix(subjects, self.covariate_names, self.means, self.sds)
        p = _sigmoid(X @ self.coefficients)
        return np.clip(p, 1e-12, 1.0 - 1e-12)


@dataclass
class MatchedSet:
    pairs: list[tuple[str, str]]  # (treated id, control id)
    unmatched_treated: list[str]
    caliper: float
    caliper_scale: str = "score"


@dataclass
class GroupStats:
    n: int
    mean: float
    sd: float


@dataclass
class EffectReport:
    """Before/after-matching comparison shaped like a two-row summary table."""

    before: dict  # {"treated": GroupStats, "control": GroupStats, "d", "t", "p"}
    after: dict
    balance: dict  # covariate -> {"before": smd, "after": smd}
    histograms: dict
    caliper: float
    n_pairs: int
    unmatched_treated: int

    def to_json(self) -> dict:
        def group(g):
            return {"n": g.n, "mean": g.mean, "sd": g.sd}

        def row(r):
            return {
                "treated": group(r["treated"]),
                "control": group(r["control"]),
                "cohens_d": r["d"],
                "t": r["t"],
                "df": r["df"],
                "p_value": r["p"],
            }

        return {
            "non_matched": row(self.before),
            "matched": row(self.after),
            "balance": self.balance,
            "histograms": self.histograms,
            "caliper": self.caliper,
            "n_pairs": self.n_pairs,
            "unmatched_treated": self.unmatched_treated,
        }


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _design_matrix(subjects, names, means, sds) -> np.ndarray:
    raw = np.array([[s.covariates[c] for c in names] for s in subjects], dtype=float)
    Z = (raw - means) / sds
    return np.column_stack([np.ones(len(subjects)), Z])


def _check_separation(subjects: Sequence[Subject], names) -> None:
    treated = [s for s in subjects if s.treated]
    control = [s for s in subjects if not s.treated]
    for name in names:
        t_vals = np.array([s.covariates[name] for s in treated])
        c_vals = np.array([s.covariates[name] for s in control])
        if t_vals.min() > c_vals.max() or t_vals.max() < c_vals.min():
            raise ValidationError(
                f"perfect separation on covariate {name!r}", covariate=name
            )


def fit_propensity(
    subjects: Sequence[Subject],
    covariate_names: Sequence[str] = COVARIATES,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> PropensityModel:
    """Logistic regression of treatment on standardized covariates.

    Newton updates with step halving keep the log-likelihood non-decreasing;
    convergence is declared at gradient infinity-norm <= ``tol``.
    """
    subjects = list(subjects)
    for s in subjects:
        s.validate()
    y = np.array([1.0 if s.treated else 0.0 for s in subjects])
    if y.sum() == 0 or y.sum() == len(y):
        raise ValidationError("both arms need at least one subject")
    _check_separation(subjects, covariate_names)

    raw = np.array([[s.covariates[c] for c in covariate_names] for s in subjects])
    means = raw.mean(axis=0)
    sds = raw.std(axis=0, ddof=1)
    if np.any(sds == 0):
        flat = [c for c, sd in zip(covariate_names, sds) if sd == 0]
        raise ValidationError("constant covariates cannot be standardized", covariates=flat)

    X = np.column_stack([np.ones(len(subjects)), (raw - means) / sds])
    beta = np.zeros(X.shape[1])

    def loglik(b):
        eta = X @ b
        # log(1 + exp(eta)) computed stably
        return float(y @ eta - np.logaddexp(0.0, eta).sum())

    ll = loglik(beta)
    path = [ll]
    iterations = 0
    for iterations in range(1, max_iter + 1):
        mu = _sigmoid(X @ beta)
        grad = X.T @ (y - mu)
        if np.max(np.abs(grad)) <= tol:
            iterations -= 1
            break
        W = np.clip(mu * (1.0 - mu), 1e-12, None)
        H = X.T @ (W[:, None] * X)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        # halve until the likelihood does not decrease
        scale = 1.0
        for _ in range(50):
            candidate = beta + scale * step
            ll_new = loglik(candidate)
            if ll_new >= ll - 1e-12:
                break
            scale /= 2.0
        beta = beta + scale * step
        ll = ll_new
        path.append(ll)

    if np.max(np.abs(beta[1:])) > 30.0:
        worst = covariate_names[int(np.argmax(np.abs(beta[1:])))]
        raise ValidationError(
            f"propensity fit diverged; quasi-separation on covariate {worst!r}",
            covariate=worst,
        )
    mu = _sigmoid(X @ beta)
    W = np.clip(mu * (1.0 - mu), 1e-12, None)
    hessian = X.T @ (W[:, None] * X)
    ses = np.sqrt(np.diag(np.linalg.inv(hessian)))
    return PropensityModel(
        coefficients=beta,
        covariate_names=tuple(covariate_names),
        means=means,
        sds=sds,
        log_likelihood=ll,
        iterations=iterations,
        standard_errors=ses,
        ll_path=path,
    )


def match(
    subjects: Sequence[Subject],
    model: PropensityModel,
    caliper: float = 0.05,
    caliper_scale: str = "score",
) -> MatchedSet:
    """Greedy one-to-one nearest-neighbour matching without replacement.

    Treated subjects are processed in descending propensity order; each takes
    the closest unused control within the caliper, or is dropped.
    """
    if caliper <= 0:
        raise ValidationError("caliper must be positive")
    if caliper_scale not in ("score", "logit"):
        raise ValidationError("caliper_scale must be score or logit")
    subjects = list(subjects)
    scores = model.scores(subjects)
    if caliper_scale == "logit":
        scores = np.log(scores / (1.0 - scores))

    treated = [(s.id, p) for s, p in zip(subjects, scores) if s.treated]
    controls = sorted(
        ((float(p), s.id) for s, p in zip(subjects, scores) if not s.treated)
    )
    control_scores = [p for p, _ in controls]
    used = [False] * len(controls)

    pairs: list[tuple[str, str]] = []
    unmatched: list[str] = []
    import bisect

    for treated_id, p in sorted(treated, key=lambda t: (-t[1], t[0])):
        idx = bisect.bisect_left(control_scores, p)
        best: Optional[int] = None
        best_dist = float("inf")
        # scan outward from the insertion point for the nearest unused control
        left, right = idx - 1, idx
        while left >= 0 or right < len(controls):
            if left >= 0:
                d = abs(control_scores[left] - p)
                if d < best_dist:
                    if not used[left]:
                        best, best_dist = left, d
                        left -= 1
                        continue
                    left -= 1
                    continue
                left = -1  # too far on this side
            if right < len(controls):
                d = abs(control_scores[right] - p)
                if d < best_dist:
                    if not used[right]:
                        best, best_dist = right, d
                        right += 1
                        continue
                    right += 1
                    continue
                right = len(controls)
        if best is not None and best_dist <= caliper:
            used[best] = True
            pairs.append((treated_id, controls[best][1]))
        else:
            unmatched.append(treated_id)
    return MatchedSet(
        pairs=pairs, unmatched_treated=unmatched, caliper=caliper, caliper_scale=caliper_scale
    )


def _as_stats(group) -> GroupStats:
    if isinstance(group, GroupStats):
        return group
    if isinstance(group, dict):
        return GroupStats(n=int(group["n"]), mean=float(group["mean"]), sd=float(group["sd"]))
    values = np.asarray(list(group), dtype=float)
    if values.size < 2:
        raise ValidationError("groups need at least two observations")
    return GroupStats(
        n=int(values.size), mean=float(values.mean()), sd=float(values.std(ddof=1))
    )


def cohens_d(group_a, group_b) -> float:
    """Pooled-SD standardized mean difference; accepts samples or summaries."""
    a, b = _as_stats(group_a), _as_stats(group_b)
    if a.n < 2 or b.n < 2:
        raise ValidationError("groups need at least two observations")
    pooled = math.sqrt(
        ((a.n - 1) * a.sd**2 + (b.n - 1) * b.sd**2) / (a.n + b.n - 2)
    )
    if pooled == 0:
        return 0.0
    return (a.mean - b.mean) / pooled


def t_test(samples_a, samples_b, pooled: bool = False) -> dict:
    """Two-sided t-test; Welch by default, classic pooled-variance on request."""
    a, b = _as_stats(samples_a), _as_stats(samples_b)
    if a.n < 2 or b.n < 2:
        raise ValidationError("groups need at least two observations")
    va, vb = a.sd**2 / a.n, b.sd**2 / b.n
    if pooled:
        df = a.n + b.n - 2
        sp2 = ((a.n - 1) * a.sd**2 + (b.n - 1) * b.sd**2) / df
        denom = math.sqrt(sp2 * (1 / a.n + 1 / b.n))
    else:
        denom = math.sqrt(va + vb)
        if va + vb > 0:
            df = (va + vb) ** 2 / (va**2 / (a.n - 1) + vb**2 / (b.n - 1))
        else:
            df = a.n + b.n - 2
    if denom == 0:
        t = 0.0 if a.mean == b.mean else math.copysign(math.inf, a.mean - b.mean)
    else:
        t = (a.mean - b.mean) / denom
    p = 1.0 if t == 0 else float(2.0 * stats.t.sf(abs(t), df))
    if math.isinf(t):
        p = 0.0
    return {"t": t, "df": float(df), "p_value": p}


def _smd(treated: np.ndarray, control: np.ndarray) -> float:
    denom = math.sqrt((treated.std(ddof=1) ** 2 + control.std(ddof=1) ** 2) / 2.0)
    if denom == 0:
        return 0.0
    return float((treated.mean() - control.mean()) / denom)


def balance_report(
    subjects: Sequence[Subject],
    matched: MatchedSet,
    model: PropensityModel,
    bins: int = 20,
) -> dict:
    """Standardized mean differences and histogram bins, before and after."""
    subjects = list(subjects)
    by_id = {s.id: s for s in subjects}
    scores = dict(zip((s.id for s in subjects), model.scores(subjects)))

    treated_ids = [s.id for s in subjects if s.treated]
    control_ids = [s.id for s in subjects if not s.treated]
    matched_t = [t for t, _ in matched.pairs]
    matched_c = [c for _, c in matched.pairs]

    def values(ids, getter):
        return np.array([getter(by_id[i]) for i in ids], dtype=float)

    report = {"smd": {}, "histograms": {}}
    dimensions = list(model.covariate_names) + ["propensity"]
    for name in dimensions:
        if name == "propensity":
            getter = lambda s: scores[s.id]  # noqa: E731
        else:
            getter = lambda s, n=name: s.covariates[n]  # noqa: E731
        tb, cb = values(treated_ids, getter), values(control_ids, getter)
        ta, ca = values(matched_t, getter), values(matched_c, getter)
        report["smd"][name] = {
            "before": _smd(tb, cb),
            "after": _smd(ta, ca) if len(ta) >= 2 else 0.0,
        }
        lo, hi = float(np.min(np.concatenate([tb, cb]))), float(np.max(np.concatenate([tb, cb])))
        if lo == hi:
            hi = lo + 1.0
        edges = np.linspace(lo, hi, bins + 1)
        report["histograms"][name] = {
            "edges": edges.tolist(),
            "treated_before": np.histogram(tb, edges)[0].tolist(),
            "control_before": np.histogram(cb, edges)[0].tolist(),
            "treated_after": np.histogram(ta, edges)[0].tolist(),
            "control_after": np.histogram(ca, edges)[0].tolist(),
        }
    return report


def run_pipeline(
    subjects: Sequence[Subject],
    caliper: float = 0.05,
    caliper_scale: str = "score",
    pooled_t: bool = False,
) -> EffectReport:
    """Fit, match, and compare outcomes before and after matching."""
    subjects = list(subjects)
    model = fit_propensity(subjects)
    matched = match(subjects, model, caliper=caliper, caliper_scale=caliper_scale)
    by_id = {s.id: s for s in subjects}

    treated_all = [s.outcome for s in subjects if s.treated]
    control_all = [s.outcome for s in subjects if not s.treated]
    treated_matched = [by_id[t].outcome for t, _ in matched.pairs]
    control_matched = [by_id[c].outcome for _, c in matched.pairs]

    def comparison(t_vals, c_vals):
        t_stats, c_stats = _as_stats(t_vals), _as_stats(c_vals)
        welch = t_test(t_vals, c_vals, pooled=pooled_t)
        return {
            "treated": t_stats,
            "control": c_stats,
            "d": cohens_d(t_stats, c_stats),
            "t": welch["t"],
            "df": welch["df"],
            "p": welch["p_value"],
        }

    balance = balance_report(subjects, matched, model)
    return EffectReport(
        before=comparison(treated_all, control_all),
        after=comparison(treated_matched, control_matched),
        balance=balance["smd"],
        histograms=balance["histograms"],
        caliper=caliper,
        n_pairs=len(matched.pairs),
        unmatched_treated=len(matched.unmatched_treated),
    )


# ---------------------------------------------------------------------------
# subjects CSV input
# ---------------------------------------------------------------------------


def _parse_binary(value: str, mapping: dict[str, float], column: str) -> float:
    v = value.strip().lower()
    if v in mapping:
        return mapping[v]
    try:
        num = float(v)
    except ValueError:
        raise ValidationError(
            f"cannot parse {column} value {value!r}", column=column
        ) from None
    if num not in (0.0, 1.0):
        raise ValidationError(f"{column} must be binary", column=column, value=value)
    return num


def _parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "t"):
        return True
    if v in ("0", "false", "no", "f"):
        return False
    raise ValidationError(f"cannot parse treated flag {value!r}")


def read_subjects_csv(text: str) -> list[Subject]:
    reader = csv.reader(io.StringIO(text))
    rows = [r for r in reader if r]
    if not rows or tuple(c.strip() for c in rows[0]) != CSV_HEADER:
        raise ValidationError(
            "subjects CSV must start with header " + ",".join(CSV_HEADER)
        )
    subjects = []
    for row in rows[1:]:
        if len(row) != len(CSV_HEADER):
            raise ValidationError("bad subjects row", row=row)
        sid, treated, gpa, age, residency, program, outcome = row
        subject = Subject(
            id=sid,
            treated=_parse_bool(treated),
            covariates={
                "gpa": float(gpa),
                "age": float(age),
                "residency": _parse_binary(residency, _RESIDENCY, "residency"),
                "program_level": _parse_binary(program, _PROGRAM, "program_level"),
            },
            outcome=float(outcome),
        )
        subject.validate()
        subjects.append(subject)
    return subjects


def histograms_to_csv(histograms: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dimension", "bin_low", "bin_high", "series", "count"])
    for name, h in histograms.items():
        edges = h["edges"]
        for series in ("treated_before", "control_before", "treated_after", "control_after"):
            for i, count in enumerate(h[series]):
                w.writerow([name, edges[i], edges[i + 1], series, count])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# CLI: psm run / psm d
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="psm")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="full pipeline over a subjects CSV")
    p_run.add_argument("--input", required=True)
    p_run.add_argument("--caliper", type=float, default=0.05)
    p_run.add_argument("--caliper-scale", choices=("score", "logit"), default="score")
    p_run.add_argument("--pooled-t", action="store_true", help="pooled-variance t-test")
    p_run.add_argument("--out", help="write the JSON report here (default stdout)")
    p_run.add_argument("--hist-csv", help="also write histogram bins as CSV")

    p_d = sub.add_parser("d", help="Cohen's d from summary statistics")
    for flag in ("na", "ma", "sa", "nb", "mb", "sb"):
        p_d.add_argument(f"--{flag}", type=float, required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "d":
            d = cohens_d(
                {"n": args.na, "mean": args.ma, "sd": args.sa},
                {"n": args.nb, "mean": args.mb, "sd": args.sb},
            )
            print(f"{d:.6f}")
            return 0
        with open(args.input, encoding="utf-8") as fh:
            subjects = read_subjects_csv(fh.read())
        report = run_pipeline(
            subjects,
            caliper=args.caliper,
            caliper_scale=args.caliper_scale,
            pooled_t=args.pooled_t,
        )
        blob = json.dumps(report.to_json(), indent=2)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(blob + "\n")
        else:
            print(blob)
        if args.hist_csv:
            with open(args.hist_csv, "w", encoding="utf-8") as fh:
                fh.write(histograms_to_csv(report.histograms))
    except ValidationError as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
