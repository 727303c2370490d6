"""Accuracy tables, t-tests, alpha sweeps and cross-validation."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from statistics import mean

import numpy as np

from .speaker import UtteranceScore, rank_scores

SIGNIFICANCE_THRESHOLD = 1.645  # one-tailed t at the 0.05 level
DEFAULT_ALPHAS = tuple(round(0.1 * k, 1) for k in range(11))


@dataclass(frozen=True)
class TrialRecord:
    true_speaker: str
    predicted_speaker: str
    sentence: str
    environment: str
    gender: str
    variant: str
    alpha: float
    path: str = ""

    @property
    def correct(self) -> bool:
        return self.true_speaker == self.predicted_speaker


@dataclass
class AccuracyTable:
    """Percent correct per (variant, gender, environment) plus the average of
    the gender cells per (variant, environment)."""

    cells: dict[tuple[str, str, str], float]
    counts: dict[tuple[str, str, str], tuple[int, int]]
    averages: dict[tuple[str, str], float]

    def get(self, variant, gender, environment):
        """Cell value, or None for a cell with no trials."""
        if gender == "average":
            return self.averages.get((variant, environment))
        return self.cells.get((variant, gender, environment))

    @property
    def variants(self) -> list[str]:
        return sorted({k[0] for k in self.cells}, key=_variant_order)

    @property
    def environments(self) -> list[str]:
        return sorted({k[2] for k in self.cells})

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["variant", "gender", "environment", "correct", "total", "accuracy"])
        for variant in self.variants:
            for gender in ("male", "female"):
                for env in self.environments:
                    key = (variant, gender, env)
                    if key in self.cells:
                        c, n = self.counts[key]
                        writer.writerow([variant, gender, env, c, n, f"{self.cells[key]:.4f}"])
            for env in self.environments:
                if (variant, env) in self.averages:
                    writer.writerow([variant, "average", env, "", "",
                                     f"{self.averages[(variant, env)]:.4f}"])
        return buf.getvalue()

    def to_text(self, title: str = "Speaker identification performance (%)") -> str:
        envs = self.environments
        lines = [title, ""]
        header = f"{'Model':<12}{'Gender':<9}" + "".join(f"{e.capitalize():>12}" for e in envs)
        lines += [header, "-" * len(header)]
        for variant in self.variants:
            first = True
            for gender in ("male", "female", "average"):
                row = f"{variant if first else '':<12}{gender.capitalize():<9}"
                for env in envs:
                    value = self.get(variant, gender, env)
                    row += f"{'-' if value is None else f'{value:.1f}':>12}"
                lines.append(row)
                first = False
        return "\n".join(lines) + "\n"


def _variant_order(name: str):
    order = ["LTRSPHMM1", "LTRSPHMM2", "CSPHMM1", "CSPHMM2",
             "LTRHMM1", "LTRHMM2", "CHMM1", "CHMM2"]
    return (order.index(name) if name in order else len(order), name)


def accuracy_table(records) -> AccuracyTable:
    records = list(records)
    if not records:
        raise ValueError("no trial records")
    tally: dict[tuple[str, str, str], list[int]] = {}
    for r in records:
        cell = tally.setdefault((r.variant, r.gender, r.environment), [0, 0])
        cell[0] += r.correct
        cell[1] += 1
    cells = {k: 100.0 * c / n for k, (c, n) in tally.items()}
    counts = {k: (c, n) for k, (c, n) in tally.items()}
    averages = {}
    for variant, env in sorted({(k[0], k[2]) for k in cells}):
        present = [cells[(variant, g, env)] for g in ("male", "female")
                   if (variant, g, env) in cells]
        averages[(variant, env)] = mean(present)
    return AccuracyTable(cells, counts, averages)


@dataclass(frozen=True)
class TTestResult:
    t_value: float
    n: int
    sd_pooled: float
    significant: bool


def t_from_summary(mean_a: float, mean_b: float, sd_a: float, sd_b: float, n: int) -> TTestResult:
    """t = (mean_a - mean_b) / sqrt((sd_a^2 + sd_b^2) / n).

    The pooled deviation divides the summed variances by n rather than
    using textbook pooling; this is deliberate.
    """
    if n < 2:
        raise ValueError("need samples of size n >= 2")
    sd_pooled = math.sqrt((sd_a * sd_a + sd_b * sd_b) / n)
    diff = mean_a - mean_b
    if sd_pooled == 0.0:
        t = 0.0 if diff == 0 else math.copysign(math.inf, diff)
    else:
        t = diff / sd_pooled
    return TTestResult(t, n, sd_pooled, t > SIGNIFICANCE_THRESHOLD)


def t_statistic(sample_a, sample_b) -> TTestResult:
    """Compare two equal-sized samples (e.g. per-subset accuracies).

    Standard deviations are sample deviations (ddof = 1).
    """
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("samples must be 1-D and of equal size")
    if len(a) < 2:
        raise ValueError("need samples of size n >= 2")
    return t_from_summary(float(a.mean()), float(b.mean()),
                          float(a.std(ddof=1)), float(b.std(ddof=1)), len(a))


@dataclass
class ScoredTrial:
    """Alpha-independent scores of one test utterance against every
    reference speaker of its sentence."""

    path: str
    true_speaker: str
    sentence: str
    environment: str
    gender: str
    variant: str
    scores: dict[str, UtteranceScore] = field(repr=False)

    def record(self, alpha: float, normalize: bool = False) -> TrialRecord:
        result = rank_scores(self.scores, alpha, normalize)
        return TrialRecord(self.true_speaker, result.winner, self.sentence, self.environment,
                           self.gender, self.variant, alpha, self.path)


def accuracy(records) -> float | None:
    records = list(records)
    if not records:
        return None
    return 100.0 * sum(r.correct for r in records) / len(records)


def alpha_sweep(trials, alphas=DEFAULT_ALPHAS, normalize: bool = False,
                rescore=None) -> dict[str, list[tuple[float, float]]]:
    """Accuracy against alpha for every environment.

    By default the cached scores in ``trials`` are re-fused for each alpha.
    ``rescore(trial)`` can be given to recompute a trial's scores from
    scratch at every alpha instead; both routes must agree.
    """
    trials = list(trials)
    curves: dict[str, list[tuple[float, float]]] = {}
    for alpha in alphas:
        per_env: dict[str, list[TrialRecord]] = {}
        for trial in trials:
            source = trial if rescore is None else rescore(trial)
            per_env.setdefault(trial.environment, []).append(source.record(alpha, normalize))
        for env, records in sorted(per_env.items()):
            curves.setdefault(env, []).append((float(alpha), accuracy(records)))
    return curves


def sweep_csv(curve: list[tuple[float, float]]) -> str:
    lines = ["alpha,accuracy"]
    lines += [f"{a:.1f},{acc:.4f}" for a, acc in curve]
    return "\n".join(lines) + "\n"


def partition(items, num_subsets: int, seed: int, strata=None) -> list[list]:
    """Random partition into ``num_subsets`` disjoint subsets.

    Items are shuffled within each stratum (``strata(item)`` gives the key)
    and dealt round-robin, continuing the deal across strata, so subset
    sizes differ by at most one overall and within every stratum.
    """
    items = list(items)
    if num_subsets < 1:
        raise ValueError("num_subsets must be positive")
    if len(items) < num_subsets:
        raise ValueError(f"cannot split {len(items)} items into {num_subsets} subsets")
    rng = np.random.default_rng(seed)
    groups: dict = {}
    for item in items:
        groups.setdefault(strata(item) if strata else None, []).append(item)
    subsets: list[list] = [[] for _ in range(num_subsets)]
    cursor = 0
    for key in sorted(groups, key=lambda k: (k is None, k)):
        members = groups[key]
        for idx in rng.permutation(len(members)):
            subsets[cursor % num_subsets].append(members[idx])
            cursor += 1
    return subsets


def summarize(values) -> tuple[float, float]:
    """Mean and sample standard deviation (0 for a single value)."""
    arr = np.asarray(list(values), dtype=np.float64)
    sd = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    return float(arr.mean()), sd
