"""Offline assessment of configurator results."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .execution import Backend, RunStatus
from .space import Configuration

__all__ = [
    "EvaluationReport",
    "TrainingResult",
    "test_performance",
    "select_best_of_k",
    "paired_wilcoxon",
    "signed_rank_null",
    "write_report",
    "OverlapError",
    "EXACT_MAX_N",
    "SIGNIFICANCE",
]

EXACT_MAX_N = 25
SIGNIFICANCE = 0.05


class OverlapError(ValueError):
    """Test instances overlap the training instances."""


@dataclass
class EvaluationReport:
    config_id: str
    assignment: dict[str, str]
    train_par: float | None
    test_par: float
    cutoff: float
    penalty: float
    timeouts: int
    instances: list[str] = field(default_factory=list)
    costs: list[float] = field(default_factory=list)
    statuses: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        d = asdict(self)
        for k in ("instances", "costs", "statuses"):
            d.pop(k)
        d["n_test"] = len(self.instances)
        return d


# not a pytest test despite the name
def test_performance(
    config: Configuration,
    test_list: Sequence[tuple[str, int]],
    cutoff: float,
    backend: Backend,
    penalty: float = 10.0,
    train_instances: Sequence[str] | None = None,
    train_par: float | None = None,
) -> EvaluationReport:
    """One run per test (instance, seed) at the full cutoff, aggregated as PAR."""
    if train_instances is not None:
        overlap = {str(Path(i)) for i, _ in test_list} & {str(Path(i)) for i in train_instances}
        if overlap:
            raise OverlapError(f"test set overlaps the training set in {len(overlap)} instances, e.g. {sorted(overlap)[0]}")
    if not test_list:
        raise ValueError("empty test list")
    instances, costs, statuses = [], [], []
    total = 0.0
    timeouts = 0
    for instance, seed in test_list:
        out = backend.run(config, instance, seed, cutoff)
        instances.append(instance)
        costs.append(out.cost)
        statuses.append(out.status.value)
        if out.status is RunStatus.SUCCESS:
            total += out.cost
        else:
            total += penalty * cutoff
            timeouts += 1
    return EvaluationReport(
        config.key, config.assignment, train_par, total / len(test_list), cutoff, penalty,
        timeouts, instances, costs, statuses,
    )
test_performance.__test__ = False


@dataclass
class TrainingResult:
    run: int
    config: Configuration
    train_estimate: float
    n_runs: int = 0


def select_best_of_k(results: Sequence[TrainingResult]) -> TrainingResult:
    """Result with the lowest training estimate; ties go to the lower run index."""
    if not results:
        raise ValueError("no results to select from")
    return min(results, key=lambda r: (r.train_estimate, r.run))


def write_report(report: EvaluationReport, directory: str | Path, stem: str = "evaluation") -> tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / f"{stem}.csv"
    json_path = directory / f"{stem}.json"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["instance", "cost", "status"])
        for inst, cost, status in zip(report.instances, report.costs, report.statuses):
            w.writerow([inst, f"{cost:.6f}", status])
    with open(json_path, "w") as fh:
        json.dump(report.summary(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, json_path


# -- Wilcoxon signed-rank ------------------------------------------------------

def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=float)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def signed_rank_null(ranks: Sequence[float]) -> dict[float, float]:
    """Exact null distribution of W+ for the given (possibly tied) ranks.

    Dynamic programming over doubled ranks, which are integers even with
    mid-ranks.
    """
    doubled = [int(round(2 * r)) for r in ranks]
    counts = np.zeros(sum(doubled) + 1)
    counts[0] = 1.0
    for r in doubled:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:len(counts) - r]
        counts = counts + shifted
    counts /= 2.0 ** len(doubled)
    return {k / 2.0: c for k, c in enumerate(counts) if c > 0}


def paired_wilcoxon(costs_a: Sequence[float], costs_b: Sequence[float], min_pairs: int = 5) -> float:
    """Two-sided paired Wilcoxon signed-rank p-value.

    Zero differences are dropped and ties get mid-ranks. The null
    distribution is exact up to 25 nonzero pairs; beyond that a normal
    approximation with tie correction and continuity correction is used.
    """
    a = np.asarray(costs_a, dtype=float)
    b = np.asarray(costs_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be 1-d and of equal length")
    if len(a) < min_pairs:
        raise ValueError(f"need at least {min_pairs} pairs, got {len(a)}")
    d = a - b
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return 1.0
    ranks = _midranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    if n <= EXACT_MAX_N:
        dist = signed_rank_null(ranks)
        eps = 1e-9
        lower = sum(p for w, p in dist.items() if w <= w_plus + eps)
        upper = sum(p for w, p in dist.items() if w >= w_plus - eps)
        return float(min(1.0, 2.0 * min(lower, upper)))
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(np.abs(d), return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float((tie_counts**3 - tie_counts).sum()) / 48.0
    if var <= 0:
        return 1.0
    z = (abs(w_plus - mean) - 0.5) / math.sqrt(var)
    z = max(z, 0.0)
    return float(min(1.0, math.erfc(z / math.sqrt(2.0))))
