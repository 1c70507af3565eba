"""Bounded cost evaluation with adaptive capping and incumbent bookkeeping."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .execution import Backend, RunCache, RunRecord, RunStatus, can_reuse, get_or_run
from .space import Configuration

__all__ = [
    "CAPPING_MODES",
    "BudgetExhausted",
    "InvariantViolation",
    "CostEstimate",
    "Evaluator",
    "par",
    "penalized_cost",
]

CAPPING_MODES = ("none", "tp", "aggressive")
INF = math.inf
# Captimes get this much relative headroom over n * bound - total. Without it
# n * (total / n) can round below total, and a configuration tying the bound
# exactly would have its last run cut short and be rejected.
CAP_SLACK = 1e-9


class BudgetExhausted(Exception):
    """Raised before a fresh target run once the configuration budget is used up."""


class InvariantViolation(AssertionError):
    pass


@dataclass(frozen=True, order=True)
class CostEstimate:
    """PAR estimate, or a penalty-encoded value when the bound was exceeded.

    Penalty-encoded values are ``penalty * cutoff + unsolved`` and so exceed
    every real PAR; among them fewer unsolved wins, then the smaller
    ``tiebreak`` (penalized runtime up to the rejecting run).
    """

    value: float
    tiebreak: float = 0.0
    n_runs: int = field(default=0, compare=False)
    capped: bool = field(default=False, compare=False)
    unsolved_at_bound: int = field(default=0, compare=False)


def penalized_cost(record: RunRecord, penalty: float, cutoff: float) -> float:
    return record.outcome.cost if record.successful else penalty * cutoff


def par(records: Iterable[RunRecord], penalty: float = 10.0, cutoff: float = INF) -> float:
    """Penalized average runtime: unsuccessful runs count ``penalty * cutoff``."""
    total = 0.0
    n = 0
    for rec in records:
        total += penalized_cost(rec, penalty, cutoff)
        n += 1
    if n == 0:
        raise ValueError("PAR of zero runs")
    return total / n


class Evaluator:
    """Owns the run cache and the incumbent for one configurator run.

    ``objective`` follows the bounded-evaluation procedure: keep the incumbent
    at least as well sampled as anything else, optionally tighten the bound to
    ``bm`` times the incumbent's cost, cap each run so the partial mean cannot
    pass the bound, and stop as soon as it does.
    """

    def __init__(
        self,
        backend: Backend,
        instances,
        cutoff: float,
        penalty: float = 10.0,
        capping: str = "none",
        bm: float = 2.0,
        incumbent: Configuration | None = None,
        budget_target_s: float = INF,
        budget_wall_s: float = INF,
        wall_clock: Callable[[], float] | None = None,
        check_invariant: bool = False,
    ):
        if cutoff <= 0:
            raise ValueError("cutoff must be positive")
        if penalty < 1:
            raise ValueError("penalty factor must be >= 1")
        if capping not in CAPPING_MODES:
            raise ValueError(f"capping must be one of {CAPPING_MODES}")
        if not bm >= 1:
            raise ValueError("bound multiplier must be >= 1")
        self.backend = backend
        self.instances = instances
        self.cutoff = float(cutoff)
        self.penalty = float(penalty)
        self.capping = capping
        self.bm = float(bm)
        self.cache = RunCache(cutoff=self.cutoff, penalty=self.penalty)
        self.incumbent = incumbent
        self.budget_target_s = budget_target_s
        self.budget_wall_s = budget_wall_s
        if wall_clock is None:
            t0 = time.perf_counter()
            wall_clock = lambda: time.perf_counter() - t0  # noqa: E731
        self.wall_clock = wall_clock
        self.check_invariant = check_invariant
        self.calls = 0
        self.incumbent_listeners: list[Callable[[Configuration], None]] = []

    # -- bookkeeping -------------------------------------------------------
    def n_runs(self, config: Configuration) -> int:
        return self.cache.n_runs(config)

    @property
    def consumed(self) -> float:
        return self.cache.consumed

    def budget_exhausted(self) -> bool:
        return self.cache.consumed >= self.budget_target_s or self.wall_clock() >= self.budget_wall_s

    def _before_run(self) -> None:
        if self.budget_exhausted():
            raise BudgetExhausted()

    def _cost(self, rec: RunRecord) -> float:
        return rec.outcome.cost if rec.successful else self.penalty * self.cutoff

    def total(self, config: Configuration, n: int | None = None) -> float:
        recs = self.cache.records(config)
        if n is not None:
            recs = recs[:n]
        sums = self.cache.complete_prefix(config)
        if recs and len(sums) >= len(recs):
            return sums[len(recs) - 1]
        total = 0.0
        for rec in recs:
            total += self._cost(rec)
        return total

    def estimate(self, config: Configuration, n: int | None = None) -> float:
        """PAR over the first ``n`` cached runs (all of them by default)."""
        k = self.n_runs(config) if n is None else min(n, self.n_runs(config))
        if k == 0:
            return INF
        return self.total(config, k) / k

    def _set_incumbent(self, config: Configuration) -> None:
        self.incumbent = config
        for cb in self.incumbent_listeners:
            cb(config)

    def _has_capped_runs(self, config: Configuration, n: int) -> bool:
        return len(self.cache.complete_prefix(config)) < min(n, self.n_runs(config))

    def assert_invariant(self) -> None:
        inc = self.incumbent
        if inc is not None and self.n_runs(inc) < self.cache.max_runs:
            raise InvariantViolation(
                f"incumbent has {self.n_runs(inc)} runs but some configuration has {self.cache.max_runs}"
            )

    # -- the bounded objective ---------------------------------------------
    def objective(self, config: Configuration, n: int, bound: float = INF, mode: str | None = None) -> CostEstimate:
        self.calls += 1
        try:
            return self._objective(config, n, bound, mode or self.capping)
        finally:
            if self.check_invariant:
                self.assert_invariant()

    def _objective(self, config: Configuration, n: int, bound: float, mode: str) -> CostEstimate:
        if n < 1:
            raise ValueError("objective needs N >= 1")
        if not bound > 0:
            raise ValueError("bound must be positive")
        if mode not in CAPPING_MODES:
            raise ValueError(f"unknown capping mode {mode!r}")
        if mode == "none":
            bound = INF
        if self.incumbent is None:
            self._set_incumbent(config)
        inc = self.incumbent
        if config != inc and self.n_runs(inc) < n:
            self.objective(inc, n, INF, mode)
        if mode == "aggressive" and config != inc:
            inc_cost = self.objective(inc, n, INF, mode).value
            if inc_cost > 0:
                bound = min(bound, self.bm * inc_cost)

        cutoff = self.cutoff
        timeout_cost = self.penalty * cutoff
        sums = self.cache.complete_prefix(config)
        total = 0.0
        i = 0
        while i < n:
            # after slot i the running total equals the cached prefix sum exactly
            k = self._reusable_prefix(sums, n, bound, i)
            if k > i:
                total = sums[k - 1]
                i = k
                if i == n:
                    break
            i += 1
            captime = cutoff if bound == INF else min(cutoff, n * bound * (1.0 + CAP_SLACK) - total)
            if captime <= 0:
                return self._rejected(n, i, total)
            recs = self.cache.records(config)
            rec = recs[i - 1] if i <= len(recs) else None
            if rec is None or not can_reuse(rec, captime):
                rec = get_or_run(self.cache, self.backend, config, i, captime, self.instances, self._before_run)
                sums = self.cache.complete_prefix(config)
            if rec.outcome.status is RunStatus.SUCCESS:
                cost = rec.outcome.cost
            elif rec.captime >= cutoff:
                cost = timeout_cost
            else:
                # cut short at n*bound - total, so its true cost already passes the bound
                return self._rejected(n, i, total + rec.captime)
            if (total + cost) / n > bound:
                return self._rejected(n, i, total + cost)
            total += cost

        if config != inc and n == self.n_runs(inc):
            if self._has_capped_runs(inc, n):
                self.objective(inc, n, INF, mode)
            if total < self.total(inc, n):
                self._set_incumbent(config)
        return CostEstimate(total / n, 0.0, n, False, 0)

    def _reusable_prefix(self, sums: list[float], n: int, bound: float, done: int) -> int:
        """How far past slot ``done`` the slot loop would run without doing anything.

        Over complete slots the loop only accumulates, so it can jump ahead
        to just before the first slot that could be re-run, hit the bound or
        exhaust the remaining capacity. All three conditions are monotone in
        the slot index. Slots whose running sum is within ``CAP_SLACK`` of
        ``n * bound`` are left to the loop, where rounding decides.
        """
        hi = min(n, len(sums))
        if hi <= done:
            return done
        if bound == INF:
            return hi
        nb = n * bound
        loose = nb * (1.0 + CAP_SLACK)
        near = nb * (1.0 - CAP_SLACK)
        cutoff = self.cutoff

        def ok(i: int) -> bool:
            before = sums[i - 2] if i > 1 else 0.0
            return (
                min(cutoff, loose - before) > 0
                and not sums[i - 1] / n > bound
                and sums[i - 1] < near
            )

        lo = done
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if ok(mid):
                lo = mid
            else:
                hi = mid - 1
        return lo

    def _rejected(self, n: int, i: int, partial: float) -> CostEstimate:
        unsolved = n + 1 - i
        return CostEstimate(self.penalty * self.cutoff + unsolved, partial, n, True, unsolved)
