"""Acceptance predicates: fixed-N comparison and FocusedILS domination with bonus runs."""
from __future__ import annotations

import math

from .objective import CostEstimate, Evaluator
from .space import Configuration

__all__ = ["BetterN", "BetterFocused", "dominates"]

INF = math.inf


def _bound_from(est: CostEstimate, evaluator: Evaluator) -> float:
    if evaluator.capping == "none" or not est.value > 0:
        return INF
    return est.value


class BetterN:
    """``theta1`` is at least as good as ``theta2`` on the first ``n`` list entries.

    ``theta2`` is evaluated first without a bound; ``theta1`` is then capped at
    ``theta2``'s estimate. Ties go to ``theta1`` (the candidate move).
    """

    def __init__(self, evaluator: Evaluator, n: int):
        if n < 1:
            raise ValueError("N must be >= 1")
        self.evaluator = evaluator
        self.n = n

    def __call__(self, theta1: Configuration, theta2: Configuration) -> bool:
        ev = self.evaluator
        c2 = ev.objective(theta2, self.n, INF)
        c1 = ev.objective(theta1, self.n, _bound_from(c2, ev))
        return c1 <= c2


def dominates(evaluator: Evaluator, theta1: Configuration, theta2: Configuration, bound: float = INF) -> bool:
    """At least as many runs as ``theta2`` and no worse on ``theta2``'s runs."""
    n2 = evaluator.n_runs(theta2)
    if evaluator.n_runs(theta1) < n2:
        return False
    if n2 == 0:
        return True
    return evaluator.objective(theta1, n2, bound) <= evaluator.objective(theta2, n2, bound)


class BetterFocused:
    """FocusedILS comparison.

    Runs are added to the less-sampled configuration (to both when equal)
    until one dominates the other. A win for ``theta1`` earns it ``bonus``
    extra runs, where ``bonus`` counts comparisons since the last win.
    """

    def __init__(self, evaluator: Evaluator):
        self.evaluator = evaluator
        self.bonus = 0
        self.last_iterations = 0

    def _cap(self, theta_max: Configuration, n: int) -> float:
        ev = self.evaluator
        if ev.capping == "none":
            return INF
        return _bound_from(ev.objective(theta_max, n, INF), ev)

    def __call__(self, theta1: Configuration, theta2: Configuration) -> bool:
        ev = self.evaluator
        self.bonus += 1
        if ev.n_runs(theta1) <= ev.n_runs(theta2):
            theta_min, theta_max = theta1, theta2
            if ev.n_runs(theta1) == ev.n_runs(theta2):
                self.bonus += 1
        else:
            theta_min, theta_max = theta2, theta1

        self.last_iterations = 0
        while True:
            self.last_iterations += 1
            before = ev.n_runs(theta_min)
            i = before + 1
            bound = _bound_from(ev.objective(theta_max, i, INF), ev)
            ev.objective(theta_min, i, bound)
            # domination is checked at theta2's run count, capped at theta_max's cost there
            b12 = self._cap(theta_max, ev.n_runs(theta2)) if ev.n_runs(theta2) else INF
            one_two = dominates(ev, theta1, theta2, b12)
            if one_two:
                break
            b21 = self._cap(theta_max, ev.n_runs(theta1)) if ev.n_runs(theta1) else INF
            if dominates(ev, theta2, theta1, b21):
                break
            if ev.n_runs(theta_min) == before:
                # theta_min was rejected before reaching its new run; theta_max wins
                one_two = theta_max == theta1
                break

        if one_two:
            ev.objective(theta1, ev.n_runs(theta1) + self.bonus, INF)
            self.bonus = 0
            return True
        return False
