"""Search drivers: ParamILS (BasicILS / FocusedILS), RandomSearch and SimpleLS."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .comparison import BetterFocused, BetterN
from .objective import BudgetExhausted, Evaluator
from .space import Configuration, ConfigurationSpace, neighbors, sample_random

__all__ = [
    "SearchParams",
    "Termination",
    "TrajectoryEntry",
    "Configurator",
    "TRAJECTORY_HEADER",
    "write_trajectory",
    "STRATEGIES",
]

STRATEGIES = ("basicils", "focusedils", "random", "simplels")
TRAJECTORY_HEADER = ("wall_s", "target_s", "iteration", "incumbent_id", "n_runs", "train_estimate")

Better = Callable[[Configuration, Configuration], bool]


@dataclass
class SearchParams:
    r: int = 10
    s: int = 3
    p_restart: float = 0.01
    n: int = 100
    capping: str = "aggressive"
    bm: float = 2.0

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("r must be >= 0")
        if self.s < 1:
            raise ValueError("s must be >= 1")
        if not 0.0 <= self.p_restart <= 1.0:
            raise ValueError("p_restart must lie in [0, 1]")
        if self.n < 1:
            raise ValueError("n must be >= 1")


@dataclass
class Termination:
    """Stop at the first of: target-time budget, wall budget, iteration count.

    ``stall_iterations`` also stops a search that made no progress for that
    many iterations. Once every reachable configuration is cached a fixed-N
    search cannot learn anything new, and on the simulated clock neither
    budget would ever move again.
    """

    target_s: float = math.inf
    wall_s: float = math.inf
    max_iterations: int | None = None
    stall_iterations: int | None = 1000


@dataclass(frozen=True)
class TrajectoryEntry:
    wall_s: float
    target_s: float
    iteration: int
    incumbent_id: str
    n_runs: int
    train_estimate: float

    def row(self) -> list[str]:
        return [
            f"{self.wall_s:.6f}",
            f"{self.target_s:.6f}",
            str(self.iteration),
            self.incumbent_id,
            str(self.n_runs),
            f"{self.train_estimate:.6f}",
        ]


def write_trajectory(entries, fh=None, comment: str | None = None) -> str:
    """Write the trajectory CSV (optionally preceded by a ``# comment`` line)."""
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRAJECTORY_HEADER)
    for e in entries:
        writer.writerow(e.row())
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text


@dataclass
class Configurator:
    """One configurator run: a space, an evaluator and a search RNG.

    All drivers are anytime: budget exhaustion anywhere inside an evaluation
    ends the search and the current incumbent is returned.
    """

    space: ConfigurationSpace
    evaluator: Evaluator
    rng: np.random.Generator
    params: SearchParams = field(default_factory=SearchParams)
    termination: Termination = field(default_factory=Termination)
    trajectory: list[TrajectoryEntry] = field(default_factory=list)
    visited: list[str] = field(default_factory=list)
    iteration: int = 0
    restarts: int = 0
    stalled: bool = False
    _seen: set = field(default_factory=set, repr=False)
    _count_slots: bool = field(default=False, repr=False)
    _mark: tuple = field(default=(), repr=False)
    _idle: int = field(default=0, repr=False)

    def __post_init__(self):
        self.evaluator.incumbent_listeners.append(lambda _cfg: self._log())

    # -- logging -----------------------------------------------------------
    def _log(self) -> None:
        ev = self.evaluator
        inc = ev.incumbent
        n = ev.n_runs(inc)
        if n == 0:
            return
        self.trajectory.append(
            TrajectoryEntry(ev.wall_clock(), ev.consumed, self.iteration, inc.key, n, ev.estimate(inc))
        )

    def _wrap(self, better: Better) -> Better:
        def tracked(theta1, theta2):
            self.visited.append(theta1.key)
            self._seen.add(theta1.key)
            return better(theta1, theta2)

        return tracked

    def _progress(self) -> tuple:
        # a fixed-N search learns only from configurations it has not compared
        # yet, which keeps capped and uncapped runs stalling at the same point;
        # FocusedILS also learns from extra runs on known configurations
        slots = self.evaluator.cache.slots if self._count_slots else 0
        return len(self._seen), slots

    def done(self) -> bool:
        ev = self.evaluator
        t = self.termination
        if t.max_iterations is not None and self.iteration >= t.max_iterations:
            return True
        progress = self._progress()
        if progress != self._mark:
            self._mark = progress
            self._idle = 0
        else:
            self._idle += 1
        if t.stall_iterations is not None and self._idle >= t.stall_iterations:
            self.stalled = True
            return True
        return ev.consumed >= t.target_s or ev.wall_clock() >= t.wall_s or ev.budget_exhausted()

    def _start(self, theta0: Configuration) -> None:
        ev = self.evaluator
        ev.budget_target_s = min(ev.budget_target_s, self.termination.target_s)
        ev.budget_wall_s = min(ev.budget_wall_s, self.termination.wall_s)
        if ev.incumbent is None:
            ev.incumbent = theta0

    def better(self, strategy: str) -> Better:
        if strategy in ("basicils", "random", "simplels"):
            return self._wrap(BetterN(self.evaluator, self.params.n))
        if strategy == "focusedils":
            self._count_slots = True
            return self._wrap(BetterFocused(self.evaluator))
        raise ValueError(f"unknown strategy {strategy!r}")

    # -- building blocks ---------------------------------------------------
    def iterative_first_improvement(self, theta: Configuration, better: Better) -> Configuration:
        # ties count as improvements, so a descent never steps back onto its own
        # path; otherwise two equal cached configurations would swap forever
        # without consuming budget
        seen = {theta}
        while True:
            current = theta
            for cand in neighbors(self.space, current, self.rng):
                if cand in seen:
                    continue
                if better(cand, current):
                    seen.add(cand)
                    theta = cand
                    break
            if theta == current:
                return theta

    def perturb(self, theta: Configuration) -> Configuration:
        for _ in range(self.params.s):
            nbh = neighbors(self.space, theta)
            if not nbh:
                break
            theta = nbh[int(self.rng.integers(len(nbh)))]
        return theta

    def _initialise(self, theta0: Configuration, better: Better) -> Configuration:
        for _ in range(self.params.r):
            theta = sample_random(self.space, self.rng)
            if better(theta, theta0):
                theta0 = theta
        return theta0

    # -- drivers -------------------------------------------------------------
    def paramils(self, theta0: Configuration, better: Better) -> Configuration:
        self._start(theta0)
        try:
            theta0 = self._initialise(theta0, better)
            theta_ils = self.iterative_first_improvement(theta0, better)
            self._log()
            while not self.done():
                self.iteration += 1
                theta = self.perturb(theta_ils)
                theta = self.iterative_first_improvement(theta, better)
                if better(theta, theta_ils):
                    theta_ils = theta
                if self.rng.random() < self.params.p_restart:
                    theta_ils = sample_random(self.space, self.rng)
                    self.restarts += 1
                self._log()
        except BudgetExhausted:
            self._log()
        return self.evaluator.incumbent

    def random_search(self, theta0: Configuration) -> Configuration:
        self._start(theta0)
        better = self.better("random")
        theta_inc = theta0
        try:
            while not self.done():
                self.iteration += 1
                theta = sample_random(self.space, self.rng)
                if better(theta, theta_inc):
                    theta_inc = theta
                self._log()
        except BudgetExhausted:
            self._log()
        return self.evaluator.incumbent

    def simple_ls(self, theta0: Configuration) -> Configuration:
        self._start(theta0)
        better = self.better("simplels")
        try:
            theta0 = self._initialise(theta0, better)
            self.iterative_first_improvement(theta0, better)
        except BudgetExhausted:
            pass
        self._log()
        return self.evaluator.incumbent

    def run(self, strategy: str, theta0: Configuration | None = None) -> Configuration:
        theta0 = theta0 if theta0 is not None else self.space.default
        if strategy == "random":
            return self.random_search(theta0)
        if strategy == "simplels":
            return self.simple_ls(theta0)
        return self.paramils(theta0, self.better(strategy))
