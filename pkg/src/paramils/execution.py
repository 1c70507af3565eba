"""Target-algorithm execution: subprocess wrapper backend, synthetic surrogate, run cache."""
from __future__ import annotations

import hashlib
import json
import math
import os
import re
import shlex
import signal
import subprocess
import time
from dataclasses import dataclass, field
from enum import Enum
from itertools import accumulate, islice
from pathlib import Path
from statistics import NormalDist
from typing import Callable, Mapping, Protocol, Sequence

from .space import Configuration

__all__ = [
    "RunStatus",
    "RunOutcome",
    "RunRecord",
    "RunCache",
    "Backend",
    "SurrogateModel",
    "SurrogateBackend",
    "SubprocessBackend",
    "TargetExecutionError",
    "get_or_run",
    "can_reuse",
    "surrogate_run",
    "run_target",
    "parse_result_line",
    "build_command",
]

GRACE_PERIOD_S = 1.0
_RESULT_RE = re.compile(r"^RESULT:\s*(SUCCESS|TIMEOUT|CRASHED)\s+([-+0-9.eEinfa]+)\s*$")
_STD_NORMAL = NormalDist()


class TargetExecutionError(RuntimeError):
    """The target could not be started at all; not charged to any configuration."""


class RunStatus(str, Enum):
    SUCCESS = "SUCCESS"
    TIMEOUT = "TIMEOUT"
    CRASHED = "CRASHED"


@dataclass(frozen=True)
class RunOutcome:
    status: RunStatus
    cost: float
    wall_time: float | None = None

    @property
    def successful(self) -> bool:
        return self.status is RunStatus.SUCCESS


@dataclass(frozen=True)
class RunRecord:
    config_key: str
    instance_index: int
    instance: str
    seed: int
    captime: float
    outcome: RunOutcome

    def __post_init__(self):
        if self.captime <= 0:
            raise ValueError("captime must be positive")
        if self.instance_index < 1:
            raise ValueError("instance_index is 1-based")

    @property
    def successful(self) -> bool:
        return self.outcome.successful


class Backend(Protocol):
    consumed: float

    def run(self, config: Configuration, instance: str, seed: int, captime: float) -> RunOutcome:
        ...


@dataclass
class RunCache:
    """Per-configuration run sequences, slot ``i`` matching the i-th list pair."""

    runs: dict[str, list[RunRecord]] = field(default_factory=dict)
    consumed: float = 0.0
    executed: int = 0
    max_runs: int = 0
    slots: int = 0
    # with a cutoff set, costs[key] holds each slot's penalized cost (None for a run
    # cut short below the cutoff) and prefix[key][j] the left-fold sum of slots
    # 1..j+1 over the leading stretch of complete slots
    cutoff: float | None = None
    penalty: float = 10.0
    costs: dict[str, list[float | None]] = field(default_factory=dict)
    prefix: dict[str, list[float]] = field(default_factory=dict)

    def records(self, config: Configuration | str) -> list[RunRecord]:
        key = config if isinstance(config, str) else config.key
        return self.runs.get(key, [])

    def n_runs(self, config: Configuration | str) -> int:
        return len(self.records(config))

    def store(self, record: RunRecord) -> None:
        seq = self.runs.setdefault(record.config_key, [])
        i = record.instance_index
        if i == len(seq) + 1:
            seq.append(record)
            self.slots += 1
        elif 1 <= i <= len(seq):
            seq[i - 1] = record
        else:
            raise IndexError(f"slot {i} would leave a gap after {len(seq)} runs")
        self.max_runs = max(self.max_runs, len(seq))
        if self.cutoff is not None:
            self._update_prefix(record.config_key, i)

    def _update_prefix(self, key: str, i: int) -> None:
        rec = self.runs[key][i - 1]
        if rec.outcome.status is RunStatus.SUCCESS:
            cost = rec.outcome.cost
        elif rec.captime >= self.cutoff:
            cost = self.penalty * self.cutoff
        else:
            cost = None
        costs = self.costs.setdefault(key, [])
        if i == len(costs) + 1:
            costs.append(cost)
        else:
            costs[i - 1] = cost
        sums = self.prefix.setdefault(key, [])
        if i <= len(sums):
            del sums[i - 1:]
        start = len(sums)
        try:
            end = costs.index(None, start)
        except ValueError:
            end = len(costs)
        if end > start:
            sums.extend(islice(accumulate(costs[start:end], initial=sums[-1] if sums else 0.0), 1, None))

    def complete_prefix(self, config: Configuration | str) -> list[float]:
        key = config if isinstance(config, str) else config.key
        return self.prefix.get(key, [])


def can_reuse(record: RunRecord, captime: float) -> bool:
    """Whether a cached run answers a request at ``captime`` without re-running.

    Unsuccessful runs are reusable when they already ran at least as long;
    successful runs when they finished within the new captime.
    """
    if record.successful:
        return record.captime < captime or record.outcome.cost <= captime
    return record.captime >= captime


def get_or_run(
    cache: RunCache,
    backend: Backend,
    config: Configuration,
    i: int,
    captime: float,
    instance_seed_list,
    before_run: Callable[[], None] | None = None,
) -> RunRecord:
    seq = cache.records(config)
    if i > len(seq) + 1:
        raise IndexError(f"slot {i} requested but only {len(seq)} runs cached")
    if i <= len(seq) and can_reuse(seq[i - 1], captime):
        return seq[i - 1]
    if before_run is not None:
        before_run()
    instance, seed = instance_seed_list[i - 1]
    outcome = backend.run(config, instance, seed, captime)
    cache.consumed += outcome.cost
    cache.executed += 1
    record = RunRecord(config.key, i, instance, seed, captime, outcome)
    cache.store(record)
    return record


def _hash_normal(*parts) -> float:
    digest = hashlib.blake2b(repr(parts).encode(), digest_size=8).digest()
    u = (int.from_bytes(digest, "little") + 0.5) / 2.0**64
    return _STD_NORMAL.inv_cdf(u)


@dataclass(frozen=True)
class Interaction:
    """Extra multiplicative factor applied when both assignments are active."""

    first: tuple[str, str]
    second: tuple[str, str]
    factor: float


class SurrogateModel:
    """Deterministic synthetic target with multiplicative, heavy-tailed runtimes.

    ``runtime = base * prod(effect[p][v] for active p) * prod(matching interactions)
    * hardness(instance) * exp(noise * z(config, instance, seed))``

    Effects not given explicitly are ``exp(effect_spread * z)`` with ``z`` a
    hash-derived standard normal keyed on the model seed, so the model is a
    pure function of its parameters.
    """

    def __init__(
        self,
        seed: int = 0,
        base: float = 1.0,
        noise: float = 0.0,
        effect_spread: float = 0.0,
        hardness_spread: float = 0.0,
        effects: Mapping[str, Mapping[str, float]] | None = None,
        interactions: Sequence[Interaction] = (),
        hardness: Mapping[str, float] | None = None,
    ):
        if base <= 0:
            raise ValueError("surrogate base runtime must be positive")
        if noise < 0 or effect_spread < 0 or hardness_spread < 0:
            raise ValueError("surrogate spreads must be nonnegative")
        self.seed = int(seed)
        self.base = float(base)
        self.noise = float(noise)
        self.effect_spread = float(effect_spread)
        self.hardness_spread = float(hardness_spread)
        self.effects = {p: dict(v) for p, v in (effects or {}).items()}
        self.interactions = tuple(interactions)
        self.hardness_table = dict(hardness or {})
        self._config_factor: dict[str, float] = {}
        self._hardness: dict[str, float] = {}

    @classmethod
    def from_dict(cls, data: Mapping) -> "SurrogateModel":
        known = {"seed", "base", "noise", "effect_spread", "hardness_spread", "effects", "interactions", "hardness"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown surrogate keys {sorted(unknown)}")
        inter = [
            Interaction(tuple(i["first"].split("=", 1)), tuple(i["second"].split("=", 1)), float(i["factor"]))
            for i in data.get("interactions", [])
        ]
        kwargs = {k: data[k] for k in known - {"interactions"} if k in data}
        return cls(interactions=inter, **kwargs)

    @classmethod
    def from_spec(cls, spec: str, base_dir: Path | None = None) -> "SurrogateModel":
        """``spec`` is a JSON file path, or inline ``key=value`` pairs separated by commas."""
        spec = spec.strip()
        path = Path(spec)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        if spec.endswith(".json"):
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        data: dict = {}
        if spec and spec != "default":
            for item in spec.split(","):
                k, eq, v = item.partition("=")
                if not eq:
                    raise ValueError(f"bad surrogate entry {item!r}")
                k = k.strip()
                data[k] = int(v) if k == "seed" else float(v)
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "base": self.base,
            "noise": self.noise,
            "effect_spread": self.effect_spread,
            "hardness_spread": self.hardness_spread,
            "effects": self.effects,
            "interactions": [
                {"first": "=".join(i.first), "second": "=".join(i.second), "factor": i.factor}
                for i in self.interactions
            ],
            "hardness": self.hardness_table,
        }

    def effect(self, param: str, value: str) -> float:
        table = self.effects.get(param)
        if table is not None and value in table:
            return float(table[value])
        if self.effect_spread == 0.0:
            return 1.0
        return math.exp(self.effect_spread * _hash_normal(self.seed, "effect", param, value))

    def config_factor(self, config: Configuration) -> float:
        factor = self._config_factor.get(config.key)
        if factor is None:
            items = config.active_items()
            factor = self.base
            for name, value in items:
                factor *= self.effect(name, value)
            present = set(items)
            for inter in self.interactions:
                if inter.first in present and inter.second in present:
                    factor *= inter.factor
            self._config_factor[config.key] = factor
        return factor

    def hardness(self, instance: str) -> float:
        h = self._hardness.get(instance)
        if h is None:
            if instance in self.hardness_table:
                h = float(self.hardness_table[instance])
            elif self.hardness_spread == 0.0:
                h = 1.0
            else:
                h = math.exp(self.hardness_spread * _hash_normal(self.seed, "instance", instance))
            self._hardness[instance] = h
        return h

    def true_runtime(self, config: Configuration, instance: str, seed: int) -> float:
        rt = self.config_factor(config) * self.hardness(instance)
        if self.noise:
            rt *= math.exp(self.noise * _hash_normal(self.seed, "noise", config.key, instance, int(seed)))
        return rt


def surrogate_run(model: SurrogateModel, config: Configuration, instance: str, seed: int, captime: float) -> RunOutcome:
    rt = model.true_runtime(config, instance, seed)
    if rt <= captime:
        return RunOutcome(RunStatus.SUCCESS, rt)
    return RunOutcome(RunStatus.TIMEOUT, captime)


class SurrogateBackend:
    """Runs the surrogate and charges ``min(runtime, captime)`` to a simulated clock."""

    simulated = True

    def __init__(self, model: SurrogateModel):
        self.model = model
        self.consumed = 0.0
        self.calls = 0

    def run(self, config: Configuration, instance: str, seed: int, captime: float) -> RunOutcome:
        outcome = surrogate_run(self.model, config, instance, seed, captime)
        self.consumed += outcome.cost
        self.calls += 1
        return outcome


def build_command(wrapper: str | Sequence[str], config: Configuration, instance: str, seed: int, captime: float) -> list[str]:
    cmd = shlex.split(wrapper) if isinstance(wrapper, str) else list(wrapper)
    cmd += [str(instance), str(int(seed)), repr(float(captime))]
    for name, value in config.active_items():
        cmd += [f"-{name}", value]
    return cmd


def parse_result_line(stdout: str, captime: float) -> RunOutcome | None:
    """The single ``RESULT:`` line of the wrapper's output, or None if absent/ambiguous."""
    matches = [m for m in map(_RESULT_RE.match, stdout.splitlines()) if m]
    if len(matches) != 1:
        return None
    status = RunStatus(matches[0].group(1))
    try:
        cost = float(matches[0].group(2))
    except ValueError:
        return None
    if not math.isfinite(cost) or cost < 0:
        return None
    if status is RunStatus.SUCCESS and cost > captime:
        return RunOutcome(RunStatus.TIMEOUT, captime)
    if status is not RunStatus.SUCCESS:
        cost = captime
    return RunOutcome(status, cost)


def run_target(wrapper: str | Sequence[str], config: Configuration, instance: str, seed: int, captime: float,
               grace: float = GRACE_PERIOD_S, cwd: str | None = None) -> RunOutcome:
    """Run one wrapper invocation, killing its process group after ``captime + grace``."""
    cmd = build_command(wrapper, config, instance, seed, captime)
    start = time.perf_counter()
    try:
        proc = subprocess.Popen(
            cmd, stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
            start_new_session=True, cwd=cwd,
        )
    except OSError as exc:
        raise TargetExecutionError(f"cannot start {cmd[0]!r}: {exc}") from exc
    try:
        stdout, _ = proc.communicate(timeout=captime + grace)
    except subprocess.TimeoutExpired:
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except ProcessLookupError:
            pass
        proc.communicate()
        return RunOutcome(RunStatus.TIMEOUT, captime, time.perf_counter() - start)
    wall = time.perf_counter() - start
    outcome = parse_result_line(stdout, captime)
    if outcome is None:
        return RunOutcome(RunStatus.CRASHED, captime, wall)
    return RunOutcome(outcome.status, outcome.cost, wall)


class SubprocessBackend:
    simulated = False

    def __init__(self, wrapper: str | Sequence[str], grace: float = GRACE_PERIOD_S, cwd: str | None = None):
        self.wrapper = wrapper
        self.grace = grace
        self.cwd = cwd
        self.consumed = 0.0
        self.calls = 0

    def run(self, config: Configuration, instance: str, seed: int, captime: float) -> RunOutcome:
        outcome = run_target(self.wrapper, config, instance, seed, captime, self.grace, self.cwd)
        self.consumed += outcome.cost
        self.calls += 1
        return outcome
