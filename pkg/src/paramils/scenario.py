"""Scenario files (flat ``key = value``) and run assembly."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Mapping

import numpy as np

from .blocking import InstanceSeedList, read_instance_file
from .execution import SubprocessBackend, SurrogateBackend, SurrogateModel
from .objective import CAPPING_MODES, Evaluator
from .search import STRATEGIES, Configurator, SearchParams, Termination
from .space import ConfigurationSpace, parse_space

__all__ = [
    "Scenario",
    "ScenarioError",
    "RNGStreams",
    "load_scenario",
    "parse_scenario",
    "serialize_scenario",
    "derive_rngs",
    "build_run",
    "build_test_list",
    "KEYS",
]

KEYS = (
    "space", "train_instances", "test_instances", "wrapper", "surrogate", "cutoff_time",
    "penalty", "budget_target_s", "budget_wall_s", "max_iterations", "seed", "strategy",
    "capping", "bm", "r", "s", "p_restart", "n",
)
_STRATEGY_RE = re.compile(r"^(basicils|random|simplels)\((\d+)\)$")
_CAPPING_RE = re.compile(r"^aggressive\(([^)]+)\)$")


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    space: Path
    train_instances: Path
    cutoff_time: float
    test_instances: Path | None = None
    wrapper: str | None = None
    surrogate: str | None = None
    penalty: float = 10.0
    budget_target_s: float = math.inf
    budget_wall_s: float = math.inf
    max_iterations: int | None = None
    seed: int = 0
    strategy: str = "focusedils"
    capping: str = "aggressive"
    bm: float = 2.0
    r: int = 10
    s: int = 3
    p_restart: float = 0.01
    n: int = 100
    base_dir: Path = field(default=Path("."), compare=False)

    def validate(self) -> "Scenario":
        if not self.cutoff_time > 0 or not math.isfinite(self.cutoff_time):
            raise ScenarioError("cutoff_time must be a positive finite number")
        if not self.penalty >= 1:
            raise ScenarioError("penalty must be >= 1")
        if (self.wrapper is None) == (self.surrogate is None):
            raise ScenarioError("exactly one of 'wrapper' and 'surrogate' must be given")
        if self.strategy not in STRATEGIES:
            raise ScenarioError(f"strategy must be one of {STRATEGIES}")
        if self.capping not in CAPPING_MODES:
            raise ScenarioError(f"capping must be one of {CAPPING_MODES}")
        if not self.bm >= 1:
            raise ScenarioError("bm must be >= 1")
        if self.budget_target_s < 0 or self.budget_wall_s < 0:
            raise ScenarioError("budgets must be nonnegative")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise ScenarioError("max_iterations must be >= 0")
        if math.isinf(self.budget_target_s) and math.isinf(self.budget_wall_s) and self.max_iterations is None:
            raise ScenarioError("a budget is required (budget_target_s, budget_wall_s or max_iterations)")
        try:
            SearchParams(self.r, self.s, self.p_restart, self.n, self.capping, self.bm)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None
        if not 0 <= self.seed < 2**32:
            raise ScenarioError("seed must be in [0, 2^32)")
        for key in ("space", "train_instances", "test_instances"):
            path = getattr(self, key)
            if path is not None and not Path(path).is_file():
                raise ScenarioError(f"{key}: file not found: {path}")
        return self

    # -- loaded artefacts --------------------------------------------------
    def load_space(self) -> ConfigurationSpace:
        return parse_space(Path(self.space).read_text(encoding="utf-8"))

    def load_train(self) -> tuple[list[str], dict[str, int]]:
        return read_instance_file(self.train_instances)

    def load_test(self) -> tuple[list[str], dict[str, int]] | None:
        return None if self.test_instances is None else read_instance_file(self.test_instances)

    def make_backend(self):
        if self.wrapper is not None:
            return SubprocessBackend(self.wrapper, cwd=str(self.base_dir))
        model = SurrogateModel.from_spec(self.surrogate, self.base_dir)
        return SurrogateBackend(model)

    def with_overrides(self, overrides: Mapping[str, str]) -> "Scenario":
        raw = _to_raw(self)
        for k, v in overrides.items():
            if k not in KEYS:
                raise ScenarioError(f"unknown key {k!r}")
            raw[k] = v
        return _from_raw(raw, self.base_dir)


_FLOAT_KEYS = {"cutoff_time", "penalty", "budget_target_s", "budget_wall_s", "bm", "p_restart"}
_INT_KEYS = {"max_iterations", "seed", "r", "s", "n"}
_PATH_KEYS = {"space", "train_instances", "test_instances"}
_REQUIRED = ("space", "train_instances", "cutoff_time")


def _from_raw(raw: Mapping[str, str], base_dir: Path) -> Scenario:
    raw = dict(raw)
    missing = [k for k in _REQUIRED if k not in raw]
    if missing:
        raise ScenarioError(f"missing required keys: {', '.join(missing)}")
    values: dict = {}
    if "strategy" in raw and (m := _STRATEGY_RE.match(raw["strategy"].strip())):
        raw["strategy"] = m.group(1)
        raw["n"] = m.group(2)
    if "capping" in raw and (m := _CAPPING_RE.match(raw["capping"].strip())):
        raw["capping"] = "aggressive"
        raw["bm"] = m.group(1)
    for k, v in raw.items():
        v = v.strip()
        try:
            if k in _PATH_KEYS:
                p = Path(v)
                values[k] = (p if p.is_absolute() else base_dir / p).resolve()
            elif k in _FLOAT_KEYS:
                values[k] = float(v)
            elif k in _INT_KEYS:
                values[k] = int(v)
            elif k in ("strategy", "capping"):
                values[k] = v.lower()
            else:
                values[k] = v
        except ValueError:
            raise ScenarioError(f"malformed value for {k!r}: {v!r}") from None
    if "seed" not in values:
        values["seed"] = int(np.random.SeedSequence().entropy % 2**32)
    return Scenario(base_dir=base_dir, **values).validate()


def parse_scenario(text: str, base_dir: str | Path = ".") -> Scenario:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        key = key.strip()
        if not eq or not key:
            raise ScenarioError(f"line {lineno}: expected 'key = value'")
        if key not in KEYS:
            raise ScenarioError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ScenarioError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value.strip()
    return _from_raw(raw, Path(base_dir).resolve())


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise ScenarioError(f"scenario file not found: {path}")
    return parse_scenario(path.read_text(encoding="utf-8"), path.parent)


def _fmt(v) -> str:
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


def _to_raw(scenario: Scenario) -> dict[str, str]:
    out = {}
    for f in fields(scenario):
        if f.name == "base_dir":
            continue
        v = getattr(scenario, f.name)
        if v is None:
            continue
        out[f.name] = _fmt(v)
    return out


def serialize_scenario(scenario: Scenario) -> str:
    return "".join(f"{k} = {v}\n" for k, v in _to_raw(scenario).items())


@dataclass
class RNGStreams:
    search: np.random.Generator
    blocking: np.random.Generator
    target_seeds: np.random.Generator
    surrogate_seed: int


def derive_rngs(master_seed: int) -> RNGStreams:
    """Four independent deterministic streams spawned from one master seed."""
    ss = np.random.SeedSequence(int(master_seed))
    a, b, c, d = ss.spawn(4)
    return RNGStreams(
        np.random.default_rng(a),
        np.random.default_rng(b),
        np.random.default_rng(c),
        int(d.generate_state(1)[0]),
    )


def build_run(scenario: Scenario, seed: int | None = None, check_invariant: bool = False,
              space: ConfigurationSpace | None = None, backend=None) -> Configurator:
    """Assemble a ready-to-run :class:`Configurator` for one master seed."""
    seed = scenario.seed if seed is None else seed
    space = space or scenario.load_space()
    streams = derive_rngs(seed)
    train, pinned = scenario.load_train()
    instances = InstanceSeedList(train, streams.blocking, streams.target_seeds, pinned)
    backend = backend or scenario.make_backend()
    clock = None
    if getattr(backend, "simulated", False):
        clock = lambda: backend.consumed  # noqa: E731
    evaluator = Evaluator(
        backend, instances, scenario.cutoff_time, scenario.penalty, scenario.capping, scenario.bm,
        budget_target_s=scenario.budget_target_s, budget_wall_s=scenario.budget_wall_s,
        wall_clock=clock, check_invariant=check_invariant,
    )
    params = SearchParams(scenario.r, scenario.s, scenario.p_restart, scenario.n, scenario.capping, scenario.bm)
    termination = Termination(scenario.budget_target_s, scenario.budget_wall_s, scenario.max_iterations)
    return Configurator(space, evaluator, streams.search, params, termination)


def build_test_list(scenario: Scenario) -> list[tuple[str, int]] | None:
    """Test (instance, seed) pairs in file order; identical for every run of a scenario."""
    loaded = scenario.load_test()
    if loaded is None:
        return None
    instances, pinned = loaded
    rng = np.random.default_rng([scenario.seed, 0x7E57])
    seeds = rng.integers(0, 2**32, size=len(instances))
    return [(inst, pinned.get(inst, int(s))) for inst, s in zip(instances, seeds)]
