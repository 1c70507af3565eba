"""Finite categorical parameter spaces with conditionals and forbidden combinations.

Space files are line oriented::

    # comment
    alpha {1.1,1.3,1.5}[1.3]
    heuristic {greedy,random}[greedy]
    depth {1,2,3}[2]
    depth | heuristic in {greedy}
    {alpha=1.5, heuristic=random}

Inactive parameters are always held at their default, so a :class:`Configuration`
stands for its whole equivalence class and hashes on active parameters only.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "Parameter",
    "Condition",
    "ForbiddenCombination",
    "ConfigurationSpace",
    "Configuration",
    "SpaceError",
    "SpaceSyntaxError",
    "InfeasibleConfigurationError",
    "parse_space",
    "serialize_space",
    "active_params",
    "canonicalize",
    "neighbors",
    "sample_random",
]

_NAME = r"[A-Za-z_][A-Za-z0-9_.\-]*"
_TOKEN_RE = re.compile(r"^[^\s,{}\[\]|=#]+$")
_PARAM_RE = re.compile(rf"^({_NAME})\s*\{{([^}}]*)\}}\s*\[([^\]]*)\]$")
_COND_RE = re.compile(rf"^({_NAME})\s*\|\s*({_NAME})\s+in\s*\{{([^}}]*)\}}$")
_FORBID_RE = re.compile(r"^\{([^}]*)\}$")


class SpaceError(ValueError):
    """Invalid space definition."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column or 1}: {message}"
        super().__init__(message)


class SpaceSyntaxError(SpaceError):
    pass


class InfeasibleConfigurationError(SpaceError):
    """An assignment hits a forbidden combination, or no feasible sample was found."""


@dataclass(frozen=True)
class Parameter:
    name: str
    domain: tuple[str, ...]
    default: str

    def __post_init__(self):
        if not self.domain:
            raise SpaceError(f"parameter {self.name!r} has an empty domain")
        if len(set(self.domain)) != len(self.domain):
            raise SpaceError(f"parameter {self.name!r} has duplicate domain values")
        if self.default not in self.domain:
            raise SpaceError(
                f"default {self.default!r} of parameter {self.name!r} is not in its domain"
            )


@dataclass(frozen=True)
class Condition:
    child: str
    parent: str
    activating_values: frozenset[str]


@dataclass(frozen=True)
class ForbiddenCombination:
    assignments: frozenset[tuple[str, str]]

    def matches(self, values: Mapping[str, str], active: set[str]) -> bool:
        return all(name in active and values[name] == v for name, v in self.assignments)


class Configuration:
    """Immutable point in a configuration space.

    Equality and hashing use :attr:`key`, which lists only active parameters.
    """

    __slots__ = ("names", "values", "key", "active")

    def __init__(self, names: tuple[str, ...], values: tuple[str, ...], active: frozenset[str]):
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "active", active)
        pairs = sorted((n, v) for n, v in zip(names, values) if n in active)
        object.__setattr__(self, "key", " ".join(f"{n}={v}" for n, v in pairs))

    def __setattr__(self, name, value):
        raise AttributeError("Configuration is immutable")

    def __eq__(self, other):
        return isinstance(other, Configuration) and other.key == self.key

    def __hash__(self):
        return hash(self.key)

    def __getitem__(self, name: str) -> str:
        return self.values[self.names.index(name)]

    def __repr__(self):
        return f"Configuration({self.key!r})"

    @property
    def assignment(self) -> dict[str, str]:
        return dict(zip(self.names, self.values))

    def active_items(self) -> list[tuple[str, str]]:
        """Active (name, value) pairs sorted by name."""
        return sorted((n, v) for n, v in zip(self.names, self.values) if n in self.active)


class ConfigurationSpace:
    """Validated, immutable parameter space.

    Raises :class:`SpaceError` on duplicate names, unknown references, more than
    one condition per child, cyclic conditions or an infeasible default.
    """

    def __init__(
        self,
        parameters: Iterable[Parameter],
        conditions: Iterable[Condition] = (),
        forbidden: Iterable[ForbiddenCombination] = (),
    ):
        self.parameters: tuple[Parameter, ...] = tuple(parameters)
        self.conditions: tuple[Condition, ...] = tuple(conditions)
        self.forbidden: tuple[ForbiddenCombination, ...] = tuple(forbidden)
        self.names: tuple[str, ...] = tuple(p.name for p in self.parameters)
        self._index = {}
        for i, p in enumerate(self.parameters):
            if p.name in self._index:
                raise SpaceError(f"duplicate parameter {p.name!r}")
            self._index[p.name] = i
        self._condition_of: dict[str, Condition] = {}
        for c in self.conditions:
            for ref in (c.child, c.parent):
                if ref not in self._index:
                    raise SpaceError(f"condition references unknown parameter {ref!r}")
            if c.child == c.parent:
                raise SpaceError(f"parameter {c.child!r} cannot be conditional on itself")
            if c.child in self._condition_of:
                raise SpaceError(f"parameter {c.child!r} has more than one condition")
            if not c.activating_values:
                raise SpaceError(f"condition on {c.child!r} has no activating values")
            bad = c.activating_values - set(self[c.parent].domain)
            if bad:
                raise SpaceError(
                    f"condition on {c.child!r}: {sorted(bad)} not in domain of {c.parent!r}"
                )
            self._condition_of[c.child] = c
        self._order = self._topological_order()
        for f in self.forbidden:
            if len(f.assignments) < 2:
                raise SpaceError("forbidden combination needs at least two assignments")
            for name, v in f.assignments:
                if name not in self._index:
                    raise SpaceError(f"forbidden combination references unknown parameter {name!r}")
                if v not in self[name].domain:
                    raise SpaceError(f"forbidden combination: {v!r} not in domain of {name!r}")
        self.default = self._make(tuple(p.default for p in self.parameters))
        if self.is_forbidden(self.default):
            raise InfeasibleConfigurationError("the default configuration is forbidden")

    def _topological_order(self) -> tuple[int, ...]:
        # parents before children; a cycle leaves nodes unplaced
        placed: list[int] = []
        done: set[str] = set()
        pending = list(self.names)
        while pending:
            progressed = False
            rest = []
            for name in pending:
                cond = self._condition_of.get(name)
                if cond is None or cond.parent in done:
                    placed.append(self._index[name])
                    done.add(name)
                    progressed = True
                else:
                    rest.append(name)
            if not progressed:
                raise SpaceError(f"cyclic conditions among parameters {sorted(rest)}")
            pending = rest
        return tuple(placed)

    def __getitem__(self, name: str) -> Parameter:
        return self.parameters[self._index[name]]

    def __len__(self) -> int:
        return len(self.parameters)

    def __eq__(self, other):
        return (
            isinstance(other, ConfigurationSpace)
            and self.parameters == other.parameters
            and set(self.conditions) == set(other.conditions)
            and set(self.forbidden) == set(other.forbidden)
        )

    def condition_of(self, name: str) -> Condition | None:
        return self._condition_of.get(name)

    def _active(self, values: tuple[str, ...]) -> frozenset[str]:
        active: set[str] = set()
        for i in self._order:
            name = self.names[i]
            cond = self._condition_of.get(name)
            if cond is None or (
                cond.parent in active
                and values[self._index[cond.parent]] in cond.activating_values
            ):
                active.add(name)
        return frozenset(active)

    def _make(self, values: tuple[str, ...]) -> Configuration:
        active = self._active(values)
        values = tuple(
            v if name in active else p.default
            for name, v, p in zip(self.names, values, self.parameters)
        )
        return Configuration(self.names, values, active)

    def is_forbidden(self, config: Configuration) -> bool:
        values = dict(zip(config.names, config.values))
        return any(f.matches(values, set(config.active)) for f in self.forbidden)

    def size(self) -> int:
        """Number of full assignments (ignoring conditionals and forbidden combinations)."""
        n = 1
        for p in self.parameters:
            n *= len(p.domain)
        return n

    def configuration(self, assignment: Mapping[str, str]) -> Configuration:
        """Canonical configuration from a possibly partial assignment (missing -> default)."""
        unknown = set(assignment) - set(self.names)
        if unknown:
            raise SpaceError(f"unknown parameters {sorted(unknown)}")
        full = {p.name: assignment.get(p.name, p.default) for p in self.parameters}
        return canonicalize(self, full)

    def enumerate(self) -> list[Configuration]:
        """All feasible equivalence classes, by brute force. Only for small spaces."""
        import itertools

        seen: dict[str, Configuration] = {}
        for values in itertools.product(*(p.domain for p in self.parameters)):
            cfg = self._make(tuple(values))
            if cfg.key not in seen and not self.is_forbidden(cfg):
                seen[cfg.key] = cfg
        return list(seen.values())


def _split_values(body: str, line: int, col: int) -> list[str]:
    values = [v.strip() for v in body.split(",")]
    for v in values:
        if not v or not _TOKEN_RE.match(v):
            raise SpaceSyntaxError(f"bad value token {v!r}", line, col)
    return values


def parse_space(text: str) -> ConfigurationSpace:
    parameters: list[Parameter] = []
    conditions: list[Condition] = []
    forbidden: list[ForbiddenCombination] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        stripped = line.strip()
        if not stripped:
            continue
        col = len(line) - len(line.lstrip()) + 1
        try:
            if m := _COND_RE.match(stripped):
                child, parent, body = m.groups()
                vals = _split_values(body, lineno, col + m.start(3))
                conditions.append(Condition(child, parent, frozenset(vals)))
            elif m := _PARAM_RE.match(stripped):
                name, body, default = m.groups()
                if name in seen:
                    raise SpaceError(f"duplicate parameter {name!r}", lineno, col)
                seen.add(name)
                vals = _split_values(body, lineno, col + m.start(2))
                parameters.append(Parameter(name, tuple(vals), default.strip()))
            elif m := _FORBID_RE.match(stripped):
                pairs = []
                for item in m.group(1).split(","):
                    name, eq, value = item.partition("=")
                    if not eq or not name.strip() or not value.strip():
                        raise SpaceSyntaxError(f"bad forbidden entry {item.strip()!r}", lineno, col)
                    pairs.append((name.strip(), value.strip()))
                forbidden.append(ForbiddenCombination(frozenset(pairs)))
            else:
                raise SpaceSyntaxError(f"cannot parse {stripped!r}", lineno, col)
        except SpaceError as exc:
            if exc.line is None:
                raise SpaceError(str(exc), lineno, col) from None
            raise
    if not parameters:
        raise SpaceError("space defines no parameters")
    return ConfigurationSpace(parameters, conditions, forbidden)


def serialize_space(space: ConfigurationSpace) -> str:
    lines = [f"{p.name} {{{','.join(p.domain)}}}[{p.default}]" for p in space.parameters]
    for c in space.conditions:
        vals = [v for v in space[c.parent].domain if v in c.activating_values]
        lines.append(f"{c.child} | {c.parent} in {{{','.join(vals)}}}")
    for f in space.forbidden:
        lines.append("{" + ", ".join(f"{n}={v}" for n, v in sorted(f.assignments)) + "}")
    return "\n".join(lines) + "\n"


def active_params(space: ConfigurationSpace, config: Configuration | Mapping[str, str]) -> set[str]:
    if isinstance(config, Configuration):
        values = config.values
    else:
        values = tuple(config[n] for n in space.names)
    return set(space._active(values))


def canonicalize(space: ConfigurationSpace, assignment: Mapping[str, str] | Configuration) -> Configuration:
    if isinstance(assignment, Configuration):
        assignment = assignment.assignment
    values = []
    for p in space.parameters:
        if p.name not in assignment:
            raise SpaceError(f"assignment is missing parameter {p.name!r}")
        v = assignment[p.name]
        if v not in p.domain:
            raise SpaceError(f"value {v!r} not in domain of {p.name!r}")
        values.append(v)
    cfg = space._make(tuple(values))
    if space.is_forbidden(cfg):
        raise InfeasibleConfigurationError(f"forbidden configuration: {cfg.key}")
    return cfg


def neighbors(space: ConfigurationSpace, config: Configuration, rng: np.random.Generator | None = None) -> list[Configuration]:
    """One-exchange neighbourhood over active parameters, shuffled by ``rng``."""
    out: dict[str, Configuration] = {}
    base = config.values
    for i, p in enumerate(space.parameters):
        if p.name not in config.active:
            continue
        for v in p.domain:
            if v == base[i]:
                continue
            cand = space._make(base[:i] + (v,) + base[i + 1:])
            if cand.key in out or cand.key == config.key or space.is_forbidden(cand):
                continue
            out[cand.key] = cand
    result = list(out.values())
    if rng is not None and len(result) > 1:
        result = [result[j] for j in rng.permutation(len(result))]
    return result


def sample_random(space: ConfigurationSpace, rng: np.random.Generator, max_tries: int = 10_000) -> Configuration:
    """Uniform over full assignments, then canonicalized.

    Conditional spaces are therefore *not* sampled uniformly over equivalence
    classes: a class collapsing k inactive assignments is k times as likely.
    """
    for _ in range(max_tries):
        values = tuple(p.domain[int(rng.integers(len(p.domain)))] for p in space.parameters)
        cfg = space._make(values)
        if not space.is_forbidden(cfg):
            return cfg
    raise InfeasibleConfigurationError(
        f"no feasible configuration after {max_tries} samples; space is over-constrained"
    )
