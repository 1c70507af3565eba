"""Blocked (instance, seed) lists shared by every evaluation in one configurator run."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = ["InstanceSeedList", "build_list", "read_instance_file", "SEED_RANGE"]

SEED_RANGE = 2**32


def read_instance_file(path: str | Path) -> tuple[list[str], dict[str, int]]:
    """Instances in file order plus any pinned seeds (optional second column)."""
    instances: list[str] = []
    pinned: dict[str, int] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) > 2:
                raise ValueError(f"{path}:{lineno}: expected '<instance> [seed]'")
            instances.append(parts[0])
            if len(parts) == 2:
                seed = int(parts[1])
                if not 0 <= seed < SEED_RANGE:
                    raise ValueError(f"{path}:{lineno}: seed out of range")
                pinned[parts[0]] = seed
    if not instances:
        raise ValueError(f"{path}: no instances")
    return instances, pinned


class InstanceSeedList:
    """Lazily extended list of (instance, seed) pairs.

    Pairs are generated one training-set permutation at a time; each batch
    draws its permutation from ``rng`` and its seeds from ``seed_rng``.
    Extending never changes an existing prefix.
    """

    def __init__(self, training_set: Sequence[str], rng: np.random.Generator,
                 seed_rng: np.random.Generator | None = None, pinned_seeds: dict[str, int] | None = None):
        if len(training_set) == 0:
            raise ValueError("training set is empty")
        self.training_set = list(training_set)
        self.rng = rng
        self.seed_rng = seed_rng if seed_rng is not None else rng
        self.pinned_seeds = dict(pinned_seeds or {})
        self.pairs: list[tuple[str, int]] = []
        self._batch: list[tuple[str, int]] = []

    @property
    def M(self) -> int:
        return len(self.training_set)

    def _draw_batch(self) -> None:
        perm = self.rng.permutation(self.M)
        seeds = self.seed_rng.integers(0, SEED_RANGE, size=self.M)
        batch = []
        for j, s in zip(perm, seeds):
            inst = self.training_set[j]
            batch.append((inst, self.pinned_seeds.get(inst, int(s))))
        self._batch = batch[::-1]

    def ensure(self, n: int) -> None:
        while len(self.pairs) < n:
            if not self._batch:
                self._draw_batch()
            self.pairs.append(self._batch.pop())

    def __getitem__(self, i: int) -> tuple[str, int]:
        self.ensure(i + 1)
        return self.pairs[i]

    def __len__(self) -> int:
        return len(self.pairs)

    def prefix(self, n: int) -> list[tuple[str, int]]:
        self.ensure(n)
        return self.pairs[:n]


def build_list(training_set: Sequence[str], target_length: int, rng: np.random.Generator,
               seed_rng: np.random.Generator | None = None,
               pinned_seeds: dict[str, int] | None = None) -> InstanceSeedList:
    if target_length < 1:
        raise ValueError("target_length must be at least 1")
    lst = InstanceSeedList(training_set, rng, seed_rng, pinned_seeds)
    lst.ensure(target_length)
    return lst
