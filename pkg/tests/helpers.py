"""Shared test doubles and builders."""
import math

import numpy as np

from paramils.blocking import InstanceSeedList
from paramils.execution import RunOutcome, RunStatus
from paramils.objective import Evaluator
from paramils.space import parse_space


class FunctionBackend:
    """Backend whose true runtime is ``fn(config, instance, seed)``; records every call."""

    simulated = True

    def __init__(self, fn):
        self.fn = fn
        self.consumed = 0.0
        self.calls = []

    def run(self, config, instance, seed, captime):
        rt = self.fn(config, instance, seed)
        self.calls.append((config.key, instance, seed, captime))
        if rt <= captime:
            out = RunOutcome(RunStatus.SUCCESS, rt)
        else:
            out = RunOutcome(RunStatus.TIMEOUT, captime)
        self.consumed += out.cost
        return out


def instance_list(n_instances=10, seed=0, prefix="inst"):
    names = [f"{prefix}{k:03d}" for k in range(n_instances)]
    return InstanceSeedList(names, np.random.default_rng(seed), np.random.default_rng(seed + 1000))


def make_evaluator(backend, n_instances=10, cutoff=5.0, capping="none", seed=0, **kw):
    lst = instance_list(n_instances, seed)
    kw.setdefault("wall_clock", lambda: backend.consumed)
    return Evaluator(backend, lst, cutoff, capping=capping, **kw)


def grid_space(n_params, n_values, default="v0"):
    vals = ",".join(f"v{j}" for j in range(n_values))
    return parse_space("\n".join(f"p{i} {{{vals}}}[{default}]" for i in range(n_params)))


def isclose(a, b, rel=1e-9):
    return math.isclose(a, b, rel_tol=rel, abs_tol=0.0)
