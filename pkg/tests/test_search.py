import io
import math

import numpy as np
import pytest

from helpers import FunctionBackend, grid_space, instance_list, make_evaluator
from paramils.comparison import BetterN
from paramils.execution import SurrogateBackend, SurrogateModel
from paramils.objective import Evaluator
from paramils.search import (
    TRAJECTORY_HEADER,
    Configurator,
    SearchParams,
    Termination,
    TrajectoryEntry,
    write_trajectory,
)
from paramils.space import canonicalize, parse_space

INF = math.inf


def _configurator(space, backend, seed=0, params=None, termination=None, n_instances=5, cutoff=10.0, **kw):
    ev = make_evaluator(backend, n_instances=n_instances, cutoff=cutoff, **kw)
    return Configurator(space, ev, np.random.default_rng(seed), params or SearchParams(n=1, capping="none"),
                        termination or Termination())


def _table(space, costs):
    """Backend with noise-free runtime ``costs[config.key]``."""
    return FunctionBackend(lambda c, i, s: costs[c.key])


class CountingBetter:
    def __init__(self, inner):
        self.inner = inner
        self.accepted = 0
        self.calls = 0

    def __call__(self, a, b):
        self.calls += 1
        won = self.inner(a, b)
        self.accepted += won
        return won


# -- iterative first improvement ------------------------------------------------

LINE = parse_space("x {v1,v2,v3}[v1]")


def test_local_optimum_stays_after_one_scan():
    cfgs = LINE.enumerate()
    costs = {c.key: k + 1.0 for k, c in enumerate(cfgs)}
    conf = _configurator(LINE, _table(LINE, costs))
    better = CountingBetter(BetterN(conf.evaluator, 1))
    assert conf.iterative_first_improvement(LINE.default, better) == LINE.default
    assert better.calls == 2 and better.accepted == 0


def test_descent_reaches_bottom_in_two_moves():
    costs = {"x=v1": 3.0, "x=v2": 2.0, "x=v3": 1.0}
    for seed in range(10):
        conf = _configurator(LINE, _table(LINE, costs), seed=seed)
        better = CountingBetter(BetterN(conf.evaluator, 1))
        got = conf.iterative_first_improvement(LINE.default, better)
        assert got.key == "x=v3"
        assert better.accepted <= 2


def test_always_false_leaves_input():
    space = grid_space(3, 3)
    conf = _configurator(space, _table(space, {}))
    start = space.configuration({"p1": "v2"})
    assert conf.iterative_first_improvement(start, lambda a, b: False) == start


def test_plateau_descent_terminates():
    # every configuration costs the same, so every comparison is a tie and is accepted
    space = grid_space(3, 3)
    conf = _configurator(space, FunctionBackend(lambda c, i, s: 1.0))
    better = CountingBetter(BetterN(conf.evaluator, 1))
    conf.iterative_first_improvement(space.default, better)
    assert better.accepted < space.size()


# -- ParamILS ------------------------------------------------------------------------

def test_zero_budget_returns_start():
    space = grid_space(2, 3)
    be = FunctionBackend(lambda c, i, s: 1.0)
    conf = _configurator(space, be, termination=Termination(target_s=0.0))
    start = space.configuration({"p0": "v2"})
    assert conf.run("basicils", start) == start
    assert be.calls == []


def test_restart_every_iteration():
    space = grid_space(3, 3)
    model = SurrogateModel(seed=2, noise=0.5, effect_spread=0.5)
    params = SearchParams(n=2, p_restart=1.0, capping="none")
    conf = _configurator(space, SurrogateBackend(model), params=params, termination=Termination(max_iterations=12))
    conf.run("basicils")
    assert conf.iteration == 12
    assert conf.restarts == conf.iteration
    # one log row per iteration boundary, with the iteration index
    assert [e.iteration for e in conf.trajectory][-12:] == list(range(1, 13))


def _five_by_four_hit(seed, model, best, cutoff, budget):
    be = SurrogateBackend(model)
    lst = instance_list(20, seed, prefix="i")
    ev = Evaluator(be, lst, cutoff, capping="aggressive", wall_clock=lambda: be.consumed)
    conf = Configurator(FIVE_BY_FOUR, ev, np.random.default_rng(seed + 7), SearchParams(),
                        Termination(target_s=budget))
    return conf.run("focusedils") == best


FIVE_BY_FOUR = parse_space("\n".join(f"p{i} {{a,b,c,d}}[a]" for i in range(5)))


def test_focusedils_finds_noise_free_optimum():
    base = 25.0
    cutoff = 10 * base
    model = SurrogateModel(seed=3, base=base, noise=0.0, effect_spread=0.5, hardness_spread=0.5)
    names = [f"i{k:03d}" for k in range(20)]

    def oracle(cfg):
        costs = []
        for inst in names:
            rt = model.true_runtime(cfg, inst, 0)
            costs.append(rt if rt <= cutoff else 10 * cutoff)
        return sum(costs) / len(costs)

    ranked = sorted(FIVE_BY_FOUR.enumerate(), key=oracle)
    assert len(ranked) == 1024
    assert oracle(ranked[0]) < oracle(ranked[1])
    hits = sum(_five_by_four_hit(seed, model, ranked[0], cutoff, 50_000.0) for seed in range(25))
    assert hits >= 0.9 * 25


# -- RandomSearch ----------------------------------------------------------------------

def test_random_search_single_config():
    space = parse_space("a {only}[only]")
    conf = _configurator(space, FunctionBackend(lambda c, i, s: 1.0), termination=Termination(max_iterations=5))
    assert conf.run("random") == space.default


def test_random_search_finds_optimum_of_sixteen():
    space = grid_space(2, 4)
    cfgs = space.enumerate()
    costs = {c.key: 1.0 + ((7 * k) % 16) / 4 for k, c in enumerate(cfgs)}
    best = min(cfgs, key=lambda c: costs[c.key])
    # 300 uniform draws miss one of 16 configs with probability (15/16)^300 < 1e-8
    for seed in range(20):
        conf = _configurator(space, _table(space, costs), seed=seed,
                             termination=Termination(max_iterations=300))
        assert conf.run("random") == best


def test_capping_saves_time_with_same_incumbent():
    space = grid_space(2, 4)
    model = SurrogateModel(seed=11, noise=0.0, effect_spread=0.8, hardness_spread=0.5)
    outcome = {}
    for mode in ("none", "tp"):
        conf = _configurator(space, SurrogateBackend(model), seed=4, n_instances=8, cutoff=5.0,
                             params=SearchParams(n=8, capping=mode), termination=Termination(max_iterations=60),
                             capping=mode)
        inc = conf.run("random")
        outcome[mode] = (inc, conf.evaluator.consumed, conf.visited)
    assert outcome["tp"][0] == outcome["none"][0]
    assert outcome["tp"][2] == outcome["none"][2]
    assert outcome["tp"][1] < outcome["none"][1]


# -- SimpleLS ------------------------------------------------------------------------

def test_simple_ls_unimodal():
    space = parse_space("x {0,1,2,3,4,5,6}[0]")
    costs = {c.key: 1.0 + abs(int(c["x"]) - 4) for c in space.enumerate()}
    for seed in range(5):
        conf = _configurator(space, _table(space, costs), seed=seed, params=SearchParams(n=1, r=0, capping="none"))
        assert conf.run("simplels")["x"] == "4"


# (p0, p1) grid: default is a strict local minimum, (v2, v2) the global one
TRAP = {
    ("v0", "v0"): 3.0, ("v1", "v0"): 4.0, ("v2", "v0"): 4.5,
    ("v0", "v1"): 4.2, ("v0", "v2"): 4.7, ("v1", "v1"): 6.0,
    ("v1", "v2"): 5.5, ("v2", "v1"): 5.2, ("v2", "v2"): 1.0,
}


def _trap_backend():
    return FunctionBackend(lambda c, i, s: TRAP[(c["p0"], c["p1"])])


def test_simple_ls_stays_in_local_minimum_paramils_escapes():
    space = grid_space(2, 3)
    params = SearchParams(n=1, r=0, capping="none")
    for seed in range(5):
        simple = _configurator(space, _trap_backend(), seed=seed, params=params)
        assert simple.run("simplels") == space.default
        ils = _configurator(space, _trap_backend(), seed=seed, params=params,
                            termination=Termination(max_iterations=30))
        assert (ils.run("basicils")["p0"], ils.evaluator.incumbent["p1"]) == ("v2", "v2")


def test_simple_ls_budget_mid_descent():
    # each accepted move flips one bit to v1 and saves one second; the optimum needs six moves
    space = grid_space(6, 2)
    be = FunctionBackend(lambda c, i, s: 10.0 - sum(v == "v1" for v in c.values))
    conf = _configurator(space, be, params=SearchParams(n=1, r=0, capping="none"),
                         termination=Termination(target_s=25.0))
    got = conf.run("simplels")
    seen = {key for key, *_ in be.calls}
    assert got.key == min(seen, key=lambda k: k.count("v0"))
    assert got.values.count("v1") in (1, 2)


# -- trajectory -----------------------------------------------------------------------

@pytest.mark.parametrize("strategy", ["basicils", "focusedils", "random", "simplels"])
def test_trajectory_invariants(strategy):
    space = parse_space(
        "a {on,off}[on]\nb {1,2,3}[1]\nc {x,y,z}[x]\nd {p,q}[p]\n"
        "b | a in {on}\n{a=off, d=q}\n"
    )
    model = SurrogateModel(seed=6, noise=0.8, effect_spread=0.7, hardness_spread=0.6)
    be = SurrogateBackend(model)
    ev = make_evaluator(be, n_instances=8, cutoff=3.0, capping="aggressive")
    params = SearchParams(n=6, r=3)
    conf = Configurator(space, ev, np.random.default_rng(1), params, Termination(target_s=400.0))
    got = conf.run(strategy)
    assert canonicalize(space, got) == got and not space.is_forbidden(got)
    assert got == ev.incumbent
    traj = conf.trajectory
    assert traj
    assert all(x.target_s <= y.target_s for x, y in zip(traj, traj[1:]))
    for x, y in zip(traj, traj[1:]):
        if x.incumbent_id != y.incumbent_id:
            assert (-y.n_runs, y.train_estimate) <= (-x.n_runs, x.train_estimate)


def test_write_trajectory_format():
    entries = [TrajectoryEntry(0.5, 1.25, 0, "a=1", 3, 2.0), TrajectoryEntry(1.0, 2.5, 1, "a=2 b=x", 4, 1.5)]
    fh = io.StringIO()
    text = write_trajectory(entries, fh, comment="seed=7")
    assert fh.getvalue() == text
    lines = text.splitlines()
    assert lines[0] == "# seed=7"
    assert lines[1] == ",".join(TRAJECTORY_HEADER) == "wall_s,target_s,iteration,incumbent_id,n_runs,train_estimate"
    assert lines[3] == "1.000000,2.500000,1,a=2 b=x,4,1.500000"


def test_search_params_validation():
    for bad in ({"r": -1}, {"s": 0}, {"p_restart": 1.5}, {"n": 0}):
        with pytest.raises(ValueError):
            SearchParams(**bad)
    assert (SearchParams().r, SearchParams().s, SearchParams().p_restart, SearchParams().bm) == (10, 3, 0.01, 2.0)


def test_fully_cached_search_stops_by_stalling():
    # no budget at all: once all nine configurations are cached nothing moves the clocks
    space = grid_space(2, 3)
    for strategy in ("basicils", "random"):
        conf = _configurator(space, _trap_backend(), params=SearchParams(n=2, r=2, capping="none"),
                             termination=Termination(stall_iterations=50))
        got = conf.run(strategy)
        assert conf.stalled
        assert (got["p0"], got["p1"]) == ("v2", "v2")


def test_capped_and_uncapped_searches_stall_together():
    space = grid_space(3, 3)
    model = SurrogateModel(seed=13, noise=0.7, effect_spread=0.8, hardness_spread=0.5)
    runs = {}
    for mode in ("none", "tp"):
        conf = _configurator(space, SurrogateBackend(model), seed=2, n_instances=6, cutoff=3.0, capping=mode,
                             params=SearchParams(n=6, r=3, capping=mode), termination=Termination(stall_iterations=40))
        inc = conf.run("basicils")
        runs[mode] = (inc, conf.visited, conf.iteration)
        assert conf.stalled
    # consumed time is not compared: after many revisits, re-running capped
    # slots at ever larger caps can cost TP more than running everything once
    assert runs["tp"] == runs["none"]
