"""Iterated local search for automatic algorithm configuration (BasicILS, FocusedILS)
with adaptive capping, plus RandomSearch/SimpleLS baselines and offline evaluation."""
from .blocking import InstanceSeedList, build_list
from .comparison import BetterFocused, BetterN, dominates
from .evaluation import paired_wilcoxon, select_best_of_k, test_performance
from .execution import RunCache, RunOutcome, RunRecord, RunStatus, SubprocessBackend, SurrogateBackend, SurrogateModel
from .objective import BudgetExhausted, CostEstimate, Evaluator, par
from .scenario import Scenario, build_run, derive_rngs, load_scenario
from .search import Configurator, SearchParams, Termination
from .space import Configuration, ConfigurationSpace, parse_space

__version__ = "0.1.0"
