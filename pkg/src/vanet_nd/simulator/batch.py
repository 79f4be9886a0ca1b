"""Running many independent trials.

Trial ``i`` of a run with base seed ``s`` gets its own scenario (unless a
fixed one is supplied) and its own draw stream, both keyed by (s, i), so a
trial's outcome never depends on which worker ran it or in what order.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Optional

from ..scenario import RoadScenario, ScenarioConfig, generate_scenario
from .config import SimConfig
from .engine import TrialResult, run_trial

SCENARIO_STREAM = 1  # keeps scenario draws apart from the slot draws


def scenario_for_trial(config: ScenarioConfig, seed: int, trial: int) -> RoadScenario:
    return generate_scenario(config, [int(seed), int(trial), SCENARIO_STREAM])


def compact(result: TrialResult) -> TrialResult:
    return result.compact()


def keep_all(result: TrialResult) -> TrialResult:
    return result


def _one(args):
    scen_cfg, sim_cfg, scenario, seed, trial, reduce = args
    if scenario is None:
        scenario = scenario_for_trial(scen_cfg, seed, trial)
    return trial, reduce(run_trial(scenario, sim_cfg, seed=seed, trial=trial))


def run_trials(scenario_config: ScenarioConfig, sim_config: SimConfig,
               seed: int = 0, trials: Optional[int] = None, *,
               scenario: Optional[RoadScenario] = None, jobs: int = 1,
               reduce: Callable = compact, first_trial: int = 0) -> list:
    """Run trials first_trial .. first_trial + trials - 1, in trial order.

    ``reduce`` is applied to every TrialResult before it is kept (the default
    drops the per-pair discovery matrix to bound memory); with ``jobs > 1`` it
    must be a module-level function so it can be pickled.
    """
    scenario_config.validate()
    sim_config.validate()
    n = sim_config.trials if trials is None else int(trials)
    if scenario is not None and scenario.M != scenario_config.M:
        raise ValueError("fixed scenario does not match scenario_config.M")
    tasks = [(scenario_config, sim_config, scenario, seed, first_trial + t, reduce)
             for t in range(n)]
    jobs = max(1, min(int(jobs), os.cpu_count() or 1, n)) if n else 1
    if jobs == 1:
        out = [_one(a) for a in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(_one, tasks, chunksize=max(1, n // (4 * jobs))))
    out.sort(key=lambda pair: pair[0])
    return [res for _, res in out]
