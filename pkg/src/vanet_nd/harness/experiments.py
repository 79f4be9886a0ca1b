"""Experiment building blocks shared by the CLI, the presets and the checks.

Timing and rate experiments run nodes in ``discovered`` mode: nodes keep
going until they know every neighbor, so "slots to X% discovered" is always
defined.  The protocol's own convergence rules are exercised by ``simulate``
and the termination checks.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from functools import partial

import numpy as np

from .. import analytics as an
from ..scenario import ScenarioConfig, common_neighbor_counts
from ..simulator import batch
from ..simulator import stats as st
from ..simulator.config import GSIMND, UNTIL_DISCOVERED, SimConfig
from .output import Table

FRACTIONS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99)


def discovery_config(sim: SimConfig, **changes) -> SimConfig:
    base = dict(mode=UNTIL_DISCOVERED)
    base.update(changes)
    return sim.with_(**base)


# -- per-trial reducers (module level so worker processes can pickle them) --

@dataclass
class DiscoverySummary:
    fraction: np.ndarray  # network mean discovered fraction after slot t
    slots_run: int
    finished: bool
    node_sum: np.ndarray  # per target fraction: sum over nodes of their slot count
    node_count: np.ndarray  # nodes that reached the target
    node_missing: np.ndarray  # nodes with neighbors that never reached it
    result: object = None


def summarize_discovery(result, fractions=FRACTIONS, keep_result=True) -> DiscoverySummary:
    sums, counts, missing = [], [], []
    for f in fractions:
        s = result.node_slots_to_fraction(f)
        ok = ~np.isnan(s)
        sums.append(float(s[ok].sum()))
        counts.append(int(ok.sum()))
        missing.append(int((~ok).sum()))
    return DiscoverySummary(
        fraction=result.fraction_discovered.copy(), slots_run=result.slots_run,
        finished=result.finished, node_sum=np.array(sums), node_count=np.array(counts),
        node_missing=np.array(missing), result=result.compact() if keep_result else None)


def run_discovery(scenario: ScenarioConfig, sim: SimConfig, trials: int, seed: int,
                  jobs: int = 1, fractions=FRACTIONS) -> list:
    return batch.run_trials(scenario, sim, seed=seed, trials=trials, jobs=jobs,
                            reduce=partial(summarize_discovery, fractions=fractions))


def fraction_curves(summaries, t_max: int) -> np.ndarray:
    """trials x (t_max + 1) array; a finished trial holds its last value."""
    out = np.empty((len(summaries), t_max + 1))
    for r, s in enumerate(summaries):
        f = s.fraction
        n = min(len(f), t_max + 1)
        out[r, :n] = f[:n]
        out[r, n:] = f[n - 1]
    return out


def node_slot_means(summaries):
    """Per target fraction: pooled per-node mean slots, 95% half-width, missing nodes."""
    sums = np.array([s.node_sum for s in summaries])
    counts = np.array([s.node_count for s in summaries])
    p, hw = st.ratio_ci(sums, counts)
    missing = np.array([s.node_missing for s in summaries]).sum(axis=0)
    return p, hw, missing


# -- analytics ----------------------------------------------------------------

def model_params(scenario: ScenarioConfig, k: int, p_t: float,
                 variant: str = an.PAPER_EQ1, M: int = None):
    mi = an.model_inputs(scenario.M if M is None else M, scenario.L, scenario.d,
                         scenario.r, scenario.B)
    return mi, an.params_for(mi, k=k, p_t=p_t, variant=variant)


def analyze_tables(scenario: ScenarioConfig, sim: SimConfig, t_max: int = 500,
                   variant: str = an.PAPER_EQ1, fractions=FRACTIONS):
    mi, params = model_params(scenario, sim.k, sim.p_t, variant)
    curves = an.gossip_curves(params, t_max)
    _, n_bar = an.discovery_distribution(mi.N, t_max, curves)
    analysis = Table("analysis", ["t", "D", "I", "P_gs", "n_bar"])
    for t in range(1, t_max + 1):
        analysis.add(t, float(curves.D[t - 1]), float(curves.I[t - 1]),
                     float(curves.P_gs[t - 1]), float(n_bar[t]))
    bounds = Table("bounds", ["fraction", "t_l", "t_u"])
    for f, _, lo, hi in an.bounds_table(params, mi.N, fractions):
        bounds.add(f, float(lo), float(hi))
    return [analysis, bounds]


# -- simulation -----------------------------------------------------------

def _rate(num, den):
    return float(num) / float(den) if den > 0 else float("nan")


def simulate_tables(scenario: ScenarioConfig, sim: SimConfig, jobs: int = 1):
    """Per-trial slot tables and a per-node summary table."""
    results = batch.run_trials(scenario, sim, seed=sim.seed, trials=sim.trials, jobs=jobs)
    tables = []
    summary = Table("summary", ["trial", "node", "convergence_slot", "discovered_count",
                                "true_count", "sensing_completeness"])
    for trial, res in enumerate(results):
        t = Table(f"trial_{trial:05d}", ["slot", "fraction_discovered", "new_discovery_rate"])
        for s in range(len(res.fraction_discovered)):
            rate = _rate(res.n_new_any[s], res.n_active[s]) if s else float("nan")
            t.add(s, float(res.fraction_discovered[s]), rate)
        tables.append(("trials", t))
        for i in range(len(res.true_count)):
            summary.add(trial, i, int(res.convergence_slot[i]), int(res.discovered_count[i]),
                        int(res.true_count[i]), res.sensing_completeness[i])
    tables.append(("", summary))
    return tables, results


def trial_metrics(res):
    """Scalar outcomes of one trial used by sweeps."""
    conv = res.convergence_slot[res.convergence_slot > 0]
    return {
        "slots_run": res.slots_run,
        "finished": int(res.finished),
        "final_fraction": float(res.fraction_discovered[-1]),
        "slots_to_99": res.slots_to_fraction(0.99),
        "mean_convergence_slot": float(conv.mean()) if len(conv) else float("nan"),
        "false_convergences": res.false_convergence_count,
    }


SWEEP_METRICS = ("slots_run", "finished", "final_fraction", "slots_to_99",
                 "mean_convergence_slot", "false_convergences")


def sweep_tables(cfg, jobs: int = 1):
    from .config import apply_sweep_value

    sw = cfg.sweep
    rows = Table("sweep_trials", ["parameter", "value", "trial"] + list(SWEEP_METRICS))
    agg_cols = ["parameter", "value", "trials"]
    for m in SWEEP_METRICS:
        agg_cols += [m + "_mean", m + "_ci95", m + "_n"]
    agg = Table("sweep_aggregate", agg_cols)
    for value in sw.values:
        c = apply_sweep_value(cfg, sw.parameter, value)
        results = batch.run_trials(c.scenario, c.sim, seed=c.sim.seed,
                                   trials=c.sim.trials, jobs=jobs)
        metrics = [trial_metrics(r) for r in results]
        for trial, m in enumerate(metrics):
            rows.add(sw.parameter, value, trial, *[m[k] for k in SWEEP_METRICS])
        out = [sw.parameter, value, len(results)]
        for k in SWEEP_METRICS:
            v = np.array([m[k] for m in metrics], dtype=float)
            v = v[~np.isnan(v)]
            if len(v) >= 2:
                mean, hw = st.mean_ci(v)
            else:
                mean, hw = (float(v[0]) if len(v) else float("nan")), float("nan")
            out += [mean, hw, len(v)]
        agg.add(*out)
    return [rows, agg]


def scenario_tables(scenario: ScenarioConfig, seed: int, trial: int = 0):
    sc = batch.scenario_for_trial(scenario, seed, trial)
    nodes = Table("nodes", ["node_id", "x", "y"])
    for i, (x, y) in enumerate(sc.node_positions):
        nodes.add(i, float(x), float(y))
    rsus = Table("rsus", ["rsu_id", "x", "y"])
    for i, (x, y) in enumerate(sc.rsu_positions):
        rsus.add(i, float(x), float(y))
    return [nodes, rsus]


def geometry_means(scenario: ScenarioConfig, seed: int, trials: int):
    """Per-trial interior-node mean N and mean N_I over generated scenarios."""
    n_means, i_means = [], []
    for trial in range(trials):
        sc = batch.scenario_for_trial(scenario, seed, trial)
        keep = sc.interior_mask()
        n_means.append(float(sc.degrees[keep].mean()) if keep.any() else float("nan"))
        ii, jj, common = common_neighbor_counts(sc)
        pk = keep[ii] & keep[jj]
        i_means.append(float(common[pk].mean()) if pk.any() else float("nan"))
    return np.array(n_means), np.array(i_means)


def stationary_rates(results, window=(0.25, 0.75)):
    """{(which, unit): (rate, half-width)} with nan where the window was never hit."""
    out = {}
    for which in (st.DIRECT, st.ANY):
        for unit in (st.NODE, st.PAIR):
            try:
                out[which, unit] = st.stationary_rate(results, which, window, unit)
            except st.InsufficientDataError:
                out[which, unit] = (float("nan"), float("nan"))
    return out


def theory_rates(scenario: ScenarioConfig, k: int, p_t: float, M: int = None,
                 variant: str = an.PAPER_EQ1):
    """(P_s, P_gs(inf)) of the analytic model."""
    _, params = model_params(scenario, k, p_t, variant, M=M)
    return an.p_direct_any(params), an.stationary_P_gs(params)


def with_M(scenario: ScenarioConfig, M: int) -> ScenarioConfig:
    return dataclasses.replace(scenario, M=M)


def is_nan(x) -> bool:
    return isinstance(x, float) and math.isnan(x)
