"""Figure-reproduction presets.

Each preset fixes the default road and protocol parameters (taken from the
experiment config, so they can still be overridden) and sweeps one axis.  A
preset returns tables; theory and simulation columns share the same rows.
Theory columns use the unordered collision model (PaperEq1); the ``_do``
columns repeat them with distinct ordered channel choices, the variant that
matches the simulator's reception rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .. import analytics as an
from ..errors import ConfigError
from ..occupancy import binomial_q_beams, expected_q_beams
from ..simulator import batch
from ..simulator import stats as st
from ..simulator.config import ALGORITHMS, GSIMND
from . import experiments as ex
from .output import Table

K_PAIR = (1, 3)
K_ALL = (1, 3, 5)
P_T_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
M_GRID_FINE = tuple(range(50, 1001, 50))
M_GRID = (50, 150, 300, 500, 750, 1000)
Q_MAX = 40  # q-beam rows per M in fig12


@dataclass(frozen=True)
class PresetContext:
    scenario: object
    sim: object
    seed: int
    trials: int
    jobs: int = 1
    t_max: Optional[int] = None
    max_slots: Optional[int] = None


@dataclass(frozen=True)
class FigurePreset:
    name: str
    run: Callable
    trials: int
    t_max: Optional[int] = None
    max_slots: Optional[int] = None
    description: str = ""


def _sim(ctx, **changes):
    return ex.discovery_config(ctx.sim, **changes)


def fig7(ctx):
    n_means, i_means = ex.geometry_means(ctx.scenario, ctx.seed, ctx.trials)
    mi, _ = ex.model_params(ctx.scenario, 1, ctx.sim.p_t)
    a = Table("fig7a_neighbors", ["quantity", "theory", "sim_mean", "sim_ci95", "trials"])
    for name, theory, vals in (("N_bar", mi.N_mean, n_means), ("N_I_bar", mi.N_I, i_means)):
        vals = vals[~np.isnan(vals)]
        m, hw = st.mean_ci(vals) if len(vals) >= 2 else (float(vals.mean()), float("nan"))
        a.add(name, float(theory), m, hw, len(vals))
    b = Table("fig7b_fraction", ["k", "t", "theory", "theory_do", "sim_mean", "sim_ci95"])
    for k in K_PAIR:
        _, params = ex.model_params(ctx.scenario, k, ctx.sim.p_t)
        theory = an.expected_fraction_curve(params, mi.N, ctx.t_max)
        _, params = ex.model_params(ctx.scenario, k, ctx.sim.p_t, an.DISTINCT_ORDERED)
        theory_do = an.expected_fraction_curve(params, mi.N, ctx.t_max)
        runs = ex.run_discovery(ctx.scenario, _sim(ctx, algorithm=GSIMND, k=k,
                                                    max_slots=ctx.t_max),
                                ctx.trials, ctx.seed, ctx.jobs)
        curves = ex.fraction_curves(runs, ctx.t_max)
        mean = curves.mean(axis=0)
        hw = st.Z95 * curves.std(axis=0, ddof=1) / np.sqrt(len(runs))
        for t in range(ctx.t_max + 1):
            b.add(k, t, float(theory[t]), float(theory_do[t]), float(mean[t]), float(hw[t]))
    return [a, b]


def fig8(ctx):
    mi, _ = ex.model_params(ctx.scenario, 1, ctx.sim.p_t)
    tab = Table("fig8_bounds", ["k", "fraction", "n", "t_l", "t_u", "t_l_do", "t_u_do",
                                "sim_node_mean",
                                "sim_node_ci95", "sim_node_missing", "sim_network_mean",
                                "sim_network_ci95", "sim_network_censored"])
    for k in K_PAIR:
        _, params = ex.model_params(ctx.scenario, k, ctx.sim.p_t)
        bounds = an.bounds_table(params, mi.N, ex.FRACTIONS)
        _, params = ex.model_params(ctx.scenario, k, ctx.sim.p_t, an.DISTINCT_ORDERED)
        bounds_do = an.bounds_table(params, mi.N, ex.FRACTIONS)
        runs = ex.run_discovery(ctx.scenario, _sim(ctx, algorithm=GSIMND, k=k,
                                                    max_slots=ctx.max_slots),
                                ctx.trials, ctx.seed, ctx.jobs)
        node_mean, node_hw, missing = ex.node_slot_means(runs)
        results = [r.result for r in runs]
        for q, (f, n, lo, hi) in enumerate(bounds):
            net = st.slots_to_fraction(results, f, budget=ctx.max_slots)
            m, hw = st.mean_ci(net.values) if len(net.values) >= 2 else (net.mean, float("nan"))
            tab.add(k, f, n, float(lo), float(hi), float(bounds_do[q][2]), float(bounds_do[q][3]),
                    float(node_mean[q]), float(node_hw[q]),
                    int(missing[q]), m, hw, net.censored)
    return [tab]


def fig9(ctx):
    tab = Table("fig9_fraction", ["algorithm", "k", "t", "sim_mean", "sim_ci95"])
    for algo in ALGORITHMS:
        for k in K_ALL:
            runs = ex.run_discovery(ctx.scenario, _sim(ctx, algorithm=algo, k=k,
                                                        max_slots=ctx.t_max),
                                    ctx.trials, ctx.seed, ctx.jobs, fractions=())
            curves = ex.fraction_curves(runs, ctx.t_max)
            mean = curves.mean(axis=0)
            hw = st.Z95 * curves.std(axis=0, ddof=1) / np.sqrt(len(runs))
            for t in range(ctx.t_max + 1):
                tab.add(algo, k, t, float(mean[t]), float(hw[t]))
    return [tab]


def _estimate(results, which, unit, t_max):
    try:
        est = st.estimate_discovery_probability(results, which, unit=unit)
    except st.InsufficientDataError:
        return np.full(t_max, np.nan), np.full(t_max, np.nan), np.full(t_max, np.nan)
    out = [np.full(t_max, np.nan) for _ in range(3)]
    n = min(t_max, len(est.rate))
    for o, src in zip(out, (est.rate, est.lower, est.upper)):
        o[:n] = src[:n]
    return out


def fig10(ctx):
    cols = ["algorithm", "k", "t", "P_s", "P_s_lo", "P_s_hi", "P_gs", "P_gs_lo", "P_gs_hi",
            "P_s_pair", "P_gs_pair", "theory_P_s", "theory_P_gs", "theory_P_s_do",
            "theory_P_gs_do"]
    tab = Table("fig10_rates", cols)
    for algo in ALGORITHMS:
        for k in K_ALL:
            runs = ex.run_discovery(ctx.scenario, _sim(ctx, algorithm=algo, k=k,
                                                        max_slots=ctx.t_max),
                                    ctx.trials, ctx.seed, ctx.jobs, fractions=())
            res = [r.result for r in runs]
            ps = _estimate(res, st.DIRECT, st.NODE, ctx.t_max)
            pg = _estimate(res, st.ANY, st.NODE, ctx.t_max)
            ps_pair = _estimate(res, st.DIRECT, st.PAIR, ctx.t_max)[0]
            pg_pair = _estimate(res, st.ANY, st.PAIR, ctx.t_max)[0]
            theory = []
            for variant in (an.PAPER_EQ1, an.DISTINCT_ORDERED):
                if algo == GSIMND:
                    _, params = ex.model_params(ctx.scenario, k, ctx.sim.p_t, variant)
                    curves = an.gossip_curves(params, ctx.t_max)
                    theory.append((curves.P_s, curves.P_gs))
                else:
                    theory.append((float("nan"), np.full(ctx.t_max, np.nan)))
            for t in range(1, ctx.t_max + 1):
                i = t - 1
                tab.add(algo, k, t, ps[0][i], ps[1][i], ps[2][i], pg[0][i], pg[1][i], pg[2][i],
                        ps_pair[i], pg_pair[i], float(theory[0][0]), float(theory[0][1][i]),
                        float(theory[1][0]), float(theory[1][1][i]))
    return [tab]


RATE_COLS = ["P_s", "P_s_ci95", "P_gs", "P_gs_ci95", "P_s_pair", "P_s_pair_ci95",
             "P_gs_pair", "P_gs_pair_ci95", "theory_P_s", "theory_P_gs_inf", "theory_P_s_do",
             "theory_P_gs_inf_do"]


def _theory(algo, scenario, k, p_t):
    if algo != GSIMND:
        return [float("nan")] * 4
    out = []
    for variant in (an.PAPER_EQ1, an.DISTINCT_ORDERED):
        out += [float(x) for x in ex.theory_rates(scenario, k, p_t, variant=variant)]
    return out


def _rate_row(rates, theory):
    out = []
    for key in ((st.DIRECT, st.NODE), (st.ANY, st.NODE), (st.DIRECT, st.PAIR), (st.ANY, st.PAIR)):
        out += list(rates[key])
    return out + list(theory)


def fig11(ctx):
    tab = Table("fig11_rates_vs_pt", ["algorithm", "k", "p_t"] + RATE_COLS)
    for algo in ALGORITHMS:
        for k in K_ALL:
            for p_t in P_T_GRID:
                runs = ex.run_discovery(ctx.scenario, _sim(ctx, algorithm=algo, k=k, p_t=p_t,
                                                            max_slots=ctx.max_slots,
                                                            stop_fraction=0.8),
                                        ctx.trials, ctx.seed, ctx.jobs, fractions=())
                rates = ex.stationary_rates([r.result for r in runs])
                theory = _theory(algo, ctx.scenario, k, p_t)
                tab.add(algo, k, p_t, *_rate_row(rates, theory))
    return [tab]


def fig12(ctx):
    a = Table("fig12a_qbeams", ["M", "N", "q", "E_q_over_B", "sim_E_q_over_B"])
    b = Table("fig12b_nonempty", ["M", "N_bar", "N", "alpha", "N_b", "sim_N_b"])
    B = ctx.scenario.B
    for M in M_GRID_FINE:
        mi, _ = ex.model_params(ctx.scenario, 1, ctx.sim.p_t, M=M)
        stats = (expected_q_beams(mi.N, B) if mi.N <= an.EXACT_OCCUPANCY_LIMIT
                 else binomial_q_beams(mi.N, B))
        sim_q, sim_nb = _empirical_occupancy(ex.with_M(ctx.scenario, M), ctx.seed, ctx.trials)
        for q in range(min(mi.N, Q_MAX) + 1):
            a.add(M, mi.N, q, stats.E[q] / B, float(sim_q[q]))
        b.add(M, mi.N_mean, mi.N, stats.alpha, stats.mean_nonempty_occupancy, sim_nb)
    return [a, b]


def _empirical_occupancy(scenario, seed, trials):
    """Mean share of q-beams (q <= Q_MAX) and non-empty occupancy, interior nodes."""
    counts = np.zeros(Q_MAX + 1)
    beams = 0
    occ_sum = occ_n = 0
    for trial in range(trials):
        sc = batch.scenario_for_trial(scenario, seed, trial)
        keep = np.flatnonzero(sc.interior_mask())
        bm, adj = sc.beam_matrix, sc.adjacency
        for i in keep:
            occ = np.bincount(bm[i, adj[i]], minlength=sc.B)
            counts += np.bincount(np.minimum(occ, Q_MAX + 1), minlength=Q_MAX + 2)[: Q_MAX + 1]
            beams += sc.B
            occ_sum += occ[occ > 0].sum()
            occ_n += (occ > 0).sum()
    share = counts / beams if beams else np.full(Q_MAX + 1, np.nan)
    return share, (occ_sum / occ_n if occ_n else float("nan"))


def fig13(ctx):
    tab = Table("fig13_rates_vs_M", ["algorithm", "k", "M"] + RATE_COLS)
    for M in M_GRID:
        scen = ex.with_M(ctx.scenario, M)
        for algo in ALGORITHMS:
            for k in K_ALL:
                runs = ex.run_discovery(scen, _sim(ctx, algorithm=algo, k=k,
                                                    max_slots=ctx.max_slots, stop_fraction=0.8),
                                        ctx.trials, ctx.seed, ctx.jobs, fractions=())
                rates = ex.stationary_rates([r.result for r in runs])
                theory = _theory(algo, scen, k, ctx.sim.p_t)
                tab.add(algo, k, M, *_rate_row(rates, theory))
    return [tab]


def fig14(ctx):
    tab = Table("fig14_slots_vs_M", ["algorithm", "k", "M", "slots_99_mean", "slots_99_ci95",
                                     "censored", "budget"])
    for M in M_GRID:
        scen = ex.with_M(ctx.scenario, M)
        for algo in ALGORITHMS:
            for k in K_ALL:
                runs = ex.run_discovery(scen, _sim(ctx, algorithm=algo, k=k,
                                                    max_slots=ctx.max_slots, stop_fraction=0.99),
                                        ctx.trials, ctx.seed, ctx.jobs, fractions=())
                sample = st.slots_to_fraction([r.result for r in runs], 0.99,
                                              budget=ctx.max_slots)
                m, hw = (st.mean_ci(sample.values) if len(sample.values) >= 2
                         else (sample.mean, float("nan")))
                tab.add(algo, k, M, m, hw, sample.censored, ctx.max_slots)
    return [tab]


PRESETS = {
    "fig7": FigurePreset("fig7", fig7, 1000, t_max=300,
                         description="neighbor counts; fraction discovered vs t (theory and sim)"),
    "fig8": FigurePreset("fig8", fig8, 1000, max_slots=5000,
                         description="slots vs fraction with lower/upper bounds"),
    "fig9": FigurePreset("fig9", fig9, 500, t_max=500,
                         description="fraction vs t, four algorithms, k in {1,3,5}"),
    "fig10": FigurePreset("fig10", fig10, 1000, t_max=300,
                          description="P_s / P_gs vs t"),
    "fig11": FigurePreset("fig11", fig11, 1000, max_slots=5000,
                          description="stationary P_s / P_gs vs p_t"),
    "fig12": FigurePreset("fig12", fig12, 200,
                          description="q-beam shares and non-empty beam occupancy vs M"),
    "fig13": FigurePreset("fig13", fig13, 200, max_slots=5000,
                          description="stationary P_s / P_gs vs M"),
    "fig14": FigurePreset("fig14", fig14, 200, max_slots=20000,
                          description="slots to 99% discovery vs M"),
}


def run_preset(name: str, scenario, sim, seed: int, trials: Optional[int] = None,
               jobs: int = 1, t_max: Optional[int] = None, max_slots: Optional[int] = None):
    """Tables of preset ``name``; returns (tables, effective settings)."""
    if name not in PRESETS:
        raise ConfigError([f"unknown preset {name!r}; choose from {sorted(PRESETS)}"])
    p = PRESETS[name]
    ctx = PresetContext(scenario=scenario, sim=sim, seed=seed,
                        trials=p.trials if trials is None else int(trials), jobs=jobs,
                        t_max=p.t_max if t_max is None else int(t_max),
                        max_slots=p.max_slots if max_slots is None else int(max_slots))
    if ctx.trials < 2:
        raise ConfigError(["presets need at least 2 trials for intervals"])
    settings = {"preset": name, "trials": ctx.trials, "t_max": ctx.t_max,
                "max_slots": ctx.max_slots}
    return p.run(ctx), settings
