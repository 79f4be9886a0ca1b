"""Oracle suites behind ``validate fast`` and ``validate full``.

Each check compares an implementation against an independent computation
and records the measured gap next to its tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import analytics as an
from .. import occupancy as oc
from ..scenario import (RoadScenario, ScenarioConfig, expected_common_neighbor_count,
                        expected_neighbor_count, mc_expected_common_neighbor_count,
                        mc_expected_neighbor_count)
from ..simulator import stats as st
from ..simulator.config import CRA, GSIMND, SimConfig
from ..simulator.engine import DrawStream, init_state, step_slot
from . import experiments as ex
from .output import Table

LEVELS = ("fast", "full")
FLAT_BAND = 0.10  # relative drift still called flat


@dataclass
class Check:
    suite: str
    name: str
    measured: float
    tolerance: float
    passed: bool


def _check(suite, name, measured, tol, passed=None):
    if passed is None:
        passed = bool(measured <= tol)
    return Check(suite, name, float(measured), float(tol), bool(passed))


def occupancy_suite(n_max=8, b_max=4):
    """Exact counting vs enumeration; conservation laws at B = 12."""
    table = Table("validate_occupancy", ["N", "B", "q", "E_q_exact", "E_q_bruteforce"])
    worst = 0.0
    for B in range(1, b_max + 1):
        for N in range(0, n_max + 1):
            exact = oc.q_beam_expectations(N, B)
            brute = oc.brute_force_occupancy(N, B).E
            for q in range(N + 1):
                table.add(N, B, q, float(exact[q]), float(brute[q]))
                worst = max(worst, abs(float(exact[q]) - float(brute[q])))
    cons_b = cons_n = 0.0
    for N in range(0, 41):
        E = [float(x) for x in oc.q_beam_expectations(N, 12)]
        cons_b = max(cons_b, abs(sum(E) - 12))
        cons_n = max(cons_n, abs(sum(q * e for q, e in enumerate(E)) - N))
    checks = [
        _check("occupancy", "exact vs brute force, N<=8, B<=4", worst, 1e-12),
        _check("occupancy", "sum_q E_q = B, N<=40", cons_b, 1e-9),
        _check("occupancy", "sum_q q E_q = N, N<=40", cons_n, 1e-9),
    ]
    return checks, table


def _toy_params(k, N, seed_like):
    # a spread of parameter points, fixed per (k, N)
    rng = np.random.default_rng([k, N, seed_like])
    return an.ProtocolParams(k=k, p_t=float(rng.uniform(0.2, 0.8)),
                             alpha=float(rng.uniform(0.1, 1.0)),
                             N_b=float(rng.uniform(1.0, max(1.5, N / 2))), N=float(N),
                             N_I=float(rng.uniform(0.0, N / 2)),
                             collision_variant=an.DISTINCT_ORDERED)


def distribution_suite(mc_N=4):
    row = 0.0
    for N in (10, 30, 60):
        for k in (1, 3, 5):
            curves = an.gossip_curves(_toy_params(k, N, 0), 500)
            P, _ = an.discovery_distribution(N, 500, curves)
            row = max(row, float(np.abs(P.sum(axis=1) - 1.0).max()))
    chain = 0.0
    for N in range(1, mc_N + 1):
        for k in (1, 2):
            curves = an.gossip_curves(_toy_params(k, N, 1), 20)
            P, _ = an.discovery_distribution(N, 20, curves)
            Q = an.markov_chain_distribution(N, 20, curves)
            chain = max(chain, float(np.abs(P - Q).max()))
    return [
        _check("distribution", "row sums, N in {10,30,60}, k in {1,3,5}, t<=500", row, 1e-9),
        _check("distribution", "recurrence vs Markov chain, N<=4, k<=2, t<=20", chain, 1e-9),
    ]


def geometry_suite(samples=1_000_000):
    cfg = ScenarioConfig()
    rho = cfg.density
    checks = []
    q = expected_neighbor_count(rho, cfg.r, cfg.d)
    m, se = mc_expected_neighbor_count(rho, cfg.r, cfg.d, n_samples=samples, seed=11)
    checks.append(_check("geometry", "N_bar quadrature vs Monte Carlo (in std errors)",
                         abs(q - m) / se, 4.0))
    q = expected_common_neighbor_count(rho, cfg.r, cfg.d)
    m, se = mc_expected_common_neighbor_count(rho, cfg.r, cfg.d, n_samples=samples // 2, seed=12)
    checks.append(_check("geometry", "N_I_bar quadrature vs Monte Carlo (in std errors)",
                         abs(q - m) / se, 4.0))
    return checks


def two_node_suite(slots=100_000):
    """CRA handshake frequency of a node pair against the closed form."""
    sc = RoadScenario.from_positions([[100.0, 30.0], [200.0, 30.0]], L=1000.0, d=60.0,
                                     r=200.0, B=1)
    cfg = SimConfig(algorithm=CRA, B=1, k=1, p_t=0.5, max_slots=slots)
    state = init_state(sc, cfg)
    draws = DrawStream(2, 1, 2024, 0).slots()
    hits = 0
    for _ in range(slots):
        log = step_slot(state, next(draws))
        hits += any(rx == 0 for rx, _ in log.hello + log.feedback)
    freq = hits / slots
    P_s = an.p_direct_any(an.ProtocolParams(k=1, p_t=0.5, alpha=1.0, N_b=1.0, N=1.0,
                                            N_I=0.0))
    se = math.sqrt(P_s * (1 - P_s) / slots)
    return [_check("two-node", "handshake frequency vs P_s (in std errors)",
                   abs(freq - P_s) / se, 3.0)]


def statistical_suite(trials=200, seed=0):
    """200-trial checks on the default road (M = 150)."""
    checks = []
    scen = ScenarioConfig(M=150)
    base = SimConfig()
    mi, _ = ex.model_params(scen, 1, 0.5)
    t_max = 300
    for k in (1, 3):
        _, params = ex.model_params(scen, k, 0.5)
        theory = an.expected_fraction_curve(params, mi.N, t_max)
        runs = ex.run_discovery(scen, ex.discovery_config(base, algorithm=GSIMND, k=k,
                                                          max_slots=t_max),
                                trials, seed, fractions=())
        sim = ex.fraction_curves(runs, t_max).mean(axis=0)
        checks.append(_check("statistical", f"fraction curve vs theory, k={k}",
                             float(np.abs(sim - theory).max()), 0.07))
    rates = []
    for k in (1, 3, 5):
        runs = ex.run_discovery(scen, ex.discovery_config(base, algorithm=GSIMND, k=k,
                                                          max_slots=3000, stop_fraction=0.8),
                                trials, seed, fractions=())
        rates.append(st.stationary_rate([r.result for r in runs]))
    drops = [max(0.0, rates[i][0] - rates[i + 1][0] - (rates[i][1] + rates[i + 1][1]))
             for i in range(2)]
    checks.append(_check("statistical", "stationary P_gs non-decreasing in k", max(drops), 0.0))
    runs = ex.run_discovery(scen, ex.discovery_config(base, algorithm=CRA, max_slots=200),
                            trials, seed, fractions=())
    est = st.estimate_discovery_probability([r.result for r in runs], st.DIRECT, unit=st.PAIR)
    drift, hw = st.relative_drift(est.slots, est.rate)
    checks.append(_check("statistical", "CRA per-link rate drift over 200 slots (|drift|+ci)",
                         abs(drift) + hw, FLAT_BAND))
    return checks


def run_validation(level: str = "fast"):
    """(all passed, checks, tables)."""
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}")
    checks, table = occupancy_suite()
    checks += distribution_suite()
    checks += geometry_suite(1_000_000 if level == "fast" else 10_000_000)
    checks += two_node_suite()
    if level == "full":
        checks += statistical_suite()
    report = Table("validate_report", ["suite", "check", "measured", "tolerance", "passed"])
    for c in checks:
        report.add(c.suite, c.name, c.measured, c.tolerance, c.passed)
    return all(c.passed for c in checks), checks, [table, report]
