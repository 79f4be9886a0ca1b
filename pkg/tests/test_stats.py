import numpy as np
import pytest

from vanet_nd.scenario import ScenarioConfig
from vanet_nd.simulator import (CRA, GSIMND, InsufficientDataError, SimConfig,
                                estimate_discovery_probability, run_trials, stationary_rate)
from vanet_nd.simulator import stats as st
from vanet_nd.simulator.config import UNTIL_DISCOVERED

SCEN = ScenarioConfig(M=150)


def runs(algorithm, trials, first_trial=0, max_slots=300, **kw):
    cfg = SimConfig(algorithm=algorithm, mode=UNTIL_DISCOVERED, max_slots=max_slots, **kw)
    return run_trials(SCEN, cfg, seed=5, trials=trials, first_trial=first_trial)


@pytest.fixture(scope="module")
def gsimnd_runs():
    return runs(GSIMND, 200)


def test_needs_two_trials(gsimnd_runs):
    with pytest.raises(InsufficientDataError):
        estimate_discovery_probability(gsimnd_runs[:1])
    with pytest.raises(InsufficientDataError):
        stationary_rate(gsimnd_runs[:1])


def test_empty_cohort_is_an_error(gsimnd_runs):
    longest = max(r.slots_run for r in gsimnd_runs)
    with pytest.raises(InsufficientDataError):
        estimate_discovery_probability(gsimnd_runs, t_max=longest + 10)
    isolated = runs(GSIMND, 3, max_slots=5, stop_fraction=1.0)
    for r in isolated:
        r.n_active[:] = 0
    with pytest.raises(InsufficientDataError):
        estimate_discovery_probability(isolated)


def test_bad_selectors(gsimnd_runs):
    with pytest.raises(ValueError):
        estimate_discovery_probability(gsimnd_runs, which="both")
    with pytest.raises(ValueError):
        estimate_discovery_probability(gsimnd_runs, unit="beam")


def test_estimate_shape_and_bounds(gsimnd_runs):
    est = estimate_discovery_probability(gsimnd_runs, t_max=100)
    assert est.slots[0] == 1 and len(est.rate) == 100 and est.trials == 200
    assert np.all((est.lower <= est.rate) & (est.rate <= est.upper))
    assert np.all((est.lower >= 0) & (est.upper <= 1))
    # pooled rate is literally events / cohort
    assert np.allclose(est.rate, est.events / est.cohort)


def test_cra_pair_rate_is_flat(gsimnd_runs):
    est = estimate_discovery_probability(runs(CRA, 200, max_slots=200), st.DIRECT, unit=st.PAIR)
    drift, hw = st.relative_drift(est.slots, est.rate)
    assert abs(drift) + hw <= 0.10
    # the gossip curve over the same span is anything but flat
    g = estimate_discovery_probability(gsimnd_runs, st.ANY, t_max=200, unit=st.PAIR)
    assert st.relative_drift(g.slots, g.rate)[0] > 1.0


def test_gsimnd_rises_then_plateaus(gsimnd_runs):
    est = estimate_discovery_probability(gsimnd_runs, st.ANY, unit=st.PAIR)
    early = est.events[:3].sum() / est.cohort[:3].sum()
    plateau, hw = stationary_rate(gsimnd_runs, st.ANY, unit=st.PAIR)
    assert plateau - hw > early
    late, late_hw = stationary_rate(gsimnd_runs, st.ANY, (0.75, 0.95), unit=st.PAIR)
    assert late + late_hw >= plateau - hw


def test_disjoint_trial_sets_agree(gsimnd_runs):
    a, b = gsimnd_runs[:100], gsimnd_runs[100:]
    for unit in (st.NODE, st.PAIR):
        pa, ha = stationary_rate(a, unit=unit)
        pb, hb = stationary_rate(b, unit=unit)
        assert abs(pa - pb) <= ha + hb
    ea = estimate_discovery_probability(a, t_max=60)
    eb = estimate_discovery_probability(b, t_max=60)
    half = lambda e: (e.upper - e.lower) / 2
    outside = np.abs(ea.rate - eb.rate) > half(ea) + half(eb)
    assert outside.mean() <= 0.1


def test_stationary_window_must_be_hit(gsimnd_runs):
    with pytest.raises(InsufficientDataError):
        stationary_rate(gsimnd_runs, window=(1.5, 2.0))


def test_ratio_ci_by_hand():
    e = np.array([3.0, 5.0, 4.0])
    c = np.array([10.0, 10.0, 20.0])
    p, hw = st.ratio_ci(e, c)
    assert p == pytest.approx(12 / 40)
    resid = e - p * c
    assert hw == pytest.approx(st.Z95 * np.sqrt(3 / 2 * (resid ** 2).sum() / 40 ** 2))


def test_mean_ci():
    m, hw = st.mean_ci([1.0, 2.0, 3.0])
    assert m == 2.0 and hw == pytest.approx(4.302652729911275 * 1 / np.sqrt(3))
    with pytest.raises(InsufficientDataError):
        st.mean_ci([1.0])


def test_slots_to_fraction_censors_at_budget():
    res = runs(CRA, 4, max_slots=40)
    sample = st.slots_to_fraction(res, 0.99, budget=40)
    assert sample.censored == 4 and np.all(sample.values == 40)
    sample = st.slots_to_fraction(res, 0.001)
    assert sample.censored == 0 and np.all(sample.values < 40)


def test_welch_and_equivalence():
    rng = np.random.default_rng(0)
    a = rng.normal(100, 10, 200)
    b = rng.normal(300, 30, 200)
    assert st.one_sided_less(a, b, ratio=0.5).passed
    assert not st.one_sided_less(a, b, ratio=0.3).passed
    c = rng.normal(103, 10, 200)
    assert st.equivalent_within(a, c, 0.15).passed
    assert not st.equivalent_within(a, b, 0.15).passed
    assert st.one_sided_less(np.full(5, 1.0), np.full(5, 2.0)).passed


def test_relative_drift():
    x = np.arange(1.0, 101.0)
    drift, hw = st.relative_drift(x, 1.0 + 0.001 * x)
    assert drift == pytest.approx(0.099 / 1.0505, rel=1e-9) and hw < 1e-9


def test_weighted_slope_recovers_line():
    x = np.arange(50.0)
    y = 0.5 + 0.01 * x
    slope, hw = st.least_squares_slope(x, y + 1e-9 * np.sin(x), w=np.ones(50))
    assert slope == pytest.approx(0.01, rel=1e-6) and hw < 1e-8
