"""Estimates pooled over trials.

Nodes inside one trial share a scenario and a draw stream, so their outcomes
are correlated.  Intervals therefore treat the trial as the sampling unit:
pooled rates use the ratio-estimator (cluster) variance across trials, and
means of per-trial quantities use the across-trial spread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats as sps

Z95 = 1.959963984540054

DIRECT = "direct"  # P_s: new neighbors found by direct reception
ANY = "any"  # P_gs: new neighbors found directly or through gossip

NODE = "node"  # share of cohort nodes finding >= 1 new neighbor in the slot
PAIR = "pair"  # share of the cohort's missing (node, neighbor) pairs found


class InsufficientDataError(ValueError):
    pass


@dataclass
class ProbabilityEstimate:
    slots: np.ndarray  # 1-based slot numbers
    rate: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    events: np.ndarray
    cohort: np.ndarray
    trials: int


def _counts(res, which, unit=NODE):
    """(events, cohort) per slot for one trial."""
    if which not in (DIRECT, ANY):
        raise ValueError(f"which must be {DIRECT!r} or {ANY!r}")
    if unit == NODE:
        ev = res.n_new_direct if which == DIRECT else res.n_new_any
        return ev, res.n_active
    if unit == PAIR:
        ev = res.pair_new_direct if which == DIRECT else res.pair_new_any
        return ev, res.pair_open
    raise ValueError(f"unit must be {NODE!r} or {PAIR!r}")


def _stack(results, which, unit, t_max):
    ev = np.zeros((len(results), t_max + 1))
    co = np.zeros((len(results), t_max + 1))
    for r, res in enumerate(results):
        e, c = _counts(res, which, unit)
        n = min(len(c), t_max + 1)
        ev[r, :n] = e[:n]
        co[r, :n] = c[:n]
    return ev, co


def ratio_ci(events, cohorts):
    """Pooled rate sum(events)/sum(cohorts) and its 95% half-width.

    ``events``/``cohorts`` hold one entry per trial (or trials x slots, reduced
    over axis 0).  The variance is the usual linearized ratio estimator.
    """
    e = np.asarray(events, dtype=float)
    c = np.asarray(cohorts, dtype=float)
    n = e.shape[0]
    E, C = e.sum(axis=0), c.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = E / C
        resid = e - p * c
        var = n / (n - 1) * (resid ** 2).sum(axis=0) / C ** 2
    return p, Z95 * np.sqrt(var)


def estimate_discovery_probability(results, which: str = ANY,
                                   t_max: Optional[int] = None,
                                   unit: str = NODE) -> ProbabilityEstimate:
    """Per-slot frequency of finding at least one new neighbor.

    The cohort at slot t is every node that was still running (not frozen by
    convergence) and still missing neighbors at the start of t.  With
    ``unit="pair"`` the rate is instead new neighbors found per missing
    (node, neighbor) pair of that cohort, a per-link hazard that does not
    shrink just because fewer neighbors are left to find.  Without ``t_max``
    the estimate runs up to the last slot before the pooled cohort first
    empties.
    """
    results = list(results)
    if len(results) < 2:
        raise InsufficientDataError("need at least 2 trials for an interval")
    longest = max(len(r.n_active) for r in results) - 1
    if longest < 1:
        raise InsufficientDataError("no slots were simulated")
    ev, co = _stack(results, which, unit, longest)
    pooled = co.sum(axis=0)
    if t_max is None:
        empty = np.flatnonzero(pooled[1:] == 0)
        t_max = int(empty[0]) if len(empty) else longest
        if t_max == 0:
            raise InsufficientDataError("empty cohort at slot 1")
    else:
        if t_max > longest:
            raise InsufficientDataError(f"trials only cover {longest} slots")
        if np.any(pooled[1:t_max + 1] == 0):
            bad = int(np.flatnonzero(pooled[1:t_max + 1] == 0)[0]) + 1
            raise InsufficientDataError(f"empty cohort at slot {bad}")
    sl = slice(1, t_max + 1)
    p, hw = ratio_ci(ev[:, sl], co[:, sl])
    return ProbabilityEstimate(
        slots=np.arange(1, t_max + 1), rate=p,
        lower=np.clip(p - hw, 0.0, 1.0), upper=np.clip(p + hw, 0.0, 1.0),
        events=ev[:, sl].sum(axis=0), cohort=co[:, sl].sum(axis=0),
        trials=len(results))


def stationary_rate(results, which: str = ANY, window=(0.25, 0.75), unit: str = NODE):
    """Rate pooled over slots whose network discovered fraction is in ``window``.

    Returns (rate, 95% half-width).  Using a fraction window rather than a
    slot window keeps the plateau comparable across very different speeds.
    """
    lo, hi = window
    ev, co = [], []
    for res in results:
        f = res.fraction_discovered[: len(res.n_active)]
        w = (f >= lo) & (f <= hi)
        w[0] = False
        e, c = _counts(res, which, unit)
        ev.append(e[w].sum())
        co.append(c[w].sum())
    if len(ev) < 2:
        raise InsufficientDataError("need at least 2 trials for an interval")
    if sum(co) == 0:
        raise InsufficientDataError("no slots fell inside the fraction window")
    p, hw = ratio_ci(np.array(ev), np.array(co))
    return float(p), float(hw)


def mean_ci(values, level: float = 0.95):
    """Mean and half-width of a Student t interval."""
    v = np.asarray(values, dtype=float)
    if len(v) < 2:
        raise InsufficientDataError("need at least 2 values")
    sem = v.std(ddof=1) / math.sqrt(len(v))
    return float(v.mean()), float(sps.t.ppf(0.5 + level / 2, len(v) - 1) * sem)


@dataclass
class SlotsSample:
    values: np.ndarray  # censored entries hold the slot budget
    censored: int
    target: float

    @property
    def mean(self) -> float:
        return float(self.values.mean())


def slots_to_fraction(results, target: float, budget: Optional[int] = None) -> SlotsSample:
    """Per-trial first slot with network fraction >= target.

    Trials that never got there are censored at ``budget`` (default: their
    own slot count), which can only understate the true mean.
    """
    vals, cens = [], 0
    for res in results:
        s = res.slots_to_fraction(target)
        if math.isnan(s):
            cens += 1
            s = float(res.slots_run if budget is None else budget)
        vals.append(s)
    return SlotsSample(np.array(vals), cens, target)


@dataclass
class Comparison:
    statistic: float
    p_value: float
    passed: bool


def one_sided_less(a, b, ratio: float = 1.0, alpha: float = 0.05) -> Comparison:
    """Welch test of mean(a) < ratio * mean(b)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = ratio * b.mean() - a.mean()
    va = a.var(ddof=1) / len(a)
    vb = ratio ** 2 * b.var(ddof=1) / len(b)
    se = math.sqrt(va + vb)
    if se == 0:
        return Comparison(math.inf if diff > 0 else -math.inf, 0.0 if diff > 0 else 1.0, diff > 0)
    dof = (va + vb) ** 2 / ((va ** 2 / (len(a) - 1) if va else 0) + (vb ** 2 / (len(b) - 1) if vb else 0))
    stat = diff / se
    p = float(sps.t.sf(stat, dof))
    return Comparison(float(stat), p, p < alpha)


def equivalent_within(a, b, rel: float, alpha: float = 0.05) -> Comparison:
    """Two one-sided tests: (1-rel) * mean(b) < mean(a) < (1+rel) * mean(b)."""
    upper = one_sided_less(a, b, ratio=1.0 + rel, alpha=alpha)
    # mean(a) > (1-rel) mean(b)  <=>  (1-rel) mean(b) < 1 * mean(a)
    lower = one_sided_less(np.asarray(b, float) * (1.0 - rel), a, ratio=1.0, alpha=alpha)
    worst = upper if upper.p_value >= lower.p_value else lower
    return Comparison(worst.statistic, worst.p_value, upper.passed and lower.passed)


def least_squares_slope(x, y, w=None):
    """Weighted LS slope of y on x with a 95% half-width."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    res = sps.linregress(x, y) if w is None else None
    if res is not None:
        dof = len(x) - 2
        return float(res.slope), float(sps.t.ppf(0.975, dof) * res.stderr)
    w = np.asarray(w, dtype=float)
    X = np.column_stack([np.ones_like(x), x])
    W = np.diag(w)
    cov = np.linalg.inv(X.T @ W @ X)
    beta = cov @ X.T @ W @ y
    r = y - X @ beta
    dof = len(x) - 2
    s2 = float(r @ W @ r) / dof
    return float(beta[1]), float(sps.t.ppf(0.975, dof) * math.sqrt(s2 * cov[1, 1]))


def relative_drift(slots, rate):
    """Fitted change of ``rate`` across ``slots`` relative to its mean, with 95% half-width.

    A curve counts as flat when the whole interval sits inside a small band
    around zero (an equivalence test rather than a failure to reject).
    """
    slots = np.asarray(slots, dtype=float)
    rate = np.asarray(rate, dtype=float)
    slope, hw = least_squares_slope(slots, rate)
    scale = (slots[-1] - slots[0]) / rate.mean()
    return slope * scale, hw * scale
