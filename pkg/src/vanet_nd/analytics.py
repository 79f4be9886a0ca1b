"""Mean-field probability model of directional neighbor discovery.

Covers per-sub-slot reception probabilities for hello and feedback packets,
the direct/indirect (gossip) discovery recurrences, the distribution of the
number of discovered neighbors after t slots, and the coupon-collector style
upper/lower bounds on the slots needed to discover n neighbors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from math import comb

import numpy as np

from .errors import ConvergenceError

PAPER_EQ1 = "PaperEq1"
DISTINCT_ORDERED = "DistinctOrdered"
VARIANTS = (PAPER_EQ1, DISTINCT_ORDERED)

EXACT_OCCUPANCY_LIMIT = 120  # above this N the situation counting gets slow


def p_collision_free(n: int, k: int, variant: str = PAPER_EQ1) -> float:
    """Probability that n packets on k uniformly chosen channels do not collide.

    ``PaperEq1`` counts unordered channel selections, C(k, n) / k**n.
    ``DistinctOrdered`` is the probability that n independent uniform
    choices are pairwise distinct, k! / ((k - n)! k**n).
    """
    if n < 0 or k < 1:
        raise ValueError(f"need n >= 0 and k >= 1, got n={n}, k={k}")
    if n > k:
        return 0.0
    if variant == PAPER_EQ1:
        return comb(k, n) / k ** n
    if variant == DISTINCT_ORDERED:
        return math.perm(k, n) / k ** n
    raise ValueError(f"unknown collision variant {variant!r}")


@dataclass(frozen=True)
class ProtocolParams:
    k: int = 1
    p_t: float = 0.5
    alpha: float = 1.0
    N_b: float = 1.0
    N: float = 1.0
    N_I: float = 0.0
    collision_variant: str = PAPER_EQ1

    def __post_init__(self):
        problems = []
        if self.k < 1:
            problems.append("k must be >= 1")
        if not 0.0 <= self.p_t <= 1.0:
            problems.append("p_t must lie in [0, 1]")
        if not 0.0 < self.alpha <= 1.0:
            problems.append("alpha must lie in (0, 1]")
        if self.N_b < 0 or self.N < 0 or self.N_I < 0:
            problems.append("N, N_b and N_I must be non-negative")
        if self.collision_variant not in VARIANTS:
            problems.append(f"unknown collision variant {self.collision_variant!r}")
        if problems:
            raise ValueError("; ".join(problems))

    def with_(self, **changes) -> "ProtocolParams":
        return replace(self, **changes)


def p_hello(n: int, params: ProtocolParams) -> float:
    """Probability of receiving hello packets from a given set of n neighbors."""
    a, p, k = params.alpha, params.p_t, params.k
    if n < 1 or n > k or params.N_b < n:
        return 0.0
    return (a * (1.0 - p) * (a * p) ** n
            * p_collision_free(n, k, params.collision_variant)
            * (1.0 - n / k * a * p) ** (params.N_b - n))


def p_tem(params: ProtocolParams) -> float:
    """Probability that a neighbor answers with a feedback packet."""
    if params.p_t <= 0.0:
        raise ValueError("p_tem is undefined at p_t = 0")
    ap = params.alpha * params.p_t
    return sum(p_hello(n, params) for n in range(1, params.k + 1)) / ap


def p_feedback(n: int, params: ProtocolParams, tem: float | None = None) -> float:
    """Probability of receiving feedback packets from a given set of n neighbors."""
    k = params.k
    if n < 1 or n > k or params.N_b < n or params.p_t <= 0.0:
        return 0.0
    if tem is None:
        tem = p_tem(params)
    return (params.alpha * params.p_t * tem ** n
            * p_collision_free(n, k, params.collision_variant)
            * (1.0 - n / k * tem) ** (params.N_b - n))


def p_direct(params: ProtocolParams) -> np.ndarray:
    """p_s(n) = p_h(n) + p_f(n) for n = 1..k (index 0 holds n = 1)."""
    if params.p_t <= 0.0 or params.p_t >= 1.0:
        return np.zeros(params.k)
    tem = p_tem(params)
    return np.array([p_hello(n, params) + p_feedback(n, params, tem)
                     for n in range(1, params.k + 1)])


def p_direct_any(params: ProtocolParams) -> float:
    """P_s: probability of directly discovering any neighbor in a slot."""
    return float(p_direct(params).sum())


def harmonic(n: int) -> float:
    return math.fsum(1.0 / v for v in range(1, n + 1))


def upper_bound_slots(n: int, P_s: float) -> float:
    """Expected slots to discover n neighbors at the slot-1 discovery rate."""
    if not 0.0 < P_s <= 1.0:
        raise ValueError(f"P_s must lie in (0, 1], got {P_s}")
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.fsum(1.0 / ((n - v + 1) * P_s) for v in range(1, n + 1))


@dataclass
class DiscoveryCurves:
    """Per-slot curves; index t - 1 holds slot t."""

    params: ProtocolParams
    P_s: float
    p_s: np.ndarray  # shape (k,)
    p_f: np.ndarray  # shape (k,)
    D: np.ndarray
    I: np.ndarray
    A: np.ndarray  # shape (t_max, k)
    p_gs: np.ndarray  # shape (t_max, k)
    P_gs: np.ndarray
    converged_at: int | None = None
    last_delta: float = float("nan")
    P_table: np.ndarray | None = field(default=None, repr=False)
    n_bar: np.ndarray | None = None

    @property
    def t_max(self) -> int:
        return len(self.D)

    @property
    def P_gs_limit(self) -> float:
        return float(self.P_gs[-1])


def gossip_curves(params: ProtocolParams, t_max: int, tol: float = 1e-12,
                  extend: bool = False, limit: int = 10_000) -> DiscoveryCurves:
    """Direct/indirect discovery recurrences for slots 1..t_max.

    A(n, t) is clamped to [0, 1] and, if the k terms together exceed one, they
    are rescaled to sum to one so that P_gs stays a probability.  With
    ``extend`` the iteration continues past ``t_max`` (up to ``limit`` slots)
    until P_gs changes by less than ``tol``; the returned curves then have
    that longer length.
    """
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    k = params.k
    ps = p_direct(params)
    P_s = float(ps.sum())
    if params.p_t > 0.0:
        tem = p_tem(params)
        pf = np.array([p_feedback(n, params, tem) for n in range(1, k + 1)])
    else:
        pf = np.zeros(k)

    limit = max(t_max, limit) if extend else t_max
    D, I, A, P_gs = [], [], [], []
    converged_at = None
    delta = float("nan")
    t = 0
    while t < limit:
        t += 1
        d_t = 1.0 - (1.0 - P_s) ** t
        if t == 1:
            a_t = np.zeros(k)
            i_t = 0.0
        else:
            known = D[-1] + (1.0 - D[-1]) * I[-1]
            a_t = np.clip(params.N_I * known * pf, 0.0, 1.0)
            total = a_t.sum()
            if total > 1.0:
                a_t = a_t / total
            i_t = I[-1] + (1.0 - I[-1]) * a_t.sum()
        D.append(d_t)
        I.append(min(i_t, 1.0))
        A.append(a_t)
        P_gs.append(P_s + (1.0 - P_s) * a_t.sum())
        if t >= 2:
            delta = abs(P_gs[-1] - P_gs[-2])
            if converged_at is None and delta < tol:
                converged_at = t
        if extend and t >= t_max and converged_at is not None:
            break

    A = np.array(A)
    return DiscoveryCurves(
        params=params, P_s=P_s, p_s=ps, p_f=pf, D=np.array(D), I=np.array(I),
        A=A, p_gs=ps[None, :] + (1.0 - P_s) * A, P_gs=np.array(P_gs),
        converged_at=converged_at, last_delta=delta,
    )


def stationary_P_gs(params: ProtocolParams, tol: float = 1e-12,
                    t_max: int = 10_000) -> float:
    """Fixed point P_gs(infinity) of the gossip recurrence."""
    curves = gossip_curves(params, 2, tol=tol, extend=True, limit=t_max)
    if curves.converged_at is None:
        raise ConvergenceError(f"P_gs did not settle within {t_max} slots",
                               curves.last_delta)
    return curves.P_gs_limit


def lower_bound_slots(n: int, params: ProtocolParams) -> float:
    """Expected slots to discover n neighbors at the stationary gossip rate."""
    return upper_bound_slots(n, stationary_P_gs(params))


def normalized_discovery_prob(n_d: int, n: int, t: int,
                              curves: DiscoveryCurves) -> float:
    """P_c: probability of discovering n of n_d undiscovered neighbors in slot t."""
    k = curves.params.k
    if n < 1 or n > n_d or n > k:
        return 0.0
    return float(_pc_row(n_d, t, curves)[n - 1])


def _pc_row(n_d: int, t: int, curves: DiscoveryCurves) -> np.ndarray:
    """[P_c(n_d, m, t) for m = 1..k]."""
    k = curves.params.k
    pgs = curves.p_gs[t - 1]
    weights = np.array([comb(n_d, m) for m in range(1, k + 1)], dtype=float)
    num = weights * pgs
    denom = num.sum() + (1.0 - curves.P_gs[t - 1])
    if denom <= 0.0:
        return np.zeros(k)
    return num / denom


def discovery_distribution(N: int, t_max: int, curves: DiscoveryCurves):
    """P(n, t) for n = 0..N, t = 0..t_max, and the expected count n_bar(t).

    Implements the five-case recurrence on the number of discovered
    neighbors.  ``curves`` must cover at least ``t_max`` slots.  Returns
    (P_table of shape (t_max + 1, N + 1), n_bar of shape (t_max + 1,)).
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if curves.t_max < t_max:
        raise ValueError("curves are shorter than t_max")
    k = curves.params.k
    P = np.zeros((t_max + 1, N + 1))
    P[0, 0] = 1.0
    # pc[n_d, m - 1] = P_c(n_d, m, t); rows for n_d = 0..N
    for t in range(1, t_max + 1):
        pc = np.zeros((N + 1, k))
        for n_d in range(1, N + 1):
            pc[n_d] = _pc_row(n_d, t, curves)
        stay = 1.0 - pc.sum(axis=1)  # indexed by n_d
        prev = P[t - 1]

        def Pc(n_d, m):
            return pc[n_d, m - 1] if 1 <= m <= k and 0 <= n_d <= N else 0.0

        def Pp(n):
            return prev[n] if 0 <= n <= N else 0.0

        row = P[t]
        for n in range(N + 1):
            if n == 0:
                row[0] = prev[0] * stay[N]
            elif n == N:
                row[N] = sum(Pp(N - w) * Pc(w, w) for w in range(1, k + 1)) + prev[N]
            elif n == 1:
                row[1] = prev[0] * Pc(N, 1) + prev[1] * stay[N - 1]
            elif n <= k:
                row[n] = (prev[0] * Pc(N, n)
                          + sum(prev[w] * Pc(N - w, n - w) for w in range(1, n))
                          + prev[n] * stay[N - n])
            else:
                row[n] = (sum(Pp(n - w) * Pc(N - n + w, w) for w in range(1, k + 1))
                          + prev[n] * stay[N - n])
    n_bar = P @ np.arange(N + 1)
    curves.P_table = P
    curves.n_bar = n_bar
    return P, n_bar


def markov_chain_distribution(N: int, t_max: int, curves: DiscoveryCurves) -> np.ndarray:
    """Same distribution by explicit transition matrices, for cross-checking."""
    k = curves.params.k
    state = np.zeros(N + 1)
    state[0] = 1.0
    out = [state.copy()]
    for t in range(1, t_max + 1):
        T = np.zeros((N + 1, N + 1))
        for s in range(N + 1):
            n_d = N - s
            for m in range(1, min(k, n_d) + 1):
                T[s, s + m] = normalized_discovery_prob(n_d, m, t, curves)
            T[s, s] = 1.0 - T[s].sum()
        state = state @ T
        out.append(state.copy())
    return np.array(out)


@dataclass(frozen=True)
class ModelInputs:
    """Geometry- and occupancy-derived inputs for a road scenario."""

    N_mean: float
    N: int
    N_I: float
    alpha: float
    N_b: float


def model_inputs(M: int, L: float = 1000.0, d: float = 60.0, r: float = 200.0,
                 B: int = 12) -> ModelInputs:
    from .occupancy import binomial_q_beams, expected_q_beams
    from .scenario import expected_common_neighbor_count, expected_neighbor_count

    rho = M / (L * d)
    n_mean = expected_neighbor_count(rho, r, d)
    n_int = max(int(round(n_mean)), 1)
    n_i = min(expected_common_neighbor_count(rho, r, d), n_mean)
    if n_int <= EXACT_OCCUPANCY_LIMIT:
        stats = expected_q_beams(n_int, B)
    else:
        stats = binomial_q_beams(n_int, B)
    return ModelInputs(N_mean=n_mean, N=n_int, N_I=n_i, alpha=stats.alpha,
                       N_b=stats.mean_nonempty_occupancy)


def params_for(inputs: ModelInputs, k: int = 1, p_t: float = 0.5,
               variant: str = PAPER_EQ1) -> ProtocolParams:
    return ProtocolParams(k=k, p_t=p_t, alpha=inputs.alpha, N_b=inputs.N_b,
                          N=inputs.N_mean, N_I=inputs.N_I, collision_variant=variant)


def expected_fraction_curve(params: ProtocolParams, N: int, t_max: int):
    """n_bar(t) / N for t = 0..t_max."""
    curves = gossip_curves(params, max(t_max, 1))
    _, n_bar = discovery_distribution(N, t_max, curves)
    return n_bar / N


def bounds_table(params: ProtocolParams, N: int, fractions):
    """Rows of (fraction, n, t_lower, t_upper) with n = ceil(fraction * N)."""
    P_s = p_direct_any(params)
    P_inf = stationary_P_gs(params)
    rows = []
    for f in fractions:
        n = max(1, math.ceil(f * N - 1e-9))
        rows.append((f, n, upper_bound_slots(n, P_inf), upper_bound_slots(n, P_s)))
    return rows
