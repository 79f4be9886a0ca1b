"""Occupancy statistics of a node's neighbors over its B beam sectors.

A beam holding exactly q neighbors is a q-beam.  With every neighbor falling
into each beam independently with probability 1/B, ``expected_q_beams`` gives
the expected number of q-beams E_q, the probability ``alpha`` of picking any
particular non-empty beam, and the mean occupancy of a non-empty beam.  All
counting is exact (Python integers and Fractions).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, prod

import numpy as np
from scipy.stats import binom

BRUTE_FORCE_LIMIT = 10_000_000


@dataclass(frozen=True)
class OccupancyModel:
    N: int
    B: int

    def __post_init__(self):
        if self.B < 1 or self.N < 0:
            raise ValueError(f"need B >= 1 and N >= 0, got N={self.N}, B={self.B}")


@dataclass(frozen=True)
class QBeamStats:
    E: tuple  # E[q] for q = 0..N
    alpha: float
    mean_nonempty_occupancy: float

    @property
    def N(self) -> int:
        return len(self.E) - 1

    @property
    def B(self) -> float:
        return sum(self.E)


def situation_count_NS(N: int, q: int, e: int) -> int:
    """Ways to pick q*e of N labeled nodes and fill e fixed beams with q each."""
    if q * e > N:
        return 0
    return comb(N, q * e) * prod(comb(q * (e - w), q) for w in range(e))


def situation_count_DS(b: int, q: int, n: int) -> int:
    """Ways to put n labeled nodes into b labeled beams with no beam holding exactly q."""
    return _ds(b, q, n)


@lru_cache(maxsize=None)
def _ds(b, q, n):
    if b == 0:
        return 1 if n == 0 else 0
    return sum(comb(n, m) * _ds(b - 1, q, n - m) for m in range(n + 1) if m != q)


def situation_count_BS(B: int, e: int, q: int, N: int) -> int:
    if q * e > N or e > B:
        return 0
    return comb(B, e) * situation_count_DS(B - e, q, N - q * e)


def _event_probability_exact(e, B, N, q) -> Fraction:
    return Fraction(situation_count_NS(N, q, e) * situation_count_BS(B, e, q, N), B ** N)


def event_probability(e: int, B: int, N: int, q: int) -> float:
    """P(exactly e of the B beams are q-beams), beams equiprobable."""
    return float(_event_probability_exact(e, B, N, q))


def _stats_from_E(E) -> QBeamStats:
    E = tuple(float(x) for x in E)
    B = sum(E)
    if len(E) == 1 or B - E[0] <= 0:
        raise ValueError("alpha is undefined when there are no neighbors (N = 0)")
    alpha = 1.0 / (B - E[0])
    nb = alpha * sum(q * Eq for q, Eq in enumerate(E) if q >= 1)
    return QBeamStats(E=E, alpha=alpha, mean_nonempty_occupancy=nb)


def q_beam_expectations(N: int, B: int) -> list:
    """Exact E[q], q = 0..N, as Fractions."""
    OccupancyModel(N, B)
    E = []
    for q in range(N + 1):
        e_max = B if q == 0 else min(B, N // q)
        E.append(sum(e * _event_probability_exact(e, B, N, q)
                     for e in range(1, e_max + 1)))
    return E


def expected_q_beams(N: int, B: int, monte_carlo: bool = False,
                     draws: int = 1_000_000, seed: int = 0) -> QBeamStats:
    """E_q, alpha and mean non-empty occupancy for N neighbors over B beams.

    ``monte_carlo`` switches to sampled assignments, intended for N > 120
    where the exact sums get slow.
    """
    if N == 0:
        raise ValueError("alpha is undefined when there are no neighbors (N = 0)")
    if monte_carlo:
        return monte_carlo_occupancy(N, B, draws=draws, seed=seed)
    return _stats_from_E(q_beam_expectations(N, B))


def binomial_q_beams(N: int, B: int) -> QBeamStats:
    """E_q = B * P(Binomial(N, 1/B) = q), by linearity over the B beams.

    Independent of the situation counting above and cheap for any N.
    """
    OccupancyModel(N, B)
    if N == 0:
        raise ValueError("alpha is undefined when there are no neighbors (N = 0)")
    E = B * binom.pmf(np.arange(N + 1), N, 1.0 / B)
    return _stats_from_E(E)


def brute_force_occupancy(N: int, B: int) -> QBeamStats:
    """E_q by enumerating all B**N equiprobable beam assignments.

    Returns stats with alpha/occupancy set to nan when N = 0.
    """
    if B ** N > BRUTE_FORCE_LIMIT:
        raise ValueError(f"B**N = {B ** N} exceeds the enumeration limit")
    counts = np.zeros(N + 1, dtype=np.int64)
    for assignment in itertools.product(range(B), repeat=N):
        occ = np.bincount(np.asarray(assignment, dtype=np.int64), minlength=B)
        counts += np.bincount(occ, minlength=N + 1)[: N + 1]
    E = [Fraction(int(c), B ** N) for c in counts]
    if N == 0:
        return QBeamStats(E=(float(B),), alpha=float("nan"),
                          mean_nonempty_occupancy=float("nan"))
    return _stats_from_E(E)


def monte_carlo_occupancy(N: int, B: int, draws: int = 1_000_000,
                          seed: int = 0, chunk: int = 100_000) -> QBeamStats:
    rng = np.random.default_rng(seed)
    counts = np.zeros(N + 1, dtype=np.int64)
    done = 0
    while done < draws:
        n = min(chunk, draws - done)
        beams = rng.integers(0, B, size=(n, N))
        occ = np.zeros((n, B), dtype=np.int64)
        np.add.at(occ, (np.repeat(np.arange(n), N), beams.ravel()), 1)
        counts += np.bincount(occ.ravel(), minlength=N + 1)[: N + 1]
        done += n
    return _stats_from_E(counts / draws)
