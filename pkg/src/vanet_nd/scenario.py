"""Road scenarios, geometric neighbor relations and RSU sensing coverage.

Also evaluates the expected neighbor / common-neighbor counts of a node on a
straight road of width ``d`` with uniformly scattered vehicles, both by
deterministic quadrature and by a Monte Carlo oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy import integrate

from .errors import ConfigError

COMPLETE = "Complete"
INCOMPLETE = "Incomplete"

# completeness rules for sensing reports
NEIGHBORHOOD = "neighborhood"  # every neighbor must be inside a sensing disk
POSITION = "position"  # the node itself must be inside a sensing disk


@dataclass(frozen=True)
class ScenarioConfig:
    L: float = 1000.0
    d: float = 60.0
    r: float = 200.0
    s_x: float = 600.0
    M: int = 150
    B: int = 12
    rsu_comm_radius: Optional[float] = None
    completeness: str = NEIGHBORHOOD

    def validate(self):
        problems = []
        if self.M < 1:
            problems.append(f"M must be >= 1, got {self.M}")
        if not self.L > 0:
            problems.append(f"L must be positive, got {self.L}")
        if not 0 < self.d < self.r:
            problems.append(f"need 0 < d < r, got d={self.d}, r={self.r}")
        if not self.s_x > 0:
            problems.append(f"s_x must be positive, got {self.s_x}")
        if self.B < 1:
            problems.append(f"B must be >= 1, got {self.B}")
        if self.rsu_comm_radius is not None and self.rsu_comm_radius < self.r:
            problems.append("rsu_comm_radius must be at least the sensing radius r")
        if self.completeness not in (NEIGHBORHOOD, POSITION):
            problems.append(f"unknown completeness rule {self.completeness!r}")
        if problems:
            raise ConfigError(problems)
        return self

    @property
    def theta(self) -> float:
        return 2.0 * math.pi / self.B

    @property
    def density(self) -> float:
        return self.M / (self.L * self.d)


def rsu_layout(L: float, d: float, s_x: float) -> np.ndarray:
    """RSUs on the centerline at x = s_x/2 + n*s_x, kept inside [0, L]."""
    xs = np.arange(s_x / 2.0, L + 1e-9, s_x)
    xs = xs[xs <= L]
    return np.column_stack([xs, np.full(len(xs), d / 2.0)])


@dataclass(frozen=True)
class SensingReport:
    subject: int
    completeness: str
    per_beam_neighbor_counts: tuple
    nonempty_beam_indices: tuple

    @property
    def total(self) -> int:
        return int(sum(self.per_beam_neighbor_counts))

    @property
    def complete(self) -> bool:
        return self.completeness == COMPLETE


@dataclass(frozen=True)
class RoadScenario:
    L: float
    d: float
    r: float
    s_x: float
    rsu_positions: np.ndarray
    node_positions: np.ndarray
    B: int = 12
    rsu_comm_radius: Optional[float] = None
    completeness_rule: str = NEIGHBORHOOD
    seed: object = field(default=None, compare=False)

    @property
    def M(self) -> int:
        return len(self.node_positions)

    @property
    def density(self) -> float:
        return self.M / (self.L * self.d)

    @property
    def theta(self) -> float:
        return 2.0 * math.pi / self.B

    @classmethod
    def from_positions(cls, positions, *, L, d, r, s_x=600.0, B=12,
                       rsu_positions=None, rsu_comm_radius=None,
                       completeness_rule=NEIGHBORHOOD) -> "RoadScenario":
        """Build a scenario from explicit node (and optionally RSU) positions."""
        pos = np.asarray(positions, dtype=float).reshape(-1, 2)
        if rsu_positions is None:
            rsu = rsu_layout(L, d, s_x)
        else:
            rsu = np.asarray(rsu_positions, dtype=float).reshape(-1, 2)
        return cls(L=L, d=d, r=r, s_x=s_x, rsu_positions=rsu, node_positions=pos,
                   B=B, rsu_comm_radius=rsu_comm_radius,
                   completeness_rule=completeness_rule)

    @cached_property
    def distances(self) -> np.ndarray:
        diff = self.node_positions[:, None, :] - self.node_positions[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])

    @cached_property
    def adjacency(self) -> np.ndarray:
        adj = self.distances <= self.r
        np.fill_diagonal(adj, False)
        adj.setflags(write=False)
        return adj

    @cached_property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    @cached_property
    def beam_matrix(self) -> np.ndarray:
        """beam_matrix[i, j]: index of the beam of i that contains j."""
        diff = self.node_positions[None, :, :] - self.node_positions[:, None, :]
        bearing = np.mod(np.arctan2(diff[..., 1], diff[..., 0]), 2.0 * math.pi)
        beams = np.floor(bearing / self.theta).astype(np.int64)
        return np.clip(beams, 0, self.B - 1)

    @cached_property
    def sensed_mask(self) -> np.ndarray:
        """Nodes located inside the sensing disk (radius r) of some RSU."""
        if len(self.rsu_positions) == 0:
            return np.zeros(self.M, dtype=bool)
        diff = self.node_positions[:, None, :] - self.rsu_positions[None, :, :]
        return (np.hypot(diff[..., 0], diff[..., 1]) <= self.r).any(axis=1)

    @cached_property
    def reachable_mask(self) -> np.ndarray:
        """Nodes inside the communication range of some RSU."""
        radius = self.r if self.rsu_comm_radius is None else self.rsu_comm_radius
        if len(self.rsu_positions) == 0:
            return np.zeros(self.M, dtype=bool)
        diff = self.node_positions[:, None, :] - self.rsu_positions[None, :, :]
        return (np.hypot(diff[..., 0], diff[..., 1]) <= radius).any(axis=1)

    def interior_mask(self, margin: Optional[float] = None) -> np.ndarray:
        """Nodes at least ``margin`` (default r) away from both road ends."""
        m = self.r if margin is None else margin
        x = self.node_positions[:, 0]
        return (x >= m) & (x <= self.L - m)


def generate_scenario(config: ScenarioConfig, seed) -> RoadScenario:
    """Scatter ``config.M`` vehicles uniformly over the road rectangle.

    ``seed`` is anything ``numpy.random.default_rng`` accepts.
    """
    config.validate()
    rng = np.random.default_rng(seed)
    xs = rng.uniform(0.0, config.L, config.M)
    ys = rng.uniform(0.0, config.d, config.M)
    return RoadScenario(
        L=config.L, d=config.d, r=config.r, s_x=config.s_x,
        rsu_positions=rsu_layout(config.L, config.d, config.s_x),
        node_positions=np.column_stack([xs, ys]),
        B=config.B, rsu_comm_radius=config.rsu_comm_radius,
        completeness_rule=config.completeness, seed=seed,
    )


def neighbors_of(scenario: RoadScenario, i: int) -> set:
    return set(np.flatnonzero(scenario.adjacency[i]).tolist())


def common_neighbor_counts(scenario: RoadScenario):
    """Common-neighbor count for every neighboring pair (i < j)."""
    adj = scenario.adjacency.astype(np.int32)
    ii, jj = np.nonzero(np.triu(scenario.adjacency, 1))
    common = (adj @ adj)[ii, jj]
    return ii, jj, common


def beams_toward(scenario: RoadScenario, i: int, others, B: Optional[int] = None):
    """Beam index (of node i, global frame) containing each node in ``others``."""
    B = scenario.B if B is None else B
    others = np.asarray(others, dtype=np.int64)
    if B == scenario.B:
        return scenario.beam_matrix[i, others]
    diff = scenario.node_positions[others] - scenario.node_positions[i]
    bearing = np.mod(np.arctan2(diff[:, 1], diff[:, 0]), 2.0 * math.pi)
    return np.clip(np.floor(bearing / (2.0 * math.pi / B)).astype(np.int64), 0, B - 1)


def sensing_report(scenario: RoadScenario, i: int, B: Optional[int] = None):
    """RSU-derived per-beam neighbor counts for node ``i``.

    Returns None when node ``i`` is outside every RSU's communication range.
    """
    B = scenario.B if B is None else B
    if not scenario.reachable_mask[i]:
        return None
    nbrs = np.flatnonzero(scenario.adjacency[i])
    sensed = nbrs[scenario.sensed_mask[nbrs]]
    if scenario.completeness_rule == POSITION:
        complete = bool(scenario.sensed_mask[i])
    else:
        complete = len(sensed) == len(nbrs)
    counts = np.bincount(beams_toward(scenario, i, sensed, B), minlength=B)
    return SensingReport(
        subject=int(i),
        completeness=COMPLETE if complete else INCOMPLETE,
        per_beam_neighbor_counts=tuple(int(c) for c in counts),
        nonempty_beam_indices=tuple(int(b) for b in np.flatnonzero(counts)),
    )


# -- expected counts on an unbounded road -----------------------------------

def _check_geometry(rho, r, d):
    if not (0 < d < r):
        raise ValueError(f"need 0 < d < r, got d={d}, r={r}")
    if rho < 0:
        raise ValueError("density must be non-negative")


def _chord(x, s, r):
    return np.sqrt(np.maximum(r * r - (x - s) ** 2, 0.0))


def expected_neighbor_count(rho: float, r: float, d: float, tol: float = 1e-6) -> float:
    """Mean neighbor count of a node whose lateral offset is uniform on [0, d]."""
    _check_geometry(rho, r, d)
    if rho == 0:
        return 0.0
    val, _ = integrate.dblquad(lambda x, s: _chord(x, s, r), 0.0, d, 0.0, d,
                               epsabs=tol * d / 2.0, epsrel=1e-10)
    return 2.0 * rho / d * val


def _lens_chord_mean(c, S):
    # mean over s3 ~ U[0, S] of max(c - s3, 0)
    return np.where(c >= S, c - S / 2.0, c * c / (2.0 * S))


def expected_common_neighbor_count(rho: float, r: float, d: float,
                                   tol: float = 1e-6) -> float:
    """Mean common-neighbor count of two neighboring nodes.

    Lateral offsets s1, s2 are uniform on [0, d], the longitudinal separation
    s3 is uniform on [0, sqrt(r^2 - (s2 - s1)^2)], and the per-x overlap chord
    sqrt(r^2-(x-s2)^2) + sqrt(r^2-(x-s1)^2) - s3 is clamped at zero.  The s3
    average of the clamped chord is done in closed form; the remaining three
    axes use adaptive quadrature.
    """
    _check_geometry(rho, r, d)
    if rho == 0:
        return 0.0

    def integrand(x, s2, s1):
        S = math.sqrt(r * r - (s2 - s1) ** 2)
        c = math.sqrt(r * r - (x - s1) ** 2) + math.sqrt(r * r - (x - s2) ** 2)
        return c - S / 2.0 if c >= S else c * c / (2.0 * S)

    val, _ = integrate.tplquad(integrand, 0.0, d, 0.0, d, 0.0, d,
                               epsabs=tol * d * d, epsrel=1e-10)
    return rho / (d * d) * val


def mc_expected_neighbor_count(rho, r, d, n_samples=10_000_000, seed=0,
                               chunk=1_000_000):
    """Monte Carlo estimate of the mean neighbor count; returns (mean, stderr)."""
    _check_geometry(rho, r, d)
    rng = np.random.default_rng(seed)
    total = total_sq = 0.0
    done = 0
    while done < n_samples:
        n = min(chunk, n_samples - done)
        s = rng.uniform(0.0, d, n)
        x = rng.uniform(0.0, d, n)
        v = 2.0 * rho * d * _chord(x, s, r)
        total += v.sum()
        total_sq += (v * v).sum()
        done += n
    mean = total / n_samples
    var = max(total_sq / n_samples - mean * mean, 0.0)
    return mean, math.sqrt(var / n_samples)


def mc_expected_common_neighbor_count(rho, r, d, n_samples=4_000_000, seed=0,
                                      chunk=1_000_000):
    """Monte Carlo estimate of the mean common-neighbor count (mean, stderr).

    Samples all four coordinates directly, including s3, with no closed-form
    reduction, so it is independent of the quadrature path.
    """
    _check_geometry(rho, r, d)
    rng = np.random.default_rng(seed)
    total = total_sq = 0.0
    done = 0
    while done < n_samples:
        n = min(chunk, n_samples - done)
        s1 = rng.uniform(0.0, d, n)
        s2 = rng.uniform(0.0, d, n)
        S = np.sqrt(r * r - (s2 - s1) ** 2)
        s3 = rng.uniform(0.0, 1.0, n) * S
        x = rng.uniform(0.0, d, n)
        v = rho * d * np.maximum(_chord(x, s1, r) + _chord(x, s2, r) - s3, 0.0)
        total += v.sum()
        total_sq += (v * v).sum()
        done += n
    mean = total / n_samples
    var = max(total_sq / n_samples - mean * mean, 0.0)
    return mean, math.sqrt(var / n_samples)


def empirical_counts(config: ScenarioConfig, seeds, interior_only=True):
    """Mean neighbor and common-neighbor counts over generated scenarios.

    With ``interior_only`` the averages cover nodes (and neighbor pairs) at
    least r from both road ends, which is the regime the unbounded-road
    integrals describe.
    """
    deg_sum = deg_n = 0
    cn_sum = cn_n = 0
    for seed in seeds:
        sc = generate_scenario(config, seed)
        keep = sc.interior_mask() if interior_only else np.ones(sc.M, dtype=bool)
        deg_sum += sc.degrees[keep].sum()
        deg_n += keep.sum()
        ii, jj, common = common_neighbor_counts(sc)
        pair_keep = keep[ii] & keep[jj]
        cn_sum += common[pair_keep].sum()
        cn_n += pair_keep.sum()
    return (deg_sum / deg_n if deg_n else float("nan"),
            cn_sum / cn_n if cn_n else float("nan"))
