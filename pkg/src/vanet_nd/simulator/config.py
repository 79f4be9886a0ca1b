from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

from ..errors import ConfigError

CRA = "CRA"
SBA = "SBA"
GOSSIP = "Gossip"
GSIMND = "GSIMND"
ALGORITHMS = (CRA, SBA, GOSSIP, GSIMND)
ALGO_CODE = {CRA: 0, SBA: 1, GOSSIP: 2, GSIMND: 3}

# what a trial runs until
UNTIL_CONVERGED = "converged"  # protocol convergence rules freeze nodes
UNTIL_DISCOVERED = "discovered"  # nodes never freeze; run to full discovery

# beam choice for nodes whose sensing report is incomplete
ALL_BEAMS = "all"
SENSED_BEAMS = "sensed"


@dataclass(frozen=True)
class SimConfig:
    algorithm: str = GSIMND
    B: int = 12
    theta: Optional[float] = None
    k: int = 1
    p_t: float = 0.5
    max_slots: int = 100_000
    trials: int = 1
    seed: int = 0
    warmup_slots: int = 16
    mode: str = UNTIL_CONVERGED
    stop_fraction: float = 1.0
    incomplete_beams: str = ALL_BEAMS

    def __post_init__(self):
        if self.theta is None:
            object.__setattr__(self, "theta", 2.0 * math.pi / self.B if self.B > 0 else 0.0)

    def validate(self) -> "SimConfig":
        problems = []
        if self.algorithm not in ALGORITHMS:
            problems.append(f"unknown algorithm {self.algorithm!r}")
        if self.B < 1:
            problems.append("B must be >= 1")
        elif abs(self.B * self.theta - 2.0 * math.pi) > 1e-9:
            problems.append("B * theta must equal 2*pi")
        if self.k < 1:
            problems.append("k must be >= 1")
        if not 0.0 < self.p_t < 1.0:
            problems.append("p_t must lie in (0, 1)")
        if self.max_slots < 1:
            problems.append("max_slots must be >= 1")
        if self.trials < 1:
            problems.append("trials must be >= 1")
        if self.warmup_slots < 1:
            problems.append("warmup_slots must be >= 1")
        if self.mode not in (UNTIL_CONVERGED, UNTIL_DISCOVERED):
            problems.append(f"unknown mode {self.mode!r}")
        if not 0.0 < self.stop_fraction <= 1.0:
            problems.append("stop_fraction must lie in (0, 1]")
        if self.incomplete_beams not in (ALL_BEAMS, SENSED_BEAMS):
            problems.append(f"unknown incomplete_beams policy {self.incomplete_beams!r}")
        if problems:
            raise ConfigError(problems)
        return self

    @property
    def effective_k(self) -> int:
        """CRA and SBA are single-packet-reception baselines."""
        return 1 if self.algorithm in (CRA, SBA) else self.k

    @property
    def gossip(self) -> bool:
        return self.algorithm in (GOSSIP, GSIMND)

    @property
    def uses_sensing(self) -> bool:
        return self.algorithm == GSIMND

    def with_(self, **changes) -> "SimConfig":
        if "B" in changes and "theta" not in changes:
            changes["theta"] = None
        return replace(self, **changes)
