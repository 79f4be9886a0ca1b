"""Slot-level simulation of directional neighbor discovery on a road scenario.

Each slot has two sub-slots.  In the first, every node points its antenna at
a beam chosen by the algorithm's policy and either sends a hello (probability
p_t) on a random channel or listens.  In the second, every node that decoded
at least one hello answers with a single feedback packet on the same beam;
everybody else listens.  A packet reaches a listener only if the two nodes
are neighbors and each lies inside the other's current beam, and it is
decoded only if no other arriving packet uses the same channel.

``step_slot`` is the per-node reference implementation; ``run_trial`` drives
the compiled kernel, which consumes the same random draws and must reproduce
the reference bit for bit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..scenario import COMPLETE, RoadScenario, sensing_report
from . import kernel
from .config import (ALGO_CODE, CRA, GOSSIP, GSIMND, SBA, SENSED_BEAMS,
                     UNTIL_CONVERGED, SimConfig)

log = logging.getLogger(__name__)

HELLO = "Hello"
FEEDBACK = "Feedback"
TX = "Tx"
RX = "Rx"

BLOCK = 32  # slots of random draws generated at a time


@dataclass(frozen=True)
class Packet:
    kind: str
    sender: int
    channel: int
    payload: tuple = ()

    def __post_init__(self):
        if self.kind == HELLO and self.payload:
            raise ValueError("hello packets carry only the sender identity")


@dataclass
class NodeRuntime:
    id: int
    position: tuple
    discovered: set = field(default_factory=set)
    timer1: int = 0
    timer2: int = 0
    sensing: Optional[object] = None
    converged: bool = False
    convergence_slot: int = -1
    current_beam: int = 0
    mode: str = RX
    pending_feedback: bool = False
    candidate_beams: tuple = ()
    target: int = -1  # neighbor count from complete sensing, else -1
    found_new: bool = False
    discovery_slot: Optional[dict] = None  # id -> slot, when tracking


@dataclass
class SlotDraws:
    u_tx: np.ndarray
    u_beam: np.ndarray
    ch1: np.ndarray
    ch2: np.ndarray


class DrawStream:
    """Per-trial random draws, generated BLOCK slots at a time.

    The stream is a counter-based Philox generator keyed by (seed, trial), so
    trials are independent and reproducible in any order.
    """

    def __init__(self, M: int, k: int, seed: int, trial: int = 0):
        ss = np.random.SeedSequence([int(seed), int(trial)])
        self.rng = np.random.Generator(np.random.Philox(ss))
        self.M, self.k = M, k

    def block(self, n: int = BLOCK):
        shape = (n, self.M)
        return (self.rng.random(shape), self.rng.random(shape),
                self.rng.integers(0, self.k, shape), self.rng.integers(0, self.k, shape))

    def slots(self):
        while True:
            u_tx, u_beam, ch1, ch2 = self.block()
            for s in range(u_tx.shape[0]):
                yield SlotDraws(u_tx[s], u_beam[s], ch1[s], ch2[s])


@dataclass
class SlotLog:
    slot: int
    hello: list  # (receiver, sender) pairs decoded in sub-slot 1
    feedback: list  # (receiver, sender) pairs decoded in sub-slot 2
    transmitters: list
    new_direct: list
    new_any: list
    pairs_direct: int = 0  # neighbors newly found by direct reception
    pairs_indirect: int = 0  # neighbors newly found through gossip


@dataclass
class TrialResult:
    algorithm: str
    fraction_discovered: np.ndarray  # index t: after slot t (index 0: start)
    convergence_slot: np.ndarray
    discovered_count: np.ndarray
    true_count: np.ndarray
    sensing_completeness: list
    n_active: np.ndarray
    n_new_direct: np.ndarray
    n_new_any: np.ndarray
    pair_open: np.ndarray  # undiscovered (node, neighbor) pairs of the cohort
    pair_new_direct: np.ndarray
    pair_new_any: np.ndarray
    false_convergence_count: int
    false_positive_count: int
    exact_complete_convergers: bool
    slots_run: int
    finished: bool
    discovery_slot: Optional[np.ndarray] = None  # [i, j]: slot i found j, 0 if never

    def node_slots_to_fraction(self, target: float) -> np.ndarray:
        """Per node with neighbors: slot at which it had found ceil(target*deg).

        nan where the node never got there.
        """
        if self.discovery_slot is None:
            raise ValueError("per-pair discovery slots were not kept for this trial")
        deg = self.true_count
        keep = np.flatnonzero(deg > 0)
        out = np.full(len(keep), np.nan)
        for r, i in enumerate(keep):
            need = max(1, int(np.ceil(target * deg[i] - 1e-9)))
            times = self.discovery_slot[i]
            times = np.sort(times[times > 0])
            if len(times) >= need:
                out[r] = times[need - 1]
        return out

    def compact(self) -> "TrialResult":
        """Copy without the M x M discovery-slot matrix."""
        return replace(self, discovery_slot=None)

    @property
    def budget_exhausted(self) -> bool:
        return not self.finished

    @property
    def empirical_P_s(self) -> np.ndarray:
        return _ratio(self.n_new_direct, self.n_active)

    @property
    def empirical_P_gs(self) -> np.ndarray:
        return _ratio(self.n_new_any, self.n_active)

    def slots_to_fraction(self, target: float) -> float:
        """First slot at which the mean discovered fraction reaches ``target``."""
        hit = np.flatnonzero(self.fraction_discovered >= target - 1e-12)
        return float(hit[0]) if len(hit) else float("nan")

    def fraction_at(self, t: int) -> float:
        """Mean discovered fraction after slot t; frozen after the trial ended."""
        f = self.fraction_discovered
        return float(f[min(t, len(f) - 1)])


def _ratio(num, den):
    out = np.full(len(num), np.nan)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    return out


# -- per-scenario preparation ---------------------------------------------

@dataclass
class Prepared:
    scenario: RoadScenario
    config: SimConfig
    nb_ptr: np.ndarray
    nb_idx: np.ndarray
    nb_back: np.ndarray
    cand_ptr: np.ndarray
    cand_idx: np.ndarray
    target: np.ndarray
    reports: list


def candidate_beams(report, B: int, config: SimConfig) -> tuple:
    """Beams a node may pick under its algorithm's policy."""
    if config.algorithm == GSIMND and report is not None:
        usable = report.completeness == COMPLETE or config.incomplete_beams == SENSED_BEAMS
        if usable and report.nonempty_beam_indices:
            return tuple(report.nonempty_beam_indices)
    return tuple(range(B))


def prepare(scenario: RoadScenario, config: SimConfig) -> Prepared:
    config.validate()
    if scenario.B != config.B:
        scenario = replace(scenario, B=config.B)
    M, B = scenario.M, config.B
    adj = scenario.adjacency
    bm = scenario.beam_matrix
    ii, jj = np.nonzero(adj)
    bb = bm[ii, jj]
    order = np.lexsort((jj, bb, ii))
    ii, jj, bb = ii[order], jj[order], bb[order]
    back = bm[jj, ii]
    counts = np.zeros((M, B), dtype=np.int64)
    np.add.at(counts, (ii, bb), 1)
    start = np.concatenate([[0], np.cumsum(counts.sum(axis=1))[:-1]])
    nb_ptr = np.empty((M, B + 1), dtype=np.int64)
    nb_ptr[:, 0] = start
    nb_ptr[:, 1:] = start[:, None] + np.cumsum(counts, axis=1)

    if config.uses_sensing:
        reports = [sensing_report(scenario, i) for i in range(M)]
    else:
        reports = [None] * M
    cands = [candidate_beams(rep, B, config) for rep in reports]
    cand_ptr = np.concatenate([[0], np.cumsum([len(c) for c in cands])]).astype(np.int64)
    cand_idx = np.array([b for c in cands for b in c], dtype=np.int64)
    target = np.array([rep.total if rep is not None and rep.complete else -1
                       for rep in reports], dtype=np.int64)
    return Prepared(scenario, config, nb_ptr, jj.astype(np.int64), back.astype(np.int64),
                    cand_ptr, cand_idx, target, reports)


# -- reference (per-node) implementation -------------------------------------

def resolve_reception(incoming, k: int) -> list:
    """Packets decoded by one receiver: those alone on their channel."""
    by_channel = {}
    for pkt in incoming:
        by_channel.setdefault(pkt.channel, []).append(pkt)
    delivered = [pkts[0] for ch, pkts in sorted(by_channel.items()) if len(pkts) == 1]
    return delivered[:k]


def beam_policy(node: NodeRuntime, algorithm: str, slot: int, B: int,
                u: Optional[float] = None, rng=None) -> int:
    """Beam for ``node`` in 1-based ``slot``; node.mode must already be set.

    SBA sweeps every node through beams 0..B-1 in lockstep; listeners point
    half a turn away so that a transmitter facing east meets a listener
    facing west.
    """
    if u is None:
        u = rng.random()
    if algorithm == SBA:
        sweep = (slot - 1) % B
        return sweep if node.mode == TX else (sweep + B // 2) % B
    if algorithm == GSIMND:
        cands = node.candidate_beams or tuple(range(B))
        return cands[min(int(u * len(cands)), len(cands) - 1)]
    return min(int(u * B), B - 1)


def apply_discoveries(node: NodeRuntime, delivered, scenario: RoadScenario,
                      gossip: bool = True, slot: int = 0) -> tuple:
    """Add senders (and, with gossip, in-range payload entries) to node.discovered.

    Returns (new direct ids, new indirect ids).
    """
    direct, indirect = [], []
    x, y = node.position
    for pkt in delivered:
        if pkt.sender not in node.discovered:
            node.discovered.add(pkt.sender)
            direct.append(pkt.sender)
        if not gossip or pkt.kind != FEEDBACK:
            continue
        for nid, (ux, uy) in pkt.payload:
            if nid == node.id or nid in node.discovered:
                continue
            if np.hypot(x - ux, y - uy) <= scenario.r:
                node.discovered.add(nid)
                indirect.append(nid)
    if node.discovery_slot is not None:
        for nid in direct + indirect:
            node.discovery_slot[nid] = slot
    if direct or indirect:
        node.timer2 = 0
        node.found_new = True
    return direct, indirect


def check_convergence(node: NodeRuntime, warmup_slots: int = 16) -> bool:
    if node.target >= 0:
        return len(node.discovered) >= node.target
    return node.timer1 >= warmup_slots and 2 * node.timer2 >= node.timer1


@dataclass
class ReferenceState:
    prepared: Prepared
    nodes: list
    slot: int = 0

    @property
    def scenario(self):
        return self.prepared.scenario

    @property
    def config(self):
        return self.prepared.config


def init_state(scenario: RoadScenario, config: SimConfig) -> ReferenceState:
    prep = prepare(scenario, config)
    sc = prep.scenario
    nodes = []
    for i in range(sc.M):
        c0, c1 = prep.cand_ptr[i], prep.cand_ptr[i + 1]
        nodes.append(NodeRuntime(
            id=i, position=tuple(sc.node_positions[i]), sensing=prep.reports[i],
            candidate_beams=tuple(int(b) for b in prep.cand_idx[c0:c1]),
            target=int(prep.target[i]), discovery_slot={}))
    return ReferenceState(prep, nodes)


def _arrivals(state, listener, senders_ok):
    """Packets from senders that are neighbors with mutually aligned beams."""
    sc = state.scenario
    bm = sc.beam_matrix
    out = []
    for j in np.flatnonzero(sc.adjacency[listener.id]):
        other = state.nodes[j]
        if not senders_ok(other):
            continue
        if bm[listener.id, j] == listener.current_beam and bm[j, listener.id] == other.current_beam:
            out.append(other)
    return out


def step_slot(state: ReferenceState, draws: SlotDraws) -> SlotLog:
    """Advance the reference state by one slot using the given draws."""
    cfg = state.config
    sc = state.scenario
    k = cfg.effective_k
    freeze = cfg.mode == UNTIL_CONVERGED
    state.slot += 1
    t = state.slot
    nodes = state.nodes
    new_direct, new_any = set(), set()
    n_dir = n_ind = 0

    def frozen(n):
        return freeze and n.converged

    for n in nodes:
        n.mode = TX if draws.u_tx[n.id] < cfg.p_t else RX
        n.current_beam = beam_policy(n, cfg.algorithm, t, cfg.B, u=draws.u_beam[n.id])
        n.pending_feedback = False
        n.found_new = False

    hello_log = []
    for n in nodes:
        if n.mode == TX:
            continue
        incoming = [Packet(HELLO, o.id, int(draws.ch1[o.id]))
                    for o in _arrivals(state, n, lambda o: o.mode == TX)]
        delivered = resolve_reception(incoming, k)
        if delivered:
            n.pending_feedback = True
        hello_log += [(n.id, p.sender) for p in delivered]
        if delivered and not frozen(n):
            d, _ = apply_discoveries(n, delivered, sc, gossip=False, slot=t)
            n_dir += len(d)
            new_direct.update([n.id] if d else [])
            new_any.update([n.id] if d else [])

    fb_log = []
    for n in nodes:
        if n.pending_feedback:
            continue
        incoming = []
        for o in _arrivals(state, n, lambda o: o.pending_feedback):
            payload = tuple((u, tuple(sc.node_positions[u])) for u in sorted(o.discovered))
            incoming.append(Packet(FEEDBACK, o.id, int(draws.ch2[o.id]), payload))
        delivered = resolve_reception(incoming, k)
        fb_log += [(n.id, p.sender) for p in delivered]
        if delivered and not frozen(n):
            d, ind = apply_discoveries(n, delivered, sc, gossip=cfg.gossip, slot=t)
            n_dir += len(d)
            n_ind += len(ind)
            if d:
                new_direct.add(n.id)
            if d or ind:
                new_any.add(n.id)

    for n in nodes:
        if frozen(n):
            continue
        n.timer1 = t
        if n.found_new:
            n.timer2 = 0
        else:
            n.timer2 += 1
        if not n.converged and check_convergence(n, cfg.warmup_slots):
            n.converged = True
            n.convergence_slot = t

    return SlotLog(slot=t, hello=hello_log, feedback=fb_log,
                   transmitters=[n.id for n in nodes if n.mode == TX],
                   new_direct=sorted(new_direct), new_any=sorted(new_any),
                   pairs_direct=n_dir, pairs_indirect=n_ind)


# -- compiled trial driver ---------------------------------------------------

def _summarize(prep, cfg, disc, disc_time, n_disc, conv_slot, conv, frac, n_act, n_dir,
               n_any, pairs, slots, finished):
    sc = prep.scenario
    adj = sc.adjacency
    deg = sc.degrees
    false_pos = int((disc & ~adj).sum())
    incomplete = conv & (n_disc < deg)
    complete_conv = conv & (prep.target >= 0)
    exact = bool(np.all(n_disc[complete_conv] == deg[complete_conv]))
    comp = [("absent" if rep is None else rep.completeness) for rep in prep.reports]
    return TrialResult(
        algorithm=cfg.algorithm,
        fraction_discovered=frac[: slots + 1].copy(),
        convergence_slot=conv_slot.copy(),
        discovered_count=n_disc.copy(),
        true_count=deg.copy(),
        sensing_completeness=comp,
        n_active=n_act[: slots + 1].copy(),
        n_new_direct=n_dir[: slots + 1].copy(),
        n_new_any=n_any[: slots + 1].copy(),
        pair_open=pairs[0][: slots + 1].copy(),
        pair_new_direct=pairs[1][: slots + 1].copy(),
        pair_new_any=pairs[2][: slots + 1].copy(),
        false_convergence_count=int(incomplete.sum()),
        false_positive_count=false_pos,
        exact_complete_convergers=exact,
        slots_run=slots,
        finished=finished,
        discovery_slot=disc_time,
    )


def run_trial(scenario: RoadScenario, config: SimConfig, seed: int = 0,
              trial: int = 0) -> TrialResult:
    """Simulate one trial until every node converges (or the budget runs out).

    In ``discovered`` mode nodes never freeze and the trial stops once every
    node knows all of its neighbors or the mean discovered fraction reaches
    ``config.stop_fraction``.
    """
    prep = prepare(scenario, config)
    cfg = prep.config
    sc = prep.scenario
    M = sc.M
    k = cfg.effective_k
    deg = sc.degrees.astype(np.int64)
    adj = np.ascontiguousarray(sc.adjacency)
    disc = np.zeros((M, M), dtype=np.bool_)
    disc_time = np.zeros((M, M), dtype=np.int32)
    n_disc = np.zeros(M, dtype=np.int64)
    T1 = np.zeros(M, dtype=np.int64)
    T2 = np.zeros(M, dtype=np.int64)
    conv = np.zeros(M, dtype=np.bool_)
    conv_slot = np.full(M, -1, dtype=np.int64)
    cap = cfg.max_slots + 1
    frac = np.zeros(cap)
    frac[0] = 0.0 if (deg > 0).any() else 1.0
    n_act = np.zeros(cap, dtype=np.int64)
    n_dir = np.zeros(cap, dtype=np.int64)
    n_any = np.zeros(cap, dtype=np.int64)
    pairs = np.zeros((3, cap), dtype=np.int64)
    no_log = np.zeros((0, 2), dtype=np.int64)
    log_counts = np.zeros(2, dtype=np.int64)
    freeze = cfg.mode == UNTIL_CONVERGED

    stream = DrawStream(M, k, seed, trial)
    t = 1
    finished = False
    while t <= cfg.max_slots:
        n = min(BLOCK, cfg.max_slots - t + 1)
        u_tx, u_beam, ch1, ch2 = stream.block(BLOCK)
        ran, finished = kernel.run_block(
            t, n, u_tx, u_beam, ch1, ch2,
            cfg.B, k, cfg.p_t, ALGO_CODE[cfg.algorithm], cfg.gossip, freeze,
            cfg.warmup_slots, cfg.stop_fraction, cfg.max_slots,
            prep.nb_ptr, prep.nb_idx, prep.nb_back, adj, deg,
            prep.cand_ptr, prep.cand_idx, prep.target,
            disc, disc_time, n_disc, T1, T2, conv, conv_slot,
            frac, n_act, n_dir, n_any, pairs[0], pairs[1], pairs[2],
            no_log, no_log, log_counts)
        t += ran
        if finished:
            break
    slots = t - 1
    if not finished:
        log.info("trial %d hit the %d-slot budget with %d/%d nodes converged",
                 trial, cfg.max_slots, int(conv.sum()), M)
    return _summarize(prep, cfg, disc, disc_time, n_disc, conv_slot, conv, frac, n_act,
                      n_dir, n_any, pairs, slots, finished)


def _mean_fraction(counts, deg):
    # sequential sum, matching the kernel's floating-point order
    total, with_nbrs = 0.0, 0
    for c, g in zip(counts.tolist(), deg.tolist()):
        if g > 0:
            total += c / g
            with_nbrs += 1
    return total / with_nbrs if with_nbrs else 1.0


def run_trial_reference(scenario: RoadScenario, config: SimConfig, seed: int = 0,
                        trial: int = 0) -> TrialResult:
    """Same contract as ``run_trial`` via ``step_slot``; slow, for checking."""
    state = init_state(scenario, config)
    prep, cfg = state.prepared, state.config
    sc = prep.scenario
    M = sc.M
    deg = sc.degrees
    freeze = cfg.mode == UNTIL_CONVERGED
    frac = [0.0 if (deg > 0).any() else 1.0]
    n_act, n_dir, n_any = [0], [0], [0]
    pairs = [[0], [0], [0]]
    finished = False
    draws = DrawStream(M, cfg.effective_k, seed, trial).slots()
    while state.slot < cfg.max_slots:
        active = {n.id for n in state.nodes
                  if not (freeze and n.converged) and len(n.discovered) < deg[n.id]}
        pairs[0].append(int(sum(deg[i] - len(state.nodes[i].discovered) for i in active)))
        slot_log = step_slot(state, next(draws))
        pairs[1].append(slot_log.pairs_direct)
        pairs[2].append(slot_log.pairs_direct + slot_log.pairs_indirect)
        counts = np.array([len(n.discovered) for n in state.nodes])
        frac.append(_mean_fraction(counts, deg))
        n_act.append(len(active))
        n_dir.append(len(active.intersection(slot_log.new_direct)))
        n_any.append(len(active.intersection(slot_log.new_any)))
        if freeze:
            finished = all(n.converged for n in state.nodes)
        else:
            finished = bool(np.all(counts >= deg)) or frac[-1] >= cfg.stop_fraction
        if finished:
            break
    disc = np.zeros((M, M), dtype=bool)
    disc_time = np.zeros((M, M), dtype=np.int32)
    for n in state.nodes:
        disc[n.id, list(n.discovered)] = True
        for j, s in n.discovery_slot.items():
            disc_time[n.id, j] = s
    n_disc = disc.sum(axis=1)
    conv = np.array([n.converged for n in state.nodes])
    conv_slot = np.array([n.convergence_slot for n in state.nodes])
    return _summarize(prep, cfg, disc, disc_time, n_disc, conv_slot, conv, np.array(frac),
                      np.array(n_act), np.array(n_dir), np.array(n_any),
                      np.array(pairs, dtype=np.int64), state.slot, finished)
