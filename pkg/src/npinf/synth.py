"""Synthetic topologies and action logs.

Topologies come from the directed forest-fire growth process. Action logs
are produced by a model-agnostic recipe: cascades hop from a random root to
random out-neighbours after uniformly distributed delays, and independent
deactivation events switch random nodes off at random times. While a node
is active it keeps acting at uniformly spaced "heartbeat" gaps, so the
timer rule recovers its activity from the log alone.
"""
from __future__ import annotations

from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from .graph import CnpGraph
from .learner import ActionLog, IdMap
from .seeding import run_generator

# independent random streams per generation stage
_TOPOLOGY, _CASCADES, _DEACTIVATIONS, _HEARTBEATS = range(4)


@dataclass
class SynthConfig:
    n: int = 500
    forward: float = 0.35
    backward: float = 0.32
    max_burn: int | None = None
    cascades: int = 60
    cascade_size: int = 30
    branching: int = 2
    delay: tuple[float, float] = (0.5, 3.0)
    deactivations: int = 0
    horizon: float = 200.0
    heartbeat: tuple[float, float] = (1.0, 3.0)
    window: float = 6.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        for name in ("forward", "backward"):
            val = getattr(self, name)
            if not 0 <= val < 1:
                raise ValueError(f"{name} burn probability must lie in [0, 1), got {val!r}")
        for name in ("cascades", "cascade_size", "branching", "deactivations"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        lo, hi = self.delay
        if not 0 < lo <= hi:
            raise ValueError("delay range must satisfy 0 < lo <= hi")
        lo, hi = self.heartbeat
        if not 0 < lo <= hi:
            raise ValueError("heartbeat range must satisfy 0 < lo <= hi")
        self.delay = tuple(self.delay)
        self.heartbeat = tuple(self.heartbeat)

    def to_dict(self) -> dict:
        return asdict(self)


def forest_fire(cfg: SynthConfig) -> CnpGraph:
    """Directed forest-fire graph with unit edge rates.

    Each new node picks a uniform ambassador among the existing nodes and
    burns outward: from every burned node it follows a geometric number of
    its out-links (mean ``forward / (1 - forward)``) and in-links (mean
    ``backward / (1 - backward)``) to unvisited nodes, linking to each one.
    ``max_burn`` caps the nodes burned per arrival.
    """
    gen = run_generator(cfg.seed, 0, _TOPOLOGY)
    n = cfg.n
    cap = cfg.max_burn if cfg.max_burn is not None else n
    out_nb: list[list[int]] = [[] for _ in range(n)]
    in_nb: list[list[int]] = [[] for _ in range(n)]
    src, dst = [], []
    for v in range(1, n):
        amb = int(gen.integers(v))
        visited = {v, amb}
        burned = [amb]
        queue = deque([amb])
        while queue and len(burned) < cap:
            x = queue.popleft()
            picks = []
            for nbrs, prob in ((out_nb[x], cfg.forward), (in_nb[x], cfg.backward)):
                fresh = [y for y in nbrs if y not in visited]
                if not fresh or prob == 0:
                    continue
                want = int(gen.geometric(1.0 - prob)) - 1
                if want <= 0:
                    continue
                if want < len(fresh):
                    fresh = [fresh[i] for i in sorted(gen.choice(len(fresh), size=want, replace=False).tolist())]
                picks.extend(fresh)
                visited.update(fresh)
            for y in picks:
                if len(burned) >= cap:
                    break
                burned.append(y)
                queue.append(y)
        for y in burned:
            src.append(v)
            dst.append(y)
            out_nb[v].append(y)
            in_nb[y].append(v)
    return CnpGraph(n, src, dst, rate=np.ones(len(src)))


@dataclass
class CascadeEvents:
    """Raw generated events: ``(node, time)`` activations and deactivations."""

    n: int
    activations: list[tuple[int, float]] = field(default_factory=list)
    deactivations: list[tuple[int, float]] = field(default_factory=list)

    def active_periods(self, horizon: float) -> list[list[tuple[float, float]]]:
        """Per node ``[start, end)`` periods implied by the events."""
        per: list[list[tuple[float, int]]] = [[] for _ in range(self.n)]
        # deactivations sort before activations at equal times
        for v, t in self.activations:
            per[v].append((t, 1))
        for v, t in self.deactivations:
            per[v].append((t, 0))
        out = []
        for evs in per:
            evs.sort()
            periods = []
            start = None
            for t, kind in evs:
                if kind == 1 and start is None:
                    start = t
                elif kind == 0 and start is not None:
                    if t > start:
                        periods.append((start, t))
                    start = None
            if start is not None:
                periods.append((start, horizon))
            out.append(periods)
        return out


def gen_events(topology: CnpGraph, cfg: SynthConfig) -> CascadeEvents:
    """Cascade activations and injected deactivations on ``[0, horizon)``.

    Activation and deactivation streams use separate generators, so changing
    ``deactivations`` leaves the cascades untouched.
    """
    gen = run_generator(cfg.seed, 0, _CASCADES)
    out_adj = [topology.out_neighbors(u).tolist() for u in range(topology.n)]
    ev = CascadeEvents(topology.n)
    lo, hi = cfg.delay
    for _ in range(cfg.cascades):
        root = int(gen.integers(topology.n))
        t0 = float(gen.uniform(0.0, cfg.horizon))
        ev.activations.append((root, t0))
        size = 1
        frontier = deque([(root, t0)])
        while frontier and size < cfg.cascade_size:
            x, tx = frontier.popleft()
            nbrs = out_adj[x]
            if not nbrs:
                continue
            for _ in range(cfg.branching):
                y = nbrs[int(gen.integers(len(nbrs)))]
                ty = tx + float(gen.uniform(lo, hi))
                if ty >= cfg.horizon or size >= cfg.cascade_size:
                    continue
                ev.activations.append((y, ty))
                frontier.append((y, ty))
                size += 1
    dgen = run_generator(cfg.seed, 0, _DEACTIVATIONS)
    for _ in range(cfg.deactivations):
        v = int(dgen.integers(topology.n))
        ev.deactivations.append((v, float(dgen.uniform(0.0, cfg.horizon))))
    return ev


def events_to_log(ev: CascadeEvents, cfg: SynthConfig) -> ActionLog:
    """Heartbeat actions throughout every active period."""
    gen = run_generator(cfg.seed, 0, _HEARTBEATS)
    lo, hi = cfg.heartbeat
    users, times = [], []
    for v, periods in enumerate(ev.active_periods(cfg.horizon)):
        for s, e in periods:
            t = s
            while t < e:
                users.append(v)
                times.append(t)
                t += float(gen.uniform(lo, hi))
    id_map = IdMap(str(v) for v in range(ev.n))
    return ActionLog(users, times, id_map)


def gen_cascades(topology: CnpGraph, cfg: SynthConfig) -> ActionLog:
    return events_to_log(gen_events(topology, cfg), cfg)
