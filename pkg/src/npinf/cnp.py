"""Continuous-time non-progressive simulation.

Two engines produce the same kind of :class:`Trace`:

* :func:`simulate_event_driven` keeps every live exponential clock in a
  :class:`~npinf.sampler.DynamicCategorical`; each step draws the waiting
  time from the total rate and the firing event proportionally to its rate.
* :func:`simulate_possible_world` replays a pre-sampled
  :class:`PossibleWorld` (Poisson schedules per edge and node)
  deterministically. It is slower and exists as a reference and as the
  substrate for exact per-world checks and greedy seed selection.

The engines agree in distribution because exponential clocks are memoryless:
re-arming an edge clock when its endpoints become (active, inactive) again is
equivalent to reading the next point of a Poisson schedule.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np

from .graph import CnpGraph
from .sampler import DEFAULT_PRECISION, DynamicCategorical


@dataclass
class Trace:
    """Active intervals ``[start, end)`` per node, clipped to ``[0, T]``."""

    T: float
    intervals: list[list[tuple[float, float]]]
    events_fired: int = 0
    t_final: float = 0.0

    @property
    def n(self) -> int:
        return len(self.intervals)

    def node_time(self, v: int) -> float:
        return math.fsum(e - s for s, e in self.intervals[v])

    def spread(self) -> float:
        return math.fsum(e - s for ivs in self.intervals for s, e in ivs)

    def active_at(self, t: float) -> frozenset[int]:
        return frozenset(
            v for v, ivs in enumerate(self.intervals) if any(s <= t < e for s, e in ivs)
        )

    def breakpoints(self) -> list[float]:
        """Sorted distinct interval endpoints, including 0 and T."""
        pts = {0.0, self.T}
        for ivs in self.intervals:
            for s, e in ivs:
                pts.add(s)
                pts.add(e)
        return sorted(pts)

    def write(self, path, summary_path=None) -> None:
        """Dump ``node<TAB>start<TAB>end`` lines and an optional JSON summary."""
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for v, ivs in enumerate(self.intervals):
                for s, e in ivs:
                    fh.write(f"{v}\t{s!r}\t{e!r}\n")
        if summary_path is not None:
            with open(summary_path, "w", encoding="utf-8") as fh:
                json.dump(self.summary(), fh, indent=2, sort_keys=True)
                fh.write("\n")

    def summary(self) -> dict:
        return {"spread": self.spread(), "events_fired": self.events_fired, "t_final": self.t_final}


def spread(trace: Trace) -> float:
    """Total active time summed over all nodes."""
    return trace.spread()


def _check_seeds(n: int, seeds: Iterable[int]) -> list[int]:
    out = sorted(set(int(s) for s in seeds))
    if out and (out[0] < 0 or out[-1] >= n):
        raise ValueError(f"seed ids must lie in [0, {n})")
    return out


def _check_horizon(T: float) -> float:
    T = float(T)
    if not (math.isfinite(T) and T > 0):
        raise ValueError(f"horizon must be finite and positive, got {T!r}")
    return T


# -- event-driven engine ----------------------------------------------------

@dataclass
class _Units:
    """Integer sampler weights for one graph at a given precision."""

    scale: float
    edge: list[int]
    deact: list[int]
    glob: int


_UNITS_CACHE_ATTR = "_npinf_units"


def _unit_weights(g: CnpGraph, precision: int) -> _Units:
    cache = g.__dict__.setdefault(_UNITS_CACHE_ATTR, {})
    if precision in cache:
        return cache[precision]
    rates = [r for r in (g.rate, g.gamma_minus) if len(r)]
    pos = [float(r[r > 0].min()) for r in rates if np.any(r > 0)]
    peak = [float(r.max()) for r in rates]
    if g.global_rate > 0:
        pos.append(g.global_rate)
        peak.append(g.global_rate * max(g.n, 1))
    shift = 0
    if pos:
        # smallest positive rate gets at least 2**precision units, capped so the
        # largest weight stays below 2**61 units
        lo = max(0, math.ceil(-math.log2(min(pos))))
        hi = 61 - precision - math.ceil(math.log2(max(peak)))
        shift = min(lo, hi)
    scale = 2.0 ** (precision + shift)
    src, dst = g.src.tolist(), g.dst.tolist()
    edge = [0 if s == d else max(1, round(r * scale)) if r > 0 else 0
            for s, d, r in zip(src, dst, g.rate.tolist())]
    deact = [max(1, round(r * scale)) if r > 0 else 0 for r in g.gamma_minus.tolist()]
    glob = max(1, round(g.global_rate * scale)) if g.global_rate > 0 else 0
    units = _Units(scale, edge, deact, glob)
    cache[precision] = units
    return units


def _edge_lists(g: CnpGraph) -> tuple[list[int], list[int]]:
    cache = g.__dict__.get("_npinf_edge_lists")
    if cache is None:
        cache = (g.src.tolist(), g.dst.tolist())
        g.__dict__["_npinf_edge_lists"] = cache
    return cache


def live_events(g: CnpGraph, active, precision: int = DEFAULT_PRECISION) -> dict[int, int]:
    """Live event keys and unit weights recomputed from scratch for a state.

    Keys: ``u`` for the deactivation of node ``u``, ``n + e`` for edge ``e``,
    ``n + m`` for the aggregate global activation.
    """
    n, m = g.n, g.m
    units = _unit_weights(g, precision)
    src, dst = _edge_lists(g)
    live = {}
    for u in range(n):
        if active[u] and units.deact[u]:
            live[u] = units.deact[u]
    for e in range(m):
        if units.edge[e] and active[src[e]] and not active[dst[e]]:
            live[n + e] = units.edge[e]
    n_inactive = n - sum(1 for u in range(n) if active[u])
    if units.glob and n_inactive:
        live[n + m] = units.glob * n_inactive
    return live


def simulate_event_driven(
    g: CnpGraph,
    seeds: Iterable[int],
    T: float,
    rng: random.Random | int | None = None,
    *,
    precision: int = DEFAULT_PRECISION,
    audit_every: int = 0,
    record: bool = True,
) -> Trace:
    """Simulate one cascade with exponential clocks up to horizon ``T``.

    ``rng`` is a ``random.Random`` (or an int seed for one). With
    ``audit_every=k > 0`` the sampler contents are compared against a
    from-scratch recomputation of the live event set every ``k`` events.
    With ``record=False`` intervals are not kept; the returned trace then has
    a single pseudo-interval per node carrying its active time.
    """
    T = _check_horizon(T)
    seeds = _check_seeds(g.n, seeds)
    if not isinstance(rng, random.Random):
        rng = random.Random(rng)
    n, m = g.n, g.m
    units = _unit_weights(g, precision)
    eu, du, gu = units.edge, units.deact, units.glob
    scale = units.scale
    src, dst = _edge_lists(g)
    out_adj, in_adj = g.adjacency_lists
    key_global = n + m

    active = bytearray(n)
    inactive = list(range(n))
    ipos = list(range(n))
    start = [0.0] * n
    busy = [0.0] * n
    intervals = [[] for _ in range(n)] if record else None
    sampler = DynamicCategorical(precision)
    insert, remove = sampler.insert_units, sampler.remove

    def activate(v, t):
        active[v] = 1
        start[v] = t
        i = ipos[v]
        last = inactive.pop()
        if last != v:
            inactive[i] = last
            ipos[last] = i
        if du[v]:
            insert(v, du[v])
        for e in out_adj[v]:
            if eu[e] and not active[dst[e]]:
                insert(n + e, eu[e])
        for e in in_adj[v]:
            if eu[e] and active[src[e]]:
                remove(n + e)

    def deactivate(u, t):
        active[u] = 0
        if t > start[u]:
            if record:
                intervals[u].append((start[u], t))
            busy[u] += t - start[u]
        ipos[u] = len(inactive)
        inactive.append(u)
        if du[u]:
            remove(u)
        for e in out_adj[u]:
            if eu[e] and not active[dst[e]]:
                remove(n + e)
        for e in in_adj[u]:
            if eu[e] and active[src[e]]:
                insert(n + e, eu[e])

    def set_global():
        if key_global in sampler:
            remove(key_global)
        if inactive:
            insert(key_global, gu * len(inactive))

    for u in seeds:
        activate(u, 0.0)
    if gu:
        set_global()

    t = 0.0
    t_last = 0.0
    fired = 0
    while sampler.total_units:
        t += rng.expovariate(sampler.total_units / scale)
        if t >= T:
            break
        key = sampler.draw(rng)
        fired += 1
        t_last = t
        if key < n:
            deactivate(key, t)
        elif key == key_global:
            activate(inactive[rng.randrange(len(inactive))], t)
        else:
            activate(dst[key - n], t)
        if gu:
            set_global()
        if audit_every and fired % audit_every == 0:
            _audit(g, sampler, active, precision, fired)

    for u in range(n):
        if active[u] and T > start[u]:
            if record:
                intervals[u].append((start[u], T))
            busy[u] += T - start[u]
    if not record:
        intervals = [[(0.0, b)] if b > 0 else [] for b in busy]
    t_final = T if t >= T else t_last
    return Trace(T, intervals, fired, t_final)


def _audit(g, sampler, active, precision, fired):
    expected = live_events(g, active, precision)
    actual = {k: sampler.units(k) for k in sampler}
    if expected != actual:
        missing = sorted(set(expected) - set(actual))[:5]
        extra = sorted(set(actual) - set(expected))[:5]
        raise RuntimeError(
            f"live event set diverged after {fired} events: missing {missing}, extra {extra}"
        )
    sampler.check()


# -- possible worlds --------------------------------------------------------

EDGE, GLOBAL, DEACT = 0, 1, 2


def _as_schedules(lists, count: int, T: float, what: str) -> list[np.ndarray]:
    if lists is None:
        return [np.empty(0)] * count
    out = []
    for i, ts in enumerate(lists):
        arr = np.asarray(ts, dtype=np.float64).reshape(-1)
        if len(arr):
            if arr[0] <= 0 or arr[-1] > T:
                raise ValueError(f"{what} schedule {i} has a timestamp outside (0, {T}]")
            if np.any(np.diff(arr) <= 0):
                raise ValueError(f"{what} schedule {i} is not strictly increasing")
        out.append(arr)
    if len(out) != count:
        raise ValueError(f"expected {count} {what} schedules, got {len(out)}")
    return out


@dataclass(eq=False)
class PossibleWorld:
    """Pre-sampled schedules: activation times per edge, deactivation and global times per node."""

    T: float
    edge_times: list[np.ndarray]
    deact_times: list[np.ndarray]
    global_times: list[np.ndarray] | None = None

    def __post_init__(self):
        self.T = _check_horizon(self.T)
        n = len(self.deact_times)
        self.edge_times = _as_schedules(self.edge_times, len(self.edge_times), self.T, "edge")
        self.deact_times = _as_schedules(self.deact_times, n, self.T, "deactivation")
        self.global_times = _as_schedules(self.global_times, n, self.T, "global")

    @cached_property
    def events(self) -> tuple[list[float], list[int], list[int]]:
        """All timestamps merged, ordered by (time, kind, id); kinds EDGE < GLOBAL < DEACT."""
        times, kinds, ids = [], [], []
        for kind, lists in ((EDGE, self.edge_times), (GLOBAL, self.global_times), (DEACT, self.deact_times)):
            for i, ts in enumerate(lists):
                if len(ts):
                    times.append(ts)
                    kinds.append(np.full(len(ts), kind, dtype=np.int64))
                    ids.append(np.full(len(ts), i, dtype=np.int64))
        if not times:
            return [], [], []
        t = np.concatenate(times)
        k = np.concatenate(kinds)
        i = np.concatenate(ids)
        order = np.lexsort((i, k, t))
        return t[order].tolist(), k[order].tolist(), i[order].tolist()


def _poisson_schedules(rates: np.ndarray, T: float, gen: np.random.Generator) -> list[np.ndarray]:
    counts = gen.poisson(np.asarray(rates, dtype=np.float64) * T)
    # T - U[0, T) lies in (0, T]
    times = T - gen.uniform(0.0, T, size=int(counts.sum()))
    out = []
    pos = 0
    for c in counts.tolist():
        out.append(np.sort(times[pos:pos + c]))
        pos += c
    return out


def sample_world(g: CnpGraph, T: float, rng: np.random.Generator | int | None = None) -> PossibleWorld:
    """Sample independent Poisson schedules on ``(0, T]`` for every clock of ``g``."""
    T = _check_horizon(T)
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    edge = _poisson_schedules(g.rate, T, gen)
    deact = _poisson_schedules(g.gamma_minus, T, gen)
    glob = _poisson_schedules(np.full(g.n, g.global_rate), T, gen) if g.global_rate > 0 else None
    return PossibleWorld(T, edge, deact, glob)


def simulate_possible_world(
    g: CnpGraph, w: PossibleWorld, seeds: Iterable[int], T: float | None = None
) -> Trace:
    """Deterministic propagation of ``seeds`` through the schedules of ``w``.

    An edge timestamp activates its target if the source is active and the
    target inactive; a deactivation timestamp deactivates an active node; a
    global timestamp activates an inactive node.
    """
    if T is None:
        T = w.T
    T = _check_horizon(T)
    if len(w.deact_times) != g.n or len(w.edge_times) != g.m:
        raise ValueError("possible world does not match the graph")
    if T < w.T:
        for lists in (w.edge_times, w.deact_times, w.global_times):
            for ts in lists:
                if len(ts) and ts[-1] > T:
                    raise ValueError(f"schedule timestamp {ts[-1]!r} beyond horizon {T!r}")
    seeds = _check_seeds(g.n, seeds)
    n = g.n
    src, dst = _edge_lists(g)
    active = bytearray(n)
    start = [0.0] * n
    intervals = [[] for _ in range(n)]
    for u in seeds:
        active[u] = 1
    fired = 0
    t_last = 0.0
    times, kinds, ids = w.events
    for t, kind, i in zip(times, kinds, ids):
        if kind == EDGE:
            v = dst[i]
            if active[src[i]] and not active[v]:
                active[v] = 1
                start[v] = t
            else:
                continue
        elif kind == GLOBAL:
            if active[i]:
                continue
            active[i] = 1
            start[i] = t
        else:
            if not active[i]:
                continue
            active[i] = 0
            if t > start[i]:
                intervals[i].append((start[i], t))
        fired += 1
        t_last = t
    for u in range(n):
        if active[u] and T > start[u]:
            intervals[u].append((start[u], T))
    return Trace(T, intervals, fired, t_last)
