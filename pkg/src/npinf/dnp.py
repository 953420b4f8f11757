"""Discrete-time non-progressive simulation without graph replication.

Only the current and previous activity states are stored. The state at
step ``t`` follows from step ``t - 1``::

    active(u, t) = (active(u, t-1) and not deactivates(u))
                   or any(active(v, t-1) and succeeds(v, u) for in-neighbours v)
                   or ambient(u)

Draws within a step are consumed in a fixed order: deactivation draws for
active nodes by id, then activation attempts by source id and sorted
out-edge, then ambient draws. Attempts and ambient draws are only made for
nodes that are not already active at step ``t``; their outcome could not
change the state otherwise. Ambient activations use geometric skipping over
the inactive nodes, which has the same law as one Bernoulli draw per node
but costs time proportional to the number of successes.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Iterable

from .graph import DnpGraph


@dataclass
class StepTrace:
    """Number of active steps per node over steps ``0 .. T_steps - 1``."""

    T_steps: int
    counts: list[int]
    history: list[list[int]] | None = None
    draws: int = 0

    def spread(self) -> float:
        return float(sum(self.counts))

    def intervals(self) -> list[list[tuple[int, int]]]:
        """Per-node ``[start, end)`` step intervals (requires a recorded history)."""
        if self.history is None:
            raise ValueError("trace was simulated without record=True")
        out: list[list[tuple[int, int]]] = [[] for _ in self.counts]
        open_at: dict[int, int] = {}
        prev: set[int] = set()
        for t, act in enumerate(self.history):
            cur = set(act)
            for v in cur - prev:
                open_at[v] = t
            for v in prev - cur:
                out[v].append((open_at.pop(v), t))
            prev = cur
        for v, s in open_at.items():
            out[v].append((s, self.T_steps))
        for ivs in out:
            ivs.sort()
        return out

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for v, ivs in enumerate(self.intervals()):
                for s, e in ivs:
                    fh.write(f"{v}\t{s}\t{e}\n")


def _lists(g: DnpGraph):
    cache = g.__dict__.get("_npinf_dnp_lists")
    if cache is None:
        out_adj, _ = g.adjacency_lists
        dst = g.dst.tolist()
        p = g.p.tolist()
        # (target, probability) per source, zero-probability edges dropped
        out = [[(dst[e], p[e]) for e in edges if p[e] > 0] for edges in out_adj]
        cache = (out, g.q.tolist())
        g.__dict__["_npinf_dnp_lists"] = cache
    return cache


def simulate_dnp(
    g: DnpGraph,
    seeds: Iterable[int],
    T_steps: int,
    rng: random.Random | int | None = None,
    *,
    record: bool = False,
) -> StepTrace:
    """Run the synchronous discrete-time process for ``T_steps`` steps.

    ``rng`` needs only a ``random()`` method returning floats in ``[0, 1)``,
    so tests can script the draws.
    """
    if int(T_steps) != T_steps or T_steps < 1:
        raise ValueError(f"T_steps must be a positive integer, got {T_steps!r}")
    T_steps = int(T_steps)
    n = g.n
    seeds = sorted(set(int(s) for s in seeds))
    if seeds and (seeds[0] < 0 or seeds[-1] >= n):
        raise ValueError(f"seed ids must lie in [0, {n})")
    if rng is None or isinstance(rng, int):
        rng = random.Random(rng)
    draw = rng.random
    out, q = _lists(g)
    ambient = g.ambient
    log_miss = math.log1p(-ambient) if 0 < ambient < 1 else 0.0

    state = bytearray(n)
    inactive = list(range(n))
    ipos = list(range(n))

    def switch_on(v):
        state[v] = 1
        i = ipos[v]
        last = inactive.pop()
        if last != v:
            inactive[i] = last
            ipos[last] = i

    def switch_off(v):
        state[v] = 0
        ipos[v] = len(inactive)
        inactive.append(v)

    for u in seeds:
        switch_on(u)
    active = seeds
    counts = [0] * n
    history = [] if record else None
    ndraws = 0

    for t in range(T_steps):
        if t:
            born = []
            for u in active:
                if q[u] > 0 and draw() < q[u]:
                    switch_off(u)
                ndraws += 1
            for u in active:
                for w, p in out[u]:
                    if not state[w]:
                        ndraws += 1
                        if draw() < p:
                            switch_on(w)
                            born.append(w)
            if ambient > 0 and inactive:
                hits = _ambient_hits(len(inactive), ambient, log_miss, draw)
                ndraws += len(hits) + 1
                newcomers = [inactive[i] for i in hits]
                for w in newcomers:
                    switch_on(w)
                born.extend(newcomers)
            survivors = [u for u in active if state[u]]
            seen = set(survivors)
            active = sorted(survivors + [w for w in born if w not in seen and state[w]])
        for u in active:
            counts[u] += 1
        if record:
            history.append(list(active))
    return StepTrace(T_steps, counts, history, ndraws)


def _ambient_hits(count: int, prob: float, log_miss: float, draw) -> list[int]:
    """Indices in ``range(count)`` hit by independent Bernoulli(prob) trials."""
    if prob >= 1:
        return list(range(count))
    hits = []
    i = -1
    while True:
        i += 1 + int(math.log(1.0 - draw()) / log_miss)
        if i >= count:
            return hits
        hits.append(i)
