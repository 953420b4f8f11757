"""Spread estimation and seed selection for total active time.

Greedy selection evaluates every candidate set on one fixed collection of
possible worlds (common random numbers). On a fixed world the spread is
exactly monotone and submodular, so stale marginal gains stay valid upper
bounds and the lazy queue needs no statistical slack.
"""
from __future__ import annotations

import heapq
import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from .cnp import PossibleWorld, sample_world, simulate_event_driven, simulate_possible_world
from .dnp import simulate_dnp
from .graph import CnpGraph, DnpGraph, cnp_to_dnp
from .seeding import DEFAULT_SEED, run_generator, run_random

ENGINES = ("cnp", "dnp", "cp")
WORLD_STREAM = 1
FRESH_STREAM = 1000  # round r > 0 of a fresh-worlds pass uses stream FRESH_STREAM + r


@dataclass
class SpreadEstimate:
    mean: float
    stderr: float
    runs: int

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SeedSelection:
    seeds: list[int]
    marginal_gains: list[float]
    spread_mean: float
    spread_stderr: float
    runs: int
    evaluations: int = field(default=0, compare=False)

    def to_dict(self) -> dict:
        return {
            "seeds": self.seeds,
            "marginal_gains": self.marginal_gains,
            "spread_mean": self.spread_mean,
            "spread_stderr": self.spread_stderr,
            "runs": self.runs,
        }


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("NPINF_JOBS", "1")))
    except ValueError:
        return 1


def _mean_stderr(values: Sequence[float]) -> tuple[float, float]:
    r = len(values)
    mean = math.fsum(values) / r
    if r < 2:
        return mean, 0.0
    var = math.fsum((x - mean) ** 2 for x in values) / (r - 1)
    return mean, math.sqrt(var / r)


def _prepare(g, engine: str):
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}; expected one of {ENGINES}")
    if engine == "dnp":
        return g if isinstance(g, DnpGraph) else cnp_to_dnp(g)
    if not isinstance(g, CnpGraph):
        raise TypeError(f"engine {engine!r} needs a CnpGraph")
    return g.progressive() if engine == "cp" else g


def _run_spreads(args) -> list[float]:
    g, seeds, T, master_seed, indices, engine, precision = args
    out = []
    for i in indices:
        rng = run_random(master_seed, i)
        if engine == "dnp":
            out.append(simulate_dnp(g, seeds, T, rng).spread())
        else:
            out.append(simulate_event_driven(g, seeds, T, rng, precision=precision, record=False).spread())
    return out


def _chunks(count: int, parts: int) -> list[range]:
    parts = max(1, min(parts, count))
    bounds = [count * i // parts for i in range(parts + 1)]
    return [range(bounds[i], bounds[i + 1]) for i in range(parts)]


def run_spreads(
    g,
    seeds: Iterable[int],
    T,
    runs: int,
    master_seed: int = DEFAULT_SEED,
    *,
    engine: str = "cnp",
    jobs: int = 1,
    precision: int = 20,
) -> list[float]:
    """Spread of each of ``runs`` independent simulations, in run order."""
    if runs < 1:
        raise ValueError("runs must be >= 1")
    g = _prepare(g, engine)
    seeds = sorted(set(seeds))
    if engine == "dnp":
        if T != int(T):
            raise ValueError("the discrete engine needs an integer horizon")
        T = int(T)
    if jobs <= 1 or runs < 2:
        return _run_spreads((g, seeds, T, master_seed, range(runs), engine, precision))
    tasks = [(g, seeds, T, master_seed, idx, engine, precision) for idx in _chunks(runs, jobs * 4)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(_run_spreads, tasks))
    return [x for part in parts for x in part]


def estimate_spread(
    g,
    seeds: Iterable[int],
    T,
    runs: int = 100,
    master_seed: int = DEFAULT_SEED,
    *,
    engine: str = "cnp",
    jobs: int = 1,
    precision: int = 20,
) -> SpreadEstimate:
    """Monte Carlo mean and standard error of the spread.

    Run ``i`` uses a generator derived from ``(master_seed, i)``, so the
    estimate does not depend on ``jobs``.
    """
    values = run_spreads(g, seeds, T, runs, master_seed, engine=engine, jobs=jobs, precision=precision)
    mean, se = _mean_stderr(values)
    return SpreadEstimate(mean, se, runs)


# -- shared-world objective ---------------------------------------------------

def sample_worlds(
    g: CnpGraph, T: float, runs: int, master_seed: int = DEFAULT_SEED, stream: int = WORLD_STREAM
) -> list[PossibleWorld]:
    if runs < 1:
        raise ValueError("runs must be >= 1")
    return [sample_world(g, T, run_generator(master_seed, i, stream)) for i in range(runs)]


class WorldObjective:
    """Average spread over a fixed list of possible worlds."""

    def __init__(self, g: CnpGraph, worlds: Sequence[PossibleWorld]):
        if not worlds:
            raise ValueError("need at least one possible world")
        self.g = g
        self.worlds = list(worlds)
        self.evaluations = 0
        self._cache: dict[tuple[int, ...], list[float]] = {}

    def per_world(self, seeds: Iterable[int]) -> list[float]:
        key = tuple(sorted(set(seeds)))
        vals = self._cache.get(key)
        if vals is None:
            self.evaluations += 1
            vals = [simulate_possible_world(self.g, w, key).spread() for w in self.worlds]
            self._cache[key] = vals
        return vals

    def __call__(self, seeds: Iterable[int]) -> float:
        return math.fsum(self.per_world(seeds)) / len(self.worlds)

    def gain(self, base: Sequence[int], v: int) -> float:
        return self([*base, v]) - self(base)

    def stderr(self, seeds: Iterable[int]) -> float:
        return _mean_stderr(self.per_world(seeds))[1]


def _gain_task(args):
    g, worlds, base, v = args
    obj = WorldObjective(g, worlds)
    return obj.gain(base, v)


def _initial_gains(obj: WorldObjective, candidates: list[int], jobs: int) -> list[float]:
    if jobs <= 1 or len(candidates) < 2:
        return [obj.gain([], v) for v in candidates]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        tasks = [(obj.g, obj.worlds, [], v) for v in candidates]
        gains = list(pool.map(_gain_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    obj.evaluations += len(candidates)
    return gains


def _resolve_worlds(g, T, runs, master_seed, worlds):
    if worlds is None:
        return sample_worlds(g, T, runs, master_seed)
    worlds = list(worlds)
    for w in worlds:
        if w.T != T:
            raise ValueError(f"world horizon {w.T} does not match T={T}")
    return worlds


def _check_k(g, k):
    if not 0 <= k <= g.n:
        raise ValueError(f"k must lie in [0, {g.n}], got {k}")


def _selection(obj: WorldObjective, seeds: list[int], gains: list[float]) -> SeedSelection:
    return SeedSelection(
        seeds=seeds,
        marginal_gains=gains,
        spread_mean=obj(seeds),
        spread_stderr=obj.stderr(seeds),
        runs=len(obj.worlds),
        evaluations=obj.evaluations,
    )


def greedy_celf(
    g: CnpGraph,
    k: int,
    T: float,
    runs: int = 100,
    master_seed: int = DEFAULT_SEED,
    *,
    worlds: Sequence[PossibleWorld] | None = None,
    jobs: int = 1,
    fresh_worlds: bool = False,
) -> SeedSelection:
    """Lazy greedy selection of ``k`` seeds on shared possible worlds.

    Ties between equal gains go to the smaller node id. With
    ``fresh_worlds=True`` every round after the first redraws its worlds;
    stale bounds then come from other samples, so the lazy shortcut is only
    approximately equivalent to full re-evaluation. The reported spread is
    measured on the final round's worlds.
    """
    _check_k(g, k)
    if fresh_worlds and worlds is not None:
        raise ValueError("fresh_worlds draws its own worlds; do not pass worlds")
    obj = WorldObjective(g, _resolve_worlds(g, T, runs, master_seed, worlds))
    chosen: list[int] = []
    gains: list[float] = []
    if k == 0:
        return _selection(obj, chosen, gains)
    candidates = list(range(g.n))
    heap = [(-gain, v, 0) for v, gain in zip(candidates, _initial_gains(obj, candidates, jobs))]
    heapq.heapify(heap)
    evaluations = 0
    while len(chosen) < k:
        neg, v, stamp = heapq.heappop(heap)
        if stamp == len(chosen):
            chosen.append(v)
            gains.append(-neg)
            if fresh_worlds and len(chosen) < k:
                evaluations += obj.evaluations
                fresh = sample_worlds(g, T, len(obj.worlds), master_seed, FRESH_STREAM + len(chosen))
                obj = WorldObjective(g, fresh)
            continue
        heapq.heappush(heap, (-obj.gain(chosen, v), v, len(chosen)))
    result = _selection(obj, chosen, gains)
    result.evaluations += evaluations
    return result


def greedy_naive(
    g: CnpGraph,
    k: int,
    T: float,
    runs: int = 100,
    master_seed: int = DEFAULT_SEED,
    *,
    worlds: Sequence[PossibleWorld] | None = None,
) -> SeedSelection:
    """Plain greedy that re-evaluates every candidate in every round."""
    _check_k(g, k)
    obj = WorldObjective(g, _resolve_worlds(g, T, runs, master_seed, worlds))
    chosen: list[int] = []
    gains: list[float] = []
    for _ in range(k):
        best = None
        for v in range(g.n):
            if v in chosen:
                continue
            gain = obj.gain(chosen, v)
            if best is None or gain > best[0]:
                best = (gain, v)
        chosen.append(best[1])
        gains.append(best[0])
    return _selection(obj, chosen, gains)


def brute_force_opt(
    g: CnpGraph,
    k: int,
    T: float,
    worlds: Sequence[PossibleWorld],
    *,
    limit: int = 10**6,
) -> SeedSelection:
    """Exact maximizer of the average spread over ``worlds`` among all k-subsets."""
    _check_k(g, k)
    if math.comb(g.n, k) > limit:
        raise ValueError(f"C({g.n}, {k}) subsets exceed the limit of {limit}")
    obj = WorldObjective(g, _resolve_worlds(g, T, len(worlds), DEFAULT_SEED, worlds))
    best_val, best = -math.inf, ()
    for combo in itertools.combinations(range(g.n), k):
        val = obj(combo)
        if val > best_val:
            best_val, best = val, combo
    seeds = list(best)
    gains = [obj(seeds[:i + 1]) - obj(seeds[:i]) for i in range(len(seeds))]
    return _selection(obj, seeds, gains)
