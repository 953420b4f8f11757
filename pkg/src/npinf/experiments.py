"""Scaled-down experiment protocols shared by the CLI, scripts and tests."""
from __future__ import annotations

import gc
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .dnp import simulate_dnp
from .cnp import simulate_event_driven
from .graph import CnpGraph, cnp_to_dnp
from .inflmax import estimate_spread
from .learner import ground_truth_spread, learn_model
from .seeding import run_generator, run_random
from .synth import SynthConfig, events_to_log, forest_fire, gen_events


# -- accuracy under injected deactivations ------------------------------------

@dataclass
class AccuracyRow:
    deactivations: int
    ground_truth: float
    cnp: float
    cp: float
    seeds: int

    @property
    def cnp_error(self) -> float:
        return abs(self.cnp - self.ground_truth) / self.ground_truth

    @property
    def cp_error(self) -> float:
        return abs(self.cp - self.ground_truth) / self.ground_truth


def deactivation_experiment(
    cfg: SynthConfig,
    levels=(0, 500, 1500, 4000),
    runs: int = 100,
    master_seed: int = 0,
) -> list[AccuracyRow]:
    """Train on the first half of the horizon, predict the second half.

    Nodes active at the split are the seeds; the ground truth is the total
    active time observed in the second half. The progressive estimate reuses
    the learned graph with every deactivation rate set to zero. Cascades are
    identical across levels; only the injected deactivations change.
    """
    topo = forest_fire(cfg)
    split = cfg.horizon / 2
    test_len = cfg.horizon - split
    rows = []
    for level in levels:
        lcfg = SynthConfig(**{**cfg.to_dict(), "deactivations": level})
        log = events_to_log(gen_events(topo, lcfg), lcfg)
        model = learn_model(log, topo.n, topo.src, topo.dst, split, train_start=0.0, window=cfg.window)
        truth = ground_truth_spread(log, cfg.window, split, cfg.horizon)
        cnp = estimate_spread(model.graph, model.seeds, test_len, runs, master_seed).mean
        cp = estimate_spread(model.graph, model.seeds, test_len, runs, master_seed, engine="cp").mean
        rows.append(AccuracyRow(level, truth, cnp, cp, len(model.seeds)))
    return rows


# -- cross-engine instance -----------------------------------------------------

def cross_engine_instance(n: int = 50, seed: int = 3) -> tuple[CnpGraph, list[int], int]:
    """Forest-fire graph with slow clocks for comparing CNP and mapped DNP.

    Rates are small relative to one step, which keeps the per-step
    discretization bias (about half a rate per unit time) near one percent.
    """
    topo = forest_fire(SynthConfig(n=n, seed=seed))
    gen = run_generator(seed, 0, 8)
    g = topo.with_rates(
        rate=gen.uniform(0.005, 0.02, topo.m),
        gamma_minus=gen.uniform(0.01, 0.03, topo.n),
        global_rate=0.002,
    )
    return g, list(range(min(5, n))), 50


# -- runtime scaling ------------------------------------------------------------

@dataclass
class BenchConfig:
    """Sparse-activity instance: many seeds, slow clocks relative to the horizon.

    Rates are powers of two so every live event is a single shard. The global
    rate keeps the active set growing slowly, which the discrete engine pays
    for on every step.
    """

    activation_rate: float = 2.0**-13
    deactivation_rate: float = 2.0**-14
    global_rate: float = 2.0**-10
    seed_fraction: float = 0.3
    forward: float = 0.35
    backward: float = 0.32


def bench_instance(n: int, seed: int, bc: BenchConfig | None = None) -> tuple[CnpGraph, list[int]]:
    bc = bc or BenchConfig()
    topo = forest_fire(SynthConfig(n=n, forward=bc.forward, backward=bc.backward, seed=seed))
    g = topo.with_rates(
        rate=np.full(topo.m, bc.activation_rate),
        gamma_minus=np.full(n, bc.deactivation_rate),
        global_rate=bc.global_rate,
    )
    gen = run_generator(seed, 0, 7)
    k = max(1, int(round(bc.seed_fraction * n)))
    seeds = sorted(gen.choice(n, size=k, replace=False).tolist())
    return g, seeds


@dataclass
class BenchRow:
    engine: str
    size: int
    horizon: int
    reps: int
    wall_mean_s: float
    wall_min_s: float
    spread_mean: float
    timings: list[float] = field(default_factory=list, repr=False)


def _runner(engine: str, g: CnpGraph, seeds, horizon: int, master_seed: int):
    """A callable ``rng -> spread`` with graph preparation already paid for."""
    if engine == "dnp":
        dg = cnp_to_dnp(g)
        simulate_dnp(dg, seeds, 1, run_random(master_seed, 0))  # build adjacency caches
        return lambda rng: simulate_dnp(dg, seeds, horizon, rng).spread()
    if engine in ("cnp", "cp"):
        eg = g.progressive() if engine == "cp" else g
        simulate_event_driven(eg, seeds, 1e-9, run_random(master_seed, 0), record=False)
        return lambda rng: simulate_event_driven(eg, seeds, horizon, rng, record=False).spread()
    raise ValueError(f"unknown engine {engine!r}")


def _time_round_robin(points, runners, reps: int, master_seed: int) -> list[BenchRow]:
    # rep i of every point runs before rep i + 1 of any, so drift in machine
    # speed lands on all horizons alike
    timings = [[] for _ in points]
    spreads = [[] for _ in points]
    enabled = gc.isenabled()
    gc.disable()
    try:
        for i in range(reps):
            for j, run in enumerate(runners):
                rng = run_random(master_seed, i)
                t0 = time.perf_counter()
                spreads[j].append(run(rng))
                timings[j].append(time.perf_counter() - t0)
    finally:
        if enabled:
            gc.enable()
    return [
        BenchRow(engine, size, horizon, reps, math.fsum(ts) / reps, min(ts), math.fsum(sp) / reps, ts)
        for (engine, size, horizon), ts, sp in zip(points, timings, spreads)
    ]


def time_engine(engine: str, g: CnpGraph, seeds, horizon: int, reps: int, master_seed: int) -> BenchRow:
    """Wall time of ``reps`` single runs (graph preparation excluded)."""
    run = _runner(engine, g, seeds, horizon, master_seed)
    return _time_round_robin([(engine, g.n, horizon)], [run], reps, master_seed)[0]


def runtime_scaling(
    engines=("cnp", "dnp"),
    horizons=(30, 60, 120, 240),
    sizes=(10_000,),
    reps: int = 5,
    master_seed: int = 0,
    bc: BenchConfig | None = None,
) -> list[BenchRow]:
    """Time every (engine, horizon) point per size, interleaving repetitions."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    rows = []
    for size in sizes:
        g, seeds = bench_instance(size, master_seed, bc)
        points = [(e, g.n, h) for e in engines for h in horizons]
        runners = [_runner(e, g, seeds, h, master_seed) for e, _, h in points]
        rows.extend(_time_round_robin(points, runners, reps, master_seed))
    return rows
