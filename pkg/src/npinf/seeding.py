"""Deterministic per-run random streams derived from a master seed."""
from __future__ import annotations

import random

import numpy as np

DEFAULT_SEED = 20140401


def _entropy(master_seed: int, run_index: int, stream: int) -> list[int]:
    if master_seed < 0 or run_index < 0:
        raise ValueError("seeds and run indices must be non-negative")
    return [int(master_seed), int(run_index), int(stream)]


def run_random(master_seed: int, run_index: int, stream: int = 0) -> random.Random:
    """``random.Random`` for run ``run_index``; independent of how runs are scheduled."""
    state = np.random.SeedSequence(_entropy(master_seed, run_index, stream)).generate_state(4, np.uint64)
    seed = 0
    for word in state.tolist():
        seed = (seed << 64) | word
    return random.Random(seed)


def run_generator(master_seed: int, run_index: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(_entropy(master_seed, run_index, stream)))
