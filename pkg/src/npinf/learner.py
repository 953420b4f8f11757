"""Model parameters from timestamped action logs.

A user becomes active when acting and stays active while further actions
arrive within the deactivation window ``w``; a window without an action ends
the active interval (one deactivation). Timers still running at the end of
the observation period are censored: the interval is clipped and no
deactivation is counted.

Rates:

* deactivation rate = deactivations / total active time
* every activation of ``v`` splits one unit of credit equally over the ``k``
  in-neighbours active just before it (or gives it to the global source when
  ``k == 0``); edge rate ``(u, v)`` = credit / total active time of ``u``
* global rate = global credit / (horizon * number of nodes)
* IC-style probability ``(u, v)`` = credit / number of activations of ``u``
"""
from __future__ import annotations

import csv
import math
from bisect import bisect_left
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .graph import CnpGraph


class LogFormatError(ValueError):
    pass


# -- action logs --------------------------------------------------------------

class IdMap:
    """Dense integer ids for arbitrary string user ids."""

    def __init__(self, ids: Iterable[str] = ()):
        self._ext: list[str] = []
        self._dense: dict[str, int] = {}
        for ext in ids:
            self.add(ext)

    @classmethod
    def sorted_from(cls, ids: Iterable[str]) -> "IdMap":
        """Map ids in numeric order when all are integers, lexicographic otherwise."""
        uniq = set(ids)
        if all(s.isdigit() for s in uniq):
            order = sorted(uniq, key=int)
        else:
            order = sorted(uniq)
        return cls(order)

    def add(self, ext: str) -> int:
        idx = self._dense.get(ext)
        if idx is None:
            idx = len(self._ext)
            self._dense[ext] = idx
            self._ext.append(ext)
        return idx

    def __len__(self) -> int:
        return len(self._ext)

    def __getitem__(self, ext: str) -> int:
        return self._dense[ext]

    def __contains__(self, ext: str) -> bool:
        return ext in self._dense

    def external(self, idx: int) -> str:
        return self._ext[idx]

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for idx, ext in enumerate(self._ext):
                fh.write(f"{idx}\t{ext}\n")


@dataclass
class ActionLog:
    """``(user, timestamp)`` records with users as dense ids."""

    users: list[int]
    times: list[float]
    id_map: IdMap = field(default_factory=IdMap)

    def __post_init__(self):
        if len(self.users) != len(self.times):
            raise LogFormatError("users and times differ in length")
        for t in self.times:
            if not math.isfinite(t):
                raise LogFormatError(f"non-finite timestamp {t!r}")

    @classmethod
    def from_records(cls, records: Iterable[tuple[str, float]], id_map: IdMap | None = None) -> "ActionLog":
        records = list(records)
        if id_map is None:
            id_map = IdMap.sorted_from(str(u) for u, _ in records)
        users = [id_map.add(str(u)) for u, _ in records]
        times = [float(t) for _, t in records]
        return cls(users, times, id_map)

    @property
    def n_users(self) -> int:
        return len(self.id_map)

    def __len__(self) -> int:
        return len(self.times)

    def per_user(self, n: int | None = None) -> list[list[float]]:
        """Sorted distinct action times per dense user id."""
        n = self.n_users if n is None else n
        out: list[set[float]] = [set() for _ in range(n)]
        for u, t in zip(self.users, self.times):
            out[u].add(t)
        return [sorted(s) for s in out]

    def window(self, start: float, end: float) -> "ActionLog":
        """Records with ``start <= t < end``, same id map."""
        keep = [(u, t) for u, t in zip(self.users, self.times) if start <= t < end]
        return ActionLog([u for u, _ in keep], [t for _, t in keep], self.id_map)

    def span(self) -> tuple[float, float]:
        return min(self.times), max(self.times)

    def write_csv(self, path) -> None:
        rows = sorted(zip(self.times, self.users))
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["user_id", "timestamp"])
            for t, u in rows:
                writer.writerow([self.id_map.external(u), repr(t)])


def read_action_log(path, id_map: IdMap | None = None, time_scale: float = 1.0) -> ActionLog:
    """Parse ``user_id,timestamp`` CSV (header optional); times multiplied by ``time_scale``."""
    records = []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise LogFormatError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            user, ts = row[0].strip(), row[1].strip()
            try:
                t = float(ts)
            except ValueError:
                if lineno == 1:
                    continue
                raise LogFormatError(f"{path}:{lineno}: bad timestamp {ts!r}") from None
            if not math.isfinite(t):
                raise LogFormatError(f"{path}:{lineno}: non-finite timestamp {ts!r}")
            records.append((user, t * time_scale))
    if id_map is not None:
        for user, _ in records:
            id_map.add(user)
    return ActionLog.from_records(records, id_map)


# -- timelines ----------------------------------------------------------------

@dataclass
class Timeline:
    intervals: list[tuple[float, float]] = field(default_factory=list)
    deactivations: int = 0

    @property
    def activations(self) -> list[float]:
        return [s for s, _ in self.intervals]

    @property
    def active_time(self) -> float:
        return math.fsum(e - s for s, e in self.intervals)

    def active_before(self, t: float) -> bool:
        """Whether the user is active just before ``t`` (``s < t <= e`` for some interval)."""
        i = bisect_left(self.intervals, (t, -math.inf)) - 1
        return i >= 0 and self.intervals[i][1] >= t

    def overlap(self, lo: float, hi: float) -> float:
        return math.fsum(max(0.0, min(e, hi) - max(s, lo)) for s, e in self.intervals)


def compute_window(log: ActionLog, min_gap: float = 1.0) -> float:
    """Mean gap between consecutive actions of a user, ignoring gaps below ``min_gap``."""
    gaps = []
    for times in log.per_user():
        gaps.extend(b - a for a, b in zip(times, times[1:]) if b - a >= min_gap)
    if not gaps:
        raise ValueError("no qualifying gaps between consecutive actions")
    return math.fsum(gaps) / len(gaps)


def user_timeline(times: Sequence[float], w: float, observation_end: float) -> Timeline:
    """Timer rule for one user's sorted distinct action times."""
    tl = Timeline()
    times = [t for t in times if t < observation_end]
    i = 0
    while i < len(times):
        start = times[i]
        last = start
        i += 1
        while i < len(times) and times[i] - last <= w:
            last = times[i]
            i += 1
        end = last + w
        if end < observation_end:
            tl.deactivations += 1
        else:
            end = observation_end
        tl.intervals.append((start, end))
    return tl


def derive_timelines(
    log: ActionLog, w: float, observation_end: float, n: int | None = None
) -> list[Timeline]:
    if not (w > 0 and math.isfinite(w)):
        raise ValueError(f"deactivation window must be positive and finite, got {w!r}")
    return [user_timeline(times, w, observation_end) for times in log.per_user(n)]


def active_at_end(timelines: Sequence[Timeline], end: float) -> list[int]:
    """Users whose timeline covers ``end`` from the left (the simulation seeds)."""
    return [u for u, tl in enumerate(timelines) if tl.active_before(end)]


# -- rates ----------------------------------------------------------------------

@dataclass
class Contributions:
    """Credit per edge and for the global source.

    Shares are accumulated as exact fractions; ``edge_score`` holds their
    correctly rounded float values, so the result does not depend on the
    order in which activations are visited.
    """

    exact: list[Fraction]
    global_score: int
    activations: np.ndarray

    @property
    def edge_score(self) -> np.ndarray:
        return np.array([float(x) for x in self.exact], dtype=float)

    @property
    def total(self) -> Fraction:
        return sum(self.exact, Fraction(self.global_score))


def contribution_scores(
    timelines: Sequence[Timeline], n: int, src: Sequence[int], dst: Sequence[int]
) -> Contributions:
    """Split one unit of credit per activation among the active in-neighbours."""
    srcl = [int(u) for u in src]
    in_edges: list[list[int]] = [[] for _ in range(n)]
    for e, v in enumerate(dst):
        in_edges[int(v)].append(e)
    score = [Fraction(0)] * len(srcl)
    glob = 0
    acts = np.zeros(n, dtype=np.int64)
    for v in range(n):
        tl = timelines[v]
        acts[v] = len(tl.intervals)
        for t in tl.activations:
            credited = [e for e in in_edges[v] if srcl[e] != v and timelines[srcl[e]].active_before(t)]
            if credited:
                share = Fraction(1, len(credited))
                for e in credited:
                    score[e] += share
            else:
                glob += 1
    return Contributions(score, glob, acts)


def learn_rates(
    timelines: Sequence[Timeline],
    n: int,
    src: Sequence[int],
    dst: Sequence[int],
    horizon: float,
    contrib: Contributions | None = None,
) -> tuple[np.ndarray, np.ndarray, float]:
    """``(gamma_minus per node, gamma_plus per edge, global_rate)``.

    ``horizon`` is the length of the observation period used in the global
    rate denominator.
    """
    if len(timelines) < n:
        raise ValueError(f"need {n} timelines, got {len(timelines)}")
    active = np.array([tl.active_time for tl in timelines[:n]], dtype=float)
    deacts = np.array([tl.deactivations for tl in timelines[:n]], dtype=float)
    gamma_minus = np.divide(deacts, active, out=np.zeros(n), where=active > 0)
    if contrib is None:
        contrib = contribution_scores(timelines, n, src, dst)
    src_active = active[np.asarray(src, dtype=np.int64)] if len(src) else np.zeros(0)
    gamma_plus = np.divide(contrib.edge_score, src_active, out=np.zeros(len(src_active)), where=src_active > 0)
    global_rate = contrib.global_score / (horizon * n) if n and horizon > 0 else 0.0
    return gamma_minus, gamma_plus, global_rate


def default_rate(rates: Iterable[float], percentile: float) -> float:
    """Nearest-rank percentile of the distinct non-zero rates."""
    if not 0 <= percentile <= 100:
        raise ValueError(f"percentile must lie in [0, 100], got {percentile!r}")
    vals = sorted({float(r) for r in rates if r > 0})
    if not vals:
        raise ValueError("no non-zero rates to take a percentile of")
    rank = max(1, math.ceil(percentile / 100 * len(vals)))
    return vals[rank - 1]


def learn_ic_weights(
    timelines: Sequence[Timeline], n: int, src: Sequence[int], dst: Sequence[int]
) -> np.ndarray:
    """Credit on ``(u, v)`` divided by the number of activations of ``u``, capped at 1."""
    contrib = contribution_scores(timelines, n, src, dst)
    acts = contrib.activations[np.asarray(src, dtype=np.int64)].astype(float) if len(src) else np.zeros(0)
    prob = np.divide(contrib.edge_score, acts, out=np.zeros(len(acts)), where=acts > 0)
    return np.minimum(prob, 1.0)


def ground_truth_spread(log: ActionLog, w: float, test_start: float, test_end: float) -> float:
    """Total active time of all users inside ``[test_start, test_end)``.

    Intervals begun before ``test_start`` carry over into the test period.
    """
    if not test_start < test_end:
        raise ValueError("test_start must precede test_end")
    timelines = derive_timelines(log, w, test_end)
    return math.fsum(tl.overlap(test_start, test_end) for tl in timelines)


# -- full pipeline --------------------------------------------------------------

@dataclass
class LearnedModel:
    graph: CnpGraph
    window: float
    default_rate: float | None
    percentile: float | None
    seeds: list[int]
    train_start: float
    train_end: float
    horizon: float
    global_score: int
    activations: int

    def sidecar(self) -> dict:
        return {
            "window": self.window,
            "global_rate": self.graph.global_rate,
            "default_rate": self.default_rate,
            "percentile": self.percentile,
            "observation_start": self.train_start,
            "observation_end": self.train_end,
            "horizon": self.horizon,
            "seeds": len(self.seeds),
            "activations": self.activations,
            "global_score": self.global_score,
        }


def learn_model(
    log: ActionLog,
    n: int,
    src: Sequence[int],
    dst: Sequence[int],
    train_end: float,
    *,
    train_start: float | None = None,
    window: float | None = None,
    percentile: float | None = 50.0,
    horizon: float | None = None,
    unit: str | None = "days",
) -> LearnedModel:
    """Learn CNP parameters from the actions in ``[train_start, train_end)``.

    ``horizon`` defaults to the training period length. ``percentile=None``
    leaves unobserved nodes at a zero deactivation rate.
    """
    if train_start is None:
        train_start = min(log.times) if len(log) else 0.0
    train = log.window(train_start, train_end)
    if window is None:
        window = compute_window(train)
    timelines = derive_timelines(train, window, train_end, n)
    horizon = train_end - train_start if horizon is None else horizon
    contrib = contribution_scores(timelines, n, src, dst)
    gamma_minus, gamma_plus, global_rate = learn_rates(timelines, n, src, dst, horizon, contrib)
    fallback = None
    if percentile is not None and np.any(gamma_minus > 0):
        fallback = default_rate(gamma_minus, percentile)
        unobserved = np.array([tl.active_time == 0 for tl in timelines])
        gamma_minus = np.where(unobserved, fallback, gamma_minus)
    g = CnpGraph(n, src, dst, rate=gamma_plus, gamma_minus=gamma_minus, global_rate=global_rate, unit=unit)
    return LearnedModel(
        graph=g,
        window=window,
        default_rate=fallback,
        percentile=percentile if fallback is not None else None,
        seeds=active_at_end(timelines, train_end),
        train_start=train_start,
        train_end=train_end,
        horizon=horizon,
        global_score=contrib.global_score,
        activations=int(contrib.activations.sum()),
    )
