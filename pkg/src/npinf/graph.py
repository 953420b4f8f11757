"""Directed influence graphs for the continuous (rates) and discrete (probabilities) models.

Both graph kinds share a topology stored as edge arrays sorted by
``(src, dst)`` plus CSR indices for out- and in-adjacency. Graphs are
immutable once built and can be shared across simulation runs.

File format (UTF-8, tab separated, ``#`` lines are comments)::

    edges:  src  dst  value        value = rate (CNP) or probability (DNP)
    nodes:  node value             value = deactivation rate / probability

Header comments of the form ``# key<TAB>value`` are recognised for
``unit`` (carried through, never interpreted), ``global_rate`` (CNP node
file) and ``ambient`` (DNP node file).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np


class GraphFormatError(ValueError):
    """Malformed or invalid graph input."""


@dataclass(frozen=True, eq=False)
class _Topology:
    n: int
    src: np.ndarray
    dst: np.ndarray
    unit: str | None = field(default=None, kw_only=True)

    def _canonicalize(self, *edge_arrays: str) -> None:
        src = np.asarray(self.src, dtype=np.int64).reshape(-1)
        dst = np.asarray(self.dst, dtype=np.int64).reshape(-1)
        if len(src) != len(dst):
            raise GraphFormatError("src and dst have different lengths")
        if self.n < 0:
            raise GraphFormatError(f"negative node count {self.n}")
        if len(src) and (src.min() < 0 or dst.min() < 0 or max(src.max(), dst.max()) >= self.n):
            raise GraphFormatError("edge endpoint outside [0, n)")
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        if len(src) > 1:
            dup = (src[1:] == src[:-1]) & (dst[1:] == dst[:-1])
            if dup.any():
                i = int(np.flatnonzero(dup)[0])
                raise GraphFormatError(f"duplicate edge ({src[i]}, {dst[i]})")
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "dst", dst)
        for name in edge_arrays:
            arr = np.asarray(getattr(self, name), dtype=np.float64).reshape(-1)
            if len(arr) != len(order):
                raise GraphFormatError(f"{name} has {len(arr)} entries for {len(order)} edges")
            object.__setattr__(self, name, arr[order])
        for arr in (src, dst):
            arr.setflags(write=False)

    @property
    def m(self) -> int:
        return len(self.src)

    @cached_property
    def out_ptr(self) -> np.ndarray:
        return np.searchsorted(self.src, np.arange(self.n + 1)).astype(np.int64)

    @cached_property
    def _in_index(self) -> tuple[np.ndarray, np.ndarray]:
        order = np.lexsort((self.src, self.dst))
        ptr = np.searchsorted(self.dst[order], np.arange(self.n + 1)).astype(np.int64)
        return ptr, order

    @property
    def in_ptr(self) -> np.ndarray:
        return self._in_index[0]

    @property
    def in_order(self) -> np.ndarray:
        """Edge ids sorted by ``(dst, src)``."""
        return self._in_index[1]

    def out_edges(self, u: int) -> np.ndarray:
        return np.arange(self.out_ptr[u], self.out_ptr[u + 1])

    def in_edges(self, v: int) -> np.ndarray:
        ptr, order = self._in_index
        return order[ptr[v]:ptr[v + 1]]

    def out_neighbors(self, u: int) -> np.ndarray:
        return self.dst[self.out_ptr[u]:self.out_ptr[u + 1]]

    def in_neighbors(self, v: int) -> np.ndarray:
        return self.src[self.in_edges(v)]

    @cached_property
    def adjacency_lists(self) -> tuple[list[list[int]], list[list[int]]]:
        """Per-node out-edge ids and in-edge ids as plain lists (for tight loops)."""
        ptr = self.out_ptr.tolist()
        out = [list(range(ptr[u], ptr[u + 1])) for u in range(self.n)]
        iptr, order = self._in_index
        iptr, order = iptr.tolist(), order.tolist()
        inn = [order[iptr[v]:iptr[v + 1]] for v in range(self.n)]
        return out, inn

    def edge_list(self) -> list[tuple[int, int]]:
        return list(zip(self.src.tolist(), self.dst.tolist()))

    def _same_topology(self, other: "_Topology") -> bool:
        return (
            self.n == other.n
            and np.array_equal(self.src, other.src)
            and np.array_equal(self.dst, other.dst)
        )


def _check_values(name: str, arr: np.ndarray, upper: float | None = None) -> None:
    if len(arr) == 0:
        return
    if not np.all(np.isfinite(arr)):
        raise GraphFormatError(f"{name}: non-finite value")
    if arr.min() < 0:
        raise GraphFormatError(f"{name}: negative value {arr.min()!r}")
    if upper is not None and arr.max() > upper:
        raise GraphFormatError(f"{name}: value {arr.max()!r} above {upper}")


@dataclass(frozen=True, eq=False)
class CnpGraph(_Topology):
    """Graph with per-edge activation rates, per-node deactivation rates and a global rate.

    The global influence source is a permanently active virtual node with an
    edge of rate ``global_rate`` into every node; it is stored as the scalar
    only.
    """

    rate: np.ndarray = None
    gamma_minus: np.ndarray = None
    global_rate: float = 0.0

    def __post_init__(self):
        rate = np.zeros(len(np.asarray(self.src).reshape(-1))) if self.rate is None else self.rate
        object.__setattr__(self, "rate", rate)
        self._canonicalize("rate")
        gm = np.zeros(self.n) if self.gamma_minus is None else self.gamma_minus
        gm = np.asarray(gm, dtype=np.float64).reshape(-1)
        if len(gm) != self.n:
            raise GraphFormatError(f"gamma_minus has {len(gm)} entries for {self.n} nodes")
        _check_values("edge rate", self.rate)
        _check_values("deactivation rate", gm)
        if not (math.isfinite(self.global_rate) and self.global_rate >= 0):
            raise GraphFormatError(f"global rate must be finite and >= 0, got {self.global_rate!r}")
        object.__setattr__(self, "global_rate", float(self.global_rate))
        object.__setattr__(self, "gamma_minus", gm)
        self.rate.setflags(write=False)
        gm.setflags(write=False)

    def __eq__(self, other):
        if not isinstance(other, CnpGraph):
            return NotImplemented
        return (
            self._same_topology(other)
            and np.array_equal(self.rate, other.rate)
            and np.array_equal(self.gamma_minus, other.gamma_minus)
            and self.global_rate == other.global_rate
        )

    __hash__ = None

    def with_rates(self, rate=None, gamma_minus=None, global_rate=None) -> "CnpGraph":
        return CnpGraph(
            self.n,
            self.src,
            self.dst,
            rate=self.rate if rate is None else rate,
            gamma_minus=self.gamma_minus if gamma_minus is None else gamma_minus,
            global_rate=self.global_rate if global_rate is None else global_rate,
            unit=self.unit,
        )

    def progressive(self) -> "CnpGraph":
        """Same graph with every deactivation rate set to zero."""
        return self.with_rates(gamma_minus=np.zeros(self.n))


@dataclass(frozen=True, eq=False)
class DnpGraph(_Topology):
    """Graph with per-edge activation probabilities and per-node deactivation probabilities.

    ``ambient`` is the per-step probability that an inactive node is
    activated by the global source.
    """

    p: np.ndarray = None
    q: np.ndarray = None
    ambient: float = 0.0

    def __post_init__(self):
        p = np.zeros(len(np.asarray(self.src).reshape(-1))) if self.p is None else self.p
        object.__setattr__(self, "p", p)
        self._canonicalize("p")
        q = np.zeros(self.n) if self.q is None else self.q
        q = np.asarray(q, dtype=np.float64).reshape(-1)
        if len(q) != self.n:
            raise GraphFormatError(f"q has {len(q)} entries for {self.n} nodes")
        _check_values("edge probability", self.p, 1.0)
        _check_values("deactivation probability", q, 1.0)
        if not (math.isfinite(self.ambient) and 0 <= self.ambient <= 1):
            raise GraphFormatError(f"ambient probability must be in [0, 1], got {self.ambient!r}")
        object.__setattr__(self, "ambient", float(self.ambient))
        object.__setattr__(self, "q", q)
        self.p.setflags(write=False)
        q.setflags(write=False)

    def __eq__(self, other):
        if not isinstance(other, DnpGraph):
            return NotImplemented
        return (
            self._same_topology(other)
            and np.array_equal(self.p, other.p)
            and np.array_equal(self.q, other.q)
            and self.ambient == other.ambient
        )

    __hash__ = None


# -- parameter mapping ------------------------------------------------------

def rate_to_prob(rate):
    """Probability that an exponential clock of ``rate`` fires within one time unit."""
    return -np.expm1(-np.asarray(rate, dtype=np.float64))


def prob_to_rate(p):
    p = np.asarray(p, dtype=np.float64)
    if np.any(p >= 1):
        raise ValueError("probability 1 maps to an infinite rate")
    return -np.log1p(-p)


def cnp_to_dnp(g: CnpGraph) -> DnpGraph:
    return DnpGraph(
        g.n,
        g.src,
        g.dst,
        p=rate_to_prob(g.rate),
        q=rate_to_prob(g.gamma_minus),
        ambient=float(rate_to_prob(g.global_rate)),
        unit=g.unit,
    )


def dnp_to_cnp(g: DnpGraph) -> CnpGraph:
    return CnpGraph(
        g.n,
        g.src,
        g.dst,
        rate=prob_to_rate(g.p),
        gamma_minus=prob_to_rate(g.q),
        global_rate=float(prob_to_rate(g.ambient)),
        unit=g.unit,
    )


# -- file I/O ---------------------------------------------------------------

def _parse_float(tok: str, path, lineno: int) -> float:
    try:
        val = float(tok)
    except ValueError:
        raise GraphFormatError(f"{path}:{lineno}: not a number: {tok!r}") from None
    if not math.isfinite(val):
        raise GraphFormatError(f"{path}:{lineno}: non-finite value {tok!r}")
    if val < 0:
        raise GraphFormatError(f"{path}:{lineno}: negative value {tok!r}")
    return val


def _parse_id(tok: str, path, lineno: int) -> int:
    try:
        val = int(tok)
    except ValueError:
        raise GraphFormatError(f"{path}:{lineno}: bad node id {tok!r}") from None
    if val < 0:
        raise GraphFormatError(f"{path}:{lineno}: negative node id {tok!r}")
    return val


def _read_table(path, ncols: int, upper: float | None = None):
    """Rows of ``ncols`` tab-separated fields plus recognised header entries."""
    header: dict[str, str] = {}
    ids: list[list[int]] = [[] for _ in range(ncols - 1)]
    values: list[float] = []
    seen = set() if ncols == 3 else None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                parts = line[1:].strip().split("\t")
                if len(parts) == 2:
                    header[parts[0].strip()] = parts[1].strip()
                continue
            parts = line.split("\t")
            if len(parts) != ncols:
                raise GraphFormatError(
                    f"{path}:{lineno}: expected {ncols} tab-separated fields, got {len(parts)}"
                )
            row = [_parse_id(tok, path, lineno) for tok in parts[:-1]]
            val = _parse_float(parts[-1], path, lineno)
            if upper is not None and val > upper:
                raise GraphFormatError(f"{path}:{lineno}: value {val!r} above {upper}")
            if seen is not None:
                key = (row[0], row[1])
                if key in seen:
                    raise GraphFormatError(f"{path}:{lineno}: duplicate edge {key}")
                seen.add(key)
            for col, v in zip(ids, row):
                col.append(v)
            values.append(val)
    return header, ids, values


def _load(edge_file, node_file, upper: float | None):
    eh, (src, dst), evals = _read_table(edge_file, 3, upper)
    nh, (nodes,), nvals = _read_table(node_file, 2, upper)
    if len(set(nodes)) != len(nodes):
        raise GraphFormatError(f"{node_file}: node listed more than once")
    n = 1 + max([-1, *src, *dst, *nodes])
    node_vals = np.zeros(n)
    node_vals[nodes] = nvals
    unit = nh.get("unit", eh.get("unit"))
    return n, np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64), np.array(evals), node_vals, nh, unit


def load_cnp_graph(edge_file, node_file, global_rate: float | None = None) -> CnpGraph:
    """Read a CNP graph; ``global_rate=None`` takes the node-file header value (default 0)."""
    n, src, dst, rate, gm, header, unit = _load(edge_file, node_file, None)
    if global_rate is None:
        global_rate = float(header.get("global_rate", 0.0))
    return CnpGraph(n, src, dst, rate=rate, gamma_minus=gm, global_rate=global_rate, unit=unit)


def load_dnp_graph(edge_file, node_file, ambient: float | None = None) -> DnpGraph:
    n, src, dst, p, q, header, unit = _load(edge_file, node_file, 1.0)
    if ambient is None:
        ambient = float(header.get("ambient", 0.0))
    return DnpGraph(n, src, dst, p=p, q=q, ambient=ambient, unit=unit)


def _write_rows(path, header: dict, rows: Iterable[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for k, v in header.items():
            if v is not None:
                fh.write(f"# {k}\t{v}\n")
        for row in rows:
            fh.write(row)


def _edge_rows(src, dst, vals):
    for s, d, v in zip(src.tolist(), dst.tolist(), vals.tolist()):
        yield f"{s}\t{d}\t{v!r}\n"


def _node_rows(vals):
    for u, v in enumerate(vals.tolist()):
        yield f"{u}\t{v!r}\n"


def save_cnp_graph(g: CnpGraph, edge_file, node_file) -> None:
    _write_rows(edge_file, {"unit": g.unit}, _edge_rows(g.src, g.dst, g.rate))
    _write_rows(node_file, {"unit": g.unit, "global_rate": repr(g.global_rate)}, _node_rows(g.gamma_minus))


def save_dnp_graph(g: DnpGraph, edge_file, node_file) -> None:
    _write_rows(edge_file, {"unit": g.unit}, _edge_rows(g.src, g.dst, g.p))
    _write_rows(node_file, {"unit": g.unit, "ambient": repr(g.ambient)}, _node_rows(g.q))


def read_topology(path) -> list[tuple[str, str]]:
    """Edge endpoints from a topology file (first two columns, ids kept as strings)."""
    edges = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t") if "\t" in line else line.split()
            if len(parts) < 2:
                raise GraphFormatError(f"{path}:{lineno}: expected at least 2 fields")
            edges.append((parts[0], parts[1]))
    return edges


def read_seed_file(path) -> list[int]:
    """Node ids from a seed file: whitespace-separated integers, ``#`` comments."""
    seeds = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0]
            for tok in line.split():
                try:
                    v = int(tok)
                except ValueError:
                    raise GraphFormatError(f"{path}:{lineno}: bad node id {tok!r}") from None
                if v < 0:
                    raise GraphFormatError(f"{path}:{lineno}: negative node id {v}")
                seeds.append(v)
    return sorted(set(seeds))


def write_seed_file(path, seeds: Iterable[int]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for v in sorted(set(seeds)):
            fh.write(f"{v}\n")
