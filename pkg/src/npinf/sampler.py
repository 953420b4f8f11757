"""Dynamic categorical distribution built from binary weight shards.

Every weight is quantized to an integer number of units of ``2**-m`` and
split along its binary representation. Bit ``b`` of the unit count becomes
one shard of length ``2**(b - m)``, stored in the array for that bit. All
shards inside one array have the same length, so removing an event is a
swap with the last element of each array it occupies and never leaves a gap.

Level ``i`` (as used in the public accessors) is the array whose shards have
length ``2**-i``, so ``i = m - b``. Levels ``1..m`` cover weights below one;
larger weights use levels ``<= 0``.

The selection line is laid out by level, largest shards first. A point ``x``
in ``(0, total_mass]`` falls in the first level whose cumulative length
reaches ``x``, and inside that level in shard ``ceil((x - start) / len)``.
"""
from __future__ import annotations

import math
from bisect import bisect_left
from itertools import accumulate
from typing import Hashable, Iterator

MAX_BITS = 63
DEFAULT_PRECISION = 20


class DynamicCategorical:
    """Weighted bag of events supporting O(m) insert/remove and fast sampling.

    Parameters
    ----------
    m : int
        Precision; the smallest shard has length ``2**-m``. ``1 <= m <= 62``.
    """

    __slots__ = ("m", "_scale", "_arrays", "_pos", "_units", "_total", "_top", "_prefix")

    def __init__(self, m: int = DEFAULT_PRECISION):
        if not isinstance(m, int) or not 1 <= m <= 62:
            raise ValueError(f"precision m must be an integer in [1, 62], got {m!r}")
        self.m = m
        self._scale = float(2**m)
        self._arrays: list[list[Hashable]] = [[] for _ in range(MAX_BITS)]
        # per bit: key -> position in that bit's array
        self._pos: list[dict[Hashable, int]] = [{} for _ in range(MAX_BITS)]
        self._units: dict[Hashable, int] = {}
        self._total = 0
        self._top = 0
        self._prefix: list[int] | None = None

    # -- inspection -------------------------------------------------------

    def __len__(self) -> int:
        return len(self._units)

    def __contains__(self, key: Hashable) -> bool:
        return key in self._units

    def __iter__(self) -> Iterator[Hashable]:
        return iter(self._units)

    @property
    def total_units(self) -> int:
        """Total mass as an exact integer count of ``2**-m`` units."""
        return self._total

    @property
    def total_mass(self) -> float:
        return self._total / self._scale

    def units(self, key: Hashable) -> int:
        return self._units[key]

    def weight(self, key: Hashable) -> float:
        """Quantized weight of a live event."""
        return self._units[key] / self._scale

    def count(self, level: int) -> int:
        """Number of shards of length ``2**-level`` (``c_i``)."""
        bit = self.m - level
        if not 0 <= bit < MAX_BITS:
            return 0
        return len(self._arrays[bit])

    def shards(self, level: int) -> list[Hashable]:
        """Copy of the shard array for ``level`` in storage order."""
        bit = self.m - level
        if not 0 <= bit < MAX_BITS:
            return []
        return list(self._arrays[bit])

    def positions(self, key: Hashable) -> list[tuple[int, int]]:
        """``(level, position)`` of every shard of ``key``, smallest level first."""
        units = self._units[key]
        out = []
        for bit in range(MAX_BITS - 1, -1, -1):
            if units >> bit & 1:
                out.append((self.m - bit, self._pos[bit][key]))
        return out

    def quantize(self, weight: float) -> int:
        """Unit count a weight maps to (nearest multiple, never zero)."""
        if not math.isfinite(weight) or weight < 0:
            raise ValueError(f"weight must be finite and non-negative, got {weight!r}")
        units = round(weight * self._scale)
        if units >= 1 << MAX_BITS:
            raise ValueError(f"weight {weight!r} exceeds the representable range for m={self.m}")
        return units if units > 0 else 1

    # -- updates ----------------------------------------------------------

    def insert(self, key: Hashable, weight: float) -> None:
        self.insert_units(key, self.quantize(weight))

    def insert_units(self, key: Hashable, units: int) -> None:
        """Insert an event whose quantized weight is given directly in units."""
        if key in self._units:
            raise KeyError(f"event {key!r} is already live")
        if units <= 0 or units >= 1 << MAX_BITS:
            raise ValueError(f"unit count out of range: {units!r}")
        self._units[key] = units
        self._total += units
        rest = units
        while rest:
            low = rest & -rest
            bit = low.bit_length() - 1
            rest ^= low
            arr = self._arrays[bit]
            self._pos[bit][key] = len(arr)
            arr.append(key)
        top = units.bit_length()
        if top > self._top:
            self._top = top
        self._prefix = None

    def remove(self, key: Hashable) -> None:
        try:
            units = self._units.pop(key)
        except KeyError:
            raise KeyError(f"event {key!r} is not live") from None
        self._total -= units
        rest = units
        while rest:
            low = rest & -rest
            bit = low.bit_length() - 1
            rest ^= low
            arr = self._arrays[bit]
            posmap = self._pos[bit]
            pos = posmap.pop(key)
            last = arr.pop()
            if pos < len(arr):
                arr[pos] = last
                posmap[last] = pos
        self._prefix = None

    def update(self, key: Hashable, weight: float) -> None:
        """Change the weight of a live event (remove + insert)."""
        units = self.quantize(weight)
        if self._units.get(key) == units:
            return
        self.remove(key)
        self.insert_units(key, units)

    def clear(self) -> None:
        for arr in self._arrays:
            arr.clear()
        for posmap in self._pos:
            posmap.clear()
        self._units.clear()
        self._total = 0
        self._prefix = None

    # -- sampling ---------------------------------------------------------

    def _boundaries(self) -> list[int]:
        # cumulative lengths in level order (largest shard first)
        prefix = self._prefix
        if prefix is None:
            arrays = self._arrays
            prefix = list(accumulate(len(arrays[b]) << b for b in range(self._top - 1, -1, -1)))
            self._prefix = prefix
        return prefix

    def sample_units(self, r: int) -> Hashable:
        """Event owning unit ``r`` of the line, ``1 <= r <= total_units``."""
        if self._total == 0:
            raise ValueError("cannot sample from an empty distribution")
        if not 1 <= r <= self._total:
            raise ValueError(f"position {r} outside (0, {self._total}]")
        prefix = self._boundaries()
        idx = bisect_left(prefix, r)
        bit = self._top - 1 - idx
        offset = r - prefix[idx - 1] if idx else r
        return self._arrays[bit][(offset - 1) >> bit]

    def sample(self, u: float) -> Hashable:
        """Event owning the point ``u`` of the line ``(0, total_mass]``."""
        if self._total == 0:
            raise ValueError("cannot sample from an empty distribution")
        if not 0 < u <= self.total_mass:
            raise ValueError(f"u={u!r} outside (0, {self.total_mass}]")
        # shard boundaries sit on integer units, so ceil keeps the same owner
        r = min(max(math.ceil(u * self._scale), 1), self._total)
        return self.sample_units(r)

    def draw(self, rng) -> Hashable:
        """Sample using a ``random.Random``-like generator (exact in units)."""
        if self._total == 0:
            raise ValueError("cannot sample from an empty distribution")
        return self.sample_units(rng.randrange(self._total) + 1)

    def sample_and_remove(self, u: float) -> Hashable:
        key = self.sample(u)
        self.remove(key)
        return key

    # -- invariants -------------------------------------------------------

    def check(self) -> None:
        """Assert mass conservation and bidirectional index consistency."""
        total = 0
        for key, units in self._units.items():
            assert units > 0, key
            total += units
            for bit in range(MAX_BITS):
                if units >> bit & 1:
                    pos = self._pos[bit][key]
                    assert self._arrays[bit][pos] == key, (key, bit, pos)
                else:
                    assert key not in self._pos[bit], (key, bit)
        assert total == self._total, (total, self._total)
        for bit in range(MAX_BITS):
            arr = self._arrays[bit]
            assert len(arr) == len(self._pos[bit]), bit
            for pos, key in enumerate(arr):
                assert self._pos[bit].get(key) == pos, (bit, pos, key)
        assert sum(len(a) << b for b, a in enumerate(self._arrays)) == self._total
