"""Insertion-only linear-probing value array addressed by (key hash + offset).

Slot occupancy is a bitmap with 1 = free.  The bitmap is cut into blocks of
``C`` bits and every block carries a b-ary summary tree (each internal bit
says "this child still has a free slot"), so the first free slot at or
after a position is found by climbing and descending a constant number of
levels, then scanning block roots.
"""

from __future__ import annotations

import math

from .errors import RangeError, StoreFull
from .hashing import PolyHash


def slot_count(m: int, n: int) -> int:
    """``ceil(m * (1 + 1 / log2(n)^2))``."""
    lg2 = math.log2(n) ** 2
    return m + math.ceil(m / lg2)


def branching_factor(n: int) -> int:
    return max(2, math.ceil(math.sqrt(math.log2(n))))


def block_size(n: int, slots: int) -> int:
    return max(1, min(math.ceil(math.log2(n) ** 10), max(64, slots // 64)))


def _lowbit(x: int) -> int:
    return (x & -x).bit_length() - 1


class OccupancyIndex:
    """Free-slot bitmap with per-block summary trees."""

    def __init__(self, size: int, block: int, branching: int):
        self.size = size
        self.block = block
        self.branching = branching
        self.num_blocks = -(-size // block)
        self.trees = [self._build_full(min(block, size - i * block))
                      for i in range(self.num_blocks)]

    def _build_full(self, length: int):
        b = self.branching
        level = [(1 << min(b, length - i)) - 1 for i in range(0, length, b)]
        levels = [level]
        while len(level) > 1:
            level = [(1 << min(b, len(level) - i)) - 1 for i in range(0, len(level), b)]
            levels.append(level)
        return levels

    def is_free(self, slot: int) -> bool:
        blk, o = divmod(slot, self.block)
        w, bit = divmod(o, self.branching)
        return bool(self.trees[blk][0][w] >> bit & 1)

    def occupy(self, slot: int) -> None:
        blk, o = divmod(slot, self.block)
        b = self.branching
        levels = self.trees[blk]
        idx, bit = divmod(o, b)
        lv = levels[0]
        lv[idx] &= ~(1 << bit)
        L = 1
        while lv[idx] == 0 and L < len(levels):
            lv = levels[L]
            idx, bit = divmod(idx, b)
            lv[idx] &= ~(1 << bit)
            L += 1

    def _find_in_block(self, blk: int, o: int) -> int:
        b = self.branching
        levels = self.trees[blk]
        idx, r = divmod(o, b)
        w = levels[0][idx] >> r
        if w:
            return o + _lowbit(w)
        for L in range(1, len(levels)):
            idx, r = divmod(idx, b)
            r += 1
            w = levels[L][idx] >> r
            if w:
                idx = idx * b + r + _lowbit(w)
                for D in range(L - 1, -1, -1):
                    idx = idx * b + _lowbit(levels[D][idx])
                return idx
        return -1

    def first_free(self, s: int) -> int:
        """Smallest free slot at or after ``s``, wrapping cyclically; -1 if none."""
        blk, o = divmod(s, self.block)
        r = self._find_in_block(blk, o)
        if r >= 0:
            return blk * self.block + r
        nb = self.num_blocks
        for i in range(1, nb + 1):
            bb = (blk + i) % nb
            if self.trees[bb][-1][0]:
                return bb * self.block + self._find_in_block(bb, 0)
        return -1

    def block_length(self, blk: int) -> int:
        return min(self.block, self.size - blk * self.block)

    def level_widths(self, blk: int):
        """Bit width of every word, level by level, for block ``blk``."""
        b = self.branching
        length = self.block_length(blk)
        out = []
        for level in self.trees[blk]:
            out.append([min(b, length - i * b) for i in range(len(level))])
            length = len(level)
        return out

    def bits(self) -> int:
        total = 0
        for blk, levels in enumerate(self.trees):
            total += self.block_length(blk) + sum(len(level) for level in levels[:-1])
        return total

    def free_count(self) -> int:
        return sum(bin(w).count("1") for levels in self.trees for w in levels[0])

    def rebuilt(self):
        """Summary trees recomputed from the bottom level alone."""
        b = self.branching
        out = []
        for levels in self.trees:
            level = list(levels[0])
            fresh = [level]
            while len(level) > 1:
                nxt = []
                for i in range(0, len(level), b):
                    word = 0
                    for j, child in enumerate(level[i:i + b]):
                        if child:
                            word |= 1 << j
                    nxt.append(word)
                level = nxt
                fresh.append(level)
            out.append(fresh)
        return out

    def consistent(self) -> bool:
        return self.rebuilt() == self.trees


class ValueStore:
    """Up to ``capacity`` values of ``value_bits`` bits in ``slot_count`` slots.

    ``n`` is the structure-wide key bound that sets the slack, the block size
    and the branching factor.  ``hash_fn`` maps a key to a slot in
    ``[slots]``; by default a 5-wise independent polynomial hash.
    """

    def __init__(self, capacity: int, value_bits: int, n: int, *, hash_fn=None, seed: int = 0,
                 universe_bits: int = 64):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.value_bits = value_bits
        self.n = n
        self.slots = slot_count(capacity, n)
        self.hash = hash_fn if hash_fn is not None else PolyHash(seed, self.slots, 5, universe_bits)
        self.values = [0] * self.slots
        self.index = OccupancyIndex(self.slots, block_size(n, self.slots), branching_factor(n))
        self.count = 0

    def __len__(self):
        return self.count

    def _check_value(self, y: int) -> None:
        if y < 0 or y >> self.value_bits:
            raise RangeError(f"value {y} does not fit in {self.value_bits} bits")

    def first_empty_at_or_after(self, s: int) -> int:
        return self.index.first_free(s % self.slots)

    def insert(self, key: int, y: int) -> int:
        """Store ``y`` for ``key`` and return its offset."""
        if self.count >= self.capacity:
            raise StoreFull(f"store holds {self.count} of {self.capacity} values")
        self._check_value(y)
        h = self.hash(key)
        slot = self.index.first_free(h)
        self.index.occupy(slot)
        self.values[slot] = y
        self.count += 1
        return (slot - h) % self.slots

    def query(self, key: int, offset: int) -> int:
        return self.values[(self.hash(key) + offset) % self.slots]

    def update(self, key: int, offset: int, y: int) -> None:
        self._check_value(y)
        self.values[(self.hash(key) + offset) % self.slots] = y

    @property
    def value_bits_total(self) -> int:
        return self.slots * self.value_bits

    @property
    def index_bits(self) -> int:
        return self.index.bits()
