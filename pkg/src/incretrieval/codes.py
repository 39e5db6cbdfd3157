"""Bit-level streams and the variable-length integer codes used for storage.

Streams are little-endian at the bit level: bit ``i`` of a stream is bit
``i % 8`` of byte ``i // 8``.  Multi-bit fields are written least
significant bit first.

Elias-gamma for ``x >= 1`` with ``L = x.bit_length()`` is laid out as
``L - 1`` zero bits, a one bit, then the low ``L - 1`` bits of ``x``.
"""

from __future__ import annotations

import numpy as np


def gamma_length(x: int) -> int:
    """Length in bits of the Elias-gamma code of ``x`` (``x >= 1``)."""
    if x < 1:
        raise ValueError(f"Elias-gamma is defined for x >= 1, got {x}")
    return 2 * x.bit_length() - 1


def tag_width(rounds: int) -> int:
    """Width of the binary escape used for round tags greater than 1."""
    return max(1, max(rounds - 2, 0).bit_length())


def tag_length(tag: int, rounds: int) -> int:
    """Length of a round tag: one bit for tag 1, else a flag plus a fixed field."""
    if tag == 1:
        return 1
    return 1 + tag_width(rounds)


class BitWriter:
    """Append-only bit stream."""

    def __init__(self):
        self._buf = bytearray()
        self._acc = 0
        self._n = 0
        self.bits = 0

    def write(self, value: int, width: int) -> None:
        if width == 0:
            return
        if value >> width:
            raise ValueError(f"value {value} does not fit in {width} bits")
        self._acc |= value << self._n
        self._n += width
        self.bits += width
        if self._n >= 64:
            k = self._n >> 3
            self._buf += (self._acc & ((1 << (k << 3)) - 1)).to_bytes(k, "little")
            self._acc >>= k << 3
            self._n -= k << 3

    def write_gamma(self, x: int) -> None:
        z = x.bit_length() - 1
        self.write(1 << z, z + 1)
        self.write(x & ((1 << z) - 1), z)

    def write_tag(self, tag: int, rounds: int) -> None:
        if tag == 1:
            self.write(0, 1)
        else:
            self.write(1, 1)
            self.write(tag - 2, tag_width(rounds))

    def write_array(self, values, width: int) -> None:
        """Write each element of ``values`` as a ``width``-bit field."""
        arr = np.asarray(values, dtype=np.uint64)
        if width == 0 or arr.size == 0:
            return
        shifts = np.arange(width, dtype=np.uint64)
        bits = ((arr[:, None] >> shifts) & np.uint64(1)).astype(np.uint8).ravel()
        packed = np.packbits(bits, bitorder="little").tobytes()
        self.write(int.from_bytes(packed, "little"), bits.size)

    def getvalue(self) -> bytes:
        """Return the stream zero-padded to a whole number of bytes."""
        out = bytes(self._buf)
        if self._n:
            out += self._acc.to_bytes((self._n + 7) >> 3, "little")
        return out


class BitReader:
    def __init__(self, data: bytes, nbits: int | None = None):
        self._data = bytes(data)
        self.nbits = len(self._data) * 8 if nbits is None else nbits
        self.pos = 0

    def read(self, width: int) -> int:
        if width == 0:
            return 0
        end = self.pos + width
        if end > self.nbits:
            raise EOFError("read past end of bit stream")
        chunk = int.from_bytes(self._data[self.pos >> 3:(end + 7) >> 3], "little")
        value = (chunk >> (self.pos & 7)) & ((1 << width) - 1)
        self.pos = end
        return value

    def _peek(self, width: int) -> int:
        end = min(self.pos + width, self.nbits)
        chunk = int.from_bytes(self._data[self.pos >> 3:(end + 7) >> 3], "little")
        return (chunk >> (self.pos & 7)) & ((1 << (end - self.pos)) - 1)

    def read_gamma(self) -> int:
        zeros = 0
        while True:
            window = self._peek(64)
            if window:
                z = (window & -window).bit_length() - 1
                zeros += z
                self.pos += z + 1
                break
            if self.pos + 64 >= self.nbits:
                raise EOFError("unterminated Elias-gamma code")
            zeros += 64
            self.pos += 64
        return (1 << zeros) | self.read(zeros)

    def read_tag(self, rounds: int) -> int:
        if self.read(1) == 0:
            return 1
        return self.read(tag_width(rounds)) + 2

    def read_array(self, count: int, width: int) -> np.ndarray:
        if count == 0 or width == 0:
            return np.zeros(count, dtype=np.uint64)
        total = count * width
        if self.pos + total > self.nbits:
            raise EOFError("read past end of bit stream")
        start = self.pos >> 3
        stop = (self.pos + total + 7) >> 3
        raw = np.frombuffer(self._data[start:stop], dtype=np.uint8)
        bits = np.unpackbits(raw, bitorder="little")[self.pos & 7:(self.pos & 7) + total]
        self.pos += total
        weights = np.left_shift(np.uint64(1), np.arange(width, dtype=np.uint64))
        return (bits.reshape(count, width).astype(np.uint64) * weights).sum(axis=1, dtype=np.uint64)
