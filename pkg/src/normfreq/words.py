"""Base-g words, concatenated digit streams, and block-count normality.

A natural number n >= 1 is written as the word of its base-g digits,
either most-significant-first (the usual reading order) or
least-significant-first.  Streams concatenate the words of f(1), f(2),
... for a composition spec f; all counting is exact.
"""

from __future__ import annotations

import enum
import itertools
import struct
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Optional, Sequence

import numpy as np

from .arith import ArithEngine, CompositionSpec
from .errors import CacheFormatError, InvalidDigitError

DIGIT_DUMP_MAGIC = b"NFDG"


class DigitOrder(enum.Enum):
    MOST_SIGNIFICANT_FIRST = "msf"
    LEAST_SIGNIFICANT_FIRST = "lsf"


MSF = DigitOrder.MOST_SIGNIFICANT_FIRST
LSF = DigitOrder.LEAST_SIGNIFICANT_FIRST

_ORDER_FLAG = {MSF: 0, LSF: 1}
_FLAG_ORDER = {0: MSF, 1: LSF}


@dataclass(frozen=True)
class Alphabet:
    """Digit alphabet {0, ..., g-1}."""

    g: int

    def __post_init__(self):
        if self.g < 2:
            raise ValueError(f"alphabet size must be >= 2, got {self.g}")

    def words(self, k: int) -> Iterator[tuple[int, ...]]:
        """All g^k digit words of length k, lexicographic."""
        return itertools.product(range(self.g), repeat=k)

    def word_count(self, k: int) -> int:
        return self.g**k


@dataclass(frozen=True)
class Word:
    """A digit word over {0, ..., g-1}."""

    digits: tuple[int, ...]
    g: int

    def __post_init__(self):
        if self.g < 2:
            raise ValueError(f"alphabet size must be >= 2, got {self.g}")
        for d in self.digits:
            if not 0 <= d < self.g:
                raise InvalidDigitError(f"digit {d} outside 0..{self.g - 1}")

    def __len__(self) -> int:
        return len(self.digits)

    def text(self) -> str:
        if self.g <= 10:
            return "".join(str(d) for d in self.digits)
        return ".".join(str(d) for d in self.digits)


def digit_length(n: int, g: int = 10) -> int:
    """Number of base-g digits of n >= 1 (satisfies g^(L-1) <= n < g^L)."""
    if n < 1:
        raise ValueError(f"digit length needs n >= 1, got {n}")
    if g == 10:
        return len(str(n))
    if g == 2:
        return n.bit_length()
    length = 0
    while n:
        n //= g
        length += 1
    return length


def digits_of(n: int, g: int = 10, order: DigitOrder = MSF) -> tuple[int, ...]:
    """Base-g digits of n >= 1 in the requested order (no leading zeros)."""
    if n < 1:
        raise ValueError(f"digit expansion needs n >= 1, got {n}")
    if g == 10:
        msf = tuple(ord(c) - 48 for c in str(n))
    elif g == 2:
        msf = tuple(ord(c) - 48 for c in bin(n)[2:])
    else:
        rev = []
        while n:
            n, d = divmod(n, g)
            rev.append(d)
        msf = tuple(reversed(rev))
    return msf if order is MSF else msf[::-1]


def to_word(n: int, g: int = 10, order: DigitOrder = MSF) -> Word:
    return Word(digits_of(n, g, order), g)


def word_value(digits: Sequence[int], g: int = 10, order: DigitOrder = MSF) -> int:
    """Integer encoded by a digit word (inverse of digits_of on valid words)."""
    seq = digits if order is MSF else tuple(reversed(digits))
    out = 0
    for d in seq:
        if not 0 <= d < g:
            raise InvalidDigitError(f"digit {d} outside 0..{g - 1}")
        out = out * g + d
    return out


def occurrences(digits: Sequence[int], w: Sequence[int]) -> int:
    """Overlapping count of the word w inside the digit sequence."""
    k = len(w)
    m = len(digits)
    if k == 0 or k > m:
        return 0
    w = tuple(w)
    return sum(1 for i in range(m - k + 1) if tuple(digits[i : i + k]) == w)


@lru_cache(maxsize=65536)
def normality_bounds(length: int, eps: float, k: int, g: int) -> tuple[Fraction, Fraction]:
    """Exact open-interval bounds (g^-k - eps) * L and (g^-k + eps) * L."""
    center = Fraction(1, g**k)
    e = Fraction(eps)
    return ((center - e) * length, (center + e) * length)


def is_eps_k_normal(
    n: int, eps: float, k: int, g: int = 10, order: DigitOrder = MSF
) -> bool:
    """Whether every length-k word count in the base-g word of n lies
    strictly between (g^-k - eps) * L(n) and (g^-k + eps) * L(n).

    Words that never occur count as 0, so when L(n) >= k the verdict can
    only be positive if eps > g^-k.  The verdict does not depend on the
    digit order (reversal permutes the words, not the count multiset).
    """
    if k < 1:
        raise ValueError("word length k must be >= 1")
    if not 0 < eps:
        raise ValueError("eps must be positive")
    digs = digits_of(n, g, order)
    length = len(digs)
    lo, hi = normality_bounds(length, eps, k, g)
    tally: dict[int, int] = {}
    if length >= k:
        mod = g**k
        code = 0
        for d in digs[: k - 1]:
            code = code * g + d
        for i in range(k - 1, length):
            code = (code * g + digs[i]) % mod
            tally[code] = tally.get(code, 0) + 1
    for count in tally.values():
        if not (lo < count < hi):
            return False
    if len(tally) < g**k and not lo < 0:
        return False
    return True


# ---------------------------------------------------------------------------
# Streams
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StreamCursor:
    """Resumable position: the next digit comes from word `next_index`,
    after `offset` digits of it; `emitted` digits precede it overall."""

    next_index: int = 1
    offset: int = 0
    emitted: int = 0


class DigitStream:
    """Lazy digit iterator over the concatenation of f(1), f(2), ...

    `cursor` snapshots the position; constructing a stream from a cursor
    resumes exactly where the snapshot was taken.
    """

    def __init__(
        self,
        engine: ArithEngine,
        spec: CompositionSpec,
        g: int = 10,
        order: DigitOrder = MSF,
        cursor: Optional[StreamCursor] = None,
    ):
        if g < 2:
            raise ValueError("base must be >= 2")
        self.engine = engine
        self.spec = spec
        self.g = g
        self.order = order
        cursor = cursor or StreamCursor()
        self._index = cursor.next_index - 1  # index of the buffered word
        self._values = engine.value_stream(spec, start_index=cursor.next_index)
        self._buf: tuple[int, ...] = ()
        self._pos = 0
        self._emitted = cursor.emitted
        if cursor.offset:
            self._advance_word()
            if cursor.offset > len(self._buf):
                raise ValueError(
                    f"cursor offset {cursor.offset} exceeds word length {len(self._buf)}"
                )
            self._pos = cursor.offset

    def _advance_word(self) -> None:
        self._buf = digits_of(next(self._values), self.g, self.order)
        self._pos = 0
        self._index += 1

    def __iter__(self) -> Iterator[int]:
        return self

    def __next__(self) -> int:
        if self._pos >= len(self._buf):
            self._advance_word()
        d = self._buf[self._pos]
        self._pos += 1
        self._emitted += 1
        return d

    def take(self, count: int) -> list[int]:
        """Next `count` digits as a list."""
        return [next(self) for _ in range(count)]

    @property
    def cursor(self) -> StreamCursor:
        if self._pos >= len(self._buf):
            return StreamCursor(self._index + 1, 0, self._emitted)
        return StreamCursor(self._index, self._pos, self._emitted)


@dataclass(frozen=True)
class TruncationResult:
    """First N digits of a stream plus where the cut fell.

    `final_index` is the least n whose word completes the N digits;
    `consumed_of_final` says how many of that word's digits are inside.
    """

    digits: np.ndarray
    final_index: int
    consumed_of_final: int
    final_length: int

    @property
    def flush(self) -> bool:
        """True when the cut lands exactly on a word boundary."""
        return self.consumed_of_final == self.final_length


def truncate(
    engine: ArithEngine,
    spec: CompositionSpec,
    num_digits: int,
    g: int = 10,
    order: DigitOrder = MSF,
) -> TruncationResult:
    """Materialize the first `num_digits` digits of the stream."""
    if num_digits < 1:
        raise ValueError("need at least one digit")
    out = np.empty(num_digits, dtype=np.uint8 if g <= 256 else np.int64)
    filled = 0
    index = 0
    for value in engine.value_stream(spec):
        index += 1
        digs = digits_of(value, g, order)
        room = num_digits - filled
        if len(digs) >= room:
            out[filled:] = digs[:room]
            return TruncationResult(out, index, room, len(digs))
        out[filled : filled + len(digs)] = digs
        filled += len(digs)
    raise RuntimeError("value stream ended early")  # pragma: no cover


# ---------------------------------------------------------------------------
# Digit dump file
# ---------------------------------------------------------------------------


def save_digits(path, digits, g: int, order: DigitOrder) -> None:
    """Write digits one byte each: magic, u32 base, u8 order flag, u64 count."""
    if g < 2 or g > 256:
        raise ValueError("digit dumps support 2 <= g <= 256")
    arr = np.asarray(digits, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(DIGIT_DUMP_MAGIC)
        fh.write(struct.pack("<IBQ", g, _ORDER_FLAG[order], len(arr)))
        fh.write(arr.tobytes())


def load_digits(path) -> tuple[np.ndarray, int, DigitOrder]:
    """Read a digit dump, validating header and digit range."""
    with open(path, "rb") as fh:
        magic = fh.read(len(DIGIT_DUMP_MAGIC))
        if magic != DIGIT_DUMP_MAGIC:
            raise CacheFormatError(f"bad magic {magic!r} in {path}")
        header = fh.read(13)
        if len(header) != 13:
            raise CacheFormatError(f"truncated header in {path}")
        g, flag, count = struct.unpack("<IBQ", header)
        if g < 2 or g > 256:
            raise CacheFormatError(f"invalid base {g} in {path}")
        if flag not in _FLAG_ORDER:
            raise CacheFormatError(f"invalid order flag {flag} in {path}")
        payload = fh.read()
    if len(payload) != count:
        raise CacheFormatError(f"expected {count} digit bytes, got {len(payload)}")
    digits = np.frombuffer(payload, dtype=np.uint8)
    if len(digits) and int(digits.max()) >= g:
        raise CacheFormatError(f"digit out of range for base {g} in {path}")
    return digits, g, _FLAG_ORDER[flag]
