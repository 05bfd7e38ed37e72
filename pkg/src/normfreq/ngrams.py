"""Overlapping k-gram statistics over concatenation digit streams.

The window count over an N-digit prefix decomposes exactly, per word,
into windows inside complete value-words, windows spanning a word
boundary, and windows inside the final partial word.  All tallies are
integers; chunked and threaded runs reproduce the single-pass result
bit for bit.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from . import words as words_mod
from .arith import ArithEngine, CompositionSpec
from .errors import DegenerateInputError, InvalidDigitError, ShapeMismatchError
from .words import MSF, DigitOrder, digits_of

# dense count tables are used while g^k stays at or below this
DENSE_LIMIT = 1 << 24

_CHUNK = 1 << 20


def _decode_code(code: int, g: int, length: int) -> tuple[int, ...]:
    out = []
    for _ in range(length):
        code, d = divmod(code, g)
        out.append(d)
    return tuple(reversed(out))


def _word_text(digits: Sequence[int], g: int) -> str:
    if g <= 10:
        return "".join(str(d) for d in digits)
    return ".".join(str(d) for d in digits)


class KGramCounter:
    """Streaming overlapping k-gram tally over base-g digits.

    Dense numpy table while g^k <= dense_limit, sparse dict beyond.
    `carry` exposes the trailing k-1 digits so a continuation chunk can
    be counted independently and merged.
    """

    def __init__(self, g: int, k: int, dense_limit: int = DENSE_LIMIT):
        if g < 2:
            raise ValueError("base must be >= 2")
        if k < 1:
            raise ValueError("word length k must be >= 1")
        self.g = g
        self.k = k
        self.size = g**k
        self.dense = self.size <= dense_limit
        self._table = np.zeros(self.size, dtype=np.int64) if self.dense else {}
        self._hist_mod = g ** (k - 1)
        self._code = 0
        self._hist = 0  # digits currently buffered, capped at k-1
        self._fed = 0

    @property
    def fed(self) -> int:
        return self._fed

    def total(self) -> int:
        """Number of windows counted so far."""
        return max(0, self._fed - self.k + 1)

    def feed(self, d: int) -> None:
        if not 0 <= d < self.g:
            raise InvalidDigitError(f"digit {d} outside 0..{self.g - 1}")
        if self._hist < self.k - 1:
            self._code = self._code * self.g + d
            self._hist += 1
        else:
            full = self._code * self.g + d
            self._bump(full)
            self._code = full % self._hist_mod
        self._fed += 1

    def _bump(self, code: int) -> None:
        if self.dense:
            self._table[code] += 1
        else:
            self._table[code] = self._table.get(code, 0) + 1

    def feed_many(self, digits) -> None:
        """Feed a digit sequence; vectorized when the table is dense."""
        arr = np.asarray(digits, dtype=np.int64)
        if arr.ndim != 1:
            raise ValueError("expected a flat digit sequence")
        if len(arr) == 0:
            return
        if len(arr) and (int(arr.min()) < 0 or int(arr.max()) >= self.g):
            raise InvalidDigitError(f"digit outside 0..{self.g - 1}")
        if not self.dense or len(arr) < 4 * self.k:
            for d in arr.tolist():
                self.feed(int(d))
            return
        prior = _decode_code(self._code, self.g, self._hist)
        ext = np.concatenate([np.asarray(prior, dtype=np.int64), arr])
        if len(ext) >= self.k:
            powers = self.g ** np.arange(self.k - 1, -1, -1, dtype=np.int64)
            for start in range(0, len(ext) - self.k + 1, _CHUNK):
                stop = min(start + _CHUNK, len(ext) - self.k + 1)
                win = np.lib.stride_tricks.sliding_window_view(ext, self.k)[start:stop]
                codes = win @ powers
                self._table += np.bincount(codes, minlength=self.size)
            kept = ext[len(ext) - min(len(ext), self.k - 1) :]
        else:
            kept = ext
        self._hist = len(kept)
        self._code = 0
        for d in kept.tolist():
            self._code = self._code * self.g + int(d)
        self._fed += len(arr)

    def carry(self) -> tuple[int, ...]:
        """Trailing digits (up to k-1) to prepend to a continuation chunk."""
        return _decode_code(self._code, self.g, self._hist)

    def count(self, w) -> int:
        digits = w.digits if isinstance(w, words_mod.Word) else tuple(w)
        if len(digits) != self.k:
            raise ShapeMismatchError(f"word length {len(digits)} != k={self.k}")
        code = 0
        for d in digits:
            if not 0 <= d < self.g:
                raise InvalidDigitError(f"digit {d} outside 0..{self.g - 1}")
            code = code * self.g + d
        if self.dense:
            return int(self._table[code])
        return self._table.get(code, 0)

    def items(self) -> Iterator[tuple[tuple[int, ...], int]]:
        """(word, count) pairs with nonzero count, lexicographic."""
        if self.dense:
            for code in np.flatnonzero(self._table):
                yield _decode_code(int(code), self.g, self.k), int(self._table[code])
        else:
            for code in sorted(self._table):
                yield _decode_code(code, self.g, self.k), self._table[code]

    def as_array(self) -> np.ndarray:
        """Full count table indexed by word code (dense layout)."""
        if self.dense:
            return self._table.copy()
        out = np.zeros(self.size, dtype=np.int64)
        for code, c in self._table.items():
            out[code] = c
        return out

    def copy(self) -> "KGramCounter":
        out = KGramCounter(self.g, self.k, dense_limit=self.size if self.dense else 0)
        out._table = self._table.copy()
        out._code, out._hist, out._fed = self._code, self._hist, self._fed
        return out


def merge(left: KGramCounter, right: KGramCounter) -> KGramCounter:
    """Combine chunk tallies.

    Precondition: `right` was fed the continuation digits with
    left.carry() prepended, so window counts add without loss.
    """
    if left.g != right.g or left.k != right.k:
        raise ShapeMismatchError(
            f"cannot merge ({left.g}, {left.k}) with ({right.g}, {right.k})"
        )
    out = left.copy()
    if out.dense and right.dense:
        out._table += right._table
    else:
        for w, c in right.items():
            code = 0
            for d in w:
                code = code * out.g + d
            if out.dense:
                out._table[code] += c
            else:
                out._table[code] = out._table.get(code, 0) + c
    overlap = min(left.k - 1, left._fed)
    out._fed = left._fed + right._fed - overlap
    out._code, out._hist = right._code, right._hist
    return out


# ---------------------------------------------------------------------------
# stream counting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FrequencyReport:
    """Exact k-gram census of an N-digit stream prefix."""

    spec: str
    g: int
    k: int
    order: str
    num_digits: int
    final_index: int
    consumed_of_final: int
    flush: bool
    window_count: int
    counts: dict[str, int]
    complete_counts: dict[str, int]
    boundary_counts: dict[str, int]
    tail_counts: dict[str, int]
    boundary_total: int
    tail_total: int
    max_dev: float
    eps: Optional[float] = None
    bad_count: Optional[int] = None

    def freqs(self) -> dict[str, float]:
        if self.window_count <= 0:
            return {}
        return {w: c / self.window_count for w, c in self.counts.items()}

    def to_dict(self) -> dict:
        return {
            "kind": "kgram-frequency-report",
            "schema": 1,
            "spec": self.spec,
            "g": self.g,
            "k": self.k,
            "order": self.order,
            "N": self.num_digits,
            "n": self.final_index,
            "consumed_of_final": self.consumed_of_final,
            "flush": self.flush,
            "windows": self.window_count,
            "max_dev": self.max_dev,
            "boundary": self.boundary_total,
            "tail": self.tail_total,
            "eps": self.eps,
            "bad_count": self.bad_count,
            "freqs": self.freqs(),
            "counts": self.counts,
            "complete_counts": self.complete_counts,
            "boundary_counts": self.boundary_counts,
            "tail_counts": self.tail_counts,
        }


def _materialize(engine, spec, num_digits, g, order):
    out = np.empty(num_digits, dtype=np.uint8 if g <= 256 else np.int64)
    lengths = []
    values = []
    filled = 0
    index = 0
    for value in engine.value_stream(spec):
        index += 1
        digs = digits_of(value, g, order)
        values.append(value)
        room = num_digits - filled
        if len(digs) >= room:
            out[filled:] = digs[:room]
            lengths.append(room)
            return out, np.asarray(lengths, dtype=np.int64), values, index, room, len(digs)
        out[filled : filled + len(digs)] = digs
        lengths.append(len(digs))
        filled += len(digs)
    raise RuntimeError("value stream ended early")  # pragma: no cover


def _count_ranges(total: int):
    return [(s, min(s + _CHUNK, total)) for s in range(0, total, _CHUNK)]


def count_stream(
    engine: ArithEngine,
    spec: CompositionSpec,
    num_digits: int,
    g: int = 10,
    k: int = 1,
    order: DigitOrder = MSF,
    eps: Optional[float] = None,
    threads: int = 1,
    dense_limit: int = DENSE_LIMIT,
) -> FrequencyReport:
    """Census every k-gram window of the first `num_digits` digits.

    The result is independent of `threads`: the window range is chunked
    deterministically and integer tallies are summed in chunk order.
    """
    if num_digits < 1:
        raise ValueError("need at least one digit")
    if k < 1:
        raise ValueError("word length k must be >= 1")
    if threads < 1:
        raise ValueError("threads must be >= 1")
    digits, lengths, values, final_index, consumed, final_len = _materialize(
        engine, spec, num_digits, g, order
    )
    flush = consumed == final_len
    windows = max(0, num_digits - k + 1)
    size = g**k
    dense = size <= dense_limit
    word_id = np.repeat(np.arange(1, final_index + 1, dtype=np.int32), lengths)
    powers = g ** np.arange(k - 1, -1, -1, dtype=np.int64)

    def tally_chunk(bounds):
        start, stop = bounds
        win = np.lib.stride_tricks.sliding_window_view(digits, k)[start:stop]
        codes = win @ powers
        sid = word_id[start:stop]
        eid = word_id[start + k - 1 : stop + k - 1]
        same = sid == eid
        if flush:
            complete_mask = same
            tail_mask = np.zeros_like(same)
        else:
            in_final = sid == final_index
            complete_mask = same & ~in_final
            tail_mask = same & in_final
        out = []
        for mask in (complete_mask, ~same, tail_mask):
            sel = codes[mask]
            if dense:
                out.append(np.bincount(sel, minlength=size))
            else:
                uniq, cnt = np.unique(sel, return_counts=True)
                out.append((uniq, cnt))
        return out

    ranges = _count_ranges(windows)
    if threads == 1 or len(ranges) <= 1:
        results = [tally_chunk(r) for r in ranges]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(tally_chunk, ranges))

    if dense:
        complete = np.zeros(size, dtype=np.int64)
        boundary = np.zeros(size, dtype=np.int64)
        tail = np.zeros(size, dtype=np.int64)
        for ch_complete, ch_boundary, ch_tail in results:
            complete += ch_complete
            boundary += ch_boundary
            tail += ch_tail
        total = complete + boundary + tail

        def to_counts(table):
            return {
                _word_text(_decode_code(int(code), g, k), g): int(table[code])
                for code in np.flatnonzero(table)
            }

        center = 1.0 / size
        if windows > 0:
            max_dev = float(np.abs(total / windows - center).max())
        else:
            max_dev = 0.0
        counts_d = to_counts(total)
        complete_d = to_counts(complete)
        boundary_d = to_counts(boundary)
        tail_d = to_counts(tail)
        boundary_total = int(boundary.sum())
        tail_total = int(tail.sum())
    else:
        def fold(idx):
            acc: dict[int, int] = {}
            for res in results:
                uniq, cnt = res[idx]
                for code, c in zip(uniq.tolist(), cnt.tolist()):
                    acc[code] = acc.get(code, 0) + c
            return acc

        complete_m, boundary_m, tail_m = fold(0), fold(1), fold(2)
        total_m: dict[int, int] = dict(complete_m)
        for src in (boundary_m, tail_m):
            for code, c in src.items():
                total_m[code] = total_m.get(code, 0) + c

        def to_counts_sparse(m):
            return {
                _word_text(_decode_code(code, g, k), g): c
                for code, c in sorted(m.items())
                if c
            }

        center = 1.0 / size
        if windows > 0:
            max_dev = max(
                (abs(c / windows - center) for c in total_m.values()), default=0.0
            )
            if len(total_m) < size:
                max_dev = max(max_dev, center)
        else:
            max_dev = 0.0
        counts_d = to_counts_sparse(total_m)
        complete_d = to_counts_sparse(complete_m)
        boundary_d = to_counts_sparse(boundary_m)
        tail_d = to_counts_sparse(tail_m)
        boundary_total = sum(boundary_m.values())
        tail_total = sum(tail_m.values())

    bad_count = None
    if eps is not None:
        complete_words = final_index if flush else final_index - 1
        verdicts: dict[int, bool] = {}
        bad_count = 0
        for v in values[:complete_words]:
            ok = verdicts.get(v)
            if ok is None:
                ok = words_mod.is_eps_k_normal(v, eps, k, g, order)
                verdicts[v] = ok
            if not ok:
                bad_count += 1

    return FrequencyReport(
        spec=spec.describe(),
        g=g,
        k=k,
        order=order.value,
        num_digits=num_digits,
        final_index=final_index,
        consumed_of_final=consumed,
        flush=flush,
        window_count=windows,
        counts=counts_d,
        complete_counts=complete_d,
        boundary_counts=boundary_d,
        tail_counts=tail_d,
        boundary_total=boundary_total,
        tail_total=tail_total,
        max_dev=max_dev,
        eps=eps,
        bad_count=bad_count,
    )


# ---------------------------------------------------------------------------
# range classification and meager-growth fits
# ---------------------------------------------------------------------------


def classify_range(
    eps: float,
    k: int,
    g: int,
    limit: int,
    order: DigitOrder = MSF,
    threads: int = 1,
) -> int:
    """How many m <= limit fail the strict (eps, k) block-count test."""
    return classify_checkpoints(eps, k, g, [limit], order=order, threads=threads)[0]


def classify_checkpoints(
    eps: float,
    k: int,
    g: int,
    checkpoints: Sequence[int],
    order: DigitOrder = MSF,
    threads: int = 1,
) -> list[int]:
    """Cumulative bad counts at each checkpoint (one pass to max)."""
    cps = list(checkpoints)
    if not cps or cps[0] < 1 or any(b <= a for a, b in zip(cps, cps[1:])):
        raise ValueError("checkpoints must be strictly increasing and >= 1")
    if threads < 1:
        raise ValueError("threads must be >= 1")
    limit = cps[-1]

    def count_block(bounds):
        lo, hi = bounds
        bad = 0
        out = []
        edges = [c for c in cps if lo <= c <= hi]
        nxt = 0
        for m in range(lo, hi + 1):
            if not words_mod.is_eps_k_normal(m, eps, k, g, order):
                bad += 1
            if nxt < len(edges) and m == edges[nxt]:
                out.append(bad)
                nxt += 1
        return bad, edges, out

    if threads == 1:
        blocks = [count_block((1, limit))]
    else:
        step = max(1, (limit + threads - 1) // threads)
        bounds = [(lo, min(lo + step - 1, limit)) for lo in range(1, limit + 1, step)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(count_block, bounds))

    results = {}
    running = 0
    for bad, edges, partials in blocks:
        for c, p in zip(edges, partials):
            results[c] = running + p
        running += bad
    return [results[c] for c in cps]


@dataclass(frozen=True)
class MeagerFit:
    """Least-squares slope of log(count) against log(x)."""

    delta: float
    intercept: float
    residuals: tuple[float, ...]


def fit_meager_exponent(xs: Sequence[int], counts: Sequence[int]) -> MeagerFit:
    """Fit counts ~ C * x^delta through the positive checkpoints."""
    pts = [(x, c) for x, c in zip(xs, counts) if c > 0]
    if len(xs) != len(counts):
        raise ValueError("xs and counts must align")
    if len(pts) < 2:
        raise DegenerateInputError("need at least two positive counts to fit")
    lx = np.log([p[0] for p in pts])
    lc = np.log([p[1] for p in pts])
    slope, intercept = np.polyfit(lx, lc, 1)
    resid = lc - (slope * lx + intercept)
    return MeagerFit(float(slope), float(intercept), tuple(float(r) for r in resid))
