"""Word model and digit stream tests.

The normality oracle here re-derives every verdict from the definition:
exhaustive word enumeration, overlapping occurrence scans, and exact
Fraction bounds.
"""

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from normfreq import arith, words
from normfreq.errors import CacheFormatError, InvalidDigitError
from normfreq.words import LSF, MSF


def oracle_digits(n, g):
    """Schoolbook repeated division, most significant first."""
    out = []
    while n:
        out.append(n % g)
        n //= g
    return tuple(reversed(out))


def oracle_occurrences(digits, w):
    """Count overlapping matches by explicit window comparison."""
    k = len(w)
    return sum(1 for i in range(len(digits) - k + 1) if tuple(digits[i : i + k]) == tuple(w))


def oracle_is_normal(n, eps, k, g):
    """Definition check: every length-k word strictly inside the band."""
    digs = oracle_digits(n, g)
    length = len(digs)
    lo = (Fraction(1, g**k) - Fraction(eps)) * length
    hi = (Fraction(1, g**k) + Fraction(eps)) * length
    for w in itertools.product(range(g), repeat=k):
        c = oracle_occurrences(digs, w)
        if not (lo < c < hi):
            return False
    return True


@pytest.fixture(scope="module")
def engine():
    return arith.ArithEngine(spf_limit=10_000)


# ---------------------------------------------------------------------------
# digits and words
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("g", [2, 3, 10, 16, 36])
def test_digits_of_matches_schoolbook(g):
    for n in range(1, 2000):
        assert words.digits_of(n, g) == oracle_digits(n, g)
        assert words.digits_of(n, g, LSF) == oracle_digits(n, g)[::-1]


@given(st.integers(min_value=1, max_value=10**15), st.integers(min_value=2, max_value=36))
@settings(max_examples=300, deadline=None)
def test_digit_length_bound(n, g):
    length = words.digit_length(n, g)
    assert g ** (length - 1) <= n < g**length
    assert length == len(words.digits_of(n, g))


@pytest.mark.parametrize(
    "n,g,expected",
    [(1, 10, 1), (9, 10, 1), (10, 10, 2), (999, 10, 3), (1000, 10, 4), (1, 2, 1), (8, 2, 4)],
)
def test_digit_length_boundaries(n, g, expected):
    assert words.digit_length(n, g) == expected


@given(st.integers(min_value=1, max_value=10**12), st.integers(min_value=2, max_value=16))
@settings(max_examples=200, deadline=None)
def test_word_value_round_trip(n, g):
    assert words.word_value(words.digits_of(n, g, MSF), g, MSF) == n
    assert words.word_value(words.digits_of(n, g, LSF), g, LSF) == n


def test_word_value_rejects_bad_digit():
    with pytest.raises(InvalidDigitError):
        words.word_value((1, 7), 2)


def test_digits_of_rejects_zero():
    with pytest.raises(ValueError):
        words.digits_of(0)
    with pytest.raises(ValueError):
        words.digit_length(0, 2)


def test_word_validation():
    with pytest.raises(InvalidDigitError):
        words.Word((0, 5), 5)
    w = words.Word((1, 0, 2), 3)
    assert len(w) == 3 and w.text() == "102"
    assert words.to_word(37, 2).text() == "100101"
    assert words.to_word(37, 2, LSF).text() == "101001"


def test_alphabet():
    a = words.Alphabet(3)
    ws = list(a.words(2))
    assert len(ws) == a.word_count(2) == 9
    assert ws[0] == (0, 0) and ws[-1] == (2, 2)
    with pytest.raises(ValueError):
        words.Alphabet(1)


# ---------------------------------------------------------------------------
# occurrence counts and normality
# ---------------------------------------------------------------------------


def test_occurrences_overlapping():
    assert words.occurrences((1, 1, 0, 1, 1), (1, 1)) == 2
    assert words.occurrences((1, 1, 1), (1, 1)) == 2  # overlap counts
    assert words.occurrences((1, 1, 1, 1), (1, 1, 1)) == 2
    assert words.occurrences((5,), (5, 5)) == 0
    assert words.occurrences((1, 2, 3), ()) == 0


@given(st.lists(st.integers(0, 1), min_size=0, max_size=40), st.integers(1, 3))
@settings(max_examples=200, deadline=None)
def test_occurrences_matches_window_scan(digits, k):
    digits = tuple(digits)
    for w in itertools.product(range(2), repeat=k):
        assert words.occurrences(digits, w) == oracle_occurrences(digits, w)


def test_occurrence_counts_sum_to_window_count():
    digs = words.digits_of(123456789012, 10)
    total = sum(words.occurrences(digs, w) for w in itertools.product(range(10), repeat=2))
    assert total == len(digs) - 1


@pytest.mark.parametrize("eps", [0.05, 0.2, 0.3, 0.6])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_is_normal_matches_definition_base2(eps, k):
    for n in range(1, 600):
        assert words.is_eps_k_normal(n, eps, k, 2) == oracle_is_normal(n, eps, k, 2)


@pytest.mark.parametrize("eps", [0.05, 0.11, 0.2])
def test_is_normal_matches_definition_base10(eps):
    for n in itertools.chain(range(1, 200), range(10**6, 10**6 + 60)):
        assert words.is_eps_k_normal(n, eps, 1, 10) == oracle_is_normal(n, eps, 1, 10)


def test_is_normal_strictness_one_digit():
    # a 1-digit number has a word count of 1, which must fall below
    # (1/10 + eps) * 1: impossible for eps <= 0.9
    assert words.is_eps_k_normal(5, 0.2, 1, 10) is False
    assert oracle_is_normal(5, 0.2, 1, 10) is False
    assert words.is_eps_k_normal(5, 0.95, 1, 10) is True


def test_is_normal_pandigital():
    # every digit occurs exactly once: counts 1 vs band (0.5, 1.5)
    assert words.is_eps_k_normal(1023456789, 0.05, 1, 10) is True


def test_is_normal_absent_word_rule():
    # digits of 5 are 101: both bigrams 10 and 01 occur once, 00 and 11
    # never; the verdict flips on whether eps clears 1/4
    assert words.is_eps_k_normal(5, 0.3, 2, 2) is True
    assert words.is_eps_k_normal(5, 0.2, 2, 2) is False
    assert oracle_is_normal(5, 0.3, 2, 2) is True
    assert oracle_is_normal(5, 0.2, 2, 2) is False


@given(st.integers(min_value=1, max_value=10**9))
@settings(max_examples=150, deadline=None)
def test_is_normal_order_invariant(n):
    for eps, k, g in ((0.2, 1, 10), (0.3, 2, 2)):
        assert words.is_eps_k_normal(n, eps, k, g, MSF) == words.is_eps_k_normal(
            n, eps, k, g, LSF
        )


def test_is_normal_validates():
    with pytest.raises(ValueError):
        words.is_eps_k_normal(5, 0.0, 1, 10)
    with pytest.raises(ValueError):
        words.is_eps_k_normal(5, 0.1, 0, 10)


# ---------------------------------------------------------------------------
# streams and truncation
# ---------------------------------------------------------------------------


def test_natural_concatenation_prefix(engine):
    res = words.truncate(engine, arith.CompositionSpec(), 17)
    assert "".join(map(str, res.digits)) == "12345678910111213"
    assert res.final_index == 13
    assert res.consumed_of_final == 2 and res.final_length == 2
    assert res.flush


def test_prime_concatenation_prefix(engine):
    spec = arith.CompositionSpec((), arith.PRIMES)
    res = words.truncate(engine, spec, 20)
    assert "".join(map(str, res.digits)) == "23571113171923293137"
    assert res.final_index == 12  # twelve primes up to 37
    assert res.flush


def test_truncate_mid_word(engine):
    res = words.truncate(engine, arith.CompositionSpec(), 16)
    assert "".join(map(str, res.digits)) == "1234567891011121"
    assert res.final_index == 13
    assert res.consumed_of_final == 1 and res.final_length == 2
    assert not res.flush


def test_truncate_minimality(engine):
    # final_index must be the least n whose word reaches N digits
    spec = arith.CompositionSpec((arith.PHI,))
    for num in (1, 7, 97, 403):
        res = words.truncate(engine, spec, num)
        cum = 0
        n = 0
        while cum < num:
            n += 1
            cum += words.digit_length(engine.eval_composition(spec, n), 10)
        assert res.final_index == n
        assert res.consumed_of_final == num - (cum - res.final_length)


def test_truncate_matches_direct_concatenation(engine):
    spec = arith.CompositionSpec((arith.PHI,), arith.NATURALS)
    concat = []
    m = 0
    while len(concat) < 500:
        m += 1
        concat.extend(words.digits_of(engine.eval_composition(spec, m), 10))
    res = words.truncate(engine, spec, 500)
    assert res.digits.tolist() == concat[:500]


@pytest.mark.parametrize("order", [MSF, LSF])
def test_stream_agrees_with_truncate(engine, order):
    spec = arith.CompositionSpec((arith.SIGMA,))
    stream = words.DigitStream(engine, spec, 10, order)
    res = words.truncate(engine, spec, 300, 10, order)
    assert stream.take(300) == res.digits.tolist()


def test_stream_cursor_resume(engine):
    spec = arith.CompositionSpec((arith.PHI,), arith.PRIMES)
    whole = words.DigitStream(engine, spec).take(187)
    first = words.DigitStream(engine, spec)
    first.take(137)
    resumed = words.DigitStream(engine, spec, cursor=first.cursor)
    assert resumed.take(50) == whole[137:187]
    assert resumed.cursor.emitted == 187


def test_stream_cursor_at_word_boundary(engine):
    stream = words.DigitStream(engine, arith.CompositionSpec())
    stream.take(9)  # words 1..9 complete
    cur = stream.cursor
    assert (cur.next_index, cur.offset, cur.emitted) == (10, 0, 9)
    resumed = words.DigitStream(engine, arith.CompositionSpec(), cursor=cur)
    assert resumed.take(2) == [1, 0]


def test_stream_base2(engine):
    stream = words.DigitStream(engine, arith.CompositionSpec(), 2)
    # 1 10 11 100 101 ...
    assert stream.take(9) == [1, 1, 0, 1, 1, 1, 0, 0, 1]


def test_stream_rejects_bad_cursor(engine):
    with pytest.raises(ValueError):
        words.DigitStream(engine, arith.CompositionSpec(), cursor=words.StreamCursor(5, 9, 0))
    with pytest.raises(ValueError):
        words.DigitStream(engine, arith.CompositionSpec(), g=1)


# ---------------------------------------------------------------------------
# digit dump file
# ---------------------------------------------------------------------------


def test_digit_dump_roundtrip(tmp_path, engine):
    res = words.truncate(engine, arith.CompositionSpec((arith.PHI,)), 400)
    path = tmp_path / "digits.bin"
    words.save_digits(path, res.digits, 10, MSF)
    back, g, order = words.load_digits(path)
    assert np.array_equal(back, res.digits)
    assert g == 10 and order is MSF


def test_digit_dump_order_flag(tmp_path):
    path = tmp_path / "d.bin"
    words.save_digits(path, [1, 0, 1], 2, LSF)
    _, g, order = words.load_digits(path)
    assert g == 2 and order is LSF


def test_digit_dump_rejects_bad_magic(tmp_path):
    path = tmp_path / "d.bin"
    path.write_bytes(b"ZZZZ" + b"\x00" * 20)
    with pytest.raises(CacheFormatError):
        words.load_digits(path)


def test_digit_dump_rejects_truncation(tmp_path):
    path = tmp_path / "d.bin"
    words.save_digits(path, list(range(8)), 10, MSF)
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(CacheFormatError):
        words.load_digits(path)


def test_digit_dump_rejects_out_of_range_digit(tmp_path):
    path = tmp_path / "d.bin"
    words.save_digits(path, [0, 1, 7], 10, MSF)
    raw = bytearray(path.read_bytes())
    raw[4:8] = (2).to_bytes(4, "little")  # claim base 2 over digit 7
    path.write_bytes(bytes(raw))
    with pytest.raises(CacheFormatError):
        words.load_digits(path)


def test_digit_dump_base_range(tmp_path):
    with pytest.raises(ValueError):
        words.save_digits(tmp_path / "d.bin", [0], 300, MSF)
