"""Desk-scale censuses with closed-form reference bounds.

Each census counts an exceptional set exactly and prints the matching
closed-form bound next to it; bounds are always evaluated from their
formula, never fitted to the data.  Ranges are partitioned into fixed
blocks so threaded runs reproduce the sequential counts exactly.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .arith import (
    EULER_GAMMA,
    ArithEngine,
    BaseFn,
    BaseTag,
    CompositionSpec,
    DomainKind,
    big_omega,
    gstar,
    restricted,
)
from .reports import census_csv, density_csv
from .words import MSF, DigitOrder, digits_of, truncate

DETERMINISM_NOTE = "deterministic: exact integer censuses, no randomness"

_BLOCK = 1 << 16


def floored_log(x: float) -> float:
    """log x := max(1, ln x)."""
    return max(1.0, math.log(x))


def floored_loglog(x: float) -> float:
    """Iterated log, floored at 1 on both levels."""
    return max(1.0, math.log(floored_log(x)))


def default_checkpoints(limit: int) -> list[int]:
    """Powers of 10 from 100 up to the limit, limit always included."""
    if limit < 1:
        raise ValueError("limit must be >= 1")
    cps = [10**e for e in range(2, 19) if 10**e < limit]
    if not cps or cps[-1] != limit:
        cps.append(limit)
    return cps


# ---------------------------------------------------------------------------
# census plumbing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CensusRow:
    x: int
    count: int
    bound: float
    ratio: float
    verdict: Optional[bool]
    parts: Optional[dict[str, int]] = None

    def to_dict(self) -> dict:
        out = {
            "x": self.x,
            "count": self.count,
            "bound": self.bound,
            "ratio": self.ratio,
            "verdict": self.verdict,
        }
        if self.parts is not None:
            out["parts"] = dict(self.parts)
        return out


@dataclass(frozen=True)
class CensusReport:
    """Exact counts vs a closed-form bound at increasing checkpoints."""

    experiment: str
    label: str
    bound_formula: str
    params: dict
    rows: tuple[CensusRow, ...]
    note: str = DETERMINISM_NOTE

    def __post_init__(self):
        xs = [r.x for r in self.rows]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("checkpoints must be strictly increasing")

    def to_dict(self) -> dict:
        return {
            "kind": "census-report",
            "schema": 1,
            "experiment": self.experiment,
            "label": self.label,
            "bound_formula": self.bound_formula,
            "params": dict(self.params),
            "note": self.note,
            "rows": [r.to_dict() for r in self.rows],
        }

    def to_csv(self) -> str:
        return census_csv(self.to_dict())


def _validate_checkpoints(checkpoints: Sequence[int]) -> list[int]:
    cps = [int(c) for c in checkpoints]
    if not cps or cps[0] < 1 or any(b <= a for a, b in zip(cps, cps[1:])):
        raise ValueError("checkpoints must be strictly increasing and >= 1")
    return cps


def _blockwise_census(
    limit: int,
    cps: list[int],
    block_indicator: Callable[[int, int], np.ndarray],
    threads: int,
) -> dict[int, int]:
    """Count flagged n at each checkpoint; blocks are fixed-size so the
    result never depends on the thread count."""
    if threads < 1:
        raise ValueError("threads must be >= 1")
    blocks = [(lo, min(lo + _BLOCK - 1, limit)) for lo in range(1, limit + 1, _BLOCK)]

    def work(bounds):
        lo, hi = bounds
        ind = np.asarray(block_indicator(lo, hi), dtype=bool)
        edges = [(c, int(ind[: c - lo + 1].sum())) for c in cps if lo <= c <= hi]
        return int(ind.sum()), edges

    if threads == 1 or len(blocks) == 1:
        results = [work(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, blocks))

    out = {}
    running = 0
    for total, edges in results:
        for c, partial in edges:
            out[c] = running + partial
        running += total
    return out


_TABLE_FNS = (BaseTag.PHI, BaseTag.SIGMA, BaseTag.LAMBDA)


def _require_table_fn(a: BaseFn) -> None:
    if a.tag not in _TABLE_FNS:
        raise ValueError(f"census supports phi/sigma/lambda, got {a.describe()}")


# ---------------------------------------------------------------------------
# censuses
# ---------------------------------------------------------------------------


def small_lambda_census(
    engine: ArithEngine, checkpoints: Sequence[int], threads: int = 1
) -> CensusReport:
    """Count n <= x whose unit-group exponent is below sqrt(n).

    The comparison is exact (lambda(n)^2 < n); the reference bound is
    x / exp((log x)^(1/3)).
    """
    cps = _validate_checkpoints(checkpoints)
    limit = cps[-1]
    lam = engine.lambda_table(limit)

    def indicator(lo, hi):
        seg = lam[lo : hi + 1]
        return seg * seg < np.arange(lo, hi + 1, dtype=np.int64)

    counts = _blockwise_census(limit, cps, indicator, threads)
    rows = []
    for x in cps:
        bound = x / math.exp(floored_log(x) ** (1.0 / 3.0))
        rows.append(CensusRow(x, counts[x], bound, counts[x] / bound, counts[x] <= bound))
    return CensusReport(
        experiment="fps",
        label="n <= x with lambda(n) < sqrt(n)",
        bound_formula="x / exp((log x)^(1/3))",
        params={},
        rows=tuple(rows),
    )


def divisor_preimage_census(
    engine: ArithEngine,
    a: BaseFn,
    d: int,
    checkpoints: Sequence[int],
    threads: int = 1,
) -> CensusReport:
    """Count n <= x with d | a(n) against (x/d) * (8 l (log x)^2)^l."""
    _require_table_fn(a)
    if d < 1:
        raise ValueError("divisor d must be >= 1")
    cps = _validate_checkpoints(checkpoints)
    limit = cps[-1]
    tab = engine.value_table(a, limit)
    ell = big_omega(engine.factorize(d))

    def indicator(lo, hi):
        return tab[lo : hi + 1] % d == 0

    counts = _blockwise_census(limit, cps, indicator, threads)
    rows = []
    for x in cps:
        bound = (x / d) * (8.0 * ell * floored_log(x) ** 2) ** ell
        rows.append(CensusRow(x, counts[x], bound, counts[x] / bound, counts[x] <= bound))
    return CensusReport(
        experiment="divisor",
        label=f"n <= x with {d} | {a.describe()}(n)",
        bound_formula="(x/d) * (8*l*(log x)^2)^l with l = Omega(d)",
        params={"a": a.describe(), "d": d, "l": ell},
        rows=tuple(rows),
    )


def omega_tail_census(
    engine: ArithEngine,
    a: BaseFn,
    big_k: int,
    checkpoints: Sequence[int],
    threads: int = 1,
) -> CensusReport:
    """Count n <= x with Omega(a(n)) > K^2.

    The reference scale (K/2^K) x (log x)^3 carries an unspecified
    implied constant, so rows report the observed/scale ratio and no
    verdict.
    """
    _require_table_fn(a)
    if big_k < 1:
        raise ValueError("K must be >= 1")
    cps = _validate_checkpoints(checkpoints)
    limit = cps[-1]
    tab = engine.value_table(a, limit)
    engine.ensure_spf(int(tab[1 : limit + 1].max()))
    threshold = big_k * big_k

    def indicator(lo, hi):
        seg = tab[lo : hi + 1]
        return np.fromiter(
            (big_omega(engine.factorize(int(v))) > threshold for v in seg),
            dtype=bool,
            count=len(seg),
        )

    counts = _blockwise_census(limit, cps, indicator, threads)
    rows = []
    for x in cps:
        scale = (big_k / 2.0**big_k) * x * floored_log(x) ** 3
        rows.append(CensusRow(x, counts[x], scale, counts[x] / scale, None))
    return CensusReport(
        experiment="omega-tail",
        label=f"n <= x with Omega({a.describe()}(n)) > {threshold}",
        bound_formula="(K/2^K) * x * (log x)^3 (reference scale; implied constant unknown)",
        params={"a": a.describe(), "K": big_k},
        rows=tuple(rows),
    )


def small_value_census(
    engine: ArithEngine,
    spec: CompositionSpec,
    checkpoints: Sequence[int],
    theta: float = 1.0 / 3.0,
    threads: int = 1,
) -> CensusReport:
    """Count n <= x with f(n) < n^(1/2^j), j the chain depth.

    The comparison f(n)^(2^j) < n runs in exact integers; thinness is
    certified against x / exp((log x)^theta) for the caller's theta.
    """
    if spec.domain.kind is not DomainKind.NATURALS:
        raise ValueError("small-value census runs over the naturals")
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    cps = _validate_checkpoints(checkpoints)
    limit = cps[-1]
    vals = engine.chain_values(spec.chain, np.arange(1, limit + 1, dtype=np.int64))
    power = 2**spec.depth

    def indicator(lo, hi):
        seg = vals[lo - 1 : hi]
        return np.fromiter(
            (int(v) ** power < m for m, v in enumerate(seg.tolist(), lo)),
            dtype=bool,
            count=len(seg),
        )

    counts = _blockwise_census(limit, cps, indicator, threads)
    rows = []
    for x in cps:
        bound = x / math.exp(floored_log(x) ** theta)
        rows.append(CensusRow(x, counts[x], bound, counts[x] / bound, counts[x] <= bound))
    return CensusReport(
        experiment="small-value",
        label=f"n <= x with {spec.describe()}(n) < n^(1/{power})",
        bound_formula="x / exp((log x)^theta)",
        params={"spec": spec.describe(), "j": spec.depth, "theta": theta},
        rows=tuple(rows),
    )


# ---------------------------------------------------------------------------
# thin sets and preimages
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThinSetSpec:
    """A candidate thin set: membership test plus the theta to certify."""

    theta: float
    member: Callable[[int], bool]
    label: str

    def __post_init__(self):
        if not 0 < self.theta <= 1:
            raise ValueError("theta must lie in (0, 1]")


def _is_power_of_two(m: int) -> bool:
    return m >= 1 and m & (m - 1) == 0


def _is_square(m: int) -> bool:
    return m >= 1 and math.isqrt(m) ** 2 == m


POWERS_OF_TWO = ThinSetSpec(0.5, _is_power_of_two, "powers-of-two")
PERFECT_SQUARES = ThinSetSpec(0.5, _is_square, "squares")
EMPTY_SET = ThinSetSpec(0.5, lambda m: False, "empty")
ALL_NATURALS = ThinSetSpec(0.5, lambda m: True, "all")

THIN_SETS = {
    spec.label: spec for spec in (POWERS_OF_TWO, PERFECT_SQUARES, EMPTY_SET, ALL_NATURALS)
}


def thin_preimage_census(
    engine: ArithEngine,
    a: BaseFn,
    thin_set: ThinSetSpec,
    checkpoints: Sequence[int],
    threads: int = 1,
) -> CensusReport:
    """Census of {n <= x : a(n) in E} with the proof's partition.

    Per checkpoint the counted n split by a(n): e1 has a(n) <= x^(1/3),
    e2 has Omega(a(n)) > (log x)^(theta/3), e3 is the rest.
    """
    _require_table_fn(a)
    cps = _validate_checkpoints(checkpoints)
    limit = cps[-1]
    tab = engine.value_table(a, limit)

    def indicator(lo, hi):
        seg = tab[lo : hi + 1]
        return np.fromiter(
            (thin_set.member(int(v)) for v in seg), dtype=bool, count=len(seg)
        )

    counts = _blockwise_census(limit, cps, indicator, threads)
    member_ns = [n for n in range(1, limit + 1) if thin_set.member(int(tab[n]))]
    omega_memo: dict[int, int] = {}

    def omega_of(v: int) -> int:
        if v not in omega_memo:
            omega_memo[v] = big_omega(engine.factorize(v))
        return omega_memo[v]

    rows = []
    for x in cps:
        cut = x ** (1.0 / 3.0)
        om_cut = floored_log(x) ** (thin_set.theta / 3.0)
        e1 = e2 = e3 = 0
        for n in member_ns:
            if n > x:
                break
            v = int(tab[n])
            if v <= cut:
                e1 += 1
            elif omega_of(v) > om_cut:
                e2 += 1
            else:
                e3 += 1
        total = counts[x]
        assert e1 + e2 + e3 == total
        bound = x / math.exp(floored_log(x) ** thin_set.theta)
        rows.append(
            CensusRow(
                x,
                total,
                bound,
                total / bound,
                total <= bound,
                parts={"e1": e1, "e2": e2, "e3": e3},
            )
        )
    return CensusReport(
        experiment="thin-preimage",
        label=f"n <= x with {a.describe()}(n) in {thin_set.label}",
        bound_formula="x / exp((log x)^theta)",
        params={"a": a.describe(), "set": thin_set.label, "theta": thin_set.theta},
        rows=tuple(rows),
    )


# ---------------------------------------------------------------------------
# growth ratios
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GrowthReport:
    """Polynomial-growth ratios of a composition over 1..x."""

    spec: str
    x: int
    sum_ratio: float  # sum of log f(m) over x log x
    max_ratio: float  # max of log f(m) / log m
    lower_reference: float
    upper_reference: float

    @property
    def passes(self) -> bool:
        return self.sum_ratio >= self.lower_reference and self.max_ratio <= self.upper_reference

    def to_dict(self) -> dict:
        return {
            "kind": "growth-report",
            "schema": 1,
            "spec": self.spec,
            "x": self.x,
            "sum_ratio": self.sum_ratio,
            "max_ratio": self.max_ratio,
            "lower_reference": self.lower_reference,
            "upper_reference": self.upper_reference,
            "passes": self.passes,
            "note": DETERMINISM_NOTE,
        }


def growth_hypothesis_check(engine: ArithEngine, spec: CompositionSpec, x: int) -> GrowthReport:
    """Report sum log f(m) / (x log x) and max log f(m) / log m over m <= x."""
    if x < 2:
        raise ValueError("x must be >= 2")
    if spec.domain.kind is not DomainKind.NATURALS:
        raise ValueError("growth check runs over the naturals")
    vals = engine.chain_values(spec.chain, np.arange(1, x + 1, dtype=np.int64))
    logf = np.maximum(1.0, np.log(vals.astype(np.float64)))
    logm = np.maximum(1.0, np.log(np.arange(1, x + 1, dtype=np.float64)))
    return GrowthReport(
        spec=spec.describe(),
        x=x,
        sum_ratio=float(logf.sum() / (x * floored_log(x))),
        max_ratio=float((logf / logm).max()),
        lower_reference=0.5 ** (spec.depth + 1),
        upper_reference=2.0,
    )


# ---------------------------------------------------------------------------
# block repetition demonstration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockRepetitionReport:
    """Occurrences of the repeating leading block in a stream prefix.

    The value sequence of a prime-supported multiplicative part repeats
    its first 2^k - 1 entries with period M^k, so the concatenated block
    recurs far more often than the g^-len ceiling a normal stream
    allows.
    """

    primes: tuple[int, ...]
    k: int
    g: int
    num_digits: int
    block: str
    block_len: int
    final_index: int
    period_modulus: int
    period_count: int
    observed: int
    normal_ceiling: float

    @property
    def separation(self) -> float:
        return self.observed / self.normal_ceiling

    def to_dict(self) -> dict:
        return {
            "kind": "block-repetition-report",
            "schema": 1,
            "primes": list(self.primes),
            "k": self.k,
            "g": self.g,
            "N": self.num_digits,
            "block": self.block,
            "block_len": self.block_len,
            "n": self.final_index,
            "period_modulus": self.period_modulus,
            "period_count": self.period_count,
            "observed": self.observed,
            "normal_ceiling": self.normal_ceiling,
            "separation": self.separation,
            "note": DETERMINISM_NOTE,
        }


def count_overlapping(haystack: bytes, needle: bytes, threads: int = 1, chunk: int = 1 << 20) -> int:
    """Overlapping occurrence count, chunked deterministically."""
    if not needle or len(needle) > len(haystack):
        return 0
    starts = len(haystack) - len(needle) + 1

    def work(lo):
        hi = min(lo + chunk, starts)
        count = 0
        i = haystack.find(needle, lo, hi + len(needle) - 1)
        while i != -1 and i < hi:
            count += 1
            i = haystack.find(needle, i + 1, hi + len(needle) - 1)
        return count

    blocks = list(range(0, starts, chunk))
    if threads == 1 or len(blocks) == 1:
        return sum(work(lo) for lo in blocks)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return sum(pool.map(work, blocks))


def non_normality_demo(
    engine: ArithEngine,
    primes: Sequence[int],
    k: int,
    g: int = 10,
    num_digits: int = 10**5,
    order: DigitOrder = MSF,
    threads: int = 1,
) -> BlockRepetitionReport:
    """Count the block f(1)...f(2^k - 1) inside the first N stream digits."""
    if k < 1:
        raise ValueError("k must be >= 1")
    fn = gstar(primes)
    modulus = math.prod(sorted(fn.primes)) ** k
    block_digits = []
    for i in range(1, 2**k):
        block_digits.extend(digits_of(engine.eval_base_value(fn, i), g, order))
    spec = CompositionSpec((fn,))
    res = truncate(engine, spec, num_digits, g, order)
    observed = count_overlapping(
        res.digits.astype(np.uint8).tobytes(),
        bytes(block_digits),
        threads=threads,
    )
    n = res.final_index
    period_count = max(0, (n - (2**k - 1)) // modulus + 1) if n >= 2**k - 1 else 0
    return BlockRepetitionReport(
        primes=tuple(sorted(fn.primes)),
        k=k,
        g=g,
        num_digits=num_digits,
        block=_join_block(block_digits, g),
        block_len=len(block_digits),
        final_index=n,
        period_modulus=modulus,
        period_count=period_count,
        observed=observed,
        normal_ceiling=num_digits * float(g) ** (-len(block_digits)),
    )


def _join_block(digits: Sequence[int], g: int) -> str:
    if g <= 10:
        return "".join(str(d) for d in digits)
    return ".".join(str(d) for d in digits)


# ---------------------------------------------------------------------------
# extremal ratios
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExtremalRatioReport:
    """Finite-x extremes of phi(m) loglog(m)/m and sigma(m)/(m loglog m).

    The displayed e^(-gamma) and e^gamma limits are qualitative
    references; finite scans need not approach them.
    """

    x: int
    min_phi_ratio: float
    argmin_phi: int
    max_sigma_ratio: float
    argmax_sigma: int
    e_neg_gamma: float
    e_gamma: float

    def to_dict(self) -> dict:
        return {
            "kind": "extremal-ratio-report",
            "schema": 1,
            "x": self.x,
            "min_phi_ratio": self.min_phi_ratio,
            "argmin_phi": self.argmin_phi,
            "max_sigma_ratio": self.max_sigma_ratio,
            "argmax_sigma": self.argmax_sigma,
            "e_neg_gamma": self.e_neg_gamma,
            "e_gamma": self.e_gamma,
            "note": DETERMINISM_NOTE,
        }


def extremal_ratio_report(engine: ArithEngine, x: int) -> ExtremalRatioReport:
    """Scan 2 <= m <= x for the totient and divisor-sum extremes."""
    if x < 10:
        raise ValueError("x must be >= 10")
    phi = engine.phi_table(x)
    sigma = engine.sigma_table(x)
    m = np.arange(2, x + 1, dtype=np.float64)
    ll = np.maximum(1.0, np.log(np.log(m)))
    phi_ratio = phi[2 : x + 1] / (m / ll)
    sigma_ratio = sigma[2 : x + 1] / (m * ll)
    i = int(np.argmin(phi_ratio))
    j = int(np.argmax(sigma_ratio))
    return ExtremalRatioReport(
        x=x,
        min_phi_ratio=float(phi_ratio[i]),
        argmin_phi=i + 2,
        max_sigma_ratio=float(sigma_ratio[j]),
        argmax_sigma=j + 2,
        e_neg_gamma=round(math.exp(-EULER_GAMMA), 4),
        e_gamma=round(math.exp(EULER_GAMMA), 4),
    )


# ---------------------------------------------------------------------------
# restricted-domain density check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DensityRow:
    x: int
    count: int
    floor: float
    passes: bool

    def to_dict(self) -> dict:
        return {"x": self.x, "count": self.count, "floor": self.floor, "passes": self.passes}


@dataclass(frozen=True)
class DensityReport:
    """Checks that S meets [1, x] in more than x/(log x)^B points."""

    label: str
    exponent: float
    rows: tuple[DensityRow, ...]
    note: str = DETERMINISM_NOTE

    def to_dict(self) -> dict:
        return {
            "kind": "density-report",
            "schema": 1,
            "label": self.label,
            "B": self.exponent,
            "note": self.note,
            "rows": [r.to_dict() for r in self.rows],
        }

    def to_csv(self) -> str:
        return density_csv(self.to_dict())

    @property
    def passes(self) -> bool:
        return all(r.passes for r in self.rows)


def restricted_domain_check(
    member: Callable[[int], bool],
    label: str,
    exponent: float,
    checkpoints: Sequence[int],
    threads: int = 1,
) -> DensityReport:
    """Verify the density floor for a membership predicate."""
    cps = _validate_checkpoints(checkpoints)
    limit = cps[-1]

    def indicator(lo, hi):
        return np.fromiter(
            (member(n) for n in range(lo, hi + 1)), dtype=bool, count=hi - lo + 1
        )

    counts = _blockwise_census(limit, cps, indicator, threads)
    rows = []
    for x in cps:
        floor = x / floored_log(x) ** exponent
        rows.append(DensityRow(x, counts[x], floor, counts[x] > floor))
    return DensityReport(label=label, exponent=exponent, rows=tuple(rows))


def density_domain(member: Callable[[int], bool], label: str):
    """Expose a checked membership set as a stream domain."""
    return restricted(member, label)
