"""Arithmetic functions, factorization, and composition streams.

Everything here is exact integer arithmetic.  Pointwise evaluation goes
through `Factorization`; bulk evaluation over a range [1, limit] goes
through numpy value tables backed by a smallest-prime-factor sieve.
"""

from __future__ import annotations

import enum
import itertools
import math
import struct
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np

from .errors import CacheFormatError, CapacityError, NotCoprimeError

# Euler-Mascheroni constant, stored (never derived analytically here).
EULER_GAMMA = 0.5772156649015329

SPF_CACHE_MAGIC = b"NFSV1"

# Default ceiling for the SPF table, in bytes (4 bytes per entry).
DEFAULT_MEMORY_BUDGET = 512 * 1024 * 1024

# factorize() grows the sieve on demand up to this many entries; anything
# larger is treated as an isolated input and trial-divided instead.
AUTO_EXTEND_CAP = 1 << 24


@dataclass(frozen=True)
class Factorization:
    """Prime-exponent decomposition of a natural number n >= 1.

    `factors` is ordered by strictly increasing prime; n == 1 iff it is
    empty.  The invariant is checked on construction.
    """

    n: int
    factors: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"factorization requires n >= 1, got {self.n}")
        prod = 1
        prev = 1
        for p, e in self.factors:
            if p <= prev:
                raise ValueError("factor primes must be strictly increasing")
            if e < 1:
                raise ValueError("factor exponents must be >= 1")
            prev = p
            prod *= p**e
        if prod != self.n:
            raise ValueError(f"factors multiply to {prod}, expected {self.n}")


# ---------------------------------------------------------------------------
# Pointwise arithmetic functions of a Factorization
# ---------------------------------------------------------------------------


def phi(fac: Factorization) -> int:
    """Euler totient: order of the unit group mod n."""
    out = 1
    for p, e in fac.factors:
        out *= p ** (e - 1) * (p - 1)
    return out


def sigma(fac: Factorization) -> int:
    """Sum of all divisors of n."""
    out = 1
    for p, e in fac.factors:
        out *= (p ** (e + 1) - 1) // (p - 1)
    return out


def _lambda_prime_power(p: int, e: int) -> int:
    # Unit group mod p^e is cyclic except mod 2^e for e >= 3.
    if p == 2:
        if e == 1:
            return 1
        if e == 2:
            return 2
        return 1 << (e - 2)
    return p ** (e - 1) * (p - 1)


def lam(fac: Factorization) -> int:
    """Carmichael function: exponent of the unit group mod n."""
    out = 1
    for p, e in fac.factors:
        out = math.lcm(out, _lambda_prime_power(p, e))
    return out


def big_omega(fac: Factorization) -> int:
    """Number of prime factors counted with multiplicity."""
    return sum(e for _, e in fac.factors)


def small_omega(fac: Factorization) -> int:
    """Number of distinct prime factors."""
    return len(fac.factors)


def radical(fac: Factorization) -> int:
    """Product of the distinct primes dividing n."""
    out = 1
    for p, _ in fac.factors:
        out *= p
    return out


def largest_two_square_divisor(fac: Factorization) -> int:
    """Largest divisor of n expressible as a sum of two squares.

    Keeps the full power of 2 and of primes p = 1 (mod 4); powers of
    primes p = 3 (mod 4) are truncated to an even exponent.
    """
    out = 1
    for p, e in fac.factors:
        if p != 2 and p % 4 == 3:
            e -= e % 2
        out *= p**e
    return out


def gstar_part(fac: Factorization, primes: frozenset[int]) -> int:
    """Product of the prime-power components of n supported on `primes`."""
    out = 1
    for p, e in fac.factors:
        if p in primes:
            out *= p**e
    return out


def sum_proper_divisors(fac: Factorization) -> int:
    """Sum of divisors below n, with the convention s(1) = 1."""
    if fac.n == 1:
        return 1
    return sigma(fac) - fac.n


# ---------------------------------------------------------------------------
# Base functions and composition specs
# ---------------------------------------------------------------------------


class BaseTag(enum.Enum):
    PHI = "phi"
    SIGMA = "sigma"
    LAMBDA = "lambda"
    SUM_PROPER_DIVISORS = "s"
    RADICAL = "rad"
    TWO_SQUARES = "two-squares"
    GSTAR = "gstar"


@dataclass(frozen=True)
class BaseFn:
    """One step of a composition chain."""

    tag: BaseTag
    primes: Optional[frozenset[int]] = None  # GSTAR only

    def __post_init__(self):
        if self.tag is BaseTag.GSTAR:
            if not self.primes:
                raise ValueError("gstar requires a nonempty prime set")
        elif self.primes is not None:
            raise ValueError(f"{self.tag.value} takes no prime set")

    def describe(self) -> str:
        if self.tag is BaseTag.GSTAR:
            return "gstar:" + ",".join(str(p) for p in sorted(self.primes))
        return self.tag.value


PHI = BaseFn(BaseTag.PHI)
SIGMA = BaseFn(BaseTag.SIGMA)
LAMBDA = BaseFn(BaseTag.LAMBDA)
SUM_PROPER = BaseFn(BaseTag.SUM_PROPER_DIVISORS)
RADICAL = BaseFn(BaseTag.RADICAL)
TWO_SQUARES = BaseFn(BaseTag.TWO_SQUARES)


def gstar(primes) -> BaseFn:
    """Multiplicative f with f(p^e) = p^e on the given primes, else 1."""
    ps = frozenset(int(p) for p in primes)
    for p in ps:
        if not is_prime(p):
            raise ValueError(f"gstar set must contain primes, got {p}")
    return BaseFn(BaseTag.GSTAR, ps)


def eval_base(fn: BaseFn, fac: Factorization) -> int:
    """Apply one base function to a factored value."""
    tag = fn.tag
    if tag is BaseTag.PHI:
        return phi(fac)
    if tag is BaseTag.SIGMA:
        return sigma(fac)
    if tag is BaseTag.LAMBDA:
        return lam(fac)
    if tag is BaseTag.SUM_PROPER_DIVISORS:
        return sum_proper_divisors(fac)
    if tag is BaseTag.RADICAL:
        return radical(fac)
    if tag is BaseTag.TWO_SQUARES:
        return largest_two_square_divisor(fac)
    if tag is BaseTag.GSTAR:
        return gstar_part(fac, fn.primes)
    raise ValueError(f"unknown base function {fn!r}")


class DomainKind(enum.Enum):
    NATURALS = "naturals"
    PRIMES = "primes"
    # index i -> multiplicative order of 2 mod (2i - 1)
    ODD_ORDERS = "odd-orders"
    # index i -> multiplicative order of 2 mod p_{i+1}
    PRIME_ORDERS = "prime-orders"
    RESTRICTED = "restricted"


@dataclass(frozen=True)
class Domain:
    kind: DomainKind
    member: Optional[Callable[[int], bool]] = None  # RESTRICTED only
    label: str = ""

    def describe(self) -> str:
        if self.kind is DomainKind.RESTRICTED:
            return self.label or "restricted"
        return self.kind.value


NATURALS = Domain(DomainKind.NATURALS, label="naturals")
PRIMES = Domain(DomainKind.PRIMES, label="primes")
ODD_ORDERS = Domain(DomainKind.ODD_ORDERS, label="odd-orders")
PRIME_ORDERS = Domain(DomainKind.PRIME_ORDERS, label="prime-orders")


def restricted(member: Callable[[int], bool], label: str) -> Domain:
    return Domain(DomainKind.RESTRICTED, member=member, label=label)


@dataclass(frozen=True)
class CompositionSpec:
    """A composition chain applied over an input domain.

    `chain` is outermost-first: chain (f1, f2) over input m evaluates
    f1(f2(m)).  An empty chain is the identity.  For the order-map
    domains the order map runs first and the chain applies to its value.
    """

    chain: tuple[BaseFn, ...] = ()
    domain: Domain = NATURALS

    @property
    def depth(self) -> int:
        return len(self.chain)

    def describe(self) -> str:
        chain = ".".join(fn.describe() for fn in self.chain) or "id"
        return f"{chain}@{self.domain.describe()}"


# ---------------------------------------------------------------------------
# Smallest-prime-factor sieve and cache file
# ---------------------------------------------------------------------------


def spf_table(limit: int, memory_budget: int = DEFAULT_MEMORY_BUDGET) -> np.ndarray:
    """Sieve least prime factors for 2..limit.

    Returns a uint32 array of size limit+1 with table[m] = least prime
    factor of m (entries 0 and 1 are 0).  Raises CapacityError when the
    table would not fit the byte budget.
    """
    if limit < 2:
        raise ValueError("sieve limit must be >= 2")
    _check_spf_budget(limit, memory_budget)
    spf = np.zeros(limit + 1, dtype=np.uint32)
    for p in range(2, math.isqrt(limit) + 1):
        if spf[p] == 0:
            spf[p] = p
            seg = spf[p * p :: p]
            seg[seg == 0] = p
    # anything still unset is a prime above sqrt(limit)
    rest = np.flatnonzero(spf[2:] == 0) + 2
    spf[rest] = rest
    return spf


def _check_spf_budget(limit: int, memory_budget: int) -> None:
    need = 4 * (limit + 1)
    if need > memory_budget:
        raise CapacityError(
            f"SPF table for limit {limit} needs {need} bytes, budget is {memory_budget}"
        )


def save_spf_cache(path, spf: np.ndarray) -> None:
    """Write an SPF table: magic, little-endian u64 limit, u32 entries for 2..limit."""
    limit = len(spf) - 1
    with open(path, "wb") as fh:
        fh.write(SPF_CACHE_MAGIC)
        fh.write(struct.pack("<Q", limit))
        fh.write(np.ascontiguousarray(spf[2:], dtype="<u4").tobytes())


def load_spf_cache(path, memory_budget: int = DEFAULT_MEMORY_BUDGET) -> np.ndarray:
    """Read an SPF cache, validating magic and limit against the payload size."""
    with open(path, "rb") as fh:
        magic = fh.read(len(SPF_CACHE_MAGIC))
        if magic != SPF_CACHE_MAGIC:
            raise CacheFormatError(f"bad magic {magic!r} in {path}")
        raw = fh.read(8)
        if len(raw) != 8:
            raise CacheFormatError(f"truncated header in {path}")
        (limit,) = struct.unpack("<Q", raw)
        if limit < 2:
            raise CacheFormatError(f"invalid limit {limit} in {path}")
        _check_spf_budget(limit, memory_budget)
        payload = fh.read()
    if len(payload) != 4 * (limit - 1):
        raise CacheFormatError(
            f"expected {4 * (limit - 1)} payload bytes for limit {limit}, got {len(payload)}"
        )
    spf = np.zeros(limit + 1, dtype=np.uint32)
    spf[2:] = np.frombuffer(payload, dtype="<u4")
    return spf


def _trial_division(n: int) -> tuple[tuple[int, int], ...]:
    factors = []
    for p in (2, 3):
        if n % p == 0:
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            factors.append((p, e))
    d = 5
    step = 2
    while d * d <= n:
        if n % d == 0:
            e = 0
            while n % d == 0:
                n //= d
                e += 1
            factors.append((d, e))
        d += step
        step = 6 - step
    if n > 1:
        factors.append((n, 1))
    return tuple(factors)


def is_prime(n: int) -> bool:
    """Deterministic primality by trial division (desk-scale inputs)."""
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0 or n % 3 == 0:
        return False
    d = 5
    step = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += step
        step = 6 - step
    return True


# ---------------------------------------------------------------------------
# Engine: sieve-backed factorization, primes, orders, compositions, tables
# ---------------------------------------------------------------------------


class ArithEngine:
    """Shared context for factorization-backed evaluation.

    The SPF table is grown on demand (never shrunk) and swapped in
    atomically, so concurrent readers always see a consistent table.
    Inputs beyond the auto-extend cap fall back to trial division.
    """

    def __init__(
        self,
        spf_limit: int = 0,
        memory_budget: int = DEFAULT_MEMORY_BUDGET,
        auto_extend_cap: int = AUTO_EXTEND_CAP,
    ):
        self.memory_budget = memory_budget
        self.auto_extend_cap = min(auto_extend_cap, memory_budget // 4 - 1)
        self._lock = threading.Lock()
        self._spf: Optional[np.ndarray] = None
        self._spf_limit = 1
        self._primes = np.empty(0, dtype=np.int64)
        self._prime_limit = 1
        self._tables: dict[str, np.ndarray] = {}
        if spf_limit >= 2:
            self.ensure_spf(spf_limit)

    @property
    def spf_limit(self) -> int:
        return self._spf_limit

    def ensure_spf(self, limit: int) -> None:
        if limit <= self._spf_limit:
            return
        with self._lock:
            if limit <= self._spf_limit:
                return
            spf = spf_table(limit, self.memory_budget)
            self._spf = spf
            self._spf_limit = limit

    def attach_spf(self, spf: np.ndarray) -> None:
        """Adopt a preloaded SPF table (e.g. from a cache file) if larger."""
        with self._lock:
            limit = len(spf) - 1
            if limit > self._spf_limit:
                self._spf = spf
                self._spf_limit = limit

    def factorize(self, n: int) -> Factorization:
        """Prime-exponent decomposition; total for all n >= 1."""
        if n < 1:
            raise ValueError(f"cannot factorize {n}")
        if n == 1:
            return Factorization(1, ())
        if n > self._spf_limit:
            if n <= self.auto_extend_cap:
                self.ensure_spf(min(max(2 * self._spf_limit, n, 1 << 16), self.auto_extend_cap))
            else:
                return Factorization(n, _trial_division(n))
        spf = self._spf
        factors = []
        m = n
        while m > 1:
            p = int(spf[m])
            e = 0
            while m % p == 0:
                m //= p
                e += 1
            factors.append((p, e))
        return Factorization(n, tuple(factors))

    # -- primes ------------------------------------------------------------

    def _ensure_primes_upto(self, limit: int) -> None:
        if limit <= self._prime_limit:
            return
        with self._lock:
            if limit <= self._prime_limit:
                return
            mask = np.ones(limit + 1, dtype=bool)
            mask[:2] = False
            for p in range(2, math.isqrt(limit) + 1):
                if mask[p]:
                    mask[p * p :: p] = False
            self._primes = np.flatnonzero(mask).astype(np.int64)
            self._prime_limit = limit

    def _ensure_prime_count(self, count: int) -> None:
        while len(self._primes) < count:
            n = max(count, 16)
            # p_n < n (ln n + ln ln n) for n >= 6
            bound = int(n * (math.log(n) + math.log(math.log(n)))) + 16
            self._ensure_primes_upto(max(bound, 2 * self._prime_limit))

    def nth_prime(self, n: int) -> int:
        """The n-th prime, 1-indexed (p_1 = 2)."""
        if n < 1:
            raise ValueError("prime index must be >= 1")
        self._ensure_prime_count(n)
        return int(self._primes[n - 1])

    def prime_stream(self) -> Iterator[int]:
        """All primes in increasing order."""
        i = 0
        while True:
            if i >= len(self._primes):
                self._ensure_prime_count(max(2 * (i + 1), 64))
            yield int(self._primes[i])
            i += 1

    def primes_upto(self, limit: int) -> np.ndarray:
        self._ensure_primes_upto(limit)
        return self._primes[: int(np.searchsorted(self._primes, limit, side="right"))]

    # -- multiplicative order ----------------------------------------------

    def mult_order(self, a: int, n: int) -> int:
        """Least t >= 1 with a^t = 1 (mod n).

        Starts from the unit-group exponent and strips prime factors
        while the congruence still holds.
        """
        if n < 1:
            raise ValueError("modulus must be >= 1")
        if n == 1:
            return 1
        if math.gcd(a, n) != 1:
            raise NotCoprimeError(f"gcd({a}, {n}) > 1")
        t = lam(self.factorize(n))
        for q, e in self.factorize(t).factors:
            for _ in range(e):
                if pow(a, t // q, n) == 1:
                    t //= q
                else:
                    break
        return t

    # -- composition evaluation ----------------------------------------------

    def eval_base_value(self, fn: BaseFn, n: int) -> int:
        return eval_base(fn, self.factorize(n))

    def _domain_value(self, domain: Domain, index: int) -> int:
        kind = domain.kind
        if kind is DomainKind.NATURALS:
            return index
        if kind is DomainKind.PRIMES:
            return self.nth_prime(index)
        if kind is DomainKind.ODD_ORDERS:
            return self.mult_order(2, 2 * index - 1)
        if kind is DomainKind.PRIME_ORDERS:
            return self.mult_order(2, self.nth_prime(index + 1))
        if kind is DomainKind.RESTRICTED:
            seen = 0
            for m in itertools.count(1):
                if domain.member(m):
                    seen += 1
                    if seen == index:
                        return m
        raise ValueError(f"unknown domain {domain!r}")

    def domain_stream(self, domain: Domain, start_index: int = 1) -> Iterator[int]:
        """Domain inputs for index = start_index, start_index + 1, ..."""
        kind = domain.kind
        if kind is DomainKind.NATURALS:
            return itertools.count(start_index)
        if kind is DomainKind.PRIMES:
            stream = self.prime_stream()
            return itertools.islice(stream, start_index - 1, None)
        if kind is DomainKind.ODD_ORDERS:
            return (self.mult_order(2, 2 * i - 1) for i in itertools.count(start_index))
        if kind is DomainKind.PRIME_ORDERS:
            return (
                self.mult_order(2, self.nth_prime(i + 1)) for i in itertools.count(start_index)
            )
        if kind is DomainKind.RESTRICTED:
            members = (m for m in itertools.count(1) if domain.member(m))
            return itertools.islice(members, start_index - 1, None)
        raise ValueError(f"unknown domain {domain!r}")

    def eval_composition(self, spec: CompositionSpec, index: int) -> int:
        """f(domain value at `index`), chain applied outermost-first."""
        if index < 1:
            raise ValueError("index must be >= 1")
        m = self._domain_value(spec.domain, index)
        for fn in reversed(spec.chain):
            m = eval_base(fn, self.factorize(m))
        return m

    def value_stream(self, spec: CompositionSpec, start_index: int = 1) -> Iterator[int]:
        """f(domain value) for index = start_index, start_index + 1, ..."""
        rev = tuple(reversed(spec.chain))
        for m in self.domain_stream(spec.domain, start_index):
            v = m
            for fn in rev:
                v = eval_base(fn, self.factorize(v))
            yield v

    # -- bulk value tables ---------------------------------------------------

    def _spf_for_tables(self, limit: int) -> np.ndarray:
        self.ensure_spf(limit)
        return self._spf

    def _cached_table(self, key: str, limit: int, build) -> np.ndarray:
        tab = self._tables.get(key)
        if tab is None or len(tab) <= limit:
            tab = build(limit)
            with self._lock:
                cur = self._tables.get(key)
                if cur is None or len(cur) < len(tab):
                    self._tables[key] = tab
                else:
                    tab = cur
        return tab

    def phi_table(self, limit: int) -> np.ndarray:
        """phi(n) for 0 <= n <= limit (index 0 unused)."""
        return self._cached_table("phi", limit, self._build_phi_table)

    def _build_phi_table(self, limit: int) -> np.ndarray:
        out = np.arange(limit + 1, dtype=np.int64)
        for p in self.primes_upto(limit):
            seg = out[p::p]
            seg -= seg // p
        out[0] = 0
        return out

    def sigma_table(self, limit: int) -> np.ndarray:
        """sigma(n) for 0 <= n <= limit, by the divisor-slice sieve."""
        return self._cached_table("sigma", limit, self._build_sigma_table)

    @staticmethod
    def _build_sigma_table(limit: int) -> np.ndarray:
        out = np.zeros(limit + 1, dtype=np.int64)
        for d in range(1, limit + 1):
            out[d::d] += d
        return out

    def lambda_table(self, limit: int) -> np.ndarray:
        """Carmichael lambda(n) for 0 <= n <= limit."""
        return self._cached_table("lambda", limit, self._build_lambda_table)

    def _build_lambda_table(self, limit: int) -> np.ndarray:
        spf = self._spf_for_tables(limit)
        out = np.ones(limit + 1, dtype=np.int64)
        out[0] = 0
        lcm = math.lcm
        lpp = _lambda_prime_power
        for n in range(2, limit + 1):
            p = int(spf[n])
            m = n // p
            e = 1
            while m % p == 0:
                m //= p
                e += 1
            if m == 1:
                out[n] = lpp(p, e)
            else:
                out[n] = lcm(int(out[m]), lpp(p, e))
        return out

    def value_table(self, fn: BaseFn, limit: int) -> np.ndarray:
        """Bulk table of fn(n) for n <= limit."""
        tag = fn.tag
        if tag is BaseTag.PHI:
            return self.phi_table(limit)[: limit + 1]
        if tag is BaseTag.SIGMA:
            return self.sigma_table(limit)[: limit + 1]
        if tag is BaseTag.LAMBDA:
            return self.lambda_table(limit)[: limit + 1]
        if tag is BaseTag.SUM_PROPER_DIVISORS:
            out = self.sigma_table(limit)[: limit + 1] - np.arange(limit + 1, dtype=np.int64)
            if limit >= 1:
                out[1] = 1
            return out
        # divisor-valued families: pointwise via factorization
        out = np.zeros(limit + 1, dtype=np.int64)
        for n in range(1, limit + 1):
            out[n] = eval_base(fn, self.factorize(n))
        return out

    def chain_values(self, chain: tuple[BaseFn, ...], args: np.ndarray) -> np.ndarray:
        """Evaluate a composition chain over an array of inputs."""
        vals = np.asarray(args, dtype=np.int64)
        for fn in reversed(chain):
            if len(vals) == 0:
                break
            table = self.value_table(fn, int(vals.max()))
            vals = table[vals]
        return vals


_default_engine: Optional[ArithEngine] = None
_default_lock = threading.Lock()


def default_engine() -> ArithEngine:
    """Process-wide shared engine."""
    global _default_engine
    if _default_engine is None:
        with _default_lock:
            if _default_engine is None:
                _default_engine = ArithEngine()
    return _default_engine
