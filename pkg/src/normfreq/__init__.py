"""Digit streams of arithmetic-function values and their block statistics.

Concatenate f(1), f(2), f(3), ... in base g — where f composes totient,
divisor-sum, unit-group-exponent and related maps over a chosen index
set — and measure how evenly every length-k digit block occurs in the
prefix.  Exact integer censuses with closed-form reference bounds sit
alongside the stream machinery; everything is deterministic and safe to
parallelize.
"""

from .arith import (
    LAMBDA,
    NATURALS,
    ODD_ORDERS,
    PHI,
    PRIME_ORDERS,
    PRIMES,
    RADICAL,
    SIGMA,
    SUM_PROPER,
    TWO_SQUARES,
    ArithEngine,
    BaseFn,
    BaseTag,
    CompositionSpec,
    Domain,
    DomainKind,
    Factorization,
    big_omega,
    default_engine,
    gstar,
    is_prime,
    lam,
    load_spf_cache,
    phi,
    radical,
    restricted,
    save_spf_cache,
    sigma,
    small_omega,
    spf_table,
    sum_proper_divisors,
)
from .cli import RunConfig, main, parse_chain
from .errors import (
    CacheFormatError,
    CapacityError,
    DegenerateInputError,
    InvalidDigitError,
    NormfreqError,
    NotCoprimeError,
    ShapeMismatchError,
    UnknownFunctionError,
)
from .ngrams import (
    FrequencyReport,
    KGramCounter,
    classify_checkpoints,
    classify_range,
    count_stream,
    fit_meager_exponent,
    merge,
)
from .reports import canonical_json, read_report, to_csv, write_report
from .words import (
    LSF,
    MSF,
    Alphabet,
    DigitOrder,
    DigitStream,
    Word,
    digit_length,
    digits_of,
    is_eps_k_normal,
    load_digits,
    occurrences,
    save_digits,
    to_word,
    truncate,
    word_value,
)

__version__ = "0.1.0"
