"""Command-line surface tying streams, censuses and experiments together.

Subcommands:

    sieve       precompute and store a smallest-prime-factor table
    stream      print the leading digits of a concatenated value stream
    count       exact k-gram census of a stream prefix (JSON report)
    classify    count n <= limit failing the strict block-frequency test
    experiment  the census/report battery (fps, divisor, omega-tail, ...)
    report      project a stored JSON report to CSV (or re-emit JSON)

Options may also come from a ``--config FILE`` of plain ``key=value``
lines whose keys are long flag names; explicit flags win on conflict,
and keys that do not belong to the active subcommand are ignored so one
file can drive a whole pipeline.  ``NF_CACHE_DIR`` names a directory
holding the default sieve cache.

Exit codes: 0 success, 2 usage error, 3 capacity/overflow.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import ngrams, reports
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
    CompositionSpec,
    Domain,
    gstar,
    load_spf_cache,
    save_spf_cache,
    spf_table,
)
from .errors import CapacityError, NormfreqError, UnknownFunctionError
from .experiments import (
    DETERMINISM_NOTE,
    THIN_SETS,
    default_checkpoints,
    divisor_preimage_census,
    extremal_ratio_report,
    growth_hypothesis_check,
    non_normality_demo,
    omega_tail_census,
    restricted_domain_check,
    small_lambda_census,
    small_value_census,
    thin_preimage_census,
)
from .words import LSF, MSF, DigitOrder, save_digits, truncate

CACHE_FILENAME = "spf.cache"

_FN_TOKENS = {
    "phi": PHI,
    "sigma": SIGMA,
    "lambda": LAMBDA,
    "s": SUM_PROPER,
    "rad": RADICAL,
    "two-squares": TWO_SQUARES,
}

_DOMAIN_TOKENS = {
    "naturals": NATURALS,
    "primes": PRIMES,
    "odd-orders": ODD_ORDERS,
    "prime-orders": PRIME_ORDERS,
}

# "msf" prints values the way they are written; the alternative order
# lists the least significant digit first ("lsf", alias "paper").
_ORDER_TOKENS = {"msf": MSF, "lsf": LSF, "paper": LSF}


def parse_chain(text: Optional[str], domain: Domain = NATURALS) -> CompositionSpec:
    """Parse a dotted chain like "phi.sigma" (outermost first) into a spec.

    Tokens: phi, sigma, lambda, s, rad, two-squares, gstar:<p1,p2,...>,
    id.  "id" (or an empty string) contributes nothing, so the empty
    chain is the identity.
    """
    chain = []
    raw = (text or "").strip()
    if raw:
        for tok in raw.split("."):
            tok = tok.strip()
            if not tok:
                raise UnknownFunctionError(f"empty function token in chain {raw!r}")
            if tok == "id":
                continue
            if tok in _FN_TOKENS:
                chain.append(_FN_TOKENS[tok])
                continue
            if tok.startswith("gstar:"):
                try:
                    primes = tuple(int(p) for p in tok[len("gstar:") :].split(","))
                    chain.append(gstar(primes))
                except ValueError as exc:
                    raise UnknownFunctionError(f"bad gstar token {tok!r}: {exc}") from exc
                continue
            raise UnknownFunctionError(f"unknown function token {tok!r}")
    return CompositionSpec(tuple(chain), domain)


def _domain(token: str) -> Domain:
    try:
        return _DOMAIN_TOKENS[token]
    except KeyError:
        raise ValueError(
            f"unknown domain {token!r} (choose from {', '.join(_DOMAIN_TOKENS)})"
        ) from None


def _order(token: str) -> DigitOrder:
    try:
        return _ORDER_TOKENS[token]
    except KeyError:
        raise ValueError(
            f"unknown digit order {token!r} (choose from {', '.join(_ORDER_TOKENS)})"
        ) from None


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def parse_config_text(text: str) -> dict[str, str]:
    """key=value lines; blank lines and '#' comments are skipped."""
    out: dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"config line {number}: expected key=value, got {raw!r}")
        out[key.strip()] = value.strip()
    return out


@dataclass(frozen=True)
class RunConfig:
    """The flags shared by stream/count/classify runs, as one record.

    `format` emits key=value lines (omitting unset fields) and `parse`
    reads them back, so format -> parse -> format is the identity.
    Lines whose keys belong to other subcommands are ignored by `parse`.
    """

    f: str = "id"
    domain: str = "naturals"
    base: int = 10
    k: int = 1
    order: str = "msf"
    digits: Optional[int] = None
    limit: Optional[int] = None
    eps: Optional[float] = None
    report: Optional[str] = None
    cache: Optional[str] = None

    def format(self) -> str:
        lines = []
        for fld in fields(self):
            value = getattr(self, fld.name)
            if value is not None:
                lines.append(f"{fld.name}={value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        pairs = parse_config_text(text)
        converters: dict[str, Callable] = {
            "f": str,
            "domain": str,
            "base": int,
            "k": int,
            "order": str,
            "digits": int,
            "limit": int,
            "eps": float,
            "report": str,
            "cache": str,
        }
        kwargs = {
            name: convert(pairs[name]) for name, convert in converters.items() if name in pairs
        }
        return cls(**kwargs)


class _OptionSet:
    """Declares a subcommand's value options once, for both argv and config.

    argparse sees every option with default None; after parsing,
    `resolve` fills unset options from the --config file and then from
    the declared defaults, so explicit flags always win.
    """

    def __init__(self, parser: argparse.ArgumentParser):
        self.parser = parser
        self.options: dict[str, tuple[Callable, object]] = {}
        parser.add_argument("--config", metavar="FILE", help="key=value defaults file")

    def add(self, name, *, convert=str, default=None, required=False, choices=None, help=""):
        if default is not None:
            help = f"{help} (default: {default})" if help else f"default: {default}"
        self.parser.add_argument(
            f"--{name}",
            dest=name.replace("-", "_"),
            type=convert,
            choices=choices,
            default=None,
            help=help,
        )
        self.options[name] = (convert, default, required)

    def resolve(self, args: argparse.Namespace) -> dict:
        file_pairs: dict[str, str] = {}
        if args.config:
            file_pairs = parse_config_text(Path(args.config).read_text(encoding="utf-8"))
        out = {}
        for name, (convert, default, required) in self.options.items():
            dest = name.replace("-", "_")
            value = getattr(args, dest)
            if value is None and name in file_pairs:
                value = convert(file_pairs[name])
            if value is None:
                value = default
            if value is None and required:
                raise ValueError(f"missing required option --{name}")
            out[dest] = value
        return out


def _parse_checkpoints(text: str) -> list[int]:
    return [int(part) for part in text.split(",")]


def _parse_primes(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(","))


# ---------------------------------------------------------------------------
# engine + cache plumbing
# ---------------------------------------------------------------------------


def default_cache_path() -> Optional[Path]:
    root = os.environ.get("NF_CACHE_DIR")
    return Path(root) / CACHE_FILENAME if root else None


def _engine(cache: Optional[str]) -> ArithEngine:
    """Fresh engine, warm-started from the sieve cache when one exists."""
    engine = ArithEngine()
    path = Path(cache) if cache else default_cache_path()
    if path is not None and path.exists():
        engine.attach_spf(load_spf_cache(path))
    return engine


def _emit(report, path: Optional[str]) -> None:
    if path:
        reports.write_report(report, path)
    else:
        sys.stdout.write(reports.canonical_json(report))


def _digits_text(digits: np.ndarray, g: int) -> str:
    values = digits.tolist()
    if g <= 10:
        return "".join(map(str, values))
    return ".".join(map(str, values))


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_sieve(args, opts: _OptionSet) -> int:
    got = opts.resolve(args)
    path = Path(got["cache"]) if got["cache"] else default_cache_path()
    if path is None:
        raise ValueError("no cache destination: pass --cache or set NF_CACHE_DIR")
    path.parent.mkdir(parents=True, exist_ok=True)
    save_spf_cache(path, spf_table(got["limit"]))
    print(f"spf cache written: {path} (limit {got['limit']})")
    return 0


def _cmd_stream(args, opts: _OptionSet) -> int:
    got = opts.resolve(args)
    rc = RunConfig(
        f=got["f"], domain=got["domain"], base=got["base"], order=got["order"],
        digits=got["digits"], cache=got["cache"],
    )
    spec = parse_chain(rc.f, _domain(rc.domain))
    order = _order(rc.order)
    result = truncate(_engine(rc.cache), spec, rc.digits, rc.base, order)
    print(_digits_text(result.digits, rc.base))
    if got["dump"]:
        save_digits(got["dump"], result.digits, rc.base, order)
    return 0


def _cmd_count(args, opts: _OptionSet) -> int:
    got = opts.resolve(args)
    rc = RunConfig(
        f=got["f"], domain=got["domain"], base=got["base"], k=got["k"], order=got["order"],
        digits=got["digits"], eps=got["eps"], report=got["report"], cache=got["cache"],
    )
    spec = parse_chain(rc.f, _domain(rc.domain))
    report = ngrams.count_stream(
        _engine(rc.cache),
        spec,
        rc.digits,
        g=rc.base,
        k=rc.k,
        order=_order(rc.order),
        eps=rc.eps,
        threads=got["threads"],
    )
    _emit(report, rc.report)
    return 0


def _cmd_classify(args, opts: _OptionSet) -> int:
    got = opts.resolve(args)
    rc = RunConfig(
        base=got["base"], k=got["k"], order=got["order"], limit=got["limit"],
        eps=got["eps"], report=got["report"],
    )
    order = _order(rc.order)
    bad = ngrams.classify_range(rc.eps, rc.k, rc.base, rc.limit, order=order, threads=got["threads"])
    payload = {
        "kind": "classification-report",
        "schema": 1,
        "eps": rc.eps,
        "k": rc.k,
        "g": rc.base,
        "order": order.value,
        "limit": rc.limit,
        "bad_count": bad,
        "bad_fraction": bad / rc.limit,
        "note": DETERMINISM_NOTE,
    }
    _emit(payload, rc.report)
    return 0


def _checkpoints(got) -> list[int]:
    return got["checkpoints"] or default_checkpoints(got["limit"])


def _single_fn(chain_text: str):
    spec = parse_chain(chain_text)
    if spec.depth != 1:
        raise ValueError(f"need exactly one function, got chain {chain_text!r}")
    return spec.chain[0]


def _cmd_exp_fps(args, opts) -> int:
    got = opts.resolve(args)
    report = small_lambda_census(_engine(got["cache"]), _checkpoints(got), threads=got["threads"])
    _emit(report, got["report"])
    return 0


def _cmd_exp_divisor(args, opts) -> int:
    got = opts.resolve(args)
    report = divisor_preimage_census(
        _engine(got["cache"]), _single_fn(got["f"]), got["d"], _checkpoints(got),
        threads=got["threads"],
    )
    _emit(report, got["report"])
    return 0


def _cmd_exp_omega_tail(args, opts) -> int:
    got = opts.resolve(args)
    report = omega_tail_census(
        _engine(got["cache"]), _single_fn(got["f"]), got["big_k"], _checkpoints(got),
        threads=got["threads"],
    )
    _emit(report, got["report"])
    return 0


def _cmd_exp_small_value(args, opts) -> int:
    got = opts.resolve(args)
    report = small_value_census(
        _engine(got["cache"]), parse_chain(got["f"]), _checkpoints(got),
        theta=got["theta"], threads=got["threads"],
    )
    _emit(report, got["report"])
    return 0


def _cmd_exp_thin_preimage(args, opts) -> int:
    got = opts.resolve(args)
    try:
        thin = THIN_SETS[got["set"]]
    except KeyError:
        raise ValueError(
            f"unknown thin set {got['set']!r} (choose from {', '.join(THIN_SETS)})"
        ) from None
    report = thin_preimage_census(
        _engine(got["cache"]), _single_fn(got["f"]), thin, _checkpoints(got),
        threads=got["threads"],
    )
    _emit(report, got["report"])
    return 0


def _cmd_exp_growth(args, opts) -> int:
    got = opts.resolve(args)
    report = growth_hypothesis_check(_engine(got["cache"]), parse_chain(got["f"]), got["limit"])
    _emit(report, got["report"])
    return 0


def _cmd_exp_non_normal(args, opts) -> int:
    got = opts.resolve(args)
    report = non_normality_demo(
        _engine(got["cache"]),
        got["primes"],
        got["k"],
        g=got["base"],
        num_digits=got["digits"],
        order=_order(got["order"]),
        threads=got["threads"],
    )
    _emit(report, got["report"])
    return 0


def _cmd_exp_extremal(args, opts) -> int:
    got = opts.resolve(args)
    report = extremal_ratio_report(_engine(got["cache"]), got["limit"])
    _emit(report, got["report"])
    return 0


def _density_member(name: str, limit: int) -> tuple[Callable[[int], bool], str]:
    if name == "primes":
        # one sieve pass beats a per-n primality test at census sizes
        mask = np.zeros(limit + 1, dtype=bool)
        mask[ArithEngine().primes_upto(limit)] = True
        return (lambda n: bool(mask[n])), "primes"
    table = {
        "naturals": lambda n: True,
        "odd": lambda n: n % 2 == 1,
        "squares": lambda n: math.isqrt(n) ** 2 == n,
        "powers-of-two": lambda n: n & (n - 1) == 0,
    }
    if name not in table:
        choices = "naturals, primes, odd, squares, powers-of-two"
        raise ValueError(f"unknown set {name!r} (choose from {choices})")
    return table[name], name


def _cmd_exp_domain_density(args, opts) -> int:
    got = opts.resolve(args)
    member, label = _density_member(got["set"], got["limit"])
    report = restricted_domain_check(
        member, label, got["exponent"], _checkpoints(got), threads=got["threads"]
    )
    _emit(report, got["report"])
    return 0


def _cmd_report(args, opts: _OptionSet) -> int:
    got = opts.resolve(args)
    payload = reports.read_report(got["in"])
    text = reports.to_csv(payload) if got["format"] == "csv" else reports.canonical_json(payload)
    if got["out"]:
        Path(got["out"]).write_text(text, encoding="ascii")
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# parser assembly
# ---------------------------------------------------------------------------


def _add_stream_options(opts: _OptionSet, *, census: bool) -> None:
    opts.add("f", default="id", help="function chain, outermost first (e.g. phi.sigma)")
    opts.add("domain", default="naturals", choices=sorted(_DOMAIN_TOKENS),
             help="index set the chain runs over")
    opts.add("base", convert=int, default=10, help="digit base g >= 2")
    opts.add("order", default="msf", choices=["msf", "lsf", "paper"],
             help="digit order inside each value: most significant first, "
                  "or least significant first (lsf; 'paper' is an alias)")
    if census:
        opts.add("k", convert=int, default=1, help="word length")
    opts.add("digits", convert=int, required=True, help="number of stream digits N")
    opts.add("cache", help="sieve cache file (default: $NF_CACHE_DIR/spf.cache)")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(
        prog="normfreq",
        description="Digit streams of arithmetic-function values and their block statistics.",
    )
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True
    registry: dict = {}

    def declare(container, key, handler, help: str) -> _OptionSet:
        name = key[1] if isinstance(key, tuple) else key
        sub = container.add_parser(name, help=help, description=help)
        opts = _OptionSet(sub)
        registry[key] = (handler, opts)
        return opts

    # --- sieve ---
    opts = declare(commands, "sieve", _cmd_sieve,
                   "precompute and store the prime-factor sieve")
    opts.add("limit", convert=int, required=True, help="largest n the table covers")
    opts.add("cache", help="destination file (default: $NF_CACHE_DIR/spf.cache)")

    # --- stream ---
    opts = declare(commands, "stream", _cmd_stream,
                   "print the first N digits of a value stream")
    _add_stream_options(opts, census=False)
    opts.add("dump", help="also write the digits to FILE (raw dump with header)")

    # --- count ---
    opts = declare(commands, "count", _cmd_count, "exact k-gram census of a stream prefix")
    _add_stream_options(opts, census=True)
    opts.add("eps", convert=float, help="also classify each concatenated value at this eps")
    opts.add("threads", convert=int, default=1, help="worker threads (any value, same output)")
    opts.add("report", help="write the JSON report here instead of stdout")

    # --- classify ---
    opts = declare(commands, "classify", _cmd_classify,
                   "count n <= limit failing the strict (eps, k) block test")
    opts.add("eps", convert=float, required=True, help="deviation tolerance")
    opts.add("k", convert=int, default=1, help="word length")
    opts.add("base", convert=int, default=10, help="digit base g >= 2")
    opts.add("order", default="msf", choices=["msf", "lsf", "paper"], help="digit order")
    opts.add("limit", convert=int, required=True, help="classify all n up to this bound")
    opts.add("threads", convert=int, default=1, help="worker threads (any value, same output)")
    opts.add("report", help="write the JSON report here instead of stdout")

    # --- experiment ---
    experiment = commands.add_parser("experiment", help="run one census/report experiment")
    operations = experiment.add_subparsers(dest="operation", metavar="OP")
    operations.required = True

    def census_options(opts: _OptionSet) -> None:
        opts.add("limit", convert=int, required=True, help="largest checkpoint x")
        opts.add("checkpoints", convert=_parse_checkpoints,
                 help="comma-separated checkpoints (default: powers of 10 up to limit)")
        opts.add("threads", convert=int, default=1, help="worker threads (any value, same output)")
        opts.add("cache", help="sieve cache file (default: $NF_CACHE_DIR/spf.cache)")
        opts.add("report", help="write the JSON report here instead of stdout")

    opts = declare(operations, ("experiment", "fps"), _cmd_exp_fps,
                   "census of n with a small unit-group exponent: lambda(n) < sqrt(n)")
    census_options(opts)

    opts = declare(operations, ("experiment", "divisor"), _cmd_exp_divisor,
                   "census of n with d | a(n), against the divisor-preimage bound")
    opts.add("f", required=True, help="one of phi, sigma, lambda")
    opts.add("d", convert=int, required=True, help="required divisor of a(n)")
    census_options(opts)

    opts = declare(operations, ("experiment", "omega-tail"), _cmd_exp_omega_tail,
                   "census of n with Omega(a(n)) > K^2 (ratio only, no verdict)")
    opts.add("f", required=True, help="one of phi, sigma, lambda")
    opts.add("big-k", convert=int, required=True, help="threshold root K")
    census_options(opts)

    opts = declare(operations, ("experiment", "small-value"), _cmd_exp_small_value,
                   "census of n with f(n) < n^(1/2^j), j the chain depth")
    opts.add("f", default="id", help="function chain, outermost first")
    opts.add("theta", convert=float, default=1.0 / 3.0,
             help="thinness exponent in x/exp((log x)^theta)")
    census_options(opts)

    opts = declare(operations, ("experiment", "thin-preimage"), _cmd_exp_thin_preimage,
                   "census of n with a(n) in a thin set, split by the proof's partition")
    opts.add("f", required=True, help="one of phi, sigma, lambda")
    opts.add("set", default="powers-of-two", choices=sorted(THIN_SETS),
             help="which thin set to census")
    census_options(opts)

    opts = declare(operations, ("experiment", "growth"), _cmd_exp_growth,
                   "average and pointwise growth ratios of log f(m) against log m")
    opts.add("f", default="id", help="function chain, outermost first")
    opts.add("limit", convert=int, required=True, help="largest m scanned")
    opts.add("cache", help="sieve cache file (default: $NF_CACHE_DIR/spf.cache)")
    opts.add("report", help="write the JSON report here instead of stdout")

    opts = declare(operations, ("experiment", "non-normal"), _cmd_exp_non_normal,
                   "count the repeating leading block of a prime-part stream")
    opts.add("primes", convert=_parse_primes, default=(2,),
             help="comma-separated primes defining the kept part")
    opts.add("k", convert=int, required=True, help="block covers f(1)..f(2^k - 1)")
    opts.add("base", convert=int, default=10, help="digit base g >= 2")
    opts.add("digits", convert=int, default=10**5, help="stream digits scanned N")
    opts.add("order", default="msf", choices=["msf", "lsf", "paper"], help="digit order")
    opts.add("threads", convert=int, default=1, help="worker threads (any value, same output)")
    opts.add("cache", help="sieve cache file (default: $NF_CACHE_DIR/spf.cache)")
    opts.add("report", help="write the JSON report here instead of stdout")

    opts = declare(operations, ("experiment", "extremal"), _cmd_exp_extremal,
                   "extremes of phi(m) loglog m / m and sigma(m) / (m loglog m)")
    opts.add("limit", convert=int, required=True, help="largest m scanned")
    opts.add("cache", help="sieve cache file (default: $NF_CACHE_DIR/spf.cache)")
    opts.add("report", help="write the JSON report here instead of stdout")

    opts = declare(operations, ("experiment", "domain-density"), _cmd_exp_domain_density,
                   "check #(S intersect [1,x]) > x/(log x)^B for a named set S")
    opts.add("set", required=True, help="naturals, primes, odd, squares, or powers-of-two")
    opts.add("exponent", convert=float, default=1.0, help="density exponent B")
    census_options(opts)

    # --- report ---
    opts = declare(commands, "report", _cmd_report,
                   "project a stored JSON report to CSV (or re-emit canonical JSON)")
    opts.add("in", required=True, help="JSON report file to read")
    opts.add("format", default="csv", choices=["csv", "json"], help="output format")
    opts.add("out", help="write here instead of stdout")

    return parser, registry


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser, registry = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed its message
        return int(exc.code or 0)
    if args.command == "experiment":
        handler, opts = registry[("experiment", args.operation)]
    else:
        handler, opts = registry[args.command]
    try:
        return handler(args, opts)
    except (CapacityError, OverflowError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (NormfreqError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
