"""Canonical JSON emission and CSV projections for report payloads.

Every report in this package serializes through `to_dict()` into a plain
dict tagged with a "kind" key.  This module owns the byte layout: JSON is
written with sorted keys, two-space indent, ASCII escapes and a trailing
newline, so equal payloads produce equal files.  CSV is a lossy projection
of the JSON (headers per kind below); round-tripping through a JSON file
and projecting gives the same bytes as projecting the live object.
"""

from __future__ import annotations

import json
import os
from typing import Any

CSV_KINDS = (
    "census-report",
    "kgram-frequency-report",
    "classification-report",
    "growth-report",
    "block-repetition-report",
    "extremal-ratio-report",
    "density-report",
)


def _payload(report: Any) -> dict:
    if isinstance(report, dict):
        return report
    to_dict = getattr(report, "to_dict", None)
    if to_dict is None:
        raise TypeError(f"not a report payload: {type(report).__name__}")
    return to_dict()


def canonical_json(report: Any) -> str:
    """Deterministic JSON text for a report object or payload dict."""
    return json.dumps(_payload(report), sort_keys=True, indent=2, ensure_ascii=True) + "\n"


def write_report(report: Any, path: str | os.PathLike) -> str:
    text = canonical_json(report)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)
    return text


def read_report(path: str | os.PathLike) -> dict:
    with open(path, "r", encoding="ascii") as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict) or "kind" not in payload:
        raise ValueError(f"{path}: not a report file (missing 'kind')")
    return payload


def _cell(value: Any) -> str:
    """One CSV cell; floats keep full repr so the projection stays exact."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def census_csv(payload: dict) -> str:
    rows = payload["rows"]
    has_parts = any(r.get("parts") for r in rows)
    part_keys = sorted({k for r in rows for k in (r.get("parts") or ())})
    header = ["x", "count", "bound", "ratio", "verdict"] + part_keys
    lines = [",".join(header)]
    for r in rows:
        cells = [_cell(r[key]) for key in ("x", "count", "bound", "ratio", "verdict")]
        if has_parts:
            parts = r.get("parts") or {}
            cells += [_cell(parts.get(k, "")) for k in part_keys]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def kgram_csv(payload: dict) -> str:
    windows = payload["windows"]
    complete = payload["complete_counts"]
    boundary = payload["boundary_counts"]
    tail = payload["tail_counts"]
    lines = ["word,count,complete,boundary,tail,freq"]
    for word in sorted(payload["counts"]):
        count = payload["counts"][word]
        freq = count / windows if windows else 0.0
        lines.append(
            ",".join(
                [
                    word,
                    str(count),
                    str(complete.get(word, 0)),
                    str(boundary.get(word, 0)),
                    str(tail.get(word, 0)),
                    repr(freq),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def _field_value_csv(payload: dict, fields: tuple[str, ...]) -> str:
    lines = ["field,value"]
    for name in fields:
        lines.append(f"{name},{_cell(payload[name])}")
    return "\n".join(lines) + "\n"


def classification_csv(payload: dict) -> str:
    return _field_value_csv(
        payload, ("eps", "k", "g", "order", "limit", "bad_count", "bad_fraction")
    )


def growth_csv(payload: dict) -> str:
    return _field_value_csv(
        payload,
        ("spec", "x", "sum_ratio", "max_ratio", "lower_reference", "upper_reference", "passes"),
    )


def block_repetition_csv(payload: dict) -> str:
    out = dict(payload)
    out["primes"] = ";".join(str(p) for p in payload["primes"])
    return _field_value_csv(
        out,
        (
            "primes",
            "k",
            "g",
            "N",
            "block",
            "block_len",
            "n",
            "period_modulus",
            "period_count",
            "observed",
            "normal_ceiling",
            "separation",
        ),
    )


def extremal_csv(payload: dict) -> str:
    return _field_value_csv(
        payload,
        (
            "x",
            "min_phi_ratio",
            "argmin_phi",
            "max_sigma_ratio",
            "argmax_sigma",
            "e_neg_gamma",
            "e_gamma",
        ),
    )


def density_csv(payload: dict) -> str:
    lines = ["x,count,floor,passes"]
    for r in payload["rows"]:
        lines.append(",".join(_cell(r[key]) for key in ("x", "count", "floor", "passes")))
    return "\n".join(lines) + "\n"


_PROJECTIONS = {
    "census-report": census_csv,
    "kgram-frequency-report": kgram_csv,
    "classification-report": classification_csv,
    "growth-report": growth_csv,
    "block-repetition-report": block_repetition_csv,
    "extremal-ratio-report": extremal_csv,
    "density-report": density_csv,
}


def to_csv(report: Any) -> str:
    """Project any report payload to CSV, dispatching on its "kind" tag."""
    payload = _payload(report)
    kind = payload.get("kind")
    project = _PROJECTIONS.get(kind)
    if project is None:
        raise ValueError(f"no CSV projection for report kind {kind!r}")
    return project(payload)
