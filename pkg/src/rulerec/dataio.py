"""CSV interchange formats.

All files are plain comma-separated text with a fixed header row.  Lines
starting with ``#`` are comments and are skipped on read; writers only
emit deterministic comment content (no timestamps), so identical inputs
produce byte-identical files.  Floats are written with ``repr``, which
round-trips them exactly.

Formats:

* records:  ``f0,...,f{d-1},action,outcome``
* probs:    ``p0,...,p{A-1}``
* weighted: ``f0,...,f{d-1},action,weight``
* curve:    ``x,proposed,benchmark,upper,lower``
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .core import DataFormatError, History, ProbTable, WeightedSet
from .evaluation import BENCHMARK, PROPOSED, ExperimentCurve


def _fmt(v: float) -> str:
    return repr(float(v))


def _write_lines(path, comments, header, rows):
    with open(path, "w", newline="\n") as fh:
        for comment in comments:
            fh.write(f"# {comment}\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _read_table(path, expected_header: str):
    """Returns (rows, line numbers); validates the header; skips comments."""
    lines = Path(path).read_text().splitlines()
    body = [(i + 1, line) for i, line in enumerate(lines) if line and not line.startswith("#")]
    if not body:
        raise DataFormatError(f"{path}: empty file")
    header_line, header = body[0]
    if header != expected_header:
        raise DataFormatError(
            f"{path}:{header_line}: expected header {expected_header!r}, got {header!r}"
        )
    rows = []
    n_cols = expected_header.count(",") + 1
    for lineno, line in body[1:]:
        cells = line.split(",")
        if len(cells) != n_cols:
            raise DataFormatError(
                f"{path}:{lineno}: expected {n_cols} columns, got {len(cells)}"
            )
        rows.append((lineno, cells))
    return rows


def _parse_float(path, lineno, col_name, text) -> float:
    try:
        return float(text)
    except ValueError:
        raise DataFormatError(
            f"{path}:{lineno}: column {col_name!r}: not a number: {text!r}"
        ) from None


def _parse_int(path, lineno, col_name, text) -> int:
    try:
        return int(text)
    except ValueError:
        raise DataFormatError(
            f"{path}:{lineno}: column {col_name!r}: not an integer: {text!r}"
        ) from None


def _comments(path) -> list[str]:
    out = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            out.append(line[1:].strip())
        elif line:
            break
    return out


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------


def records_header(d: int) -> str:
    return ",".join([f"f{i}" for i in range(d)] + ["action", "outcome"])


def write_records_csv(path, history: History, comments=()) -> None:
    rows = (
        [_fmt(v) for v in history.X[i]] + [str(int(history.actions[i])), str(int(history.outcomes[i]))]
        for i in range(len(history))
    )
    _write_lines(path, comments, records_header(history.n_features), rows)


def read_records_csv(path, n_actions: int | None = None) -> History:
    lines = Path(path).read_text().splitlines()
    header = next((l for l in lines if l and not l.startswith("#")), "")
    d = header.count(",") - 1
    if d < 1 or not header == records_header(d):
        raise DataFormatError(f"{path}: malformed records header {header!r}")
    rows = _read_table(path, records_header(d))
    X = np.empty((len(rows), d))
    actions = np.empty(len(rows), dtype=np.int64)
    outcomes = np.empty(len(rows), dtype=np.int64)
    for r, (lineno, cells) in enumerate(rows):
        for j in range(d):
            X[r, j] = _parse_float(path, lineno, f"f{j}", cells[j])
        actions[r] = _parse_int(path, lineno, "action", cells[d])
        outcomes[r] = _parse_int(path, lineno, "outcome", cells[d + 1])
    if n_actions is None:
        n_actions = max(int(actions.max(initial=0)) + 1, 2)
    return History(X, actions, outcomes, n_actions)


# ---------------------------------------------------------------------------
# Probability tables
# ---------------------------------------------------------------------------


def probs_header(n_actions: int) -> str:
    return ",".join(f"p{a}" for a in range(n_actions))


def write_probs_csv(path, probs: ProbTable, comments=()) -> None:
    rows = ([_fmt(v) for v in row] for row in probs.values)
    _write_lines(path, comments, probs_header(probs.n_actions), rows)


def read_probs_csv(path) -> ProbTable:
    lines = Path(path).read_text().splitlines()
    header = next((l for l in lines if l and not l.startswith("#")), "")
    a = header.count(",") + 1
    if a < 2 or header != probs_header(a):
        raise DataFormatError(f"{path}: malformed probability header {header!r}")
    rows = _read_table(path, probs_header(a))
    p = np.empty((len(rows), a))
    for r, (lineno, cells) in enumerate(rows):
        for j in range(a):
            p[r, j] = _parse_float(path, lineno, f"p{j}", cells[j])
    return ProbTable(p)


# ---------------------------------------------------------------------------
# Weighted sets
# ---------------------------------------------------------------------------


def weighted_header(d: int) -> str:
    return ",".join([f"f{i}" for i in range(d)] + ["action", "weight"])


def write_weighted_csv(path, weighted: WeightedSet, comments=()) -> None:
    rows = (
        [_fmt(v) for v in weighted.X[i]]
        + [str(int(weighted.actions[i])), _fmt(weighted.weights[i])]
        for i in range(len(weighted))
    )
    _write_lines(path, comments, weighted_header(weighted.n_features), rows)


def read_weighted_csv(path, n_actions: int | None = None) -> WeightedSet:
    lines = Path(path).read_text().splitlines()
    header = next((l for l in lines if l and not l.startswith("#")), "")
    d = header.count(",") - 1
    if d < 1 or header != weighted_header(d):
        raise DataFormatError(f"{path}: malformed weighted-set header {header!r}")
    rows = _read_table(path, weighted_header(d))
    X = np.empty((len(rows), d))
    actions = np.empty(len(rows), dtype=np.int64)
    weights = np.empty(len(rows))
    for r, (lineno, cells) in enumerate(rows):
        for j in range(d):
            X[r, j] = _parse_float(path, lineno, f"f{j}", cells[j])
        actions[r] = _parse_int(path, lineno, "action", cells[d])
        weights[r] = _parse_float(path, lineno, "weight", cells[d + 1])
    if n_actions is None:
        n_actions = max(int(actions.max(initial=0)) + 1, 2)
    return WeightedSet(X, actions, weights, n_actions)


# ---------------------------------------------------------------------------
# Experiment curves
# ---------------------------------------------------------------------------

CURVE_HEADER = "x,proposed,benchmark,upper,lower"


def write_curve_csv(path, curve: ExperimentCurve, comment: bool = True) -> None:
    comments = []
    if comment:
        comments = [
            " ".join(f"{k}={v}" for k, v in sorted(curve.metadata.items()))
        ]
    rows = (
        [
            _fmt(x) if isinstance(x, float) else str(x),
            _fmt(curve.rates[PROPOSED][i]),
            _fmt(curve.rates[BENCHMARK][i]),
            _fmt(curve.upper[i]),
            _fmt(curve.lower[i]),
        ]
        for i, x in enumerate(curve.x_values)
    )
    _write_lines(path, comments, CURVE_HEADER, rows)


def read_curve_csv(path) -> ExperimentCurve:
    rows = _read_table(path, CURVE_HEADER)
    xs, proposed, benchmark, upper, lower = [], [], [], [], []
    for lineno, cells in rows:
        xs.append(_parse_float(path, lineno, "x", cells[0]))
        proposed.append(_parse_float(path, lineno, "proposed", cells[1]))
        benchmark.append(_parse_float(path, lineno, "benchmark", cells[2]))
        upper.append(_parse_float(path, lineno, "upper", cells[3]))
        lower.append(_parse_float(path, lineno, "lower", cells[4]))
    metadata = {}
    for comment in _comments(path):
        for token in comment.split():
            if "=" in token:
                key, value = token.split("=", 1)
                metadata[key] = value
    return ExperimentCurve(
        x_values=xs,
        rates={PROPOSED: proposed, BENCHMARK: benchmark},
        upper=upper,
        lower=lower,
        metadata=metadata,
    )


__all__ = [
    "CURVE_HEADER",
    "read_curve_csv",
    "read_probs_csv",
    "read_records_csv",
    "read_weighted_csv",
    "records_header",
    "probs_header",
    "weighted_header",
    "write_curve_csv",
    "write_probs_csv",
    "write_records_csv",
    "write_weighted_csv",
]
