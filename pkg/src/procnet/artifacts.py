"""Versioned line-oriented text files for discretizers, Q-tables and traces.

Every artifact starts with a ``<kind> <version>`` header line. The rest is
``key value...`` lines separated by single spaces. Floats are written with
``repr`` so a write/read cycle is exact.

Discretizer::

    procnet-discretizer 1
    bins 5
    edges 3.13 3.70 4.75 9.07

Q-table (embeds the discretizer it was trained with)::

    procnet-qtable 1
    bins 5
    edges 3.13 3.70 4.75 9.07
    actions 5
    policy 1 0 1 1 1
    q 0 -60.1 -60.4 ...
    visits 0 812 190 ...
    ...
"""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .env import Discretizer, EpisodeResult
from .qlearning import QTable

DISCRETIZER_HEADER = "procnet-discretizer"
QTABLE_HEADER = "procnet-qtable"
FORMAT_VERSION = 1


class ArtifactError(ValueError):
    """A file is missing, malformed, or does not fit the scenario."""


def _floats(xs: Iterable[float]) -> str:
    return " ".join(repr(float(x)) for x in xs)


def _parse(text: str, header: str) -> dict[str, list[list[str]]]:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ArtifactError("empty file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != header:
        raise ArtifactError(f"expected a {header!r} file, got header {lines[0]!r}")
    if head[1] != str(FORMAT_VERSION):
        raise ArtifactError(f"unsupported {header} version {head[1]}")
    out: dict[str, list[list[str]]] = {}
    for ln in lines[1:]:
        key, *rest = ln.split()
        out.setdefault(key, []).append(rest)
    return out


def _one(fields: dict, key: str) -> list[str]:
    rows = fields.get(key)
    if rows is None:
        raise ArtifactError(f"missing {key!r} line")
    if len(rows) != 1:
        raise ArtifactError(f"duplicate {key!r} line")
    return rows[0]


def _discretizer_lines(d: Discretizer) -> list[str]:
    return [f"bins {d.M}", f"edges {_floats(d.edges)}".rstrip()]


def _read_discretizer(fields) -> Discretizer:
    try:
        M = int(_one(fields, "bins")[0])
        edges = tuple(float(x) for x in _one(fields, "edges"))
        return Discretizer(edges, M)
    except (IndexError, ValueError) as exc:
        raise ArtifactError(f"bad discretizer: {exc}") from None


def dumps_discretizer(d: Discretizer) -> str:
    return "\n".join([f"{DISCRETIZER_HEADER} {FORMAT_VERSION}", *_discretizer_lines(d)]) + "\n"


def loads_discretizer(text: str) -> Discretizer:
    return _read_discretizer(_parse(text, DISCRETIZER_HEADER))


def dumps_qtable(q: QTable, discretizer: Discretizer) -> str:
    if q.n_states != discretizer.M:
        raise ArtifactError(f"table has {q.n_states} states, discretizer has {discretizer.M} bins")
    lines = [f"{QTABLE_HEADER} {FORMAT_VERSION}", *_discretizer_lines(discretizer)]
    lines.append(f"actions {q.n_actions}")
    lines.append("policy " + " ".join(str(a) for a in q.policy()))
    for s in range(q.n_states):
        lines.append(f"q {s} {_floats(q.values[s])}")
    for s in range(q.n_states):
        lines.append(f"visits {s} " + " ".join(str(int(v)) for v in q.visits[s]))
    return "\n".join(lines) + "\n"


def loads_qtable(text: str) -> tuple[QTable, Discretizer]:
    fields = _parse(text, QTABLE_HEADER)
    disc = _read_discretizer(fields)
    try:
        n_actions = int(_one(fields, "actions")[0])
        q = QTable.zeros(disc.M, n_actions)
        for name, arr, conv in (("q", q.values, float), ("visits", q.visits, int)):
            rows = fields.get(name, [])
            seen = set()
            for row in rows:
                s = int(row[0])
                if not 0 <= s < disc.M or s in seen:
                    raise ArtifactError(f"bad or repeated state {s} in {name!r} lines")
                if len(row) - 1 != n_actions:
                    raise ArtifactError(f"{name!r} line for state {s} has {len(row) - 1} values")
                arr[s] = [conv(x) for x in row[1:]]
                seen.add(s)
            if len(seen) != disc.M:
                raise ArtifactError(f"{name!r} lines cover {len(seen)} of {disc.M} states")
    except (IndexError, ValueError) as exc:
        if isinstance(exc, ArtifactError):
            raise
        raise ArtifactError(f"bad Q-table: {exc}") from None
    if not np.all(np.isfinite(q.values)):
        raise ArtifactError("Q-table holds non-finite values")
    stored = _one(fields, "policy")
    if tuple(int(a) for a in stored) != q.policy():
        raise ArtifactError("stored policy line does not match the table values")
    return q, disc


def _read(path: str | Path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ArtifactError(f"cannot read {path}: {exc.strerror}") from None


def read_discretizer(path: str | Path) -> Discretizer:
    return loads_discretizer(_read(path))


def write_discretizer(d: Discretizer, path: str | Path):
    Path(path).write_text(dumps_discretizer(d))


def read_qtable(path: str | Path) -> tuple[QTable, Discretizer]:
    return loads_qtable(_read(path))


def write_qtable(q: QTable, discretizer: Discretizer, path: str | Path):
    Path(path).write_text(dumps_qtable(q, discretizer))


def moving_average(x: np.ndarray, window: int) -> np.ndarray:
    """Trailing mean over ``window`` samples; the first entries average what exists."""
    if window < 1:
        raise ValueError("moving-average window must be positive")
    c = np.concatenate([[0.0], np.cumsum(x, dtype=float)])
    idx = np.arange(1, len(x) + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def trace_rows(result: EpisodeResult, K: int, window_starts: Sequence[int]) -> list[tuple[int, float, int, int]]:
    """``(k, tr(P_k), window index, action)`` for ``k = k0 .. K-1``."""
    traces = result.trace.traces
    steps = result.trace.steps
    starts = np.asarray(window_starts)
    rows = []
    for k, tr in zip(steps[: K - steps[0]], traces):
        l = int(np.searchsorted(starts, k, side="right") - 1)
        rows.append((int(k), float(tr), l, result.decisions[l]))
    return rows


def write_trace_csv(rows, path: str | Path, value_name: str = "trace"):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", value_name, "window_index", "action"])
        for k, v, l, a in rows:
            w.writerow([k, repr(v), l, a])


def write_curve_csv(returns: np.ndarray, evals, path: str | Path):
    """Training curve: every episode's return, greedy cost/return where evaluated."""
    by_ep = {t: (c, r) for t, c, r in evals}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "return", "greedy_cost", "greedy_return"])
        for t, ret in enumerate(returns, start=1):
            c, r = by_ep.get(t, ("", ""))
            w.writerow([t, repr(float(ret)), c if c == "" else repr(c), r if r == "" else repr(r)])
