"""CSV batch replay, estimator-state persistence and held-out prediction error.

CSV files are comma separated with a header row. Rows are grouped into
batches either by fixed size in file order or by the value of a batch
column; in the latter case each group must be contiguous, so at most one
batch is ever held in memory.

State files are single JSON documents::

    {"format_version": 1, "kind": "reer", "tau": ..., "p": ...,
     "n_seen": ..., "batches_seen": ..., "beta": [...], "h": [... p*p, row-major]}

PAER/DCER accumulators use ``"kind": "paer"``/``"dcer"`` with ``acc_mat``
and ``acc_vec`` in place of ``h`` and ``beta``; a bare coefficient vector
uses ``"kind": "coefficients"``. Floats are written with 17 significant
digits, so a load after a save gives bit-identical arrays.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Union

import numpy as np

from .baselines import DcerState, PaerState, WeightMode
from .expectile import Batch, Coefficients, asymmetric_loss, check_tau
from .renewable import SummaryState

__all__ = [
    "FORMAT_VERSION",
    "CsvBatchReader",
    "EvalReport",
    "MalformedRowError",
    "StateFormatError",
    "StreamSpec",
    "dumps_state",
    "evaluate_mpe",
    "format_float",
    "load_state",
    "save_state",
    "state_from_dict",
    "state_to_dict",
]

FORMAT_VERSION = 1

State = Union[SummaryState, PaerState, DcerState, Coefficients]


class MalformedRowError(ValueError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


class StateFormatError(ValueError):
    """A state file is unreadable, of an unknown version, or inconsistent."""


@dataclass(frozen=True)
class StreamSpec:
    """Where a stream comes from and how rows become batches.

    Exactly one of ``batch_column`` and ``batch_size`` must be set.
    """

    source: str
    response_column: str
    feature_columns: Sequence[str]
    batch_column: Optional[str] = None
    batch_size: Optional[int] = None
    add_intercept: bool = True
    drop_bad_rows: bool = False

    def __post_init__(self):
        object.__setattr__(self, "feature_columns", tuple(self.feature_columns))
        if (self.batch_column is None) == (self.batch_size is None):
            raise ValueError("set exactly one of batch_column and batch_size")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if not self.feature_columns:
            raise ValueError("at least one feature column is required")

    @property
    def p(self) -> int:
        return len(self.feature_columns) + int(self.add_intercept)


class CsvBatchReader:
    """Iterate a CSV file as a sequence of :class:`~reer.expectile.Batch`.

    ``peak_rows`` records the largest number of rows buffered at once and
    ``dropped_rows`` the rows skipped under ``drop_bad_rows``.
    """

    def __init__(self, spec: StreamSpec):
        self.spec = spec
        self.peak_rows = 0
        self.dropped_rows = 0
        self.rows_read = 0

    def _columns(self, header: List[str]):
        spec = self.spec
        index = {name.strip(): i for i, name in enumerate(header)}
        wanted = [spec.response_column, *spec.feature_columns]
        if spec.batch_column is not None:
            wanted.append(spec.batch_column)
        missing = [c for c in wanted if c not in index]
        if missing:
            raise StateFormatError(f"columns not found in {spec.source}: {', '.join(missing)}")
        y_col = index[spec.response_column]
        x_cols = [index[c] for c in spec.feature_columns]
        g_col = index[spec.batch_column] if spec.batch_column is not None else None
        return y_col, x_cols, g_col

    def _parse(self, row: List[str], line_no: int, y_col: int, x_cols: List[int]):
        try:
            values = [float(row[y_col])] + [float(row[c]) for c in x_cols]
        except (IndexError, ValueError):
            raise MalformedRowError(line_no, "missing or non-numeric value") from None
        if not all(math.isfinite(v) for v in values):
            raise MalformedRowError(line_no, "non-finite value")
        return values

    def _make_batch(self, rows: List[List[float]]) -> Batch:
        self.peak_rows = max(self.peak_rows, len(rows))
        arr = np.array(rows, dtype=np.float64)
        x = arr[:, 1:]
        if self.spec.add_intercept:
            x = np.hstack([np.ones((arr.shape[0], 1)), x])
        return Batch(x, arr[:, 0])

    def __iter__(self) -> Iterator[Batch]:
        spec = self.spec
        with open(spec.source, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise StateFormatError(f"{spec.source} is empty; a header row is required") from None
            y_col, x_cols, g_col = self._columns(header)

            rows: List[List[float]] = []
            group = None
            finished = set()
            for row in reader:
                line_no = reader.line_num
                if not row:
                    continue
                try:
                    values = self._parse(row, line_no, y_col, x_cols)
                    key = row[g_col] if g_col is not None else None
                except MalformedRowError:
                    if not spec.drop_bad_rows:
                        raise
                    self.dropped_rows += 1
                    continue
                self.rows_read += 1

                if g_col is not None:
                    if key != group:
                        if key in finished:
                            raise MalformedRowError(
                                line_no, f"batch {key!r} reappears after other batches; groups must be contiguous"
                            )
                        if rows:
                            finished.add(group)
                            yield self._make_batch(rows)
                            rows = []
                        group = key
                    rows.append(values)
                else:
                    rows.append(values)
                    if len(rows) == spec.batch_size:
                        yield self._make_batch(rows)
                        rows = []
            if rows:
                yield self._make_batch(rows)


def _floats(values) -> list:
    return [float(v) for v in np.asarray(values, dtype=np.float64).ravel()]


def state_to_dict(state: State) -> dict:
    out = {"format_version": FORMAT_VERSION}
    if isinstance(state, SummaryState):
        out.update(kind="reer", tau=state.tau, p=state.p, n_seen=state.n_seen,
                   batches_seen=state.batches_seen, beta=_floats(state.beta), h=_floats(state.h))
    elif isinstance(state, (PaerState, DcerState)):
        out.update(kind="paer" if isinstance(state, PaerState) else "dcer", tau=state.tau, p=state.p,
                   n_seen=state.n_seen, batches_seen=state.batches_seen,
                   acc_mat=_floats(state.acc_mat), acc_vec=_floats(state.acc_vec))
        if isinstance(state, PaerState):
            out["weight_mode"] = state.weight_mode.value
    elif isinstance(state, Coefficients):
        out.update(kind="coefficients", tau=state.tau, p=state.p, beta=_floats(state.beta))
    else:
        raise TypeError(f"cannot serialize {type(state).__name__}")
    return out


def _vector(doc: dict, key: str, size: int) -> np.ndarray:
    values = doc.get(key)
    if not isinstance(values, list) or len(values) != size:
        got = len(values) if isinstance(values, list) else type(values).__name__
        raise StateFormatError(f"field {key!r} must hold {size} numbers, got {got}")
    try:
        arr = np.array(values, dtype=np.float64)
    except (TypeError, ValueError):
        raise StateFormatError(f"field {key!r} holds non-numeric values") from None
    if not np.all(np.isfinite(arr)):
        raise StateFormatError(f"field {key!r} holds non-finite values")
    return arr


def state_from_dict(doc: dict) -> State:
    if not isinstance(doc, dict):
        raise StateFormatError("state document must be a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise StateFormatError(f"unsupported format_version {version!r} (this reader understands {FORMAT_VERSION})")
    kind = doc.get("kind", "reer")
    try:
        p = int(doc["p"])
        tau = check_tau(doc["tau"])
        if p < 1:
            raise StateFormatError(f"p must be positive, got {p}")
        if kind == "coefficients":
            return Coefficients(_vector(doc, "beta", p), tau)
        n_seen, batches_seen = int(doc["n_seen"]), int(doc["batches_seen"])
        if kind == "reer":
            return SummaryState(
                h=_vector(doc, "h", p * p).reshape(p, p),
                beta=_vector(doc, "beta", p),
                n_seen=n_seen,
                batches_seen=batches_seen,
                tau=tau,
            )
        if kind in ("paer", "dcer"):
            if batches_seen < 0 or n_seen < batches_seen:
                raise StateFormatError(f"inconsistent counters n_seen={n_seen}, batches_seen={batches_seen}")
            args = (_vector(doc, "acc_mat", p * p).reshape(p, p), _vector(doc, "acc_vec", p), n_seen, batches_seen, tau)
            if kind == "paer":
                return PaerState(*args, WeightMode(doc.get("weight_mode", WeightMode.FINAL_FRACTION.value)))
            return DcerState(*args)
    except KeyError as exc:
        raise StateFormatError(f"missing field {exc.args[0]!r}") from None
    except StateFormatError:
        raise
    except (TypeError, ValueError) as exc:
        raise StateFormatError(str(exc)) from None
    raise StateFormatError(f"unknown state kind {kind!r}")


def format_float(v: float) -> str:
    """17 significant digits; always parses back as a float (``-0.0`` included)."""
    s = format(float(v), ".17g")
    if not math.isfinite(float(v)):
        raise ValueError(f"cannot serialize non-finite value {v!r}")
    return s if any(c in s for c in ".e") else s + ".0"


def _json_value(v) -> str:
    if isinstance(v, float):
        return format_float(v)
    if isinstance(v, list):
        return "[" + ", ".join(_json_value(x) for x in v) + "]"
    return json.dumps(v)


def dumps_state(state: State) -> str:
    doc = state_to_dict(state)
    return "{" + ", ".join(f"{json.dumps(k)}: {_json_value(v)}" for k, v in doc.items()) + "}\n"


def save_state(state: State, path: Union[str, os.PathLike]) -> None:
    """Write ``state`` as JSON, atomically replacing ``path``."""
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(dumps_state(state))
    os.replace(tmp, path)


def load_state(path: Union[str, os.PathLike]) -> State:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise StateFormatError(f"{os.fspath(path)} is not valid JSON (truncated?): {exc}") from None
    return state_from_dict(doc)


@dataclass(frozen=True)
class EvalReport:
    tau: float
    mpe: float
    n_test: int
    method: str

    def to_dict(self) -> dict:
        return {"tau": self.tau, "mpe": self.mpe, "n_test": self.n_test, "method": self.method}


def evaluate_mpe(beta, tau: float, batches, method: str = "unknown") -> EvalReport:
    """Mean expectile loss of ``y - x @ beta`` over all rows of ``batches``.

    Accumulated batch by batch, so the test set is never loaded whole.
    """
    beta = np.asarray(beta, dtype=np.float64)
    total, n = 0.0, 0
    for batch in batches:
        if batch.p != beta.size:
            raise StateFormatError(f"test data has {batch.p} columns but coefficients have {beta.size}")
        total += float(np.sum(asymmetric_loss(batch.y - batch.x @ beta, tau)))
        n += batch.n
    if n == 0:
        raise ValueError("no test rows")
    return EvalReport(tau=float(tau), mpe=total / n, n_test=n, method=method)
