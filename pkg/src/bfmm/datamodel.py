"""Mixed-type datasets with detection-limit metadata, plus CSV/schema I/O.

Data CSV: header row, one row per subject. Continuous cells are decimal
literals, categorical cells are level strings. A censored continuous
variable ``v`` has a companion column ``v_cens`` holding 0 (observed),
1 (below the lower limit) or 2 (above the upper limit).

Schema file: one column per line,
``name,kind[,levels=a|b|c][,lower=<real>][,upper=<real>]``.
Blank lines and lines starting with ``#`` are ignored.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import IngestionError, InvalidArgumentError, SchemaError

log = logging.getLogger(__name__)

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
CENSOR_SUFFIX = "_cens"


class Censor(IntEnum):
    OBSERVED = 0
    BELOW_LOWER = 1
    ABOVE_UPPER = 2


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: str
    levels: tuple = ()
    lower_limit: Optional[float] = None
    upper_limit: Optional[float] = None

    def __post_init__(self):
        for attr in ("lower_limit", "upper_limit"):
            v = getattr(self, attr)
            if v is not None:
                v = float(v)
                if not np.isfinite(v):
                    raise SchemaError(f"column {self.name!r}: {attr} must be finite")
                object.__setattr__(self, attr, v)
        object.__setattr__(self, "levels", tuple(str(l) for l in self.levels))
        if self.kind not in (CONTINUOUS, CATEGORICAL):
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            if len(self.levels) < 2 or len(set(self.levels)) != len(self.levels):
                raise SchemaError(f"column {self.name!r}: categorical columns need >= 2 unique levels")
            if self.lower_limit is not None or self.upper_limit is not None:
                raise SchemaError(f"column {self.name!r}: detection limits on a categorical column")
        else:
            if self.levels:
                raise SchemaError(f"column {self.name!r}: levels given for a continuous column")
            if (
                self.lower_limit is not None
                and self.upper_limit is not None
                and not self.lower_limit < self.upper_limit
            ):
                raise SchemaError(f"column {self.name!r}: lower limit must be below upper limit")

    @property
    def censorable(self) -> bool:
        return self.lower_limit is not None or self.upper_limit is not None

    def to_line(self) -> str:
        parts = [self.name, self.kind]
        if self.levels:
            parts.append("levels=" + "|".join(self.levels))
        if self.lower_limit is not None:
            parts.append(f"lower={self.lower_limit!r}")
        if self.upper_limit is not None:
            parts.append(f"upper={self.upper_limit!r}")
        return ",".join(parts)


def _readonly(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable n x M dataset, continuous columns first.

    ``continuous`` holds the raw values (censored cells store their limit),
    ``censor`` the per-cell :class:`Censor` codes and ``categorical`` the
    level index of each categorical cell.
    """

    columns: tuple
    continuous: np.ndarray
    censor: np.ndarray
    categorical: np.ndarray
    row_ids: tuple = field(default=())

    def __post_init__(self):
        cols = tuple(self.columns)
        object.__setattr__(self, "columns", cols)
        kinds = [c.kind for c in cols]
        q = kinds.count(CONTINUOUS)
        if kinds != [CONTINUOUS] * q + [CATEGORICAL] * (len(cols) - q):
            raise InvalidArgumentError("continuous columns must precede categorical columns")
        cont = np.asarray(self.continuous, float).reshape(-1, q) if q else np.zeros((len(self.categorical), 0))
        n = cont.shape[0]
        cens = np.asarray(self.censor, np.int8).reshape(n, q)
        cat = np.asarray(self.categorical, np.int64).reshape(n, len(cols) - q)
        for j, c in enumerate(cols[:q]):
            if c.lower_limit is None and np.any(cens[:, j] == Censor.BELOW_LOWER):
                raise SchemaError(f"column {c.name!r}: below-limit flags without a lower limit")
            if c.upper_limit is None and np.any(cens[:, j] == Censor.ABOVE_UPPER):
                raise SchemaError(f"column {c.name!r}: above-limit flags without an upper limit")
        for j, c in enumerate(cols[q:]):
            if np.any((cat[:, j] < 0) | (cat[:, j] >= len(c.levels))):
                raise InvalidArgumentError(f"column {c.name!r}: level index out of range")
        object.__setattr__(self, "continuous", _readonly(cont))
        object.__setattr__(self, "censor", _readonly(cens))
        object.__setattr__(self, "categorical", _readonly(cat))
        ids = tuple(self.row_ids) if self.row_ids else tuple(str(i + 1) for i in range(n))
        if len(ids) != n:
            raise InvalidArgumentError("row_ids length does not match the row count")
        object.__setattr__(self, "row_ids", ids)

    @property
    def n(self) -> int:
        return self.continuous.shape[0]

    @property
    def q(self) -> int:
        return self.continuous.shape[1]

    @property
    def M(self) -> int:
        return len(self.columns)

    @property
    def names(self) -> list:
        return [c.name for c in self.columns]

    @property
    def continuous_columns(self) -> tuple:
        return self.columns[: self.q]

    @property
    def categorical_columns(self) -> tuple:
        return self.columns[self.q :]

    @property
    def n_levels(self) -> list:
        return [len(c.levels) for c in self.categorical_columns]

    @property
    def lower_limits(self) -> np.ndarray:
        return np.array([-np.inf if c.lower_limit is None else c.lower_limit for c in self.continuous_columns])

    @property
    def upper_limits(self) -> np.ndarray:
        return np.array([np.inf if c.upper_limit is None else c.upper_limit for c in self.continuous_columns])

    @property
    def has_censoring(self) -> bool:
        return bool(np.any(self.censor != Censor.OBSERVED))

    def one_hot(self, j: int) -> np.ndarray:
        """n x L indicator matrix for the j-th categorical column."""
        L = len(self.categorical_columns[j].levels)
        out = np.zeros((self.n, L), dtype=np.int8)
        out[np.arange(self.n), self.categorical[:, j]] = 1
        return out

    def level_counts(self, j: int) -> np.ndarray:
        return np.bincount(self.categorical[:, j], minlength=len(self.categorical_columns[j].levels))

    def replace(self, **changes) -> "Dataset":
        kw = dict(
            columns=self.columns,
            continuous=self.continuous,
            censor=self.censor,
            categorical=self.categorical,
            row_ids=self.row_ids,
        )
        kw.update(changes)
        return Dataset(**kw)

    def equals(self, other: "Dataset") -> bool:
        return (
            self.columns == other.columns
            and self.row_ids == other.row_ids
            and np.array_equal(self.continuous, other.continuous)
            and np.array_equal(self.censor, other.censor)
            and np.array_equal(self.categorical, other.categorical)
        )


def build_dataset(columns: Sequence[ColumnSchema], values: dict, censor: Optional[dict] = None, row_ids=()) -> Dataset:
    """Assemble a Dataset from per-column arrays in any column order.

    ``values[name]`` holds floats (continuous) or level indices
    (categorical); ``censor[name]`` optional Censor codes. Censored cells
    are overwritten with their limit.
    """
    censor = censor or {}
    cont = [c for c in columns if c.kind == CONTINUOUS]
    cat = [c for c in columns if c.kind == CATEGORICAL]
    n = len(next(iter(values.values())))
    X = np.empty((n, len(cont)))
    F = np.zeros((n, len(cont)), np.int8)
    for j, c in enumerate(cont):
        X[:, j] = values[c.name]
        if c.name in censor:
            F[:, j] = censor[c.name]
            if c.lower_limit is not None:
                X[F[:, j] == Censor.BELOW_LOWER, j] = c.lower_limit
            if c.upper_limit is not None:
                X[F[:, j] == Censor.ABOVE_UPPER, j] = c.upper_limit
    C = np.empty((n, len(cat)), np.int64)
    for j, c in enumerate(cat):
        C[:, j] = values[c.name]
    return Dataset(tuple(cont + cat), X, F, C, row_ids)


# --------------------------------------------------------------------------
# schema files


def parse_schema_line(line: str) -> ColumnSchema:
    parts = [p.strip() for p in line.split(",")]
    if len(parts) < 2 or not parts[0]:
        raise SchemaError(f"malformed schema line: {line!r}")
    name, kind = parts[0], parts[1]
    levels, lower, upper = (), None, None
    for opt in parts[2:]:
        key, sep, val = opt.partition("=")
        if not sep:
            raise SchemaError(f"malformed schema option {opt!r} for column {name!r}")
        key = key.strip()
        try:
            if key == "levels":
                levels = tuple(v.strip() for v in val.split("|"))
            elif key == "lower":
                lower = float(val)
            elif key == "upper":
                upper = float(val)
            else:
                raise SchemaError(f"unknown schema option {key!r} for column {name!r}")
        except ValueError as exc:
            raise SchemaError(f"bad value in schema option {opt!r} for column {name!r}") from exc
    return ColumnSchema(name, kind, levels, lower, upper)


def read_schema(path) -> list:
    cols = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            cols.append(parse_schema_line(line))
    names = [c.name for c in cols]
    if len(set(names)) != len(names):
        raise SchemaError("duplicate column names in schema")
    if not cols:
        raise SchemaError(f"schema {path} declares no columns")
    return cols


def write_schema(columns: Sequence[ColumnSchema], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in columns:
            fh.write(c.to_line() + "\n")


# --------------------------------------------------------------------------
# data files


def load_dataset(csv_path, schema_path) -> Dataset:
    schema = read_schema(schema_path)
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestionError(f"{csv_path}: empty file") from None
        rows = [r for r in reader if r]

    pos = {h: i for i, h in enumerate(header)}
    declared = {c.name for c in schema}
    for h in header:
        if h.endswith(CENSOR_SUFFIX) and h[: -len(CENSOR_SUFFIX)] in declared:
            base = next(c for c in schema if c.name == h[: -len(CENSOR_SUFFIX)])
            if not base.censorable:
                raise SchemaError(f"flag column {h!r} present but schema gives no limits for {base.name!r}")
    for c in schema:
        if c.name not in pos:
            raise IngestionError(f"{csv_path}: schema column {c.name!r} missing from header")
    id_col = pos.get("subject_id")

    values, censor = {}, {}
    for c in schema:
        j = pos[c.name]
        flag_j = pos.get(c.name + CENSOR_SUFFIX)
        vals = np.empty(len(rows), float if c.kind == CONTINUOUS else np.int64)
        flags = np.zeros(len(rows), np.int8)
        lookup = {lv: k for k, lv in enumerate(c.levels)}
        for r, row in enumerate(rows, start=2):
            if len(row) != len(header):
                raise IngestionError(f"{csv_path}: row {r} has {len(row)} cells, expected {len(header)}")
            cell = row[j].strip()
            flag = Censor.OBSERVED
            if flag_j is not None:
                try:
                    flag = Censor(int(row[flag_j]))
                except ValueError:
                    raise IngestionError(
                        f"{csv_path}: row {r}, column {c.name + CENSOR_SUFFIX!r}: bad flag {row[flag_j]!r}"
                    ) from None
                if flag == Censor.BELOW_LOWER and c.lower_limit is None:
                    raise SchemaError(f"{csv_path}: row {r}: {c.name!r} flagged below a lower limit the schema lacks")
                if flag == Censor.ABOVE_UPPER and c.upper_limit is None:
                    raise SchemaError(f"{csv_path}: row {r}: {c.name!r} flagged above an upper limit the schema lacks")
            flags[r - 2] = flag
            if c.kind == CATEGORICAL:
                if cell == "":
                    raise IngestionError(f"{csv_path}: row {r}, column {c.name!r}: missing value")
                if cell not in lookup:
                    raise IngestionError(f"{csv_path}: row {r}, column {c.name!r}: unknown level {cell!r}")
                vals[r - 2] = lookup[cell]
                continue
            if flag != Censor.OBSERVED:
                vals[r - 2] = c.lower_limit if flag == Censor.BELOW_LOWER else c.upper_limit
                continue
            if cell == "":
                raise IngestionError(f"{csv_path}: row {r}, column {c.name!r}: missing value")
            try:
                v = float(cell)
            except ValueError:
                raise IngestionError(f"{csv_path}: row {r}, column {c.name!r}: not a number {cell!r}") from None
            if not math.isfinite(v):
                raise IngestionError(f"{csv_path}: row {r}, column {c.name!r}: non-finite value")
            if (c.lower_limit is not None and v < c.lower_limit) or (c.upper_limit is not None and v > c.upper_limit):
                raise IngestionError(
                    f"{csv_path}: row {r}, column {c.name!r}: observed value {v} outside detection limits"
                )
            vals[r - 2] = v
        values[c.name] = vals
        if c.kind == CONTINUOUS:
            censor[c.name] = flags
    ids = tuple(row[id_col].strip() for row in rows) if id_col is not None else ()
    return build_dataset(schema, values, censor, ids)


def write_dataset(ds: Dataset, csv_path, schema_path) -> None:
    """Write ``ds`` so that :func:`load_dataset` reproduces it exactly."""
    write_schema(ds.columns, schema_path)
    header = ["subject_id"]
    for c in ds.columns:
        header.append(c.name)
        if c.censorable:
            header.append(c.name + CENSOR_SUFFIX)
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(ds.n):
            row = [ds.row_ids[i]]
            for j, c in enumerate(ds.continuous_columns):
                row.append(repr(float(ds.continuous[i, j])))
                if c.censorable:
                    row.append(str(int(ds.censor[i, j])))
            for j, c in enumerate(ds.categorical_columns):
                row.append(c.levels[ds.categorical[i, j]])
            w.writerow(row)


def read_labels(path) -> np.ndarray:
    """Read a labels file: one integer per row, optional header."""
    labels = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for k, row in enumerate(reader):
            if not row:
                continue
            try:
                labels.append(int(row[0]))
            except ValueError:
                if k == 0:
                    continue
                raise IngestionError(f"{path}: row {k + 1}: not an integer label {row[0]!r}") from None
    return np.asarray(labels, dtype=np.int64)


def write_labels(labels, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("label\n")
        for v in labels:
            fh.write(f"{int(v)}\n")


# --------------------------------------------------------------------------
# diagnostics


@dataclass
class ColumnStats:
    name: str
    n_observed: int
    mean: Optional[float]
    sd: Optional[float]
    note: str = ""


def standardization_report(ds: Dataset) -> list:
    """Observed-only mean/sd for each continuous column.

    Purely diagnostic: nothing in the pipeline rescales the data.
    """
    out = []
    for j, c in enumerate(ds.continuous_columns):
        obs = ds.continuous[ds.censor[:, j] == Censor.OBSERVED, j]
        if obs.size == 0:
            out.append(ColumnStats(c.name, 0, None, None, "no observed values"))
            continue
        sd = float(obs.std(ddof=1)) if obs.size > 1 else 0.0
        note = ""
        if sd == 0.0:
            note = "zero variance"
            log.warning("column %s has zero observed variance", c.name)
        out.append(ColumnStats(c.name, int(obs.size), float(obs.mean()), sd, note))
    return out
