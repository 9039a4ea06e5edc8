"""Loading, imputing and encoding observational tables.

A :class:`Table` holds raw typed columns (numeric, nominal, ordinal) with
``None`` as the missing marker. :func:`encode` turns it into a
:class:`NumericMatrix`, the fully numeric design matrix every modelling
routine consumes.

Standard deviations use the sample (n - 1) convention everywhere.
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateError,
    EncodingError,
    PreconditionError,
    SchemaError,
    StructuralError,
    UnimputableColumnError,
)

NUMERIC = "numeric"
NOMINAL = "nominal"
ORDINAL = "ordinal"
KINDS = (NUMERIC, NOMINAL, ORDINAL)

DEFAULT_MISSING_TOKENS = frozenset({"", "NA", "NaN", "null"})

STANDARDIZED_TOL = 1e-9


@dataclass(frozen=True)
class Column:
    name: str
    kind: str
    values: tuple
    levels: tuple | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")
        object.__setattr__(self, "values", tuple(self.values))
        if self.kind == ORDINAL:
            if self.levels is None:
                raise SchemaError(f"ordinal column {self.name!r} needs a level ordering")
            levels = tuple(self.levels)
            if len(set(levels)) != len(levels):
                raise SchemaError(f"ordinal column {self.name!r} has repeated levels")
            unknown = {v for v in self.values if v is not None} - set(levels)
            if unknown:
                raise SchemaError(
                    f"ordinal column {self.name!r}: values {sorted(unknown)} not in levels"
                )
            object.__setattr__(self, "levels", levels)
        elif self.levels is not None:
            object.__setattr__(self, "levels", tuple(self.levels))

    @property
    def n_missing(self) -> int:
        return sum(v is None for v in self.values)

    def observed(self) -> list:
        return [v for v in self.values if v is not None]


@dataclass(frozen=True)
class Table:
    columns: tuple

    def __post_init__(self):
        cols = tuple(self.columns)
        object.__setattr__(self, "columns", cols)
        names = [c.name for c in cols]
        dupes = [n for n, k in Counter(names).items() if k > 1]
        if dupes:
            raise SchemaError(f"duplicate column names: {dupes}")
        lengths = {len(c.values) for c in cols}
        if len(lengths) > 1:
            raise StructuralError("columns have differing lengths")

    @property
    def row_count(self) -> int:
        return len(self.columns[0].values) if self.columns else 0

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise SchemaError(f"no column named {name!r}")

    def __contains__(self, name) -> bool:
        return any(c.name == name for c in self.columns)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.names)
        for i in range(self.row_count):
            writer.writerow([_format_cell(c.values[i]) for c in self.columns])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def _format_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass(frozen=True, eq=False)
class NumericMatrix:
    """Encoded design matrix; rows are samples, columns named variables."""

    column_names: tuple
    data: np.ndarray
    standardized: bool = False

    def __post_init__(self):
        names = tuple(self.column_names)
        data = np.array(self.data, dtype=float, copy=True)
        if data.ndim == 1:
            data = data.reshape(-1, 1)
        if data.ndim != 2 or data.shape[1] != len(names):
            raise SchemaError(
                f"data shape {data.shape} does not match {len(names)} column names"
            )
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names in matrix")
        if not np.all(np.isfinite(data)):
            raise PreconditionError("matrix contains missing or non-finite entries")
        if self.standardized:
            _check_standardized(data, names)
        data.setflags(write=False)
        object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "data", data)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    @property
    def n_cols(self) -> int:
        return self.data.shape[1]

    def index(self, name: str) -> int:
        try:
            return self.column_names.index(name)
        except ValueError:
            raise SchemaError(f"no column named {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.index(name)]

    def select(self, names: Sequence[str]) -> "NumericMatrix":
        idx = [self.index(n) for n in names]
        return NumericMatrix(tuple(names), self.data[:, idx], self.standardized)

    def drop(self, names: Iterable[str]) -> "NumericMatrix":
        gone = set(names)
        return self.select([n for n in self.column_names if n not in gone])

    def with_columns(self, names: Sequence[str], values: np.ndarray) -> "NumericMatrix":
        """Append columns; the result is not flagged standardized."""
        values = np.asarray(values, dtype=float).reshape(self.n_rows, -1)
        return NumericMatrix(
            self.column_names + tuple(names), np.hstack([self.data, values]), False
        )

    def equals(self, other: "NumericMatrix", atol: float = 0.0) -> bool:
        return (
            self.column_names == other.column_names
            and self.shape == other.shape
            and bool(np.allclose(self.data, other.data, rtol=0.0, atol=atol))
        )

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.column_names)
        for row in self.data:
            writer.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_csv(cls, path) -> "NumericMatrix":
        table = load_csv(path)
        bad = [c.name for c in table.columns if c.kind != NUMERIC or c.n_missing]
        if bad:
            raise EncodingError(f"non-numeric or missing cells in columns {bad}")
        data = np.array([c.values for c in table.columns], dtype=float).T
        return cls(tuple(table.names), data.reshape(table.row_count, len(table.columns)))


def _check_standardized(data: np.ndarray, names) -> None:
    if data.shape[0] < 2:
        raise PreconditionError("standardized matrix needs at least two rows")
    means = data.mean(axis=0)
    sds = data.std(axis=0, ddof=1)
    bad = [
        names[j]
        for j in range(data.shape[1])
        if abs(means[j]) > STANDARDIZED_TOL or abs(sds[j] - 1.0) > STANDARDIZED_TOL
    ]
    if bad:
        raise PreconditionError(f"columns {bad} are not standardized")


# -- directives ------------------------------------------------------------


@dataclass(frozen=True)
class Passthrough:
    pass


@dataclass(frozen=True)
class OneHot:
    categories: tuple

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(self.categories))


@dataclass(frozen=True)
class Ordinal:
    """Maps each level to an integer code; must be injective and increasing."""

    levels: tuple
    codes: tuple = ()

    def __post_init__(self):
        levels = tuple(self.levels)
        codes = tuple(self.codes) if self.codes else tuple(range(1, len(levels) + 1))
        if len(codes) != len(levels):
            raise EncodingError("ordinal map needs one code per level")
        if len(set(levels)) != len(levels):
            raise EncodingError("ordinal levels must be distinct")
        if any(b <= a for a, b in zip(codes, codes[1:])):
            raise EncodingError("ordinal codes must be strictly increasing over the levels")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "codes", codes)

    @property
    def mapping(self) -> dict:
        return dict(zip(self.levels, self.codes))


DROP_REASONS = ("redundant", "irrelevant")


@dataclass(frozen=True)
class Drop:
    reason: str

    def __post_init__(self):
        if self.reason not in DROP_REASONS:
            raise EncodingError(f"drop reason must be one of {DROP_REASONS}")


@dataclass(frozen=True)
class EncodingPlan:
    directives: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "directives", dict(self.directives))

    def __getitem__(self, name):
        return self.directives[name]

    def check(self, table: Table) -> None:
        missing = [n for n in table.names if n not in self.directives]
        extra = [n for n in self.directives if n not in table]
        if missing or extra:
            raise SchemaError(
                f"plan does not match table: uncovered {missing}, unknown {extra}"
            )

    @classmethod
    def default(
        cls,
        table: Table,
        drop: Mapping[str, str] | None = None,
        ordinal_codes: Mapping[str, Sequence[int]] | None = None,
    ) -> "EncodingPlan":
        """Numeric passthrough, nominal one-hot, ordinal 1..k.

        ``drop`` maps column name to a drop reason. One-hot categories are
        listed in order of first appearance.
        """
        drop = dict(drop or {})
        ordinal_codes = dict(ordinal_codes or {})
        unknown = [n for n in list(drop) + list(ordinal_codes) if n not in table]
        if unknown:
            raise SchemaError(f"unknown columns {unknown}")
        directives = {}
        for col in table.columns:
            if col.name in drop:
                directives[col.name] = Drop(drop[col.name])
            elif col.kind == NUMERIC:
                directives[col.name] = Passthrough()
            elif col.kind == NOMINAL:
                directives[col.name] = OneHot(tuple(dict.fromkeys(col.observed())))
            else:
                directives[col.name] = Ordinal(col.levels, ordinal_codes.get(col.name, ()))
        return cls(directives)


# -- operations ------------------------------------------------------------


def _parse_number(token: str):
    try:
        v = float(token)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _level_sort_key(v: str):
    num = _parse_number(v)
    return (0, num, v) if num is not None else (1, 0.0, v)


def load_csv(
    path,
    kind_hints: Mapping[str, str] | None = None,
    missing_tokens: Iterable[str] = DEFAULT_MISSING_TOKENS,
    ordinal_levels: Mapping[str, Sequence[str]] | None = None,
) -> Table:
    """Read a headed CSV file into a :class:`Table`.

    Columns whose non-missing cells all parse as finite numbers are numeric,
    everything else nominal, unless ``kind_hints`` says otherwise. An ordinal
    hint without explicit ``ordinal_levels`` orders levels numerically when
    possible and lexicographically otherwise.
    """
    kind_hints = dict(kind_hints or {})
    ordinal_levels = dict(ordinal_levels or {})
    missing = frozenset(missing_tokens)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise StructuralError(f"{path}: empty file, header row required") from None
        rows = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise StructuralError(
                    f"{path}: line {reader.line_num} has {len(row)} fields, expected {len(header)}"
                )
            rows.append(row)

    dupes = [n for n, k in Counter(header).items() if k > 1]
    if dupes:
        raise SchemaError(f"{path}: duplicate headers {dupes}")
    unknown = [n for n in list(kind_hints) + list(ordinal_levels) if n not in header]
    if unknown:
        raise SchemaError(f"{path}: hints refer to unknown columns {unknown}")

    columns = []
    for j, name in enumerate(header):
        raw = [None if r[j].strip() in missing else r[j].strip() for r in rows]
        kind = kind_hints.get(name)
        if kind is None:
            kind = ORDINAL if name in ordinal_levels else None
        parsed = [None if v is None else _parse_number(v) for v in raw]
        all_numeric = all(p is not None for v, p in zip(raw, parsed) if v is not None)
        if kind is None:
            kind = NUMERIC if all_numeric and any(v is not None for v in raw) else NOMINAL
        if kind not in KINDS:
            raise SchemaError(f"column {name!r}: unknown kind hint {kind!r}")
        if kind == NUMERIC:
            if not all_numeric:
                raise EncodingError(f"column {name!r} hinted numeric has non-numeric cells")
            columns.append(Column(name, NUMERIC, parsed))
        elif kind == ORDINAL:
            levels = ordinal_levels.get(name)
            if levels is None:
                levels = sorted({v for v in raw if v is not None}, key=_level_sort_key)
            columns.append(Column(name, ORDINAL, raw, tuple(levels)))
        else:
            columns.append(Column(name, NOMINAL, raw))
    return Table(tuple(columns))


def _mode(values: list):
    counts = Counter(values)
    best = max(counts.values())
    # first-in-column-order among tied values
    for v in values:
        if counts[v] == best:
            return v


def impute(table: Table) -> Table:
    """Fill numeric gaps with the column mean and categorical gaps with the mode."""
    out = []
    for col in table.columns:
        observed = col.observed()
        if not observed:
            raise UnimputableColumnError(f"column {col.name!r} has no observed values")
        if col.n_missing == 0:
            out.append(col)
            continue
        fill = math.fsum(observed) / len(observed) if col.kind == NUMERIC else _mode(observed)
        values = tuple(fill if v is None else v for v in col.values)
        out.append(Column(col.name, col.kind, values, col.levels))
    return Table(tuple(out))


def encode(table: Table, plan: EncodingPlan) -> NumericMatrix:
    plan.check(table)
    names, blocks = [], []
    for col in table.columns:
        d = plan[col.name]
        if isinstance(d, Drop):
            continue
        if col.n_missing:
            raise EncodingError(f"column {col.name!r} still has missing values; impute first")
        if isinstance(d, Passthrough):
            if col.kind != NUMERIC:
                raise EncodingError(f"column {col.name!r} is {col.kind}; passthrough needs numeric")
            names.append(col.name)
            blocks.append(np.array(col.values, dtype=float)[:, None])
        elif isinstance(d, OneHot):
            cats = {c: k for k, c in enumerate(d.categories)}
            block = np.zeros((table.row_count, len(cats)))
            for i, v in enumerate(col.values):
                if v not in cats:
                    raise EncodingError(f"column {col.name!r}: unseen category {v!r}")
                block[i, cats[v]] = 1.0
            names.extend(f"{col.name}_{c}" for c in d.categories)
            blocks.append(block)
        elif isinstance(d, Ordinal):
            mapping = d.mapping
            try:
                codes = [float(mapping[v]) for v in col.values]
            except KeyError as exc:
                raise EncodingError(
                    f"column {col.name!r}: unseen ordinal level {exc.args[0]!r}"
                ) from None
            names.append(col.name)
            blocks.append(np.array(codes)[:, None])
        else:
            raise EncodingError(f"column {col.name!r}: unknown directive {d!r}")
    data = np.hstack(blocks) if blocks else np.zeros((table.row_count, 0))
    return NumericMatrix(tuple(names), data)


def standardize(m: NumericMatrix) -> NumericMatrix:
    """Center each column and scale it to unit sample standard deviation."""
    if m.n_rows < 2:
        raise DegenerateError("standardize needs at least two rows")
    sds = m.data.std(axis=0, ddof=1)
    const = [m.column_names[j] for j in np.flatnonzero(sds == 0)]
    if const:
        raise DegenerateError(f"constant columns cannot be standardized: {const}")
    z = (m.data - m.data.mean(axis=0)) / sds
    # a second pass removes the residual rounding in mean and scale
    z = z - z.mean(axis=0)
    z = z / z.std(axis=0, ddof=1)
    return NumericMatrix(m.column_names, z, standardized=True)


def constant_columns(m: NumericMatrix) -> list[str]:
    sds = m.data.std(axis=0, ddof=1) if m.n_rows > 1 else np.zeros(m.n_cols)
    return [m.column_names[j] for j in np.flatnonzero(sds == 0)]
