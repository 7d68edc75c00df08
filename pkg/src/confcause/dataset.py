"""Tabular observation data: loading, role/kind metadata, discretization.

A dataset is a rectangular table of system-run observations. Every column is
tagged with a *role* — manipulable configuration option, non-manipulable
system metric, or performance objective — and a value *kind*. Categorical and
boolean columns are stored as dense integer codes; the original labels live in
``VariableMeta.domain`` so serialization round-trips.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import IO, Any, Mapping, Sequence

import numpy as np

from .errors import (
    BadBinCount,
    DuplicateName,
    EmptyDataset,
    InputError,
    MissingRole,
    NonDiscreteVariable,
    NonNumericCell,
    SchemaMismatch,
    UnknownVariable,
)

logger = logging.getLogger(__name__)

_TRUE_TOKENS = {"true", "1", "yes", "on"}
_FALSE_TOKENS = {"false", "0", "no", "off"}


class Role(str, Enum):
    OPTION = "option"
    METRIC = "metric"
    OBJECTIVE = "objective"


class Kind(str, Enum):
    CONTINUOUS = "continuous"
    DISCRETE = "discrete"
    BOOLEAN = "boolean"
    CATEGORICAL = "categorical"


@dataclass(frozen=True)
class VariableMeta:
    """Name, role and kind of one column; ``domain`` maps codes back to labels."""

    name: str
    role: Role
    kind: Kind
    domain: tuple[str, ...] | None = None


@dataclass(frozen=True)
class Dataset:
    """Immutable column store. ``columns[name]`` is a 1-D array of length
    ``sample_count`` (float64 for continuous columns, int64 otherwise)."""

    variables: tuple[VariableMeta, ...]
    columns: Mapping[str, np.ndarray]
    sample_count: int

    def __post_init__(self) -> None:
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise DuplicateName("duplicate variable names", names=names)
        for v in self.variables:
            col = self.columns[v.name]
            if col.shape != (self.sample_count,):
                raise InputError(
                    "column length mismatch", variable=v.name,
                    expected=self.sample_count, actual=int(col.shape[0]),
                )

    # -- lookups ----------------------------------------------------------

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def meta(self, name: str) -> VariableMeta:
        for v in self.variables:
            if v.name == name:
                return v
        raise UnknownVariable(f"no such variable: {name}", variable=name)

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise UnknownVariable(f"no such variable: {name}", variable=name)
        return self.columns[name]

    def by_role(self, role: Role) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables if v.role == role)

    @property
    def options(self) -> tuple[str, ...]:
        return self.by_role(Role.OPTION)

    @property
    def metrics(self) -> tuple[str, ...]:
        return self.by_role(Role.METRIC)

    @property
    def objectives(self) -> tuple[str, ...]:
        return self.by_role(Role.OBJECTIVE)

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        """Stack the named columns as float64, shape (sample_count, len(names))."""
        return np.column_stack([self.column(n).astype(np.float64) for n in names])

    # -- construction helpers ----------------------------------------------

    def with_columns(
        self,
        new_columns: Mapping[str, np.ndarray],
        new_metas: Mapping[str, VariableMeta] | None = None,
    ) -> "Dataset":
        cols = dict(self.columns)
        metas = list(self.variables)
        for name, arr in new_columns.items():
            if name not in cols:
                raise UnknownVariable(f"no such variable: {name}", variable=name)
            cols[name] = arr
        if new_metas:
            metas = [new_metas.get(v.name, v) for v in metas]
        return Dataset(tuple(metas), cols, self.sample_count)

    def concat(self, other: "Dataset") -> "Dataset":
        """Row-concatenate two schema-identical datasets."""
        if self.schema() != other.schema():
            raise SchemaMismatch(
                "datasets have different schemas",
                left=self.schema(), right=other.schema(),
            )
        cols = {
            n: np.concatenate([self.columns[n], other.columns[n]])
            for n in self.names
        }
        return Dataset(self.variables, cols, self.sample_count + other.sample_count)

    def schema(self) -> tuple[tuple[str, str, str], ...]:
        return tuple((v.name, v.role.value, v.kind.value) for v in self.variables)

    def require_role_coverage(self) -> None:
        """Every role must be present before structure learning runs."""
        for role in Role:
            if not self.by_role(role):
                raise MissingRole(f"no variable with role {role.value!r}", role=role.value)

    # -- serialization ------------------------------------------------------

    def dump_table(self, stream: IO[str]) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(self.names)
        decoded = {}
        for v in self.variables:
            col = self.columns[v.name]
            if v.domain is not None:
                decoded[v.name] = [v.domain[int(c)] for c in col]
            elif v.kind == Kind.CONTINUOUS:
                decoded[v.name] = [repr(float(c)) for c in col]
            else:
                decoded[v.name] = [str(int(c)) for c in col]
        for i in range(self.sample_count):
            writer.writerow([decoded[n][i] for n in self.names])

    def dump_roles(self, stream: IO[str]) -> None:
        payload = {
            v.name: {"role": v.role.value, "kind": v.kind.value}
            for v in self.variables
        }
        json.dump(payload, stream, indent=2, sort_keys=True)
        stream.write("\n")

    def save(self, table_path: str | Path, roles_path: str | Path) -> None:
        with open(table_path, "w", encoding="utf-8", newline="") as fh:
            self.dump_table(fh)
        with open(roles_path, "w", encoding="utf-8") as fh:
            self.dump_roles(fh)


# --------------------------------------------------------------------------
# loading


def _as_text(source: str | Path | bytes | IO[Any]) -> str:
    if isinstance(source, Path):
        return source.read_text(encoding="utf-8")
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        # Heuristic: a short string with no newline naming an existing file is a path.
        if "\n" not in source:
            try:
                if Path(source).exists():
                    return Path(source).read_text(encoding="utf-8")
            except OSError:
                pass
        return source
    data = source.read()
    if isinstance(data, bytes):
        return data.decode("utf-8")
    return data


def _parse_roles(text: str) -> dict[str, tuple[Role, Kind]]:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"roles file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise InputError("roles file must be a JSON object keyed by column name")
    out: dict[str, tuple[Role, Kind]] = {}
    for name, entry in raw.items():
        if not isinstance(entry, dict) or "role" not in entry or "kind" not in entry:
            raise MissingRole(
                f"roles entry for {name!r} must supply 'role' and 'kind'", variable=name
            )
        try:
            role = Role(entry["role"])
            kind = Kind(entry["kind"])
        except ValueError as exc:
            raise InputError(
                f"bad role/kind for {name!r}: {exc}", variable=name
            ) from exc
        out[name] = (role, kind)
    return out


def _parse_cell(token: str, kind: Kind, var: str, row: int) -> float | int | None:
    """Parse one trimmed cell. Categorical handled by the caller. Returns None
    never — raises NonNumericCell on failure."""
    if kind == Kind.CONTINUOUS:
        try:
            return float(token)
        except ValueError:
            raise NonNumericCell(
                f"cell {token!r} in column {var!r} (row {row}) is not numeric",
                variable=var, row=row, value=token,
            ) from None
    if kind == Kind.DISCRETE:
        try:
            value = float(token)
        except ValueError:
            raise NonNumericCell(
                f"cell {token!r} in column {var!r} (row {row}) is not numeric",
                variable=var, row=row, value=token,
            ) from None
        if value != int(value):
            raise NonNumericCell(
                f"cell {token!r} in column {var!r} (row {row}) is not an integer",
                variable=var, row=row, value=token,
            )
        return int(value)
    if kind == Kind.BOOLEAN:
        low = token.lower()
        if low in _TRUE_TOKENS:
            return 1
        if low in _FALSE_TOKENS:
            return 0
        raise NonNumericCell(
            f"cell {token!r} in column {var!r} (row {row}) is not boolean",
            variable=var, row=row, value=token,
        )
    raise AssertionError(kind)


def load_dataset(
    table_source: str | Path | bytes | IO[Any],
    roles_source: str | Path | bytes | IO[Any],
) -> Dataset:
    """Parse a UTF-8 comma-separated table plus a JSON role map.

    The header row names the variables; every header name must have a roles
    entry and vice versa. Rows with missing or extra cells are dropped with a
    log entry. Categorical labels are coded by first appearance; booleans
    accept true/false (case-insensitive) and 0/1.
    """
    text = _as_text(table_source)
    roles = _parse_roles(_as_text(roles_source))

    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyDataset("table has no header row") from None
    header = [h.strip() for h in header]
    if len(set(header)) != len(header):
        dupes = sorted({h for h in header if header.count(h) > 1})
        raise DuplicateName(f"duplicate column names: {dupes}", names=dupes)

    for name in header:
        if name not in roles:
            raise MissingRole(f"column {name!r} has no role assignment", variable=name)
    for name in roles:
        if name not in header:
            raise UnknownVariable(
                f"roles file references absent column {name!r}", variable=name
            )

    metas = [VariableMeta(n, roles[n][0], roles[n][1]) for n in header]
    raw_rows: list[list[str]] = []
    dropped = 0
    for row in reader:
        if not row:
            continue
        cells = [c.strip() for c in row]
        if len(cells) != len(header) or any(c == "" for c in cells):
            dropped += 1
            continue
        raw_rows.append(cells)
    if dropped:
        logger.info("dropped %d incomplete rows", dropped)
    if not raw_rows:
        raise EmptyDataset("no complete data rows")

    columns: dict[str, np.ndarray] = {}
    final_metas: list[VariableMeta] = []
    for j, meta in enumerate(metas):
        tokens = [r[j] for r in raw_rows]
        if meta.kind == Kind.CATEGORICAL:
            codebook: dict[str, int] = {}
            codes = []
            for tok in tokens:
                if tok not in codebook:
                    codebook[tok] = len(codebook)
                codes.append(codebook[tok])
            columns[meta.name] = np.asarray(codes, dtype=np.int64)
            final_metas.append(replace(meta, domain=tuple(codebook)))
        elif meta.kind == Kind.BOOLEAN:
            vals = [_parse_cell(t, meta.kind, meta.name, i) for i, t in enumerate(tokens)]
            columns[meta.name] = np.asarray(vals, dtype=np.int64)
            final_metas.append(replace(meta, domain=("false", "true")))
        elif meta.kind == Kind.DISCRETE:
            vals = [_parse_cell(t, meta.kind, meta.name, i) for i, t in enumerate(tokens)]
            columns[meta.name] = np.asarray(vals, dtype=np.int64)
            final_metas.append(meta)
        else:
            vals = [_parse_cell(t, meta.kind, meta.name, i) for i, t in enumerate(tokens)]
            columns[meta.name] = np.asarray(vals, dtype=np.float64)
            final_metas.append(meta)

    return Dataset(tuple(final_metas), columns, len(raw_rows))


def load_dataset_paths(table_path: str | Path, roles_path: str | Path) -> Dataset:
    return load_dataset(Path(table_path), Path(roles_path))


# --------------------------------------------------------------------------
# discretization


class BinStrategy(str, Enum):
    EQUAL_WIDTH = "equal_width"
    EQUAL_FREQUENCY = "equal_frequency"
    PASS_THROUGH = "pass_through"


@dataclass
class Discretization:
    """One column's binning request; ``bin_edges`` is filled in by
    :func:`discretize` (strictly ascending, right-closed interior bins)."""

    variable: str
    strategy: BinStrategy
    bin_count: int = 0
    bin_edges: tuple[float, ...] = field(default_factory=tuple)


def _equal_width_edges(col: np.ndarray, k: int) -> list[float]:
    lo, hi = float(col.min()), float(col.max())
    if lo == hi:
        logger.info("constant column collapsed to a single bin")
        return [lo - 0.5, lo + 0.5]
    return [float(e) for e in np.linspace(lo, hi, k + 1)]


def _equal_frequency_edges(col: np.ndarray, k: int) -> list[float]:
    lo, hi = float(col.min()), float(col.max())
    if lo == hi:
        logger.info("constant column collapsed to a single bin")
        return [lo - 0.5, lo + 0.5]
    srt = np.sort(col)
    n = srt.shape[0]
    interior = []
    for i in range(1, k):
        # boundary after the ceil(n*i/k)-th smallest value: right-closed bins
        idx = int(np.ceil(n * i / k)) - 1
        interior.append(float(srt[idx]))
    edges = [lo]
    for e in interior:
        if e > edges[-1] and e < hi:
            edges.append(e)
    edges.append(hi)
    return edges


def discretize(ds: Dataset, specs: Sequence[Discretization]) -> Dataset:
    """Return a new dataset with the requested columns replaced by integer bin
    codes (kind becomes Discrete). Interior bins are right-closed: a value
    equal to an interior edge falls in the lower bin. The input dataset is
    never mutated."""
    new_cols: dict[str, np.ndarray] = {}
    new_metas: dict[str, VariableMeta] = {}
    for spec in specs:
        meta = ds.meta(spec.variable)
        if spec.strategy == BinStrategy.PASS_THROUGH:
            if meta.kind == Kind.CONTINUOUS:
                raise NonDiscreteVariable(
                    f"pass-through requested for continuous column {meta.name!r}",
                    variable=meta.name,
                )
            spec.bin_edges = ()
            continue
        if meta.kind != Kind.CONTINUOUS:
            raise NonDiscreteVariable(
                f"{spec.strategy.value} binning targets continuous columns, "
                f"{meta.name!r} is {meta.kind.value}",
                variable=meta.name,
            )
        if spec.bin_count < 2:
            raise BadBinCount(
                f"bin_count must be >= 2, got {spec.bin_count}",
                variable=meta.name, bin_count=spec.bin_count,
            )
        col = ds.column(spec.variable)
        if spec.strategy == BinStrategy.EQUAL_WIDTH:
            edges = _equal_width_edges(col, spec.bin_count)
        else:
            edges = _equal_frequency_edges(col, spec.bin_count)
        interior = np.asarray(edges[1:-1], dtype=np.float64)
        # right-closed: a value equal to an interior edge stays in the lower bin
        codes = np.searchsorted(interior, col, side="left")
        spec.bin_edges = tuple(edges)
        spec.bin_count = len(edges) - 1
        new_cols[spec.variable] = codes.astype(np.int64)
        new_metas[spec.variable] = replace(meta, kind=Kind.DISCRETE, domain=None)
    if not new_cols:
        return ds
    return ds.with_columns(new_cols, new_metas)


def default_discretizations(ds: Dataset, bins: int) -> list[Discretization]:
    """Equal-frequency specs for every continuous column."""
    return [
        Discretization(v.name, BinStrategy.EQUAL_FREQUENCY, bins)
        for v in ds.variables
        if v.kind == Kind.CONTINUOUS
    ]
