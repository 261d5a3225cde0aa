"""CSV ingestion, repair/normalisation and deterministic client partitioning."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

KINDS = ("integer", "float", "nominal")
ROLES = ("feature", "label", "ignore")


class DatasetError(ValueError):
    """Raised for malformed corpora, schemas or partition plans."""


@dataclass(frozen=True)
class Column:
    name: str
    kind: str
    role: str = "feature"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DatasetError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.role not in ROLES:
            raise DatasetError(f"column {self.name!r}: unknown role {self.role!r}")

    @property
    def numeric(self) -> bool:
        return self.kind != "nominal"


@dataclass(frozen=True)
class Schema:
    """Column layout of a corpus.

    The binary target is 1 iff the label equals ``positive_label``. Corpora
    whose positive class is "anything but X" (NSL-KDD: every attack name)
    set ``negative_label`` instead and leave ``positive_label`` as None.
    """

    name: str
    columns: tuple[Column, ...]
    positive_label: str | None = None
    negative_label: str | None = None

    def __post_init__(self):
        labels = [c for c in self.columns if c.role == "label"]
        if len(labels) != 1:
            raise DatasetError(f"schema {self.name!r} needs exactly one label column, has {len(labels)}")
        if (self.positive_label is None) == (self.negative_label is None):
            raise DatasetError(f"schema {self.name!r}: set exactly one of positive_label / negative_label")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise DatasetError(f"schema {self.name!r} has duplicate column names")

    @property
    def arity(self) -> int:
        return len(self.columns)

    @property
    def label_index(self) -> int:
        return next(i for i, c in enumerate(self.columns) if c.role == "label")

    @property
    def feature_indices(self) -> list[int]:
        return [i for i, c in enumerate(self.columns) if c.role == "feature"]

    @property
    def feature_columns(self) -> list[Column]:
        return [self.columns[i] for i in self.feature_indices]

    def is_positive(self, value: str) -> bool:
        value = value.strip()
        if self.positive_label is not None:
            return value == self.positive_label
        return value != self.negative_label


@dataclass(frozen=True)
class RawDataset:
    schema: Schema
    rows: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if not self.rows:
            raise DatasetError("dataset has no rows")
        for i, row in enumerate(self.rows):
            if len(row) != self.schema.arity:
                raise DatasetError(f"row {i}: expected {self.schema.arity} fields, got {len(row)}")

    def __len__(self):
        return len(self.rows)


@dataclass(frozen=True)
class Encoder:
    """Everything needed to turn a raw feature record into a model input.

    ``encoding_map`` maps each nominal feature column to its sorted category
    list; ``norm_params`` maps each numeric feature column to ``(min, max)``.
    """

    columns: tuple[Column, ...]
    encoding_map: dict[str, tuple[str, ...]]
    norm_params: dict[str, tuple[float, float]]

    @property
    def width(self) -> int:
        return sum(len(self.encoding_map[c.name]) if not c.numeric else 1 for c in self.columns)

    def feature_names(self) -> list[str]:
        out = []
        for c in self.columns:
            if c.numeric:
                out.append(c.name)
            else:
                out.extend(f"{c.name}={v}" for v in self.encoding_map[c.name])
        return out

    def transform(self, records: Sequence[Sequence[object]]) -> np.ndarray:
        """Encode feature-only records (numeric cells already repaired).

        Unseen categories become an all-zero block; numeric values outside
        the fitted range are clipped so every output lies in [0, 1].
        Missing numeric cells (None/NaN) map to the column minimum.
        """
        out = np.zeros((len(records), self.width))
        for r, rec in enumerate(records):
            if len(rec) != len(self.columns):
                raise DatasetError(f"record {r}: expected {len(self.columns)} features, got {len(rec)}")
            pos = 0
            for c, value in zip(self.columns, rec):
                if c.numeric:
                    lo, hi = self.norm_params[c.name]
                    x = _to_float(value)
                    if x is None or hi <= lo:
                        out[r, pos] = 0.0
                    else:
                        out[r, pos] = min(1.0, max(0.0, (x - lo) / (hi - lo)))
                    pos += 1
                else:
                    cats = self.encoding_map[c.name]
                    value = str(value).strip()
                    if value in cats:
                        out[r, pos + cats.index(value)] = 1.0
                    pos += len(cats)
        return out

    def decode(self, features: np.ndarray) -> list[dict[str, str | None]]:
        """Recover the nominal values from one-hot blocks (None for a zero block)."""
        rows = []
        for vec in np.atleast_2d(features):
            pos, decoded = 0, {}
            for c in self.columns:
                if c.numeric:
                    pos += 1
                    continue
                cats = self.encoding_map[c.name]
                block = vec[pos:pos + len(cats)]
                decoded[c.name] = cats[int(np.argmax(block))] if block.max() > 0.5 else None
                pos += len(cats)
            rows.append(decoded)
        return rows

    def to_dict(self) -> dict:
        return {
            "columns": [[c.name, c.kind, c.role] for c in self.columns],
            "encoding_map": {k: list(v) for k, v in self.encoding_map.items()},
            "norm_params": {k: [lo, hi] for k, (lo, hi) in self.norm_params.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Encoder":
        return cls(
            columns=tuple(Column(*c) for c in d["columns"]),
            encoding_map={k: tuple(v) for k, v in d["encoding_map"].items()},
            norm_params={k: (float(v[0]), float(v[1])) for k, v in d["norm_params"].items()},
        )


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    encoder: Encoder
    row_ids: np.ndarray = field(default=None)  # indices into the source RawDataset

    def __post_init__(self):
        if self.features.ndim != 2 or len(self.features) != len(self.labels):
            raise DatasetError("features/labels shape mismatch")
        if self.row_ids is None:
            object.__setattr__(self, "row_ids", np.arange(len(self.labels)))

    def __len__(self):
        return len(self.labels)

    @property
    def encoding_map(self):
        return self.encoder.encoding_map

    @property
    def norm_params(self):
        return self.encoder.norm_params

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.encoder, self.row_ids[idx])

    def select_rows(self, row_ids) -> "Dataset":
        """Subset by source row id, in the order given."""
        where = {int(r): i for i, r in enumerate(self.row_ids)}
        return self.take([where[int(r)] for r in row_ids])


@dataclass(frozen=True)
class PartitionPlan:
    """Per-client sample budget.

    A client whose counts are ``None`` shares the rows left over by the
    explicitly sized clients equally with the other unsized clients, and
    splits its share ``train_fraction`` / ``1 - train_fraction``.
    """

    seed: int
    train_fraction: float
    clients: tuple[tuple[str, int | None, int | None], ...]
    stratify: bool = False

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise DatasetError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        ids = [c[0] for c in self.clients]
        if not ids:
            raise DatasetError("partition plan has no clients")
        if len(set(ids)) != len(ids):
            raise DatasetError("client ids must be unique")
        for cid, tr, va in self.clients:
            if (tr is None) != (va is None):
                raise DatasetError(f"client {cid}: give both counts or neither")
            if tr is not None and (tr < 1 or va < 0):
                raise DatasetError(f"client {cid}: invalid counts {tr}/{va}")


# --------------------------------------------------------------------------
# loading

def _is_number(s: str) -> bool:
    return _to_float(s) is not None


def _to_float(value) -> float | None:
    if value is None:
        return None
    if isinstance(value, (int, float, np.floating, np.integer)):
        x = float(value)
    else:
        try:
            x = float(str(value).strip())
        except ValueError:
            return None
    return None if math.isnan(x) or math.isinf(x) else x


def _looks_like_header(row: Sequence[str], schema: Schema) -> bool:
    numeric = [i for i, c in enumerate(schema.columns) if c.numeric and c.role != "ignore"]
    return bool(numeric) and all(not _is_number(row[i]) for i in numeric if i < len(row))


def load(path: str | Path, schema: Schema) -> RawDataset:
    """Read a comma-separated corpus; a non-numeric first line is treated as a header."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        lines = [(n, row) for n, row in enumerate(csv.reader(fh), start=1) if row and any(f.strip() for f in row)]
    if not lines:
        raise DatasetError(f"{path}: empty file")
    if _looks_like_header(lines[0][1], schema):
        lines = lines[1:]
        if not lines:
            raise DatasetError(f"{path}: header only, no records")
    rows = []
    for lineno, row in lines:
        if len(row) != schema.arity:
            raise DatasetError(
                f"{path}: line {lineno}: expected {schema.arity} fields for schema {schema.name!r}, got {len(row)}")
        rows.append(tuple(f.strip() for f in row))
    return RawDataset(schema, tuple(rows))


# --------------------------------------------------------------------------
# preprocessing

def impute_column(values: Sequence[float | None], window: int) -> list[float]:
    """Replace each missing cell by the mean of up to ``window`` preceding observed values.

    Falls back to the mean of the whole column when nothing precedes, and to
    0.0 when the column has no observed value at all.
    """
    if window < 1:
        raise DatasetError("impute window must be positive")
    observed = [v for v in values if v is not None]
    col_mean = float(np.mean(observed)) if observed else 0.0
    recent: list[float] = []
    out = []
    for v in values:
        if v is None:
            out.append(float(np.mean(recent)) if recent else col_mean)
        else:
            out.append(v)
            recent.append(v)
            if len(recent) > window:
                recent.pop(0)
    return out


def repair(raw: RawDataset, impute_window: int = 5) -> list[list[object]]:
    """Feature-only records with numeric cells parsed and imputed (row order kept)."""
    schema = raw.schema
    cols = schema.feature_indices
    table: list[list[object]] = [[None] * len(cols) for _ in raw.rows]
    for j, ci in enumerate(cols):
        column = schema.columns[ci]
        if column.numeric:
            filled = impute_column([_to_float(row[ci]) for row in raw.rows], impute_window)
            for r, v in enumerate(filled):
                table[r][j] = v
        else:
            for r, row in enumerate(raw.rows):
                table[r][j] = row[ci].strip()
    return table


def fit_encoder(columns: Sequence[Column], records: Sequence[Sequence[object]]) -> Encoder:
    encoding_map, norm_params = {}, {}
    for j, c in enumerate(columns):
        if c.numeric:
            vals = [float(rec[j]) for rec in records]
            norm_params[c.name] = (min(vals), max(vals))
        else:
            encoding_map[c.name] = tuple(sorted({str(rec[j]) for rec in records}))
    return Encoder(tuple(columns), encoding_map, norm_params)


def preprocess(raw: RawDataset, impute_window: int = 5, fit_rows: Iterable[int] | None = None) -> Dataset:
    """Impute, one-hot encode (sorted categories) and min-max scale a raw corpus.

    ``fit_rows`` restricts the rows used to learn categories and min/max (the
    training portion); other rows are encoded with those parameters and
    clipped into [0, 1].
    """
    records = repair(raw, impute_window)
    fit_on = records if fit_rows is None else [records[i] for i in fit_rows]
    if not fit_on:
        raise DatasetError("no rows to fit the encoder on")
    encoder = fit_encoder(raw.schema.feature_columns, fit_on)
    features = encoder.transform(records)
    li = raw.schema.label_index
    labels = np.array([1 if raw.schema.is_positive(row[li]) else 0 for row in raw.rows], dtype=np.int64)
    return Dataset(features, labels, encoder)


# --------------------------------------------------------------------------
# partitioning

def _shuffled_order(labels: np.ndarray, seed: int, stratify: bool) -> np.ndarray:
    rng = np.random.default_rng(seed)
    if not stratify:
        return rng.permutation(len(labels))
    # systematic stratification: any contiguous block of the order holds
    # (approximately) the corpus class ratio
    keys = np.empty(len(labels))
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        members = members[rng.permutation(len(members))]
        keys[members] = (np.arange(len(members)) + rng.uniform(0.0, 1.0)) / len(members)
    return np.lexsort((rng.permutation(len(labels)), keys))


def plan_counts(plan: PartitionPlan, n_rows: int) -> list[tuple[str, int, int]]:
    """Resolve ``None`` counts into concrete (client_id, train, validation) sizes."""
    fixed = sum(tr + va for _, tr, va in plan.clients if tr is not None)
    if fixed > n_rows:
        raise DatasetError(f"partition plan needs {fixed} rows, only {n_rows} available")
    free = [c for c in plan.clients if c[1] is None]
    remaining = n_rows - fixed
    out = []
    for cid, tr, va in plan.clients:
        if tr is None:
            k = free.index((cid, tr, va))
            share = remaining // len(free) + (1 if k < remaining % len(free) else 0)
            tr = int(round(share * plan.train_fraction))
            va = share - tr
            if tr < 1:
                raise DatasetError(f"client {cid}: share of {share} rows leaves no training data")
        out.append((cid, tr, va))
    return out


def split_and_partition(data: Dataset, plan: PartitionPlan) -> dict[str, tuple[Dataset, Dataset]]:
    """Shuffle with the plan seed and carve out disjoint per-client train/validation subsets."""
    counts = plan_counts(plan, len(data))
    order = _shuffled_order(data.labels, plan.seed, plan.stratify)
    parts, pos = {}, 0
    for cid, tr, va in counts:
        block = order[pos:pos + tr + va]
        pos += tr + va
        if plan.stratify:
            # keep both sides stratified: interleave rather than cut the block
            vmask = np.zeros(len(block), dtype=bool)
            if va:
                vmask[np.round(np.linspace(0, len(block) - 1, va)).astype(int)] = True
            train_idx, val_idx = block[~vmask], block[vmask]
        else:
            train_idx, val_idx = block[:tr], block[tr:]
        parts[cid] = (data.take(train_idx), data.take(val_idx))
    return parts


def pooled(datasets: Sequence[Dataset]) -> Dataset:
    if not datasets:
        raise DatasetError("nothing to pool")
    enc = datasets[0].encoder
    return Dataset(
        np.concatenate([d.features for d in datasets]),
        np.concatenate([d.labels for d in datasets]),
        enc,
        np.concatenate([d.row_ids for d in datasets]),
    )
