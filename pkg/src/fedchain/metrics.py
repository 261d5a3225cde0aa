"""Confusion counts and the derived rates reported per client and at the server."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, fields

import numpy as np

# column headings of the per-client result tables, in table order
TABLE_COLUMNS = (
    ("accuracy", "Accuracy"),
    ("sensitivity", "Sensitivity"),
    ("specificity", "Specificity"),
    ("npv", "Negative Predictive Value (NPV)"),
    ("fpr", "False Positive Rate (FPR)"),
    ("fdr", "False Discovery Rate (FDR)"),
    ("fnr", "False Negative Rate (FNR)"),
)
UNDEFINED = "NA"


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise MetricsError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class MetricsReport:
    """Rates in [0, 1]; ``None`` marks a ratio whose denominator is zero."""

    accuracy: float
    miss_rate: float
    sensitivity: float | None
    specificity: float | None
    tpr: float | None
    tnr: float | None
    ppv: float | None
    npv: float | None
    fpr: float | None
    fdr: float | None
    fnr: float | None
    counts: ConfusionCounts | None = None

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "counts"}
        if self.counts is not None:
            d["counts"] = asdict(self.counts)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        kw = {k: v for k, v in d.items() if k != "counts"}
        counts = ConfusionCounts(**d["counts"]) if d.get("counts") else None
        return cls(**kw, counts=counts)

    def table_row(self) -> list[str]:
        return [format_rate(getattr(self, key)) for key, _ in TABLE_COLUMNS]


def format_rate(x: float | None, digits: int = 4) -> str:
    return UNDEFINED if x is None else f"{x:.{digits}f}"


def confusion(predicted, actual) -> ConfusionCounts:
    p = np.asarray(predicted).astype(np.int64).ravel()
    a = np.asarray(actual).astype(np.int64).ravel()
    if len(p) != len(a):
        raise MetricsError(f"length mismatch: {len(p)} predictions vs {len(a)} labels")
    if len(p) == 0:
        raise MetricsError("cannot count an empty prediction vector")
    if not (np.isin(p, (0, 1)).all() and np.isin(a, (0, 1)).all()):
        raise MetricsError("predictions and labels must be binary")
    return ConfusionCounts(
        tp=int(np.sum((p == 1) & (a == 1))),
        tn=int(np.sum((p == 0) & (a == 0))),
        fp=int(np.sum((p == 1) & (a == 0))),
        fn=int(np.sum((p == 0) & (a == 1))),
    )


def _ratio(num: int, den: int) -> float | None:
    return None if den == 0 else num / den


def compute_metrics(c: ConfusionCounts) -> MetricsReport:
    if c.total == 0:
        raise MetricsError("no samples")
    accuracy = (c.tp + c.tn) / c.total
    tpr = _ratio(c.tp, c.tp + c.fn)
    tnr = _ratio(c.tn, c.tn + c.fp)
    return MetricsReport(
        accuracy=accuracy,
        miss_rate=1.0 - accuracy,
        sensitivity=tpr,
        specificity=tnr,
        tpr=tpr,
        tnr=tnr,
        ppv=_ratio(c.tp, c.tp + c.fp),
        npv=_ratio(c.tn, c.tn + c.fn),
        fpr=_ratio(c.fp, c.fp + c.tn),
        fdr=_ratio(c.fp, c.fp + c.tp),
        fnr=_ratio(c.fn, c.fn + c.tp),
        counts=c,
    )


def evaluate(predicted, actual) -> MetricsReport:
    return compute_metrics(confusion(predicted, actual))


def table_csv(rows: list[tuple[str, str, MetricsReport]]) -> str:
    """CSV with one line per (table, client) and the metric headings verbatim."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["Table", "Client", *(h for _, h in TABLE_COLUMNS)])
    for table, client, rep in rows:
        w.writerow([table, client, *rep.table_row()])
    return buf.getvalue()
