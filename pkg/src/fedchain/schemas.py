"""Versioned schema definitions for the two shipped corpora."""

from __future__ import annotations

from .dataset import Column, DatasetError, Schema

NSL_KDD_FEATURES = (
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes", "land",
    "wrong_fragment", "urgent", "hot", "num_failed_logins", "logged_in", "num_compromised",
    "root_shell", "su_attempted", "num_root", "num_file_creations", "num_shells",
    "num_access_files", "num_outbound_cmds", "is_host_login", "is_guest_login", "count",
    "srv_count", "serror_rate", "srv_serror_rate", "rerror_rate", "srv_rerror_rate",
    "same_srv_rate", "diff_srv_rate", "srv_diff_host_rate", "dst_host_count",
    "dst_host_srv_count", "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate", "dst_host_serror_rate",
    "dst_host_srv_serror_rate", "dst_host_rerror_rate", "dst_host_srv_rerror_rate",
)
NSL_KDD_NOMINAL = {"protocol_type", "service", "flag"}


def _kdd_columns():
    cols = []
    for i, name in enumerate(NSL_KDD_FEATURES):
        if name in NSL_KDD_NOMINAL:
            kind = "nominal"
        else:
            kind = "integer" if i < 24 else "float"
        cols.append(Column(name, kind))
    return cols


NSL_KDD = Schema(
    name="nsl-kdd/v1",
    columns=tuple(_kdd_columns() + [Column("label", "nominal", "label")]),
    negative_label="normal",
)

# KDDTrain+.txt / KDDTest+.txt carry a trailing difficulty score
NSL_KDD_DIFFICULTY = Schema(
    name="nsl-kdd-difficulty/v1",
    columns=NSL_KDD.columns + (Column("difficulty", "integer", "ignore"),),
    negative_label="normal",
)

# column order of the UCI parkinsons.data file
PARKINSONS_COLUMNS = (
    "name", "MDVP:Fo(Hz)", "MDVP:Fhi(Hz)", "MDVP:Flo(Hz)", "MDVP:Jitter(%)", "MDVP:Jitter(Abs)",
    "MDVP:RAP", "MDVP:PPQ", "Jitter:DDP", "MDVP:Shimmer", "MDVP:Shimmer(dB)", "Shimmer:APQ3",
    "Shimmer:APQ5", "MDVP:APQ", "Shimmer:DDA", "NHR", "HNR", "status", "RPDE", "DFA",
    "spread1", "spread2", "D2", "PPE",
)


def _parkinsons_columns():
    cols = []
    for name in PARKINSONS_COLUMNS:
        if name == "name":
            cols.append(Column(name, "nominal", "ignore"))
        elif name == "status":
            cols.append(Column(name, "integer", "label"))
        else:
            cols.append(Column(name, "float"))
    return cols


PARKINSONS = Schema(
    name="parkinsons/v1",
    columns=tuple(_parkinsons_columns()),
    positive_label="1",  # status 1 = PD
)

REGISTRY = {s.name.split("/")[0]: s for s in (NSL_KDD, NSL_KDD_DIFFICULTY, PARKINSONS)}


def get_schema(name: str) -> Schema:
    try:
        return REGISTRY[name.split("/")[0]]
    except KeyError:
        raise DatasetError(f"unknown schema {name!r}; known: {sorted(REGISTRY)}") from None
