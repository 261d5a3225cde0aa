"""Binary intrusion detector on NSL-KDD-style flows, and the access gate built on it."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import delm, ledger
from .dataset import Dataset, Encoder
from .delm import NetworkConfig, NetworkWeights, TrainingHyper

FLOW_ARITY = 41


class IdsError(ValueError):
    pass


@dataclass
class IdsModel:
    network: NetworkWeights
    encoder: Encoder
    threshold: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise IdsError("threshold must lie in (0, 1)")

    def digest(self) -> bytes:
        return hashlib.sha256(self.network.canonical_bytes() + self.to_json(weights=False).encode()).digest()

    def to_json(self, weights: bool = True) -> str:
        d = {"threshold": self.threshold, "encoder": self.encoder.to_dict()}
        if weights:
            d["network"] = self.network.to_dict()
        return json.dumps(d, separators=(",", ":"), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "IdsModel":
        d = json.loads(text)
        return cls(NetworkWeights.from_dict(d["network"]), Encoder.from_dict(d["encoder"]), d["threshold"])

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json(), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path) -> "IdsModel":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class AccessRequest:
    requester_id: str
    flow_features: tuple[str, ...]

    def __post_init__(self):
        if len(self.flow_features) != FLOW_ARITY:
            raise IdsError(f"a flow record has {FLOW_ARITY} fields, got {len(self.flow_features)}")

    @classmethod
    def from_csv_line(cls, requester_id: str, line: str) -> "AccessRequest":
        fields = next(csv.reader([line.strip()]))
        return cls(requester_id, tuple(f.strip() for f in fields))

    def digest(self) -> bytes:
        body = self.requester_id.encode() + b"\x00" + ",".join(self.flow_features).encode()
        return hashlib.sha256(body).digest()


def train_ids(train: Dataset, net: NetworkConfig, hyper: TrainingHyper, threshold: float = 0.5) -> IdsModel:
    if len(train) == 0:
        raise IdsError("cannot train an IDS on an empty dataset")
    if not np.isin(train.labels, (0, 1)).all():
        raise IdsError("IDS labels must be binary (1 = attack)")
    weights, _ = delm.train_client(delm.init_network(net), train, hyper)
    return IdsModel(weights, train.encoder, threshold)


def classify_flow(model: IdsModel, features) -> tuple[str, float]:
    """Score one raw flow record; unseen categories encode as an all-zero block."""
    features = tuple(features)
    if len(features) != len(model.encoder.columns):
        raise IdsError(f"flow has {len(features)} fields, model expects {len(model.encoder.columns)}")
    x = model.encoder.transform([features])
    score = float(delm.predict_scores(model.network, x)[0])
    return ("attack" if score >= model.threshold else "normal"), score


def gate_request(model: IdsModel, req: AccessRequest, chain: ledger.Chain,
                 timestamp: int | None = None) -> tuple[str, ledger.Chain]:
    """Grant normal flows, deny attacks; either way one transaction is appended.

    ``timestamp`` defaults to one tick after the chain head (a logical clock).
    """
    v = ledger.verify_chain(chain)
    if not v:
        raise ledger.LedgerError(f"refusing to gate against an invalid ledger: {v.reason}")
    verdict, _ = classify_flow(model, req.flow_features)
    granted = verdict == "normal"
    ts = chain.head.timestamp + 1 if timestamp is None else timestamp
    last_round = max((t.round for t in chain.transactions("model_update")), default=0)
    chain = ledger.append_access_decision(chain, granted, req.digest(), req.requester_id, ts, last_round)
    return ("granted" if granted else "denied"), chain
