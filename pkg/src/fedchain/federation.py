"""Server-side round orchestration: selection, local training, weighted averaging, fusion."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import delm, ledger
from .delm import NetworkConfig, NetworkWeights, ShapeError, TrainingHyper
from .metrics import MetricsReport, evaluate

log = logging.getLogger(__name__)


class FederationError(RuntimeError):
    pass


@dataclass
class Client:
    client_id: str
    train: object            # dataset.Dataset
    validation: object

    @property
    def sample_count(self) -> int:
        return len(self.train)


@dataclass
class ClientRoster:
    clients: list[Client]

    def __post_init__(self):
        ids = [c.client_id for c in self.clients]
        if len(set(ids)) != len(ids):
            raise FederationError("client ids must be unique")

    def __len__(self):
        return len(self.clients)

    def __getitem__(self, client_id: str) -> Client:
        for c in self.clients:
            if c.client_id == client_id:
                return c
        raise KeyError(client_id)

    @property
    def ids(self) -> list[str]:
        return sorted(c.client_id for c in self.clients)


@dataclass
class ClientUpdate:
    client_id: str
    weights: NetworkWeights
    sample_count: int
    validation: MetricsReport | None = None
    loss_history: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class RoundConfig:
    participation_fraction: float = 1.0
    selection_seed: int = 0
    hyper: TrainingHyper = TrainingHyper()
    noise_stddev: float = 0.0
    parallel: bool = False

    def __post_init__(self):
        if not 0.0 < self.participation_fraction <= 1.0:
            raise FederationError("participation_fraction must lie in (0, 1]")
        if self.noise_stddev < 0:
            raise FederationError("noise_stddev must be non-negative")

    def to_dict(self):
        return {"participation_fraction": self.participation_fraction, "selection_seed": self.selection_seed,
                "hyper": self.hyper.to_dict(), "noise_stddev": self.noise_stddev, "parallel": self.parallel}


@dataclass
class GlobalModel:
    weights: NetworkWeights
    round: int
    total_rounds: int
    provenance: bytes = bytes(32)   # sha256 over the sorted contributing update digests

    @property
    def digest(self) -> bytes:
        return self.weights.digest()


@dataclass
class RoundRecord:
    round: int
    client_id: str
    metrics: MetricsReport | None
    weights_digest: str
    losses: list[float] = field(default_factory=list)

    @property
    def final_loss(self) -> float | None:
        return self.losses[-1] if self.losses else None

    def to_dict(self) -> dict:
        d = {"round": self.round, "client_id": self.client_id}
        if self.metrics is not None:
            d.update(self.metrics.to_dict())
        d["final_loss"] = self.final_loss
        d["weights_digest"] = self.weights_digest
        return d


def select_clients(roster: ClientRoster, cfg: RoundConfig, k: int) -> list[str]:
    """ceil(fraction * |roster|) ids drawn by a PRNG keyed on (selection_seed, k); sorted."""
    if not len(roster):
        raise FederationError("empty roster")
    ids = roster.ids
    n = max(1, math.ceil(cfg.participation_fraction * len(ids) - 1e-12))
    if n >= len(ids):
        return ids
    rng = np.random.default_rng([cfg.selection_seed, k])
    picked = rng.choice(len(ids), size=n, replace=False)
    return sorted(ids[i] for i in picked)


def aggregate(updates: list[ClientUpdate]) -> NetworkWeights:
    """Sample-count-weighted element-wise mean, summed in ascending client_id order.

    The result is clipped to the element-wise [min, max] over contributors,
    which only removes float rounding: it makes a singleton or n identical
    updates come back bit-exact.
    """
    if not updates:
        raise FederationError("nothing to aggregate")
    updates = sorted(updates, key=lambda u: u.client_id)
    ref = updates[0].weights
    for u in updates[1:]:
        if not u.weights.same_shape(ref):
            raise ShapeError(f"update from {u.client_id} has a different shape")
    total = sum(u.sample_count for u in updates)
    if total <= 0:
        raise FederationError("total sample count must be positive")
    coefs = [u.sample_count / total for u in updates]
    out = []
    for parts in zip(*(u.weights.arrays() for u in updates)):
        acc = np.zeros_like(parts[0])
        for c, p in zip(coefs, parts):
            acc = acc + c * p
        stack = np.stack(parts)
        out.append(np.clip(acc, stack.min(axis=0), stack.max(axis=0)))
    return NetworkWeights.from_arrays(out, ref.config)


def _perturb(global_w: NetworkWeights, local_w: NetworkWeights, stddev: float, rng) -> NetworkWeights:
    """Add i.i.d. Gaussian noise to the client's delta against the global weights."""
    arrays = []
    for g, l in zip(global_w.arrays(), local_w.arrays()):
        arrays.append(g + (l - g) + rng.normal(0.0, stddev, size=g.shape))
    return NetworkWeights.from_arrays(arrays, local_w.config)


def train_one(client: Client, global_w: NetworkWeights, cfg: RoundConfig, k: int) -> ClientUpdate:
    try:
        w, hist = delm.train_client(global_w, client.train, cfg.hyper)
    except Exception as exc:
        raise FederationError(f"client {client.client_id}: training failed: {exc}") from exc
    if cfg.noise_stddev > 0:
        # keyed per (seed, round, client) so the draw is order-independent
        key = int.from_bytes(ledger.sha256(client.client_id.encode())[:8], "big")
        w = _perturb(global_w, w, cfg.noise_stddev, np.random.default_rng([cfg.selection_seed, k, key]))
    val = None
    if len(client.validation):
        val = evaluate(delm.predict(w, client.validation.features), client.validation.labels)
    return ClientUpdate(client.client_id, w, client.sample_count, val, hist)


def run_federation(roster: ClientRoster, net: NetworkConfig, cfg: RoundConfig, rounds: int,
                   chain: ledger.Chain | None = None, timestamp0: int = 1):
    """Run ``rounds`` federated rounds.

    Returns ``(global_model, history, chain, last_updates)`` where history
    holds one RoundRecord per (round, selected client) and ``last_updates``
    maps each client to its most recent local update. Round k's block is
    stamped ``timestamp0 + k - 1`` (a logical clock).
    """
    for c in roster.clients:
        if c.train.dim != net.input_dim:
            raise ShapeError(f"client {c.client_id}: {c.train.dim} features, network expects {net.input_dim}")
    weights = delm.init_network(net)
    model = GlobalModel(weights, 0, rounds)
    history: list[RoundRecord] = []
    last: dict[str, ClientUpdate] = {}
    for k in range(1, rounds + 1):
        chosen = select_clients(roster, cfg, k)
        if cfg.parallel and len(chosen) > 1:
            with ThreadPoolExecutor(max_workers=len(chosen)) as pool:
                futures = [pool.submit(train_one, roster[cid], weights, cfg, k) for cid in chosen]
                updates = [f.result() for f in futures]
        else:
            updates = [train_one(roster[cid], weights, cfg, k) for cid in chosen]
        updates.sort(key=lambda u: u.client_id)
        weights = aggregate(updates)
        digests = [(u.client_id, u.weights.digest()) for u in updates]
        provenance = ledger.sha256(b"".join(d for _, d in digests))
        model = GlobalModel(weights, k, rounds, provenance)
        if chain is not None:
            chain = ledger.append_model_update(chain, k, model.digest, timestamp0 + k - 1, client_digests=digests)
        for u, (_, d) in zip(updates, digests):
            last[u.client_id] = u
            history.append(RoundRecord(k, u.client_id, u.validation, d.hex(), u.loss_history))
        log.info("round %d/%d: clients %s aggregated", k, rounds, ",".join(chosen))
    return model, history, chain, last


def fuse_predictions(models, x) -> tuple[int, float]:
    """Weighted mean of each model's single output; label 1 iff the score is >= 0.5."""
    if not models:
        raise FederationError("no models to fuse")
    scores, ws = [], []
    for w, weight in models:
        if not weight > 0:
            raise FederationError("fusion weights must be positive")
        scores.append(delm.predict_scores(w, x))
        ws.append(weight)
    ws = np.asarray(ws, dtype=float)
    score = np.tensordot(ws / ws.sum(), np.stack(scores), axes=1)
    if np.ndim(x) == 1:
        s = float(score[0])
        return int(s >= 0.5), s
    return (score >= 0.5).astype(np.int64), score
