"""Config-driven experiment runner and report writer."""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import delm, federation, ledger
from .delm import NetworkConfig, TrainingHyper
from .federation import Client, ClientRoster, RoundConfig
from .ids import IdsModel
from .metrics import MetricsReport, evaluate, table_csv
from .schemas import get_schema

log = logging.getLogger(__name__)

OUTPUT_ENV = "FEDCHAIN_OUTPUT_DIR"
EXPERIMENTS = ("ids", "disease")


class ExperimentError(RuntimeError):
    """A pipeline failure, tagged with the stage that raised it."""

    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"[{stage}] {type(exc).__name__}: {exc}")
        self.stage = stage


@dataclass
class ExperimentConfig:
    experiment: str
    data_path: str
    schema: str
    partition: ds.PartitionPlan
    network: dict = field(default_factory=lambda: {"hidden_widths": [20] * 6, "seed": 0})
    hyper: TrainingHyper = TrainingHyper()
    federation: RoundConfig = RoundConfig()
    rounds: int = 5
    ledger_difficulty: int = ledger.DEFAULT_DIFFICULTY
    impute_window: int = 5
    threshold: float = 0.5
    output_dir: str = "out"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.rounds < 0:
            raise ValueError("rounds must be non-negative")
        if "seed" not in self.network:
            raise ValueError("network.seed must be given explicitly")

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | Path | None = None) -> "ExperimentConfig":
        d = dict(d)
        p = d.pop("partition")
        clients = p.get("clients")
        if clients is None:
            n = int(p.get("n_clients", 4))
            tr, va = p.get("train_per_client"), p.get("validation_per_client")
            clients = [[f"H{i + 1}", tr, va] for i in range(n)]
        plan = ds.PartitionPlan(seed=int(p["seed"]), train_fraction=float(p.get("train_fraction", 0.7)),
                                clients=tuple(tuple(c) for c in clients), stratify=bool(p.get("stratify", False)))
        hyper = TrainingHyper(**d.pop("training", {}))
        fed = RoundConfig(hyper=hyper, **d.pop("federation", {}))
        data_path = d.pop("data_path")
        if base_dir is not None:
            # relative paths in a config file are relative to that file
            if not Path(data_path).is_absolute():
                data_path = os.path.normpath(Path(base_dir) / data_path)
            if "output_dir" in d and not Path(d["output_dir"]).is_absolute():
                d["output_dir"] = os.path.normpath(Path(base_dir) / d["output_dir"])
        return cls(partition=plan, hyper=hyper, federation=fed, data_path=data_path, **d)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        cfg = cls.from_dict(json.loads(path.read_text(encoding="utf-8")), base_dir=path.parent)
        if os.environ.get(OUTPUT_ENV):
            cfg.output_dir = os.environ[OUTPUT_ENV]
        return cfg

    def to_dict(self) -> dict:
        p = self.partition
        return {
            "experiment": self.experiment,
            "data_path": Path(self.data_path).name,
            "schema": self.schema,
            "partition": {"seed": p.seed, "train_fraction": p.train_fraction, "stratify": p.stratify,
                          "clients": [list(c) for c in p.clients]},
            "network": {"hidden_widths": list(self.network.get("hidden_widths", [20] * 6)),
                        "seed": self.network["seed"]},
            "training": self.hyper.to_dict(),
            "federation": {k: v for k, v in self.federation.to_dict().items() if k != "hyper"},
            "rounds": self.rounds,
            "ledger_difficulty": self.ledger_difficulty,
            "impute_window": self.impute_window,
            "threshold": self.threshold,
        }


@dataclass
class ReportBundle:
    experiment: str
    training: dict[str, MetricsReport]
    validation: dict[str, MetricsReport]
    server: MetricsReport
    fused: MetricsReport | None
    ledger_summary: dict
    config: dict
    history: list[federation.RoundRecord]
    loss_curves: dict[str, list[list[float]]]
    mode: str
    global_digest: str
    duration_s: float = 0.0
    chain: ledger.Chain | None = None
    model: IdsModel | None = None

    def table_rows(self) -> list[tuple[str, str, MetricsReport]]:
        rows = [("training", cid, m) for cid, m in self.training.items()]
        rows += [("validation", cid, m) for cid, m in self.validation.items()]
        rows.append(("server", "server", self.server))
        return rows

    def to_dict(self) -> dict:
        """Everything except wall-clock time, so equal runs serialise identically."""
        return {
            "experiment": self.experiment,
            "mode": self.mode,
            "training": {k: v.to_dict() for k, v in self.training.items()},
            "validation": {k: v.to_dict() for k, v in self.validation.items()},
            "server": self.server.to_dict(),
            "fused": self.fused.to_dict() if self.fused else None,
            "ledger": self.ledger_summary,
            "global_digest": self.global_digest,
            "history": [r.to_dict() for r in self.history],
            "loss_curves": self.loss_curves,
            "config": self.config,
        }


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except ExperimentError:
        raise
    except Exception as exc:
        raise ExperimentError(name, exc) from exc


def prepare_clients(cfg: ExperimentConfig) -> tuple[ClientRoster, ds.Dataset]:
    """Load, repair, partition; encoder statistics come from the pooled training rows only."""
    schema = _stage("schema", get_schema, cfg.schema)
    raw = _stage("load", ds.load, cfg.data_path, schema)
    provisional = _stage("preprocess", ds.preprocess, raw, cfg.impute_window)
    parts = _stage("partition", ds.split_and_partition, provisional, cfg.partition)
    train_rows = np.concatenate([tr.row_ids for tr, _ in parts.values()])
    data = _stage("preprocess", ds.preprocess, raw, cfg.impute_window, fit_rows=train_rows)
    clients = [Client(cid, data.select_rows(tr.row_ids), data.select_rows(va.row_ids))
               for cid, (tr, va) in parts.items()]
    return ClientRoster(clients), data


def run_experiment(cfg: ExperimentConfig) -> ReportBundle:
    t0 = time.perf_counter()
    roster, data = prepare_clients(cfg)
    net = NetworkConfig(data.dim, tuple(cfg.network.get("hidden_widths", [20] * 6)), 1, int(cfg.network["seed"]))
    chain = _stage("ledger", ledger.new_chain, cfg.ledger_difficulty)
    model, history, chain, last = _stage(
        "federation", federation.run_federation, roster, net, cfg.federation, cfg.rounds, chain)

    def local(cid):
        return last[cid].weights if cid in last else model.weights

    training, validation = {}, {}
    for c in roster.clients:
        w = local(c.client_id)
        training[c.client_id] = evaluate(delm.predict(w, c.train.features, cfg.threshold), c.train.labels)
        if len(c.validation):
            validation[c.client_id] = evaluate(delm.predict(w, c.validation.features, cfg.threshold),
                                               c.validation.labels)
    pool = ds.pooled([c.validation for c in roster.clients if len(c.validation)] or
                     [c.train for c in roster.clients])
    server = evaluate(delm.predict(model.weights, pool.features, cfg.threshold), pool.labels)
    fused = None
    if last:
        members = [(last[cid].weights, max(validation[cid].accuracy if cid in validation else 1.0, 1e-6))
                   for cid in sorted(last)]
        labels, _ = federation.fuse_predictions(members, pool.features)
        fused = evaluate(labels, pool.labels)

    v = ledger.verify_chain(chain)
    if not v:
        raise ExperimentError("ledger", RuntimeError(v.reason))
    return ReportBundle(
        experiment=cfg.experiment,
        training=training,
        validation=validation,
        server=server,
        fused=fused,
        ledger_summary={
            "length": len(chain),
            "head_hash": chain.head.block_hash.hex(),
            "verified": bool(v),
            "difficulty": chain.difficulty,
            "model_update_blocks": len(chain) - 1,
        },
        config=cfg.to_dict(),
        history=history,
        loss_curves={c.client_id: [r.losses for r in history if r.client_id == c.client_id]
                     for c in roster.clients},
        mode="parallel" if cfg.federation.parallel else "sequential",
        global_digest=model.digest.hex(),
        duration_s=time.perf_counter() - t0,
        chain=chain,
        model=IdsModel(model.weights, data.encoder, cfg.threshold),
    )


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def emit_report(bundle: ReportBundle, directory: str | Path, figures: bool = True) -> dict[str, Path]:
    """Write report.json, tables.csv, chain.jsonl, history.jsonl, model.json, run_meta.json and figures."""
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ExperimentError("emit", exc) from exc
    files = {
        "report": out / "report.json",
        "tables": out / "tables.csv",
        "history": out / "history.jsonl",
        "meta": out / "run_meta.json",
    }
    files["report"].write_text(_dump(bundle.to_dict()), encoding="utf-8")
    files["tables"].write_text(table_csv(bundle.table_rows()), encoding="utf-8")
    files["history"].write_text("".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in bundle.history),
                                encoding="utf-8")
    files["meta"].write_text(_dump({"duration_s": bundle.duration_s, "mode": bundle.mode}), encoding="utf-8")
    if bundle.chain is not None:
        files["chain"] = ledger.save(bundle.chain, out / "chain.jsonl")
    if bundle.model is not None:
        files["model"] = bundle.model.save(out / "model.json")
    if figures:
        from . import plotting
        files.update(plotting.render_all(bundle.to_dict(), out))
    return files


def bundle_from_report(d: dict) -> ReportBundle:
    """Rebuild the table-bearing parts of a bundle from report.json."""
    return ReportBundle(
        experiment=d["experiment"],
        training={k: MetricsReport.from_dict(v) for k, v in d["training"].items()},
        validation={k: MetricsReport.from_dict(v) for k, v in d["validation"].items()},
        server=MetricsReport.from_dict(d["server"]),
        fused=MetricsReport.from_dict(d["fused"]) if d.get("fused") else None,
        ledger_summary=d["ledger"],
        config=d["config"],
        history=[],
        loss_curves=d.get("loss_curves", {}),
        mode=d["mode"],
        global_digest=d["global_digest"],
    )
