"""Figures rendered next to the CSV tables (headless Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import TABLE_COLUMNS  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
}
# no timestamp/version chunk in the PNGs
_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, metadata=_META)
    plt.close(fig)
    return path


def plot_loss_curves(report: dict, path: Path) -> Path:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5.5, 3.4))
        for cid, rounds in sorted(report.get("loss_curves", {}).items()):
            losses = [x for r in rounds for x in r]
            if losses:
                ax.plot(np.arange(1, len(losses) + 1), losses, lw=1.2, label=cid)
            boundary = 0
            for r in rounds[:-1]:
                boundary += len(r)
                ax.axvline(boundary + 0.5, color="0.85", lw=0.6, zorder=0)
        ax.set_xlabel("local epoch (rounds separated by grey lines)")
        ax.set_ylabel("mean squared-error loss")
        ax.set_title(f"{report['experiment']}: client training loss")
        if ax.has_data():
            ax.legend(frameon=False)
        return _save(fig, path)


def plot_round_accuracy(report: dict, path: Path) -> Path:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5.5, 3.4))
        by_client: dict[str, list[tuple[int, float]]] = {}
        for rec in report.get("history", []):
            if rec.get("accuracy") is not None:
                by_client.setdefault(rec["client_id"], []).append((rec["round"], rec["accuracy"]))
        for cid, pts in sorted(by_client.items()):
            r, a = zip(*pts)
            ax.plot(r, a, marker="o", ms=3, lw=1.2, label=cid)
        ax.set_xlabel("round")
        ax.set_ylabel("local validation accuracy")
        ax.set_ylim(0, 1.02)
        ax.set_title(f"{report['experiment']}: accuracy per round")
        if by_client:
            ax.legend(frameon=False)
        return _save(fig, path)


def plot_metric_table(report: dict, path: Path) -> Path:
    """Grouped bars: one group per table metric, one bar per client row (validation) plus the server."""
    rows = [(cid, m) for cid, m in sorted(report["validation"].items())] + [("server", report["server"])]
    keys = [k for k, _ in TABLE_COLUMNS]
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(7.0, 3.6))
        width = 0.8 / len(rows)
        x = np.arange(len(keys))
        for i, (name, m) in enumerate(rows):
            vals = [np.nan if m.get(k) is None else m[k] for k in keys]
            ax.bar(x + (i - (len(rows) - 1) / 2) * width, vals, width, label=name)
        ax.set_xticks(x)
        ax.set_xticklabels(["Acc", "Sens", "Spec", "NPV", "FPR", "FDR", "FNR"])
        ax.set_ylim(0, 1.05)
        ax.set_title(f"{report['experiment']}: validation metrics")
        ax.legend(frameon=False, ncol=min(len(rows), 5), loc="upper center", bbox_to_anchor=(0.5, -0.12))
        return _save(fig, path)


def render_all(report: dict, directory) -> dict[str, Path]:
    out = Path(directory) / "figures"
    out.mkdir(parents=True, exist_ok=True)
    return {
        "fig_loss": plot_loss_curves(report, out / "loss_curves.png"),
        "fig_rounds": plot_round_accuracy(report, out / "round_accuracy.png"),
        "fig_metrics": plot_metric_table(report, out / "validation_metrics.png"),
    }
