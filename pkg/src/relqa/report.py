"""Figure rendering for training runs, evaluations, and threshold sweeps.

matplotlib loads lazily with the Agg backend so library users without a
display (or without any interest in figures) never pay for it.  Figures
are written without software metadata to keep PNG bytes reproducible.
"""

from __future__ import annotations

import csv
from typing import Sequence

from relqa.evaluation import MetricsReport, SweepPoint
from relqa.training import CheckRecord

_SAVE_KW = {"dpi": 120, "metadata": {"Software": None}}


def _plt():
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    return plt


def read_training_log(path) -> list[CheckRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            records.append(
                CheckRecord(
                    iteration=int(row["iteration"]),
                    phase=row["phase"],
                    O=float(row["O"]),
                    O_Z=float(row["O_Z"]),
                    O_QA=float(row["O_QA"]),
                    wall_ms=float(row["wall_ms"]),
                )
            )
    return records


def plot_training_curve(log: Sequence[CheckRecord], out_path) -> None:
    """Objective components against iteration, with phase boundaries marked."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(7, 4.2))
    its = [r.iteration for r in log]
    for attr, label in (("O", "total"), ("O_Z", "RE side"), ("O_QA", "QA side")):
        ax.plot(its, [getattr(r, attr) for r in log], label=label, linewidth=1.6)
    for prev, cur in zip(log, log[1:]):
        if cur.phase != prev.phase:
            ax.axvline(cur.iteration, color="gray", linestyle=":", linewidth=1)
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    ax.set_title("training objective")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)


def plot_per_type_f1(report: MetricsReport, out_path) -> None:
    plt = _plt()
    names = sorted(report.per_type)
    scores = [report.per_type[n].f1 for n in names]
    fig, ax = plt.subplots(figsize=(max(4.0, 0.45 * len(names) + 1.5), 4.2))
    ax.bar(range(len(names)), scores, color="#4878d0")
    ax.axhline(report.f1, color="#d65f5f", linestyle="--", linewidth=1.2, label=f"overall {report.f1:.3f}")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=60, ha="right", fontsize=8)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("F1")
    ax.set_title("per-type F1")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)


def plot_eta_sweep(points: Sequence[SweepPoint], out_path) -> None:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    etas = [pt.eta for pt in points]
    for attr, label in (("precision", "precision"), ("recall", "recall"), ("f1", "F1")):
        ax.plot(etas, [getattr(pt.report, attr) for pt in points], marker="o", label=label)
    ax.set_xlabel("confidence threshold")
    ax.set_ylabel("score")
    ax.set_ylim(0, 1.05)
    ax.set_title("threshold sweep")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)
