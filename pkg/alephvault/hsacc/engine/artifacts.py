import os
import logging
from typing import List, Optional, Sequence
import numpy as np
import pandas as pd
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
from ..core.formats import (FLOAT_FORMAT, REPORT_FILE, MANIFEST_FILE, EMBEDDINGS_FILE, PREDICTIONS_FILE,
                            COMPLETED_LATENTS_FILE)
from ..core.json import dumps
from ..types.reports import ClusteringReport, RunManifest


_logger = logging.getLogger(__name__ + ":logger")
_LOSS_COLUMNS = ["rec", "inf", "mmi", "mmd", "total"]
_METRIC_COLUMNS = ["acc", "nmi", "ari"]


def _write_text(content: str, path: str):
    with open(path, "w", encoding="utf-8") as f:
        f.write(content + "\n")


def write_report(report: ClusteringReport, config_hash: str, out_dir: str) -> str:
    """
    Writes report.json: the metrics (when computed), k, the inertia, the
    seed and the hash of the settings.
    :return: The path of the file.
    """

    path = os.path.join(out_dir, REPORT_FILE)
    _write_text(dumps(dict(report.as_dict(), config_hash=config_hash)), path)
    return path


def write_manifest(manifest: RunManifest, out_dir: str) -> str:
    path = os.path.join(out_dir, MANIFEST_FILE)
    _write_text(dumps(dict(manifest._asdict(), digest=manifest.digest())), path)
    return path


def write_predictions(report: ClusteringReport, out_dir: str) -> str:
    path = os.path.join(out_dir, PREDICTIONS_FILE)
    np.savetxt(path, report.predicted.reshape(-1, 1), fmt="%d")
    return path


def write_embeddings(completed: Sequence[np.ndarray], embedding: np.ndarray, out_dir: str) -> List[str]:
    """
    Writes the clustered N x (V * D) representation, and the completed
    latents of every view (N x D each).
    :return: The paths of the files.
    """

    paths = [os.path.join(out_dir, EMBEDDINGS_FILE)]
    np.savetxt(paths[0], embedding, fmt=FLOAT_FORMAT, delimiter=",")
    for index, latent in enumerate(completed):
        paths.append(os.path.join(out_dir, COMPLETED_LATENTS_FILE.format(index)))
        np.savetxt(paths[-1], latent, fmt=FLOAT_FORMAT, delimiter=",")
    return paths


def write_table(table: pd.DataFrame, path: str):
    table.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="")


def plot_history(history_path: str, out_path: str, title: Optional[str] = None) -> str:
    """
    Renders the loss curves of a history.csv file (one panel per loss term
    and the total, against the epoch) and, when the file has evaluated
    epochs, a panel with the metric curves. The output is an SVG file.
    :param history_path: The history.csv file.
    :param out_path: The SVG file to write.
    :param title: An optional figure title.
    :return: The path of the written file.
    """

    frame = pd.read_csv(history_path)
    missing = [column for column in ["epoch", *_LOSS_COLUMNS] if column not in frame.columns]
    if missing:
        raise ValueError(f"{history_path} lacks the columns: {missing}")
    has_metrics = all(column in frame.columns for column in _METRIC_COLUMNS) and bool(frame["acc"].notna().any())
    metrics = frame.dropna(subset=["acc"]) if has_metrics else None

    panels = len(_LOSS_COLUMNS) + (1 if has_metrics else 0)
    figure, axes = plt.subplots(nrows=panels, ncols=1, figsize=(7, 2.2 * panels), sharex=True)
    for axis, column in zip(axes, _LOSS_COLUMNS):
        axis.plot(frame["epoch"], frame[column], linewidth=1.2)
        axis.set_ylabel(column)
        axis.grid(True, alpha=0.3)
    if has_metrics:
        axis = axes[-1]
        for column in _METRIC_COLUMNS:
            axis.plot(metrics["epoch"], metrics[column], marker="o", markersize=3, label=column.upper())
        axis.set_ylabel("score")
        axis.legend(loc="lower right")
        axis.grid(True, alpha=0.3)
    axes[-1].set_xlabel("epoch")
    if title:
        figure.suptitle(title)
    figure.tight_layout()
    # No date and a fixed id salt: the same history always renders the same file.
    with plt.rc_context({"svg.hashsalt": "hsacc"}):
        figure.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(figure)
    _logger.info(f"Wrote loss curves to {out_path}")
    return out_path
