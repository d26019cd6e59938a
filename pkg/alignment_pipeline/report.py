"""Report tables (CSV / TSV via pandas) and static SVG charts."""

from __future__ import annotations

import io
import logging
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Union

import pandas as pd

from .errors import FormatError
from .export import atomic_write_bytes, atomic_write_text
from .models import AlignmentScore, ScoreRow

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SCORE_COLUMNS = ["aer", "precision", "recall", "hyp_count", "sure_count", "possible_count"]
REPORT_COLUMNS = ["model", "aer", "precision", "recall", "|A|", "|S|", "|P|", "p_value", "baseline"]
TRAIN_LOG_COLUMNS = ["step", "L_t", "L_a", "L", "lr"]


# ── Tables ──


def layer_table(per_layer: Mapping[str, AlignmentScore]) -> pd.DataFrame:
    """One row per decoder layer plus "average"; keys are layer labels in display order."""
    rows = [{"layer": label, **score.model_dump(include=set(SCORE_COLUMNS))} for label, score in per_layer.items()]
    return pd.DataFrame(rows, columns=["layer"] + SCORE_COLUMNS)


def comparison_table(rows: Sequence[ScoreRow]) -> pd.DataFrame:
    frame = pd.DataFrame([row.model_dump() for row in rows])
    if frame.empty:
        return pd.DataFrame(columns=REPORT_COLUMNS)
    frame = frame.rename(columns={"hyp_count": "|A|", "sure_count": "|S|", "possible_count": "|P|"})
    return frame[REPORT_COLUMNS]


def epoch_table(series: Mapping[str, Sequence[Mapping[str, Optional[float]]]]) -> pd.DataFrame:
    """Long-format AER/loss per epoch; values are dicts with epoch, valid_loss and valid_aer."""
    rows = [{"model": name, **point} for name, points in series.items() for point in points]
    return pd.DataFrame(rows, columns=["model", "epoch", "train_loss", "valid_loss", "valid_aer"])


def write_csv(frame: pd.DataFrame, path: PathLike) -> None:
    atomic_write_text(path, frame.to_csv(index=False, lineterminator="\r\n", float_format="%.6f"))
    logger.info("Wrote %s (%d rows)", path, len(frame))


def write_score_report(rows: Sequence[ScoreRow], path: PathLike) -> None:
    frame = comparison_table(rows)
    atomic_write_text(path, frame.to_csv(sep="\t", index=False, float_format="%.6f", na_rep=""))
    logger.info("Wrote score report %s (%d models)", path, len(frame))


def format_score_report(rows: Sequence[ScoreRow]) -> str:
    return comparison_table(rows).to_csv(sep="\t", index=False, float_format="%.4f", na_rep="")


def read_train_log(path: PathLike) -> pd.DataFrame:
    try:
        return pd.read_csv(path, sep="\t", header=None, names=TRAIN_LOG_COLUMNS)
    except (ValueError, pd.errors.ParserError) as exc:
        raise FormatError(f"unreadable training log: {exc}", None, str(path)) from exc


# ── Charts ──


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams.update({"font.family": "DejaVu Sans", "axes.unicode_minus": False, "svg.hashsalt": "alignment"})
    import matplotlib.pyplot as plt

    return plt


def _save_svg(fig, path: PathLike) -> None:
    buffer = io.BytesIO()
    fig.savefig(buffer, format="svg", metadata={"Date": None})
    atomic_write_bytes(path, buffer.getvalue())
    logger.info("Wrote chart %s", path)


def plot_aer_vs_epoch(frame: pd.DataFrame, path: PathLike) -> None:
    """Validation AER and loss per epoch, one line per model."""
    plt = _pyplot()
    fig, (ax_aer, ax_loss) = plt.subplots(1, 2, figsize=(10, 3.6), constrained_layout=True)
    for name, group in frame.groupby("model", sort=True):
        group = group.sort_values("epoch")
        if group["valid_aer"].notna().any():
            ax_aer.plot(group["epoch"], group["valid_aer"], marker="o", label=str(name))
        if group["valid_loss"].notna().any():
            ax_loss.plot(group["epoch"], group["valid_loss"], marker="o", label=str(name))
    ax_aer.set_title("Validation AER")
    ax_loss.set_title("Validation translation loss")
    for ax in (ax_aer, ax_loss):
        ax.set_xlabel("Epoch")
        ax.grid(True, alpha=0.3)
    if ax_aer.lines:
        ax_aer.legend(loc="best", fontsize=8)
    _save_svg(fig, path)
    plt.close(fig)


def plot_layer_aer(frame: pd.DataFrame, path: PathLike) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.6), constrained_layout=True)
    labels = [str(x) for x in frame["layer"]]
    ax.bar(labels, frame["aer"], color=["#4c72b0" if x != "average" else "#dd8452" for x in labels])
    ax.set_xlabel("Decoder layer")
    ax.set_ylabel("AER")
    ax.set_ylim(0.0, 1.0)
    ax.grid(True, axis="y", alpha=0.3)
    _save_svg(fig, path)
    plt.close(fig)


def emit_reports(
    output_dir: PathLike,
    per_layer: Optional[Mapping[str, AlignmentScore]] = None,
    comparison: Optional[Sequence[ScoreRow]] = None,
    epochs: Optional[Mapping[str, Sequence[Mapping[str, Optional[float]]]]] = None,
) -> List[str]:
    """Write whichever tables and charts have data; returns the written paths."""
    out = Path(output_dir)
    written: List[str] = []
    if per_layer:
        frame = layer_table(per_layer)
        write_csv(frame, out / "aer_per_layer.csv")
        plot_layer_aer(frame, out / "aer_per_layer.svg")
        written += [str(out / "aer_per_layer.csv"), str(out / "aer_per_layer.svg")]
    if comparison:
        write_csv(comparison_table(comparison), out / "comparison.csv")
        write_score_report(comparison, out / "scores.tsv")
        written += [str(out / "comparison.csv"), str(out / "scores.tsv")]
    if epochs:
        frame = epoch_table(epochs)
        write_csv(frame, out / "aer_vs_epoch.csv")
        plot_aer_vs_epoch(frame, out / "aer_vs_epoch.svg")
        written += [str(out / "aer_vs_epoch.csv"), str(out / "aer_vs_epoch.svg")]
    return written
