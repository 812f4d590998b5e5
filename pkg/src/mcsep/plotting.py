"""Report figures written next to the CSV outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 10,
    "axes.linewidth": 1.0,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
    "savefig.bbox": "tight",
}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # a fixed metadata block keeps reruns byte-stable
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_loss_curve(rows: list, path):
    """rows: dicts with epoch, j_dc, j_dl, j."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 3, figsize=(10, 3))
        epochs = [r["epoch"] for r in rows]
        for ax, key, label in zip(axes, ("j", "j_dc", "j_dl"), ("joint", "DC", "DL")):
            ax.plot(epochs, [r[key] for r in rows], marker="o", ms=3)
            ax.set_xlabel("epoch")
            ax.set_title(label)
        fig.tight_layout()
        return _save(fig, path)


def plot_method_summary(summary: list, path):
    """Bar charts of mean SDR, SDR improvement and STOI per method."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 3, figsize=(11, 3.2))
        names = [s["method"] for s in summary]
        x = np.arange(len(names))
        for ax, key, label in zip(
            axes,
            ("mean_sdr_db", "mean_sdr_i_db", "mean_stoi"),
            ("SDR (dB)", "SDR improvement (dB)", "STOI"),
        ):
            ax.bar(x, [s[key] for s in summary], color="0.45")
            ax.set_xticks(x)
            ax.set_xticklabels(names, rotation=35, ha="right")
            ax.set_title(label)
            ax.axhline(0.0, color="k", lw=0.6)
        fig.tight_layout()
        return _save(fig, path)


def plot_spectrograms(panels: list, sample_rate_hz: int, hop: int, path, floor_db=-60.0):
    """panels: (title, T x F magnitude) pairs, drawn top to bottom in dB."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(len(panels), 1, figsize=(7, 1.8 * len(panels)), sharex=True)
        axes = np.atleast_1d(axes)
        peak = max(np.max(m) for _, m in panels) + 1e-12
        for ax, (title, mag) in zip(axes, panels):
            db = 20 * np.log10(np.maximum(mag / peak, 10 ** (floor_db / 20)))
            T, F = mag.shape
            ax.imshow(
                db.T, origin="lower", aspect="auto", cmap="magma", vmin=floor_db, vmax=0,
                extent=(0, T * hop / sample_rate_hz, 0, sample_rate_hz / 2000),
            )
            ax.set_ylabel("kHz")
            ax.set_title(title, fontsize=9)
        axes[-1].set_xlabel("time (s)")
        fig.tight_layout()
        return _save(fig, path)
