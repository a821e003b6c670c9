"""Deterministic SVG charts from a saved run record."""

from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .records import RunRecord, read_csv  # noqa: E402

log = logging.getLogger(__name__)

__all__ = ["emit_plots"]

# fixed ids and no timestamp so identical data give identical files
matplotlib.rcParams["svg.hashsalt"] = "platesim"


def _save(fig, path: Path, description: str = "") -> Path:
    meta = {"Date": None, "Creator": "platesim"}
    if description:
        meta["Description"] = description
    fig.savefig(path, format="svg", metadata=meta)
    plt.close(fig)
    return path


def _log_x(data, record: RunRecord, out: Path) -> Path:
    t, x = data["t"], data["X"]
    fig, ax = plt.subplots(figsize=(6, 4))
    pos = x > 0
    ax.semilogy(t[pos], x[pos], label="X(t)")
    desc = ""
    fit = record.decay_fit
    if fit:
        x0 = x[0]
        ax.semilogy(t, fit["C"] * x0 * np.exp(-fit["k"] * t), "--", label=f"C e^(-kt) X(0), k={fit['k']:.4g}")
        desc = f"decay fit: C={fit['C']:.17g} k={fit['k']:.17g} r2={fit['r2']:.17g}"
    ax.set_xlabel("t")
    ax.set_ylabel("X = E2 + E3")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, out / "log_X.svg", desc)


def _energies(data, out: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for name in ("E1", "E2", "E3"):
        ax.plot(data["t"], data[name], label=name)
    ax.set_xlabel("t")
    ax.set_ylabel("energy")
    ax.legend()
    ax.grid(True, alpha=0.3)
    return _save(fig, out / "energies.svg")


def _min_a(data, out: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(data["t"], data["min_a"])
    ax.set_xlabel("t")
    ax.set_ylabel("min a(z)")
    ax.grid(True, alpha=0.3)
    return _save(fig, out / "min_a.svg")


def _ladder(ladder: dict, out: Path) -> Path:
    dts, res = ladder["dt"], ladder["residual"]
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = [f"dt={dt:.3g}" for dt in dts]
    ax.bar(labels, res)
    ax.set_yscale("log")
    ax.set_ylabel("identity residual")
    for i in range(len(res) - 1):
        ratio = res[i] / res[i + 1] if res[i + 1] > 0 else float("inf")
        ax.annotate(f"ratio {ratio:.3f}", xy=(i + 0.5, np.sqrt(res[i] * res[i + 1])), ha="center")
    desc = "ratios: " + " ".join(f"{res[i] / res[i + 1]:.17g}" for i in range(len(res) - 1) if res[i + 1] > 0)
    return _save(fig, out / "ladder.svg", desc)


def emit_plots(record: RunRecord) -> list[Path]:
    """Write the standard charts next to the record; returns the written paths."""
    out = Path(record.output_dir)
    csv = record.csv_path()
    if csv is None or not csv.is_file():
        raise FileNotFoundError(f"no diagnostics CSV for record in {out}")
    data = read_csv(csv)
    files = []
    if len(data["t"]) == 0:
        log.warning("empty trajectory in %s: no plots written", csv)
        print(f"empty trajectory in {csv}: no plots written")
    else:
        files += [_log_x(data, record, out), _energies(data, out), _min_a(data, out)]
    if record.ladder and len(record.ladder.get("residual", [])) >= 2:
        files.append(_ladder(record.ladder, out))
    return files
