"""Figures written next to the CSV output (non-interactive backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path: Path):
    fig.tight_layout()
    # fixed metadata keeps repeated runs byte-identical
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def plot_scaling(pairs, slope: float | None, expected: int, title: str, path: Path):
    """Log-log plot of max residual against epsilon with a reference line."""
    eps = [float(e) for e, _ in pairs]
    res = [float(r) for _, r in pairs]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(eps, res, "o-", label="max residual")
    if res and res[0] > 0:
        ref = [res[0] * (e / eps[0]) ** expected for e in eps]
        ax.loglog(eps, ref, "--", color="gray", label=f"slope {expected}")
    ax.set_xlabel("epsilon")
    ax.set_ylabel("max |residual|")
    label = "beyond measurable order" if slope is None else f"fitted slope {slope:.3f}"
    ax.set_title(f"{title}: {label}")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    _save(fig, path)


def plot_summary(rows, path: Path):
    """Verified and breaking orders against q, with the predicted exponent if known."""
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = [f"{r['p']}/{r['q']}" for r in rows]
    x = range(len(rows))
    ax.plot(x, [r["verified_order"] for r in rows], "o", label="verified order")
    broken = [(i, r["breaking_order"]) for i, r in enumerate(rows) if r["breaking_order"] is not None]
    if broken:
        ax.plot(*zip(*broken), "x", color="red", label="breaking order")
    chis = [(i, r["chi"]) for i, r in enumerate(rows) if r.get("chi") is not None]
    if chis:
        ax.plot(*zip(*chis), "_", color="black", markersize=12, label="chi")
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, rotation=60, fontsize=7)
    ax.set_xlabel("rotation number")
    ax.set_ylabel("order")
    ax.legend()
    _save(fig, path)
