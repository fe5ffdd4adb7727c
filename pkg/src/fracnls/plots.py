"""Optional figures for CLI artifacts. matplotlib is imported on first use only."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _plt():
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:  # pragma: no cover - depends on the environment
        raise RuntimeError("--plots needs matplotlib (pip install 'artifact[plots]')") from exc
    return plt


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    fig.clf()
    return path


def plot_sweep(rows: list[dict], path, limit: float | None = None) -> Path:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    t = np.array([r["t"] for r in rows])
    keep = t > 0
    ax.semilogx(t[keep], [r["L2_ratio"] for r, k in zip(rows, keep) if k], "o-", label="||u(t)|| / ||f||")
    if limit is not None:
        ax.axhline(limit, color="k", lw=0.8, ls="--", label=f"{limit:.4f}")
    ax.set_xlabel("t")
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_history(history: list[dict], path) -> Path:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogy([h["iteration"] for h in history], [max(h["residual"], 1e-300) for h in history], "o-")
    ax.set_xlabel("iteration")
    ax.set_ylabel("fixed-point residual")
    return _save(fig, path)


def plot_envelope(stat, path) -> Path:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    sc = np.array([s.scale for s in stat.samples])
    r = np.array([s.ratio for s in stat.samples])
    ax.loglog(sc, r, ".", alpha=0.3, color="0.5")
    es, ev = stat.envelope()
    ax.loglog(es, ev, "o-", label=f"envelope, slope {stat.trend_slope:.3f}")
    ax.set_xlabel("scale")
    ax.set_ylabel("LHS / RHS")
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_growth(report, path) -> Path:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    N = np.array([r["N"] for r in report.rows], dtype=float)
    y = np.array([r["norm"] for r in report.rows])
    ax.loglog(N, y, "o", label=f"measured {report.measured_slope:.3f}")
    ref = y[0] * (N / N[0]) ** report.predicted_slope
    ax.loglog(N, ref, "--", label=f"predicted {report.predicted_slope:.3f}")
    ax.set_xlabel("N")
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_h(rows: list[dict], path) -> Path:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot([r["lam"] for r in rows], [r["closed_form"] for r in rows], "-", label="B-spline")
    ax.plot([r["lam"] for r in rows], [r["quadrature"] for r in rows], ".", label="quadrature")
    ax.set_xlabel("N^{2 eps}(N - xi)")
    ax.legend(frameon=False)
    return _save(fig, path)
