"""Figure rendering for sweep CSVs and reconstruction reports.

All functions write PNG (or whatever the extension implies) straight to
disk; the Agg backend is forced so they work headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _group_rows(rows):
    """-> {scheme: {m: [rows]}} over the rows that produced metrics."""
    by_scheme: dict[str, dict[int, list]] = {}
    for row in rows:
        if row.get("fidelity") is None:
            continue
        by_scheme.setdefault(row["scheme"], {}).setdefault(row["m"], []).append(row)
    return by_scheme


def plot_sweep(rows: list[dict], out_path, title: str | None = None) -> None:
    """Benchmark curves: mean fidelity and trace distance vs m, one line
    per scheme, error bars from the trial spread."""
    by_scheme = _group_rows(rows)
    fig, (ax_f, ax_t) = plt.subplots(1, 2, figsize=(9.5, 3.8))
    for scheme, per_m in sorted(by_scheme.items()):
        ms = sorted(per_m)
        for ax, key in ((ax_f, "fidelity"), (ax_t, "trace_distance")):
            mean = [np.mean([r[key] for r in per_m[m]]) for m in ms]
            std = [np.std([r[key] for r in per_m[m]]) for m in ms]
            ax.errorbar(ms, mean, yerr=std, marker="o", capsize=3, label=scheme)
    ax_f.set_ylabel("fidelity")
    ax_t.set_ylabel("trace distance")
    for ax in (ax_f, ax_t):
        ax.set_xlabel("measurement settings m")
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def plot_reconstruction(result, out_path, title: str | None = None) -> None:
    """Solver diagnostics: max-residual history and the recovered spectrum."""
    fig, (ax_r, ax_s) = plt.subplots(1, 2, figsize=(9.5, 3.8))
    hist = np.asarray(result.residual_history)
    if hist.size:
        ax_r.semilogy(np.arange(1, hist.size + 1), hist)
    ax_r.set_xlabel("iteration")
    ax_r.set_ylabel("max |residual|")
    ax_r.grid(True, alpha=0.3)
    spec = np.asarray(result.spectrum)
    shown = spec[: max(16, int(np.sum(np.abs(spec) > 1e-12)) + 4)]
    ax_s.stem(np.arange(1, shown.size + 1), shown)
    ax_s.set_xlabel("eigenvalue index")
    ax_s.set_ylabel("eigenvalue")
    ax_s.grid(True, alpha=0.3)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def plot_rank_scan(trace, out_path, title: str | None = None) -> None:
    """Convergence-vs-m staircase from a rank scan."""
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ms = [t.m for t in trace]
    ok = [1 if t.converged else 0 for t in trace]
    ax.step(ms, ok, where="post", marker="o")
    ax.set_xlabel("measurement settings m")
    ax.set_ylabel("converged")
    ax.set_yticks([0, 1])
    ax.set_ylim(-0.1, 1.1)
    ax.grid(True, alpha=0.3)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
