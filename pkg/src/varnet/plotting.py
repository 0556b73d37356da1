"""Figures drawn from sweep results or their CSV files. Uses the Agg backend."""
import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_rate(rows, summary, path):
    ns = sorted({r["n"] for r in rows})
    groups = [[r["risk_l2_sq"] for r in rows if r["n"] == n] for n in ns]
    means = [np.mean(g) for g in groups]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.boxplot(groups, positions=np.log2(ns), widths=0.4, showfliers=False)
    ax.plot(np.log2(ns), means, "o", color="tab:red", label="mean")
    if summary.get("slope") is not None:
        fit = np.exp(summary["intercept"]) * np.asarray(ns, dtype=float) ** summary["slope"]
        ax.plot(np.log2(ns), fit, "--", color="tab:blue",
                label=f"slope {summary['slope']:.3f}, r² {summary['r_squared']:.3f}")
    ax.set_yscale("log")
    ax.set_xticks(np.log2(ns))
    ax.set_xticklabels([str(n) for n in ns])
    ax.set_xlabel("n")
    ax.set_ylabel("squared l2 risk")
    ax.legend()
    return _save(fig, path)


def plot_variation(rows, summary, path):
    Vs = sorted({r["constraint"] for r in rows})
    mean = [np.mean([r["risk_l2_sq"] for r in rows if r["constraint"] == V]) for V in Vs]
    fig, ax = plt.subplots(figsize=(6, 4))
    for V in Vs:
        ys = [r["risk_l2_sq"] for r in rows if r["constraint"] == V]
        ax.plot([V] * len(ys), ys, ".", color="0.6")
    ax.plot(Vs, mean, "o-", label="mean")
    if summary.get("teacher_variation"):
        ax.axvline(summary["teacher_variation"], ls=":", color="k", label="teacher variation")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("V")
    ax.set_ylabel("squared l2 risk")
    ax.legend()
    return _save(fig, path)


def plot_rademacher(rows, summary, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    for V in sorted({r["V"] for r in rows}):
        pts = sorted((r["n"], r["estimate"]) for r in rows if r["V"] == V)
        ax.plot(*zip(*pts), "o-", label=f"V={V:g}")
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("Rademacher estimate")
    ax.legend()
    return _save(fig, path)


def plot_grad_check(rows, summary, path):
    archs = list(dict.fromkeys(r["architecture"] for r in rows))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.boxplot([[r["max_rel_err"] for r in rows if r["architecture"] == a] for a in archs],
               tick_labels=archs)
    if summary.get("tolerance"):
        ax.axhline(summary["tolerance"], ls="--", color="tab:red", label="tolerance")
        ax.legend()
    ax.set_yscale("log")
    ax.set_ylabel("max relative error")
    return _save(fig, path)


def plot_trace(trace, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.arange(1, len(trace.loss) + 1), trace.loss)
    ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel("training loss")
    ax2 = ax.twinx()
    ax2.plot(np.arange(1, len(trace.variation) + 1), trace.variation, color="tab:orange")
    ax2.set_ylabel("max row l1 norm", color="tab:orange")
    return _save(fig, path)


def plot_covering(curve, path, V=None):
    eps, size = zip(*curve)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(eps, np.log(size), "o-")
    ax.set_xscale("log")
    ax.set_xlabel("eps")
    ax.set_ylabel("log cover size")
    if V is not None:
        ax.set_title(f"V={V:g}")
    return _save(fig, path)


PLOTTERS = {
    "rate": plot_rate,
    "variation": plot_variation,
    "rademacher": plot_rademacher,
    "grad_check": plot_grad_check,
}


def plot_result(result, path):
    return PLOTTERS[result.experiment](result.rows, result.summary, path)


def plot_csv(csv_path, path=None):
    """Re-plot from a sweep CSV (and its ``_summary.json`` when present)."""
    from .harness import read_rows

    rows = read_rows(csv_path)
    if not rows:
        raise ValueError(f"{csv_path}: no rows")
    experiment = rows[0]["experiment"]
    base = os.path.splitext(csv_path)[0]
    summary = {}
    if os.path.exists(f"{base}_summary.json"):
        with open(f"{base}_summary.json") as fh:
            summary = json.load(fh)
    return PLOTTERS[experiment](rows, summary, path or f"{base}.png")
