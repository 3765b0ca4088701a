"""Figure rendering for experiment reports.

Figures are written next to the delimited output as PNG files using the Agg
backend; they mirror the tables and add nothing the CSV does not carry.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def plot_sweep(rows, path) -> Path:
    fig, axes = plt.subplots(2, 2, figsize=(9, 6.5))
    metrics = [
        ("final_deviation", "parameter deviation"),
        ("final_lin_gap", "predictor gap"),
        ("final_kl", "KL diagnostic"),
        ("eval_risk_mean", "eval risk (mean)"),
    ]
    seeds = sorted({r["seed_index"] for r in rows})
    for ax, (key, label) in zip(axes.ravel(), metrics):
        for si in seeds:
            pts = sorted(
                ((r["lambda"], r[key]) for r in rows if r["seed_index"] == si),
                key=lambda p: p[0],
            )
            ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-", ms=3, label=f"seed {si}")
        ax.set_xscale("symlog", linthresh=0.1)
        ax.set_xlabel("regularization strength")
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
    axes[0, 0].legend(fontsize=8)
    return _save(fig, path)


def plot_bounds(trace, report, path) -> Path:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    t = trace.times
    ax1.plot(t, trace.deviation, label="measured deviation")
    ax1.plot(t, report.theta_bound_curve, "--", label="bound")
    ax1.set_xlabel("t")
    ax1.set_ylabel("||theta_t - theta_0||")
    ax1.legend(fontsize=8)
    ax1.grid(alpha=0.3)
    ax2.plot(t, trace.lin_gap, label="measured gap")
    if report.gap_bound_curve is not None:
        ax2.plot(t, report.gap_bound_curve, "--", label="bound")
    if report.horizon is not None and report.horizon < t[-1]:
        ax2.axvline(report.horizon, color="gray", ls=":", label="horizon")
    ax2.set_xlabel("t")
    ax2.set_ylabel("||f - f_lin||")
    ax2.set_yscale("symlog", linthresh=1e-8)
    ax2.legend(fontsize=8)
    ax2.grid(alpha=0.3)
    return _save(fig, path)


def plot_ntk_report(rows, path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    labels = [r["subset"] for r in rows]
    conds = [r["cond_number"] for r in rows]
    ax.bar(labels, conds, color="steelblue")
    ax.set_yscale("log")
    ax.set_ylabel("regularized condition number")
    ax2 = ax.twinx()
    ax2.plot(labels, [r["eval_risk_mean"] for r in rows], "ro-", label="eval risk (mean)")
    ax2.set_ylabel("eval risk (mean)")
    ax2.legend(fontsize=8)
    return _save(fig, path)


def plot_select(rows, path) -> Path:
    fig, ax = plt.subplots(figsize=(8, 4))
    labels = [r["subset"] for r in rows]
    ax.bar(labels, [r["r_c"] for r in rows],
           color=["seagreen" if r["chosen"] else "slategray" for r in rows])
    ax.set_ylabel("spectral ratio r_C")
    ax.tick_params(axis="x", rotation=45)
    ax2 = ax.twinx()
    ax2.plot(labels, [r["post_eval_risk_mean"] for r in rows], "ro-", label="post eval risk")
    ax2.set_ylabel("eval risk (mean)")
    ax2.legend(fontsize=8)
    return _save(fig, path)


def plot_profile(rows, path) -> Path:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.8))
    r = [row["radius"] for row in rows]
    ax1.plot(r, [row["l_avg"] for row in rows], "o-", ms=3, label="average")
    ax1.plot(r, [row["l_upper"] for row in rows], "s-", ms=3, label="upper")
    ax1.set_xlabel("shell radius")
    ax1.set_ylabel("difference quotient")
    ax1.legend(fontsize=8)
    ax1.grid(alpha=0.3)
    ax2.plot(r, [row["grad_l_upper"] for row in rows], "d-", ms=3, color="darkred")
    ax2.set_xlabel("shell radius")
    ax2.set_ylabel("gradient sensitivity (upper)")
    ax2.grid(alpha=0.3)
    return _save(fig, path)


def plot_sketch(rows, path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.8))
    seeds = [str(r["seed"]) for r in rows]
    ax.bar(seeds, [r["cond_number"] for r in rows], color="steelblue")
    ax.set_xlabel("sketch seed")
    ax.set_ylabel("regularized condition number")
    ax.grid(alpha=0.3, axis="y")
    return _save(fig, path)


def plot_trace(trace, path) -> Path:
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6))
    t = trace.times
    for ax, (values, label) in zip(
        axes,
        [(trace.risk, "risk"), (trace.deviation, "deviation"), (trace.lin_gap, "predictor gap")],
    ):
        ax.plot(t, values)
        ax.set_xlabel("t")
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
    return _save(fig, path)
