"""Aggregate report emission: delimited summaries plus rendered figures."""

from __future__ import annotations

import csv
import json
import math
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .analysis import (SecondaryCaseTable, daily_compartment_counts, mae,
                       rt_kt_series, secondary_counts)

SUMMARY_HEADER = ("day,S_mean,S_sd,E_mean,E_sd,Ia_mean,Ia_sd,Ip_mean,Ip_sd,"
                  "Is_mean,Is_sd,H_mean,H_sd,R_mean,R_sd,D_mean,D_sd,"
                  "cumpos_mean,cumpos_sd")
RT_KT_HEADER = "day,Rt,Rt_lo,Rt_hi,kt,kt_lo,kt_hi,n_infectors"
SECONDARY_HEADER = "n_secondary,count"


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, float):
        if math.isinf(x):
            return "inf"
        return f"{x:.6g}"
    return str(x)


def pooled_secondary_table(results) -> SecondaryCaseTable:
    rows = []
    for res in results:
        rows.extend(secondary_counts(res.events).rows)
    return SecondaryCaseTable(tuple(rows))


def emit_report(results, out_dir, window_days: int = 7, reference=None,
                rng=0) -> dict:
    """Write summary.csv, rt_kt.csv, secondary_hist.csv, and line plots of
    the infected and reproduction-number curves for a set of rollouts.

    Returns a small metrics dict (tail counts plus MAE when a reference
    cumulative-case series is supplied).
    """
    results = list(results)
    if not results:
        raise ValueError("emit_report needs at least one rollout")
    os.makedirs(out_dir, exist_ok=True)

    per_rollout = np.stack([daily_compartment_counts(r) for r in results])
    mean = per_rollout.mean(axis=0)
    sd = per_rollout.std(axis=0)
    days = mean.shape[0]

    with open(os.path.join(out_dir, "summary.csv"), "w", newline="") as fh:
        fh.write(SUMMARY_HEADER + "\n")
        writer = csv.writer(fh)
        for d in range(days):
            row = [d]
            for c in range(9):
                row.extend([_fmt(float(mean[d, c])), _fmt(float(sd[d, c]))])
            writer.writerow(row)

    table = pooled_secondary_table(results)
    rt_rows = rt_kt_series(table, window_days=window_days, rng=rng)
    with open(os.path.join(out_dir, "rt_kt.csv"), "w", newline="") as fh:
        fh.write(RT_KT_HEADER + "\n")
        writer = csv.writer(fh)
        for r in rt_rows:
            writer.writerow([r.day, _fmt(r.rt), _fmt(r.rt_lo), _fmt(r.rt_hi),
                             _fmt(r.kt), _fmt(r.kt_lo), _fmt(r.kt_hi), r.n_infectors])

    counts = table.counts
    with open(os.path.join(out_dir, "secondary_hist.csv"), "w", newline="") as fh:
        fh.write(SECONDARY_HEADER + "\n")
        writer = csv.writer(fh)
        if counts.size:
            values, freq = np.unique(counts, return_counts=True)
            for v, c in zip(values, freq):
                writer.writerow([int(v), int(c)])

    _plot_infected(mean, sd, os.path.join(out_dir, "infected.png"))
    _plot_rt(rt_rows, os.path.join(out_dir, "rt.png"))

    metrics = {
        "rollouts": len(results),
        "days": days,
        "final_cumulative_positive_mean": float(mean[-1, 8]),
        "total_infectors": int(len(table.rows)),
    }
    if reference is not None:
        metrics["mae"] = mae(mean[:, 8], reference)
    with open(os.path.join(out_dir, "metrics.json"), "w") as fh:
        json.dump(metrics, fh, indent=2)
    return metrics


def _plot_infected(mean, sd, path):
    days = np.arange(mean.shape[0])
    infected = mean[:, 2] + mean[:, 3] + mean[:, 4]
    band = np.sqrt(sd[:, 2] ** 2 + sd[:, 3] ** 2 + sd[:, 4] ** 2)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(days, infected, color="tab:red", label="infected (Ia+Ip+Is)")
    ax.fill_between(days, np.maximum(infected - 2 * band, 0.0), infected + 2 * band,
                    color="tab:red", alpha=0.2, linewidth=0)
    ax.plot(days, mean[:, 8], color="black", label="cumulative positive")
    ax.set_xlabel("day")
    ax.set_ylabel("individuals")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _plot_rt(rt_rows, path):
    fig, ax = plt.subplots(figsize=(7, 4))
    if rt_rows:
        days = [r.day for r in rt_rows]
        rt = [r.rt for r in rt_rows]
        lo = [r.rt_lo for r in rt_rows]
        hi = [r.rt_hi for r in rt_rows]
        ax.plot(days, rt, color="tab:blue", label="R_t")
        ax.fill_between(days, lo, hi, color="tab:blue", alpha=0.2, linewidth=0)
    ax.axhline(1.0, color="gray", linestyle="--", linewidth=1)
    ax.set_xlabel("day")
    ax.set_ylabel("effective reproduction number")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
