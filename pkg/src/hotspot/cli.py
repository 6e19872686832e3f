"""Command-line interface: simulate, calibrate, analyze, narrowcast.

Exit codes: 0 on success, 1 on runtime failure, 2 on input or validation
problems. Every run records the fully resolved configuration next to its
outputs. The HOTSPOT_THREADS environment variable caps parallelism.
"""

from __future__ import annotations

import csv
import glob
import json
import os
import sys
from datetime import date

import click
import numpy as np

from .analysis import mae
from .calibrate import ThetaDomain
from .mobility import load_traces_jsonl, save_visits_jsonl
from .report import emit_report
from .scenario import (ConfigError, Scenario, calibrate_scenario,
                       load_scenario, simulate_rollouts)
from .simulate import EventLogView
from .testtrace import narrowcast_site_risk
from .world import load_sites_csv

EXIT_RUNTIME = 1
EXIT_INPUT = 2


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _write_resolved_config(scenario: Scenario, out_dir: str):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "resolved_config.json"), "w") as fh:
        json.dump(scenario.resolved, fh, indent=2, sort_keys=True)


@click.group()
def main():
    """Site-explicit epidemic simulation, calibration, and analytics."""


@main.command("simulate")
@click.argument("config_path", type=click.Path())
@click.option("--seed", type=int, default=None, help="Master seed (overrides config).")
@click.option("--rollouts", type=int, default=None, help="Number of rollouts.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--save-traces", is_flag=True,
              help="Persist realized check-in traces per rollout (JSONL).")
def cmd_simulate(config_path, seed, rollouts, out_dir, save_traces):
    """Run rollouts of a scenario and write event logs plus a report."""
    try:
        scenario = load_scenario(config_path)
    except ConfigError as exc:
        _fail(EXIT_INPUT, str(exc))
    if seed is not None:
        scenario.master_seed = seed
        scenario.resolved["master_seed"] = seed
    if rollouts is not None:
        scenario.rollouts = rollouts
        scenario.resolved["rollouts"] = rollouts

    try:
        _write_resolved_config(scenario, out_dir)
        _, pairs = simulate_rollouts(scenario, want_realized_mask=save_traces)
        results = []
        for idx, (result, traces) in enumerate(pairs):
            rdir = os.path.join(out_dir, f"rollout_{idx:03d}")
            os.makedirs(rdir, exist_ok=True)
            result.save_events_jsonl(os.path.join(rdir, "events.jsonl"))
            result.save_tests_csv(os.path.join(rdir, "tests.csv"))
            result.save_daily_csv(os.path.join(rdir, "daily.csv"))
            if save_traces:
                mask = result.realized_mask
                realized = [v for g, v in enumerate(traces.iter_visits()) if mask[g]]
                save_visits_jsonl(realized, os.path.join(rdir, "traces.jsonl"))
            results.append(result)
        metrics = emit_report(results, out_dir, rng=scenario.master_seed)
    except ConfigError as exc:
        _fail(EXIT_INPUT, str(exc))
    except Exception as exc:  # noqa: BLE001 - surface as runtime failure
        _fail(EXIT_RUNTIME, f"{type(exc).__name__}: {exc}")
    click.echo(json.dumps(metrics))


def _load_cases_csv(path, horizon_days):
    if not os.path.exists(path):
        raise ConfigError(path, "cases file not found")
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"date", "cumulative_positive"} <= set(reader.fieldnames):
            raise ConfigError(path, "cases CSV needs date,cumulative_positive columns")
        for lineno, row in enumerate(reader, start=2):
            try:
                d = date.fromisoformat(row["date"])
                c = float(row["cumulative_positive"])
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{path}:{lineno}", f"malformed row: {exc}") from None
            rows.append((d, c))
    if len(rows) < horizon_days:
        raise ConfigError(path, f"need at least {horizon_days} daily rows, got {len(rows)}")
    rows.sort(key=lambda r: r[0])
    return np.array([c for _, c in rows[:horizon_days]])


@main.command("calibrate")
@click.argument("config_path", type=click.Path())
@click.option("--cases", "cases_path", required=True, type=click.Path())
@click.option("--steps", "n_total", type=int, default=40, help="Total evaluations N.")
@click.option("--init", "m_init", type=int, default=20, help="Quasi-random initial points M.")
@click.option("--rollouts", "j_rollouts", type=int, default=96, help="Rollouts per evaluation J.")
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", required=True, type=click.Path())
def cmd_calibrate(config_path, cases_path, n_total, m_init, j_rollouts, seed, out_dir):
    """Estimate (beta, xi, rho) against a cumulative case curve."""
    try:
        scenario = load_scenario(config_path)
        if scenario.test_config is None:
            raise ConfigError("testing", "calibration requires a testing block "
                                         "(the objective counts positive tests)")
        if not n_total >= m_init >= 1:
            raise ConfigError("--steps/--init", "need steps >= init >= 1")
        c_true = _load_cases_csv(cases_path, scenario.horizon_days)
    except ConfigError as exc:
        _fail(EXIT_INPUT, str(exc))

    master = seed if seed is not None else scenario.master_seed
    try:
        _write_resolved_config(scenario, out_dir)
        log_path = os.path.join(out_dir, "calibration.jsonl")
        log_fh = open(log_path, "w")

        def callback(idx, theta, g_hat, score_val):
            log_fh.write(json.dumps({
                "evaluation": idx,
                "theta": {"beta": theta[0], "xi": theta[1], "rho": theta[2]},
                "g_hat": [float(v) for v in g_hat],
                "score": score_val}) + "\n")
            log_fh.flush()

        theta_star, dataset = calibrate_scenario(
            scenario, c_true, ThetaDomain(), n_total=n_total, m_init=m_init,
            j_rollouts=j_rollouts, rng=master, callback=callback)
        log_fh.close()
        best = dataset.best()
        with open(os.path.join(out_dir, "theta_star.json"), "w") as fh:
            json.dump({"beta": theta_star[0], "xi": theta_star[1], "rho": theta_star[2],
                       "score": best.score, "evaluations": len(dataset),
                       "rollouts_per_evaluation": j_rollouts,
                       "mae": mae(best.g_hat, c_true)}, fh, indent=2)
    except ConfigError as exc:
        _fail(EXIT_INPUT, str(exc))
    except Exception as exc:  # noqa: BLE001
        _fail(EXIT_RUNTIME, f"{type(exc).__name__}: {exc}")
    click.echo(json.dumps({"theta_star": list(map(float, theta_star))}))


def _load_rollout_views(events_dir):
    event_files = sorted(glob.glob(os.path.join(events_dir, "rollout_*", "events.jsonl")))
    if not event_files:
        direct = os.path.join(events_dir, "events.jsonl")
        if os.path.exists(direct):
            event_files = [direct]
    if not event_files:
        raise ConfigError(events_dir, "no event logs found (expected rollout_*/events.jsonl)")
    meta = {}
    meta_path = os.path.join(events_dir, "resolved_config.json")
    if os.path.exists(meta_path):
        with open(meta_path) as fh:
            meta = json.load(fh)
    n = None
    t_max = None
    if meta:
        # simulate runs at full scale; downscale_K applies to calibration only
        n = meta.get("population", {}).get("total")
        if meta.get("horizon_days"):
            t_max = meta["horizon_days"] * 24.0
    views = []
    for path in event_files:
        tests_path = os.path.join(os.path.dirname(path), "tests.csv")
        views.append(EventLogView.load(
            path, tests_path if os.path.exists(tests_path) else None,
            n_individuals=n, t_max=t_max))
    return views, meta


@main.command("analyze")
@click.option("--events", "events_dir", required=True, type=click.Path())
@click.option("--window", "window_days", type=int, default=7,
              help="Trailing window (days) for the R_t / k_t fits.")
@click.option("--reference", "reference_path", type=click.Path(), default=None,
              help="Optional cases.csv to score the predicted curve against (MAE).")
@click.option("--out", "out_dir", required=True, type=click.Path())
def cmd_analyze(events_dir, window_days, reference_path, out_dir):
    """Secondary-case analytics over stored event logs."""
    try:
        views, meta = _load_rollout_views(events_dir)
        reference = None
        if reference_path:
            horizon = views[0].horizon_days
            reference = _load_cases_csv(reference_path, horizon)
    except ConfigError as exc:
        _fail(EXIT_INPUT, str(exc))
    try:
        metrics = emit_report(views, out_dir, window_days=window_days,
                              reference=reference, rng=0)
    except Exception as exc:  # noqa: BLE001
        _fail(EXIT_RUNTIME, f"{type(exc).__name__}: {exc}")
    click.echo(json.dumps(metrics))


def _parse_when(value, meta, name):
    try:
        return float(value)
    except ValueError:
        pass
    try:
        d = date.fromisoformat(value)
    except ValueError:
        raise ConfigError(name, f"expected hours or ISO date, got {value!r}") from None
    start_raw = meta.get("start_date")
    if not start_raw:
        raise ConfigError(name, "ISO dates need a start_date in the stored config")
    return (d - date.fromisoformat(start_raw)).days * 24.0


@main.command("narrowcast")
@click.option("--events", "events_dir", required=True, type=click.Path())
@click.option("--from", "t_from", required=True,
              help="Window start (hours or ISO date).")
@click.option("--to", "t_to", required=True, help="Window end (hours or ISO date).")
@click.option("--rollout", "rollout_idx", type=int, default=0)
@click.option("--out", "out_dir", required=True, type=click.Path())
def cmd_narrowcast(events_dir, t_from, t_to, rollout_idx, out_dir):
    """Per-site empirical exposure probability from positive visitors' traces."""
    try:
        views, meta = _load_rollout_views(events_dir)
        if rollout_idx >= len(views):
            raise ConfigError("--rollout", f"only {len(views)} rollouts available")
        t0 = _parse_when(t_from, meta, "--from")
        tf = _parse_when(t_to, meta, "--to")
        if tf <= t0:
            raise ConfigError("--from/--to", "window must have positive length")
        rdir = os.path.join(events_dir, f"rollout_{rollout_idx:03d}")
        traces_path = os.path.join(rdir, "traces.jsonl")
        if not os.path.exists(traces_path):
            raise ConfigError(traces_path,
                              "no stored traces; rerun simulate with --save-traces")
        sites_csv = meta.get("region", {}).get("sites_csv")
        if not sites_csv or not os.path.exists(sites_csv):
            raise ConfigError("region.sites_csv",
                              "cannot locate the sites file recorded in the config")
        sites = load_sites_csv(sites_csv)
        view = views[rollout_idx]
        traces = load_traces_jsonl(traces_path, view.n_individuals, view.t_max)
        positives = view.positive_ids_by(t0)

        from .params import EpidemicParams
        epi = meta.get("epidemic", {})
        params = EpidemicParams(
            beta=epi.get("beta", 0.5), xi=epi.get("xi", 0.5),
            gamma=epi.get("gamma", 0.3465), delta=epi.get("delta", 4.6438))

        rows = []
        for site in sites:
            risk = narrowcast_site_risk(site.id, (t0, tf), traces, positives, params)
            rows.append((site.id, site.lat, site.lon, site.category, risk))
        rows.sort(key=lambda r: (-r[4], r[0]))
        os.makedirs(out_dir, exist_ok=True)
        out_path = os.path.join(out_dir, "site_risk.csv")
        with open(out_path, "w", newline="") as fh:
            fh.write("site_id,lat,lon,category,p_hat\n")
            writer = csv.writer(fh)
            for r in rows:
                writer.writerow([r[0], f"{r[1]:.6f}", f"{r[2]:.6f}", r[3], f"{r[4]:.6g}"])
    except ConfigError as exc:
        _fail(EXIT_INPUT, str(exc))
    except Exception as exc:  # noqa: BLE001
        _fail(EXIT_RUNTIME, f"{type(exc).__name__}: {exc}")
    click.echo(json.dumps({"sites": len(rows), "positives": len(positives)}))


if __name__ == "__main__":
    main()
