"""Scenario configuration: a versioned JSON document resolved against the
built-in defaults, plus the runners that turn a scenario into rollouts."""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass
from datetime import date

import numpy as np
from joblib import Parallel, delayed

from . import params as params_mod
from .calibrate import ThetaDomain
from .mobility import build_traces
from .params import EpidemicParams
from .policies import (AlternatingCurfew, BetaMultiplier, ConditionalLockdown,
                       SocialDistancing, VulnerableDistancing)
from .population import HouseholdDistribution, age_group_index
from .simulate import SeedCounts, init_seeds, run_simulation
from .testtrace import TestConfig, TracingConfig
from .world import World, build_world, load_sites_csv, load_tiles_csv

SCHEMA_VERSION = 1
HOURS_PER_DAY = 24.0


class ConfigError(ValueError):
    """Configuration problem, annotated with the offending key path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def thread_cap(requested=None) -> int:
    cap = os.environ.get("HOTSPOT_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    if requested is None:
        return max(1, limit)
    return max(1, min(int(requested), limit))


@dataclass
class Scenario:
    resolved: dict
    tiles: list
    sites: list
    age_fractions: list[float]
    household_dist: HouseholdDistribution
    population_total: int
    downscale_K: int
    tile_km: float
    sites_per_category: dict[str, int]
    weekly_rates: dict
    durations_min: dict
    params: EpidemicParams
    policy_specs: list[dict]
    test_config: TestConfig | None
    observed_cases: int
    seed_r0: float
    horizon_days: int
    rollouts: int
    master_seed: int
    start_date: date | None = None
    compliance: float = 1.0
    curfew_groups: int = 1

    @property
    def t_max_h(self) -> float:
        return self.horizon_days * HOURS_PER_DAY

    def make_policies(self) -> list:
        """Fresh policy objects (conditional lockdowns carry mutable state)."""
        return [_build_policy(spec) for spec in self.policy_specs]

    def seed_counts(self) -> SeedCounts:
        if self.observed_cases <= 0:
            return SeedCounts(0, 0, 0)
        return init_seeds(self.observed_cases, self.params.alpha_asymptomatic,
                          self.seed_r0)

    def with_theta(self, theta) -> "Scenario":
        """Scenario with the calibrated parameters substituted in: shared
        site rate, household rate, and the distancing strength of every
        social-distancing policy (nested ones included)."""
        beta, xi, rho = (float(v) for v in theta)
        sc = copy.deepcopy(self)
        sc.params = EpidemicParams(
            beta=beta, xi=xi, mu=self.params.mu, gamma=self.params.gamma,
            delta=self.params.delta,
            alpha_asymptomatic=self.params.alpha_asymptomatic,
            alpha_hosp_by_age=self.params.alpha_hosp_by_age,
            alpha_death_by_age=self.params.alpha_death_by_age,
            transitions_days=self.params.transitions_days,
            background_weekly_per_100k=self.params.background_weekly_per_100k)

        def override(specs):
            for spec in specs:
                if spec["type"] == "social_distancing":
                    spec["rho"] = rho
                elif spec["type"] == "conditional_lockdown":
                    override(spec["policies"])

        override(sc.policy_specs)
        return sc

    def build_world(self, rng, downscaled: bool = False) -> World:
        k = self.downscale_K if downscaled else 1
        return build_world(self.tiles, self.sites, self.age_fractions,
                           self.household_dist, self.population_total,
                           downscale_K=k, rng=rng, tile_km=self.tile_km,
                           sites_per_category=self.sites_per_category,
                           curfew_groups=self.curfew_groups,
                           compliance=self.compliance,
                           site_downscale_K=k)


def _policy_window(spec, path, start_date, horizon_h):
    if "from_h" in spec or "to_h" in spec:
        t0 = float(spec.get("from_h", 0.0))
        t1 = float(spec.get("to_h", horizon_h))
    else:
        if start_date is None:
            raise ConfigError(path, "date windows need a start_date")
        try:
            d0 = date.fromisoformat(spec["from"])
            d1 = date.fromisoformat(spec["to"])
        except KeyError as exc:
            raise ConfigError(path, f"missing window key {exc}") from None
        except ValueError as exc:
            raise ConfigError(path, f"bad ISO date: {exc}") from None
        t0 = (d0 - start_date).days * HOURS_PER_DAY
        t1 = (d1 - start_date).days * HOURS_PER_DAY
    if not 0.0 <= t0 < t1 <= horizon_h + 1e-9:
        raise ConfigError(path, f"window [{t0}, {t1}] h must lie within the horizon")
    return (t0, t1)


def _parse_policy(spec, path, start_date, horizon_h) -> dict:
    kind = spec.get("type")
    out = {"type": kind}
    if kind == "social_distancing":
        out["rho"] = float(spec["rho"])
        out["window"] = _policy_window(spec, path, start_date, horizon_h)
    elif kind == "beta_multiplier":
        out["factors"] = {str(k): float(v) for k, v in spec["factors"].items()}
        out["window"] = _policy_window(spec, path, start_date, horizon_h)
    elif kind == "alternating_curfew":
        out["groups"] = int(spec["groups"])
        out["window"] = _policy_window(spec, path, start_date, horizon_h)
    elif kind == "vulnerable_distancing":
        out["rho"] = float(spec["rho"])
        min_age = spec["min_age_group"]
        out["min_age_group"] = (age_group_index(min_age) if isinstance(min_age, str)
                                else int(min_age))
        out["window"] = _policy_window(spec, path, start_date, horizon_h)
    elif kind == "conditional_lockdown":
        out["threshold_per_100k"] = float(spec.get("threshold_per_100k", 50.0))
        out["window_days"] = int(spec.get("window_days", 7))
        if "from" in spec or "from_h" in spec:
            out["window"] = _policy_window(spec, path, start_date, horizon_h)
        else:
            out["window"] = (0.0, horizon_h)
        out["policies"] = [_parse_policy(p, f"{path}.policies[{i}]", start_date, horizon_h)
                           for i, p in enumerate(spec.get("policies", []))]
        if not out["policies"]:
            raise ConfigError(path, "conditional lockdown needs bundled policies")
    else:
        raise ConfigError(path, f"unknown policy type {kind!r}")
    return out


def _build_policy(spec: dict):
    kind = spec["type"]
    if kind == "social_distancing":
        return SocialDistancing(rho=spec["rho"], window=tuple(spec["window"]))
    if kind == "beta_multiplier":
        return BetaMultiplier(factors=dict(spec["factors"]), window=tuple(spec["window"]))
    if kind == "alternating_curfew":
        return AlternatingCurfew(n_groups=spec["groups"], window=tuple(spec["window"]))
    if kind == "vulnerable_distancing":
        return VulnerableDistancing(rho=spec["rho"], min_age_group=spec["min_age_group"],
                                    window=tuple(spec["window"]))
    if kind == "conditional_lockdown":
        return ConditionalLockdown(
            threshold_per_100k=spec["threshold_per_100k"],
            window_days=spec["window_days"],
            window=tuple(spec["window"]),
            policies=[_build_policy(p) for p in spec["policies"]])
    raise ValueError(f"unknown policy type {kind!r}")


def _get(cfg, path, key, default=None, required=False):
    if key not in cfg:
        if required:
            raise ConfigError(f"{path}.{key}", "missing required key")
        return default
    return cfg[key]


def load_scenario(source, base_dir=None) -> Scenario:
    """Parse, validate, and default-resolve a scenario configuration.

    ``source`` is a path to a JSON document or an already-parsed mapping.
    Data file paths resolve relative to the config file location.
    """
    if isinstance(source, (str, os.PathLike)):
        base_dir = base_dir or os.path.dirname(os.path.abspath(source))
        try:
            with open(source) as fh:
                cfg = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(str(source), "config file not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(str(source), f"invalid JSON: {exc}") from None
    else:
        cfg = copy.deepcopy(dict(source))
        base_dir = base_dir or "."

    version = _get(cfg, "", "schema_version", required=True)
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {version}")

    horizon_days = int(_get(cfg, "", "horizon_days", required=True))
    if horizon_days < 1:
        raise ConfigError("horizon_days", "must be at least 1")
    horizon_h = horizon_days * HOURS_PER_DAY
    start_raw = cfg.get("start_date")
    try:
        start = date.fromisoformat(start_raw) if start_raw else None
    except ValueError as exc:
        raise ConfigError("start_date", f"bad ISO date: {exc}") from None

    region = _get(cfg, "", "region", required=True)
    tiles_path = os.path.join(base_dir, _get(region, "region", "tiles_csv", required=True))
    sites_path = os.path.join(base_dir, _get(region, "region", "sites_csv", required=True))
    if not os.path.exists(tiles_path):
        raise ConfigError("region.tiles_csv", f"file not found: {tiles_path}")
    if not os.path.exists(sites_path):
        raise ConfigError("region.sites_csv", f"file not found: {sites_path}")
    try:
        tiles = load_tiles_csv(tiles_path)
        sites = load_sites_csv(sites_path)
    except (ValueError, KeyError) as exc:
        raise ConfigError("region", f"bad data file: {exc}") from None
    tile_km = float(region.get("tile_km", 1.0))

    pop = _get(cfg, "", "population", required=True)
    total = int(_get(pop, "population", "total", required=True))
    if total < 1:
        raise ConfigError("population.total", "must be positive")
    downscale = int(pop.get("downscale_K", 1))
    if downscale < 1:
        raise ConfigError("population.downscale_K", "must be a positive integer")
    age_fractions = pop.get("age_fractions", [1 / 6.0] * 6)
    if len(age_fractions) != 6 or abs(sum(age_fractions) - 1.0) > 1e-9:
        raise ConfigError("population.age_fractions", "need 6 fractions summing to 1")
    hh = pop.get("household")
    if hh is None:
        from .population import DEFAULT_HOUSEHOLDS
        household_dist = DEFAULT_HOUSEHOLDS
    else:
        try:
            household_dist = HouseholdDistribution(
                size_probs=tuple(hh["size_probs"]),
                age_weights_by_size=tuple(tuple(r) for r in hh["age_weights_by_size"]))
        except (KeyError, ValueError) as exc:
            raise ConfigError("population.household", str(exc)) from None
    spc = dict(params_mod.DEFAULT_SITES_PER_CATEGORY)
    spc.update(pop.get("sites_per_category", {}))

    mob = cfg.get("mobility", {})
    weekly = copy.deepcopy(params_mod.DEFAULT_WEEKLY_VISIT_RATES)
    for age, rates in mob.get("weekly_rates", {}).items():
        if age not in weekly:
            raise ConfigError("mobility.weekly_rates", f"unknown age group {age!r}")
        weekly[age].update({str(k): float(v) for k, v in rates.items()})
    durations = dict(params_mod.DEFAULT_MEAN_DURATION_MIN)
    durations.update({str(k): float(v)
                      for k, v in mob.get("mean_duration_min", {}).items()})

    epi = cfg.get("epidemic", {})
    try:
        transitions = dict(params_mod.DEFAULT_TRANSITIONS_DAYS)
        for name, pair in epi.get("transitions_days", {}).items():
            transitions[name] = (float(pair[0]), float(pair[1]))
        params = EpidemicParams(
            beta=epi.get("beta", 0.5),
            xi=float(epi.get("xi", 0.5)),
            mu=float(epi.get("mu", 0.55)),
            gamma=float(epi.get("gamma", 0.3465)),
            delta=float(epi.get("delta", 4.6438)),
            alpha_asymptomatic=float(epi.get("alpha_asymptomatic", 0.4)),
            alpha_hosp_by_age=tuple(epi.get("alpha_hosp_by_age",
                                            params_mod.DEFAULT_ALPHA_HOSP_BY_AGE)),
            alpha_death_by_age=tuple(epi.get("alpha_death_by_age",
                                             params_mod.DEFAULT_ALPHA_DEATH_BY_AGE)),
            transitions_days=transitions,
            background_weekly_per_100k=float(epi.get("background_weekly_per_100k", 0.0)))
    except ValueError as exc:
        raise ConfigError("epidemic", str(exc)) from None

    seeds = cfg.get("seeds", {})
    observed = int(seeds.get("observed_cases", 0))
    seed_r0 = float(seeds.get("r0", 2.0))

    testing = cfg.get("testing")
    test_config = None
    compliance = 1.0
    if testing is not None:
        tr = testing.get("tracing")
        tracing = None
        if tr is not None:
            try:
                tracing = TracingConfig(
                    mode=tr.get("mode", "isolate"),
                    top_k=int(tr.get("top_k", 20)),
                    lookback_days=float(tr.get("lookback_days", 10.0)),
                    isolation_days=float(tr.get("isolation_days", 14.0)),
                    basis=tr.get("basis", "location"))
            except ValueError as exc:
                raise ConfigError("testing.tracing", str(exc)) from None
        try:
            test_config = TestConfig(
                tests_per_day=float(_get(testing, "testing", "tests_per_day", required=True)),
                delta_test_h=float(testing.get("delta_test_h", 48.0)),
                compliance=float(testing.get("compliance", 1.0)),
                tracing=tracing)
        except ValueError as exc:
            raise ConfigError("testing", str(exc)) from None
        compliance = test_config.compliance

    policy_specs = [_parse_policy(p, f"policies[{i}]", start, horizon_h)
                    for i, p in enumerate(cfg.get("policies", []))]

    def max_groups(specs):
        best = 1
        for s in specs:
            if s["type"] == "alternating_curfew":
                best = max(best, s["groups"])
            elif s["type"] == "conditional_lockdown":
                best = max(best, max_groups(s["policies"]))
        return best

    resolved = copy.deepcopy(cfg)
    resolved["region"] = dict(region)
    resolved["region"]["tiles_csv"] = os.path.abspath(tiles_path)
    resolved["region"]["sites_csv"] = os.path.abspath(sites_path)
    resolved["region"]["tile_km"] = tile_km
    resolved.setdefault("mobility", {})
    resolved["mobility"]["weekly_rates"] = weekly
    resolved["mobility"]["mean_duration_min"] = durations
    resolved["epidemic"] = {
        "beta": params.beta, "xi": params.xi, "mu": params.mu,
        "gamma": params.gamma, "delta": params.delta,
        "alpha_asymptomatic": params.alpha_asymptomatic,
        "alpha_hosp_by_age": list(params.alpha_hosp_by_age),
        "alpha_death_by_age": list(params.alpha_death_by_age),
        "transitions_days": {k: list(v) for k, v in params.transitions_days.items()},
        "background_weekly_per_100k": params.background_weekly_per_100k,
    }
    resolved["population"] = dict(pop)
    resolved["population"]["downscale_K"] = downscale
    resolved["population"]["sites_per_category"] = spc
    resolved["seeds"] = {"observed_cases": observed, "r0": seed_r0}

    return Scenario(
        resolved=resolved, tiles=tiles, sites=sites,
        age_fractions=list(age_fractions), household_dist=household_dist,
        population_total=total, downscale_K=downscale, tile_km=tile_km,
        sites_per_category=spc, weekly_rates=weekly, durations_min=durations,
        params=params, policy_specs=policy_specs, test_config=test_config,
        observed_cases=observed, seed_r0=seed_r0, horizon_days=horizon_days,
        rollouts=int(cfg.get("rollouts", 1)), master_seed=int(cfg.get("master_seed", 0)),
        start_date=start, compliance=compliance,
        curfew_groups=max_groups(policy_specs))


# ---- rollout runners ------------------------------------------------------


def run_rollout(scenario: Scenario, world: World, seed_seq,
                collect_log: bool = True, want_realized_mask: bool = False):
    """One rollout: fresh traces and fresh infection seeds over a fixed world."""
    tr_seed, sim_seed = seed_seq.spawn(2)
    traces = build_traces(world.individuals, scenario.t_max_h,
                          scenario.weekly_rates, scenario.durations_min,
                          rng=np.random.default_rng(tr_seed))
    result = run_simulation(
        world, traces, scenario.params, seeds=scenario.seed_counts(),
        policies=scenario.make_policies(), test_config=scenario.test_config,
        rng=sim_seed, collect_log=collect_log,
        want_realized_mask=want_realized_mask)
    return result, traces


def simulate_rollouts(scenario: Scenario, n_rollouts: int | None = None,
                      rng=None, n_jobs=None, collect_log=True,
                      want_realized_mask=False):
    """Run the scenario's rollouts in parallel over one shared world."""
    n_rollouts = n_rollouts or scenario.rollouts
    master = rng if rng is not None else scenario.master_seed
    ss = master if isinstance(master, np.random.SeedSequence) else np.random.SeedSequence(master)
    world_seed, *rollout_seeds = ss.spawn(n_rollouts + 1)
    world = scenario.build_world(np.random.default_rng(world_seed))
    jobs = thread_cap(n_jobs if n_jobs is not None else n_rollouts)
    if jobs == 1 or n_rollouts == 1:
        pairs = [run_rollout(scenario, world, s, collect_log, want_realized_mask)
                 for s in rollout_seeds]
    else:
        pairs = Parallel(n_jobs=jobs)(
            delayed(run_rollout)(scenario, world, s, collect_log, want_realized_mask)
            for s in rollout_seeds)
    return world, pairs


def _g_rollout(scenario: Scenario, world: World, seed_seq) -> np.ndarray:
    result, _ = run_rollout(scenario, world, seed_seq, collect_log=False)
    return result.cumulative_positive_by_day().astype(float)


def simulate_g(theta, j_rollouts: int, scenario: Scenario, rng, n_jobs=None) -> np.ndarray:
    """Mean daily cumulative positive curve over J independent rollouts.

    Each rollout regenerates mobility traces and infection seeds; the world
    itself (population, households, downscale-selected sites) is redrawn per
    evaluation from the same seed stream. Downscaling applies to population
    and sites but never to seed counts.
    """
    ss = rng if isinstance(rng, np.random.SeedSequence) else np.random.SeedSequence(rng)
    scenario = scenario.with_theta(theta)
    world_seed, *rollout_seeds = ss.spawn(j_rollouts + 1)
    world = scenario.build_world(np.random.default_rng(world_seed), downscaled=True)
    jobs = thread_cap(n_jobs if n_jobs is not None else j_rollouts)
    if jobs == 1 or j_rollouts == 1:
        curves = [_g_rollout(scenario, world, s) for s in rollout_seeds]
    else:
        curves = Parallel(n_jobs=jobs)(
            delayed(_g_rollout)(scenario, world, s) for s in rollout_seeds)
    return np.stack(curves).mean(axis=0)


def make_g_function(scenario: Scenario, n_jobs=None):
    """Black-box wrapper used by the calibration loop."""
    def g_fn(theta, j_rollouts, seed_seq):
        return simulate_g(theta, j_rollouts, scenario, seed_seq, n_jobs=n_jobs)
    return g_fn


def calibrate_scenario(scenario: Scenario, c_true, domain: ThetaDomain | None = None,
                       n_total: int = 40, m_init: int = 20, j_rollouts: int = 8,
                       rng=0, n_jobs=None, callback=None):
    """Estimate (beta, xi, rho) for a scenario against a case curve."""
    from .calibrate import calibrate
    domain = domain or ThetaDomain()
    g_fn = make_g_function(scenario, n_jobs=n_jobs)
    return calibrate(g_fn, c_true, domain, n_total, m_init, j_rollouts,
                     rng=rng, callback=callback)
