"""Testing queue, contact extraction, risk ranking, and site narrowcasting.

The testing queue dequeues enrolled individuals at a fixed daily capacity
and reports outcomes after a configurable delay; outcomes are exact given
the subject's health flags at swab time. Contact sets come in two flavors:
location-based tracing sees environmental contacts (a contact may have
left a site up to the contamination window before the index arrived),
proximity-based tracing sees only strictly co-present pairs.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from .kernels import decayed_overlap_mass

ContactRecord = namedtuple("ContactRecord", ["i", "j", "site", "overlap_kernel", "window"])

TestRecord = namedtuple("TestRecord", ["t_enqueue", "t_outcome", "individual", "positive"])


@dataclass(frozen=True)
class TracingConfig:
    mode: str = "isolate"            # isolate | isolate_test | isolate_test_ranked
    top_k: int = 20
    lookback_days: float = 10.0
    isolation_days: float = 14.0
    basis: str = "location"          # location | proximity

    def __post_init__(self):
        if self.mode not in ("isolate", "isolate_test", "isolate_test_ranked"):
            raise ValueError(f"unknown tracing mode {self.mode!r}")
        if self.basis not in ("location", "proximity"):
            raise ValueError(f"unknown tracing basis {self.basis!r}")
        if self.lookback_days <= 0 or self.isolation_days <= 0:
            raise ValueError("lookback and isolation must be positive")
        if self.top_k < 0:
            raise ValueError("top_k must be nonnegative")


@dataclass(frozen=True)
class TestConfig:
    tests_per_day: float
    delta_test_h: float = 48.0
    compliance: float = 1.0
    tracing: TracingConfig | None = None

    def __post_init__(self):
        if self.tests_per_day <= 0:
            raise ValueError("tests_per_day must be positive")
        if self.delta_test_h < 0:
            raise ValueError("delta_test_h must be nonnegative")
        if not 0.0 <= self.compliance <= 1.0:
            raise ValueError("compliance must lie in [0, 1]")

    @property
    def policy(self) -> str:
        if self.tracing is None or self.tracing.mode == "isolate":
            return "symptomatic_fifo"
        if self.tracing.mode == "isolate_test":
            return "traced_contacts"
        return "risk_ranked"


class TestingQueue:
    """FIFO symptomatic testing with a fixed daily capacity.

    Capacity slots are evenly spaced within each day; an enqueued individual
    is assigned the earliest unused slot at or after enqueue time. Traced
    contacts bypass the capacity and are swabbed immediately.
    """

    def __init__(self, tests_per_day: float):
        self.slot_interval = 24.0 / tests_per_day
        self._next_slot = 0

    def assign_slot(self, t_enqueue: float) -> float:
        m_min = math.ceil(t_enqueue / self.slot_interval - 1.0 - 1e-12)
        m = max(self._next_slot, m_min, 0)
        self._next_slot = m + 1
        return (m + 1) * self.slot_interval


def _pair_visit_windows(traces, i, window, visit_ok=None):
    """Index visits of i clipped to the query window, as (site, lo, hi)."""
    t0, tf = window
    starts, ends, sites = traces._starts[i], traces._ends[i], traces._sites[i]
    base = int(traces.offsets[i])
    out = []
    for idx in range(len(starts)):
        lo = max(starts[idx], t0)
        hi = min(ends[idx], tf)
        if hi <= lo:
            continue
        if visit_ok is not None and not visit_ok(base + idx):
            continue
        out.append((sites[idx], lo, hi))
    return out


def _candidate_visits(traces, site, lo, hi, exclude, visit_ok=None):
    """Visits of other individuals at ``site`` intersecting [lo, hi]."""
    index = traces.site_index().get(site)
    if index is None:
        return []
    starts = index["starts"]
    g_lo = np.searchsorted(starts, lo - index["max_duration"], side="left")
    g_hi = np.searchsorted(starts, hi, side="left")
    out = []
    for g in range(int(g_lo), int(g_hi)):
        if index["ends"][g] <= lo:
            continue
        owner = int(index["owners"][g])
        if owner == exclude:
            continue
        vid = int(index["visit_ids"][g])
        if visit_ok is not None and not visit_ok(vid):
            continue
        out.append((owner, float(index["starts"][g]), float(index["ends"][g])))
    return out


def contact_kernels_location(i: int, window, traces, gamma: float, delta: float,
                             visit_ok=None, beta_for=None):
    """Per-(contact, site) kernel masses for location-based tracing.

    Returns {(j, site): kernel} where the kernel is the double integral of
    the index presence at t' against the contact's decayed presence within
    [t' - delta, t']. With ``beta_for`` the per-site transmission rate
    weights each site's contribution (the exposure-probability kernel).
    """
    t0, tf = window
    if tf <= t0:
        raise ValueError("window must have positive length")
    kernels: dict[tuple[int, int], float] = {}
    for site, lo, hi in _pair_visit_windows(traces, i, window, visit_ok):
        weight = 1.0 if beta_for is None else beta_for(site)
        if weight == 0.0:
            continue
        # contact visits ending after lo - delta can still contribute
        for owner, c, d in _candidate_visits(traces, site, lo - delta, hi,
                                             exclude=i, visit_ok=visit_ok):
            mass = decayed_overlap_mass(lo, hi, c, d, gamma, delta)
            if mass > 0.0:
                key = (owner, site)
                kernels[key] = kernels.get(key, 0.0) + weight * mass
    return kernels


def trace_contacts_location(i: int, window, traces, params,
                            visit_ok=None) -> list[ContactRecord]:
    """All individuals with positive location-tracing kernel against i."""
    kernels = contact_kernels_location(i, window, traces, params.gamma,
                                       params.delta, visit_ok=visit_ok)
    records = [ContactRecord(i, j, site, k, tuple(window))
               for (j, site), k in kernels.items() if k > 0.0]
    records.sort(key=lambda r: (r.j, r.site))
    return records


def trace_contacts_proximity(i: int, window, traces,
                             visit_ok=None) -> list[ContactRecord]:
    """Strictly co-present contacts only; environmental overlap is invisible."""
    t0, tf = window
    if tf <= t0:
        raise ValueError("window must have positive length")
    overlaps: dict[tuple[int, int], float] = {}
    for site, lo, hi in _pair_visit_windows(traces, i, window, visit_ok):
        for owner, c, d in _candidate_visits(traces, site, lo, hi,
                                             exclude=i, visit_ok=visit_ok):
            shared = min(hi, d) - max(lo, c)
            if shared > 0.0:
                key = (owner, site)
                overlaps[key] = overlaps.get(key, 0.0) + shared
    records = [ContactRecord(i, j, site, o, tuple(window))
               for (j, site), o in overlaps.items() if o > 0.0]
    records.sort(key=lambda r: (r.j, r.site))
    return records


def empirical_exposure_probability(index: int, contact: int, window, traces,
                                   params, site_category=None, visit_ok=None) -> float:
    """Probability that ``contact`` was exposed by ``index`` in the window,
    1 - exp(-K) with K the transmission-rate-weighted contact kernel.

    The contact's presence is the outer integrand: exposure happens where
    the contact is, driven by the index case's decayed presence.
    ``site_category`` maps site id to category; it is only needed when the
    transmission rate is configured per category.
    """
    if isinstance(params.beta, dict):
        if site_category is None:
            raise ValueError("per-category beta requires a site_category mapping")
        def beta_for(site):
            return params.beta[site_category[site]]
    else:
        def beta_for(site):
            return params.beta
    kernels = contact_kernels_location(contact, window, traces, params.gamma,
                                       params.delta, visit_ok=visit_ok,
                                       beta_for=beta_for)
    k_total = sum(v for (j, _site), v in kernels.items() if j == index)
    return 1.0 - math.exp(-k_total)


def rank_contacts(probabilities, k_top: int) -> list[int]:
    """Contact ids ordered by descending exposure probability, ties by id."""
    if k_top < 0:
        raise ValueError("k_top must be nonnegative")
    items = sorted(probabilities.items(), key=lambda kv: (-kv[1], kv[0]))
    return [j for j, _p in items[:k_top]]


def narrowcast_site_risk(site: int, window, traces, positive_ids,
                         params, visit_ok=None) -> float:
    """Empirical probability of exposure at a site over the window, from the
    traces of positively tested visitors only."""
    t0, tf = window
    if tf <= t0:
        raise ValueError("window must have positive length")
    gamma, delta = params.gamma, params.delta
    log_surv = 0.0
    for i in positive_ids:
        starts, ends, sites = traces._starts[i], traces._ends[i], traces._sites[i]
        base = int(traces.offsets[i])
        lo_idx = bisect_left(ends, t0 - delta)
        for idx in range(lo_idx, len(starts)):
            if starts[idx] >= tf:
                break
            if sites[idx] != site:
                continue
            if visit_ok is not None and not visit_ok(base + idx):
                continue
            log_surv -= decayed_overlap_mass(t0, tf, starts[idx], ends[idx], gamma, delta)
    return 1.0 - math.exp(log_surv)
