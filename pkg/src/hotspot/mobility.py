"""Check-in mobility traces.

Each individual's presence at sites is a list of disjoint visit intervals
generated ahead of the epidemic simulation: candidate visits arrive per
assigned site as a homogeneous Poisson process, last an exponential time,
and candidates arriving while another visit is in progress are discarded
(an individual occupies at most one site at a time).
"""

from __future__ import annotations

import json
from bisect import bisect_left, bisect_right
from collections import namedtuple

import numpy as np

from .kernels import complement_intervals, decayed_interval_mass
from .params import AGE_GROUPS, DEFAULT_MEAN_DURATION_MIN, DEFAULT_WEEKLY_VISIT_RATES

HOURS_PER_WEEK = 168.0

Visit = namedtuple("Visit", ["individual", "site", "t_arrive", "t_depart"])

# One individual's trace is simply a time-sorted list of non-overlapping visits.
CheckInTrace = list


def per_site_rate(weekly_rate: float, n_sites_in_category: int) -> float:
    """Hourly arrival rate at one assigned site of a category."""
    if n_sites_in_category == 0:
        return 0.0
    return weekly_rate / n_sites_in_category / HOURS_PER_WEEK


def _accept_candidates(order, arrivals, durations, t_max):
    # Walk candidates in arrival order, dropping any whose arrival falls
    # inside the previously accepted visit.
    accepted = []
    last_end = -np.inf
    for idx in order:
        a = arrivals[idx]
        if a < last_end:
            continue
        end = min(a + durations[idx], t_max)
        if end <= a:
            continue
        accepted.append((idx, a, end))
        last_end = end
    return accepted


def generate_trace(individual, rate_table=None, mean_durations_min=None,
                   t_max: float = 0.0, rng=None) -> list[Visit]:
    """Generate one individual's visit list over [0, t_max].

    ``rate_table`` maps age-group label to {category: visits/week}; the
    weekly category rate is split evenly over the individual's assigned
    sites in that category.
    """
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    rate_table = rate_table or DEFAULT_WEEKLY_VISIT_RATES
    mean_durations_min = mean_durations_min or DEFAULT_MEAN_DURATION_MIN
    rng = np.random.default_rng(rng)

    age_label = AGE_GROUPS[individual.age_group]
    rates = rate_table[age_label]

    sites, lams, means_h = [], [], []
    for category, assigned in individual.assigned_sites.items():
        lam = per_site_rate(rates.get(category, 0.0), len(assigned))
        if lam <= 0:
            continue
        for s in assigned:
            sites.append(s)
            lams.append(lam)
            means_h.append(mean_durations_min[category] / 60.0)
    if not sites:
        return []

    counts = rng.poisson(np.asarray(lams) * t_max)
    total = int(counts.sum())
    if total == 0:
        return []
    site_per_cand = np.repeat(np.asarray(sites), counts)
    mean_per_cand = np.repeat(np.asarray(means_h), counts)
    arrivals = rng.uniform(0.0, t_max, total)
    durations = rng.exponential(mean_per_cand)

    order = np.argsort(arrivals, kind="stable")
    accepted = _accept_candidates(order, arrivals, durations, t_max)
    return [Visit(individual.id, int(site_per_cand[i]), float(a), float(b))
            for i, a, b in accepted]


class TraceSet:
    """All visits of a population, indexed for fast presence queries."""

    def __init__(self, n_individuals: int, t_max: float,
                 ind, site, start, end):
        order = np.lexsort((start, ind))
        self.n_individuals = n_individuals
        self.t_max = float(t_max)
        self.ind = np.asarray(ind, dtype=np.int64)[order]
        self.site = np.asarray(site, dtype=np.int64)[order]
        self.start = np.asarray(start, dtype=np.float64)[order]
        self.end = np.asarray(end, dtype=np.float64)[order]
        self.n_visits = len(self.ind)
        counts = np.bincount(self.ind, minlength=n_individuals)
        self.offsets = np.concatenate(([0], np.cumsum(counts)))
        # per-individual python-level views (lists for fast bisect)
        self._starts = [self.start[self.offsets[i]:self.offsets[i + 1]].tolist()
                        for i in range(n_individuals)]
        self._ends = [self.end[self.offsets[i]:self.offsets[i + 1]].tolist()
                      for i in range(n_individuals)]
        self._sites = [self.site[self.offsets[i]:self.offsets[i + 1]].tolist()
                       for i in range(n_individuals)]
        self._home_cache: dict[int, list[tuple[float, float]]] = {}
        self._site_index = None

    @classmethod
    def from_visits(cls, visits, n_individuals: int, t_max: float) -> "TraceSet":
        ind = [v.individual for v in visits]
        site = [v.site for v in visits]
        start = [v.t_arrive for v in visits]
        end = [v.t_depart for v in visits]
        return cls(n_individuals, t_max, ind, site, start, end)

    def visits_of(self, i: int) -> list[Visit]:
        lo, hi = self.offsets[i], self.offsets[i + 1]
        return [Visit(i, int(self.site[g]), float(self.start[g]), float(self.end[g]))
                for g in range(lo, hi)]

    def iter_visits(self):
        for g in range(self.n_visits):
            yield Visit(int(self.ind[g]), int(self.site[g]),
                        float(self.start[g]), float(self.end[g]))

    def site_at(self, i: int, t: float):
        """(site, global visit index) if i is at a site at time t, else None."""
        starts = self._starts[i]
        idx = bisect_right(starts, t) - 1
        if idx >= 0 and self._ends[i][idx] > t:
            return self._sites[i][idx], int(self.offsets[i] + idx)
        return None

    def decayed_presence(self, j: int, site: int, t: float,
                         gamma: float, delta: float,
                         visit_ok=None) -> float:
        """Integral of e^{-gamma (t - tau)} over j's presence at ``site``
        within [t - delta, t]; ``visit_ok(global_idx)`` filters visits."""
        starts, ends, sites = self._starts[j], self._ends[j], self._sites[j]
        lo = bisect_left(ends, t - delta)
        hi = bisect_right(starts, t)
        base = int(self.offsets[j])
        total = 0.0
        for idx in range(lo, hi):
            if sites[idx] != site:
                continue
            if visit_ok is not None and not visit_ok(base + idx):
                continue
            total += decayed_interval_mass(t, starts[idx], ends[idx], gamma, delta)
        return total

    def home_intervals(self, i: int) -> list[tuple[float, float]]:
        """Intervals of [0, t_max] during which i is at no site."""
        cached = self._home_cache.get(i)
        if cached is None:
            cached = complement_intervals(self._starts[i], self._ends[i], 0.0, self.t_max)
            self._home_cache[i] = cached
        return cached

    def site_index(self):
        """Visit ids grouped per site, each group sorted by start time."""
        if self._site_index is None:
            index: dict[int, dict] = {}
            by_site = np.argsort(self.site, kind="stable")
            sites_sorted = self.site[by_site]
            bounds = np.searchsorted(sites_sorted, np.unique(self.site), side="left")
            uniq = np.unique(self.site)
            bounds = np.append(bounds, len(sites_sorted))
            for u, lo, hi in zip(uniq, bounds[:-1], bounds[1:]):
                ids = by_site[lo:hi]
                order = np.argsort(self.start[ids], kind="stable")
                ids = ids[order]
                durs = self.end[ids] - self.start[ids]
                index[int(u)] = {
                    "visit_ids": ids,
                    "starts": self.start[ids],
                    "ends": self.end[ids],
                    "owners": self.ind[ids],
                    "max_duration": float(durs.max()) if len(durs) else 0.0,
                }
            self._site_index = index
        return self._site_index


def build_traces(individuals, t_max: float, rate_table=None,
                 mean_durations_min=None, rng=None) -> TraceSet:
    """Generate traces for a whole population in one vectorized pass."""
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    rate_table = rate_table or DEFAULT_WEEKLY_VISIT_RATES
    mean_durations_min = mean_durations_min or DEFAULT_MEAN_DURATION_MIN
    rng = np.random.default_rng(rng)

    pair_ind, pair_site, pair_lam, pair_mean = [], [], [], []
    for person in individuals:
        rates = rate_table[AGE_GROUPS[person.age_group]]
        for category, assigned in person.assigned_sites.items():
            lam = per_site_rate(rates.get(category, 0.0), len(assigned))
            if lam <= 0:
                continue
            mean_h = mean_durations_min[category] / 60.0
            for s in assigned:
                pair_ind.append(person.id)
                pair_site.append(s)
                pair_lam.append(lam)
                pair_mean.append(mean_h)

    n = len(individuals)
    if not pair_ind:
        return TraceSet(n, t_max, [], [], [], [])

    pair_lam = np.asarray(pair_lam)
    counts = rng.poisson(pair_lam * t_max)
    total = int(counts.sum())
    cand_ind = np.repeat(np.asarray(pair_ind), counts)
    cand_site = np.repeat(np.asarray(pair_site), counts)
    cand_mean = np.repeat(np.asarray(pair_mean), counts)
    arrivals = rng.uniform(0.0, t_max, total)
    durations = rng.exponential(cand_mean)

    order = np.lexsort((arrivals, cand_ind))
    ind_sorted = cand_ind[order]
    arr_sorted = arrivals[order]
    dur_sorted = durations[order]
    site_sorted = cand_site[order]

    keep = np.zeros(total, dtype=bool)
    ends = np.empty(total)
    last_end = -np.inf
    last_ind = -1
    for g in range(total):
        i = ind_sorted[g]
        if i != last_ind:
            last_ind = i
            last_end = -np.inf
        a = arr_sorted[g]
        if a < last_end:
            continue
        b = a + dur_sorted[g]
        if b > t_max:
            b = t_max
        if b <= a:
            continue
        keep[g] = True
        ends[g] = b
        last_end = b

    return TraceSet(n, t_max,
                    ind_sorted[keep], site_sorted[keep],
                    arr_sorted[keep], ends[keep])


def presence_integral(trace, site: int, t: float, gamma: float, delta: float) -> float:
    """Integral of e^{-gamma (t - tau)} over the trace's presence at ``site``
    within the window [t - delta, t].

    ``trace`` is one individual's visit list (sorted, non-overlapping).
    """
    if gamma <= 0 or delta <= 0:
        raise ValueError("gamma and delta must be positive")
    total = 0.0
    for v in trace:
        if v.site != site:
            continue
        total += decayed_interval_mass(t, v.t_arrive, v.t_depart, gamma, delta)
    return total


def save_visits_jsonl(visits, path):
    with open(path, "w") as fh:
        for v in visits:
            fh.write(json.dumps({"individual": v.individual, "site": v.site,
                                 "t_arrive_h": v.t_arrive, "t_depart_h": v.t_depart}) + "\n")


def save_traces_jsonl(traces: TraceSet, path):
    save_visits_jsonl(traces.iter_visits(), path)


def load_traces_jsonl(path, n_individuals: int, t_max: float) -> TraceSet:
    visits = []
    with open(path) as fh:
        for line in fh:
            rec = json.loads(line)
            visits.append(Visit(rec["individual"], rec["site"],
                                rec["t_arrive_h"], rec["t_depart_h"]))
    return TraceSet.from_visits(visits, n_individuals, t_max)
