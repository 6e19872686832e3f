"""Exact event-driven simulation of the site-explicit epidemic model.

A single priority queue holds every pending state transition, ordered by
(time, insertion sequence). Exposure times are sampled per infector-subject
pair by thinning against the constant bound rate
max_k beta_k * (1 - e^{-gamma delta}) / gamma, with zero-intensity gaps
skipped via the memoryless property. Containment measures, testing-triggered
isolation, and tracing all act by thinning popped exposure events, never by
increasing any rate, so the sampled process stays exact.
"""

from __future__ import annotations

import heapq
import json
import math
from bisect import bisect_right
from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from .kernels import (decayed_intervals_mass, intersect_intervals,
                      merge_intervals)
from .params import EpidemicParams, sample_transition_delay
from .policies import PolicySet, conditional_lockdown_tick
from .testtrace import (TestConfig, TestingQueue, TestRecord,
                        empirical_exposure_probability, rank_contacts,
                        trace_contacts_location, trace_contacts_proximity)

# compartments (exactly one per individual at any time)
S, E, IA, IP, IS, R, D = range(7)
COMPARTMENT_NAMES = ("S", "E", "Ia", "Ip", "Is", "R", "D")

# log event kinds
EXPOSURE = "exposure"
BECOME_IA = "become_iasym"
BECOME_IP = "become_ipresym"
BECOME_IS = "become_isym"
HOSPITALIZE = "hospitalize"
RECOVER = "recover"
DIE = "die"
TEST_OUTCOME = "test_outcome"
POLICY_TICK = "policy_tick"

# internal heap codes
_EXPO, _IA, _IP, _IS, _HOSP, _REC, _DIE, _TSAMPLE, _TOUT, _TICK, _BG = range(11)

Event = namedtuple("Event", ["time", "kind", "subject", "infector", "site"])

HealthState = namedtuple("HealthState", [
    "susceptible", "exposed", "infectious_asym", "infectious_presym",
    "infectious_sym", "hospitalized", "recovered", "dead",
    "t_exposed", "t_infectious", "t_symptomatic", "t_resolved",
    "n_tested_positive", "n_tested_negative"])

HOURS_PER_DAY = 24.0
_INF = float("inf")


@dataclass(frozen=True)
class SeedCounts:
    n_symptomatic: int
    n_asymptomatic: int
    n_exposed: int

    def __post_init__(self):
        if min(self.n_symptomatic, self.n_asymptomatic, self.n_exposed) < 0:
            raise ValueError("seed counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.n_symptomatic + self.n_asymptomatic + self.n_exposed


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def init_seeds(observed_cases: int, alpha_asymptomatic: float, r0: float) -> SeedCounts:
    """Initial compartment seed counts from an observed case count.

    Asymptomatic seeds top the observed symptomatic cases up to the
    configured asymptomatic proportion; exposed seeds assume each infectious
    seed has already exposed r0 others on average.
    """
    if not 0.0 <= alpha_asymptomatic < 1.0:
        raise ValueError("alpha_asymptomatic must lie in [0, 1)")
    if r0 < 0:
        raise ValueError("r0 must be nonnegative")
    n_sym = int(observed_cases)
    n_asym = _round_half_up(alpha_asymptomatic / (1.0 - alpha_asymptomatic) * n_sym)
    n_exposed = _round_half_up(r0 * (n_asym + n_sym))
    return SeedCounts(n_sym, n_asym, n_exposed)


def lambda_max(params: EpidemicParams) -> float:
    """Upper bound on any pairwise site exposure rate (1/hour)."""
    return params.beta_max * params.saturated_mass


def exposure_contribution(j: int, i: int, t: float, traces, params: EpidemicParams,
                          r: float = 1.0, site_category=None) -> float:
    """Exposure rate of subject i caused by infector j at time t.

    Sums over the site the subject currently occupies (at most one) the
    transmission rate times j's exponentially decayed presence there within
    the contamination window, scaled by the relative infectiousness r.
    """
    hit = traces.site_at(i, t)
    if hit is None:
        return 0.0
    site, _ = hit
    if isinstance(params.beta, dict):
        if site_category is None:
            raise ValueError("per-category beta requires a site_category mapping")
        beta = params.beta[site_category[site]]
    else:
        beta = params.beta
    return beta * r * traces.decayed_presence(j, site, t, params.gamma, params.delta)


def household_contribution(j: int, i: int, t: float, traces, params: EpidemicParams,
                           r: float = 1.0) -> float:
    """Household exposure rate of i caused by housemate j at time t.

    Active only while the subject is at no site; integrates the decayed
    joint at-home presence of the pair over the contamination window.
    """
    if traces.site_at(i, t) is not None:
        return 0.0
    joint = intersect_intervals(traces.home_intervals(i), traces.home_intervals(j))
    starts = [a for a, _ in joint]
    ends = [b for _, b in joint]
    mass = decayed_intervals_mass(t, starts, ends, params.gamma, params.delta)
    return params.xi * r * mass


class _Sim:
    def __init__(self, world, traces, params, policies, test_config, t_max, rng_streams,
                 collect_log=True):
        self.world = world
        self.traces = traces
        self.params = params
        self.policies = policies if isinstance(policies, PolicySet) else PolicySet(policies)
        self.test_config = test_config
        self.t_max = float(t_max)
        self.rng, self.rng_seed_placement, self.rng_policy = rng_streams
        self.collect_log = collect_log

        n = world.n
        self.n = n
        self.comp = np.zeros(n, dtype=np.int8)
        self.hosp = np.zeros(n, dtype=bool)
        self.t_exposed = np.full(n, np.nan)
        self.t_infectious = np.full(n, np.nan)
        self.t_symptomatic = np.full(n, np.nan)
        self.t_resolved = np.full(n, np.nan)
        self.t_pos = np.zeros(n, dtype=np.int32)
        self.t_neg = np.zeros(n, dtype=np.int32)
        self.awaiting = np.zeros(n, dtype=bool)
        self.positive = np.zeros(n, dtype=bool)
        self.iso: list[list[tuple[float, float]]] = [[] for _ in range(n)]
        self._iso_any = False
        self.n_susceptible = n

        self.heap: list = []
        self.seq = 0
        self.events: list[Event] = []
        self.tests: list[TestRecord] = []
        self.n_enqueued = 0
        self.daily_pos = np.zeros(int(self.t_max // HOURS_PER_DAY) + 2, dtype=np.int64)

        self.site_category = world.site_category
        self.beta_by_site = {sid: params.beta_for(cat)
                             for sid, cat in world.site_category.items()}
        self.sat = params.saturated_mass
        self.bmax = params.beta_max
        self.site_bound = self.bmax * self.sat
        self.household_bound = params.xi * self.sat

        # curfew and distancing both gate visits; multipliers scale rates
        from .policies import AlternatingCurfew, SocialDistancing, VulnerableDistancing
        pols = self.policies.static + [p for c in self.policies.conditional
                                       for p in c.policies]
        self._policies_gate = any(isinstance(p, (AlternatingCurfew, SocialDistancing,
                                                 VulnerableDistancing)) for p in pols)
        self._has_multipliers = any(
            not isinstance(p, (AlternatingCurfew, SocialDistancing, VulnerableDistancing))
            for p in pols)
        nv = traces.n_visits
        self._admit_cache = np.full(nv, -1, dtype=np.int8)
        if self._policies_gate:
            self._u_sd = self.rng_policy.random(nv)
            self._u_vd = self.rng_policy.random(nv)
        else:
            self._u_sd = self._u_vd = None

        self.tq = TestingQueue(test_config.tests_per_day) if test_config else None
        self._home_joint_cache: dict[tuple[int, int], tuple[list, list]] = {}

    # ---- event plumbing -------------------------------------------------

    def _push(self, t, code, *payload):
        self.seq += 1
        heapq.heappush(self.heap, (t, self.seq, code) + payload)

    def _log(self, t, kind, subject, infector=None, site=None):
        if self.collect_log:
            self.events.append(Event(t, kind, subject, infector, site))

    # ---- isolation and visit admission ----------------------------------

    def _add_isolation(self, i, start, end):
        self.iso[i].append((start, end))
        self._iso_any = True

    def _close_open_isolation(self, i, t):
        # positive-test isolation lasts until the infection resolves
        self.iso[i] = [(a, t if math.isinf(b) else b) for a, b in self.iso[i]]

    def _isolated_at(self, i, t) -> bool:
        for a, b in self.iso[i]:
            if a <= t < b:
                return True
        return False

    def _visit_admitted(self, vidx: int) -> bool:
        cached = self._admit_cache[vidx]
        if cached >= 0:
            return bool(cached)
        owner = int(self.traces.ind[vidx])
        t = float(self.traces.start[vidx])
        ok = True
        if self._iso_any and self._isolated_at(owner, t):
            ok = False
        if ok and self._policies_gate:
            ok = self.policies.admits(self.world.individuals[owner], t,
                                      self._u_sd[vidx], self._u_vd[vidx])
        self._admit_cache[vidx] = 1 if ok else 0
        return ok

    # ---- exposure sampling (per infector-subject pair) ------------------

    def _sample_pair(self, wstarts, wends, rate, accept, t_from):
        """First accepted proposal time of a thinned pair process, or None."""
        if rate <= 0.0 or not wstarts:
            return None
        rng = self.rng
        tau = t_from
        nwin = len(wstarts)
        while True:
            tau += rng.exponential(1.0 / rate)
            if tau >= self.t_max:
                return None
            idx = bisect_right(wstarts, tau) - 1
            if idx < 0 or wends[idx] <= tau:
                nxt = idx + 1
                if nxt >= nwin or wstarts[nxt] >= self.t_max:
                    return None
                tau = wstarts[nxt]  # memoryless skip over a zero-rate gap
                continue
            p = accept(tau)
            assert -1e-9 <= p <= 1.0 + 1e-9, f"thinning acceptance out of range: {p}"
            if p > 0.0 and (p >= 1.0 or rng.random() < p):
                return tau

    def _site_accept(self, j, i):
        traces, gamma, delta = self.traces, self.params.gamma, self.params.delta
        bound = self.site_bound

        def accept(tau):
            hit = traces.site_at(i, tau)
            if hit is None:
                return 0.0
            k, _ = hit
            w = traces.decayed_presence(j, k, tau, gamma, delta)
            return self.beta_by_site[k] * w / bound

        return accept

    def _household_windows(self, j, i):
        key = (i, j) if i < j else (j, i)
        cached = self._home_joint_cache.get(key)
        if cached is None:
            joint = intersect_intervals(self.traces.home_intervals(i),
                                        self.traces.home_intervals(j))
            cached = ([a for a, _ in joint], [b for _, b in joint])
            self._home_joint_cache[key] = cached
        return cached

    def _household_accept(self, j, i):
        starts, ends = self._household_windows(j, i)
        gamma, delta, sat = self.params.gamma, self.params.delta, self.sat

        def accept(tau):
            return decayed_intervals_mass(tau, starts, ends, gamma, delta) / sat

        return accept

    def _sample_site_exposure(self, j, i, wstarts, wends, r, t_from):
        tau = self._sample_pair(wstarts, wends, r * self.site_bound,
                                self._site_accept(j, i), t_from)
        if tau is not None:
            hit = self.traces.site_at(i, tau)
            site = hit[0] if hit else -1
            self._push(tau, _EXPO, i, j, site, wstarts, wends)

    def _sample_household_exposure(self, j, i, r, t_from):
        starts, ends = self._household_windows(j, i)
        # event times are restricted to the remaining horizon
        idx = bisect_right(ends, t_from)
        wstarts = [max(s, t_from) for s in starts[idx:]]
        wends = ends[idx:]
        tau = self._sample_pair(wstarts, wends, r * self.household_bound,
                                self._household_accept(j, i), t_from)
        if tau is not None:
            self._push(tau, _EXPO, i, j, -1, wstarts, wends)

    def _push_exposures(self, j, t0, r):
        """Sample the next exposure j causes toward every susceptible future
        contact and every susceptible housemate."""
        traces = self.traces
        delta = self.params.delta
        if self.site_bound > 0.0:
            index = traces.site_index()
            starts_j = traces._starts[j]
            ends_j = traces._ends[j]
            sites_j = traces._sites[j]
            per_subject: dict[int, list[tuple[float, float]]] = {}
            for v in range(len(starts_j)):
                b = ends_j[v] + delta
                if b <= t0:
                    continue
                a = max(starts_j[v], t0)
                si = index.get(sites_j[v])
                if si is None:
                    continue
                s_arr = si["starts"]
                lo = np.searchsorted(s_arr, a - si["max_duration"], side="left")
                hi = np.searchsorted(s_arr, b, side="left")
                if hi <= lo:
                    continue
                owners = si["owners"][lo:hi]
                wlo = np.maximum(s_arr[lo:hi], a)
                whi = np.minimum(si["ends"][lo:hi], b)
                ok = (whi > wlo) & (owners != j)
                for o, s0, e0 in zip(owners[ok].tolist(), wlo[ok].tolist(), whi[ok].tolist()):
                    if self.comp[o] == S:
                        per_subject.setdefault(o, []).append((s0, e0))
            for i, wins in per_subject.items():
                wins = merge_intervals(wins)
                self._sample_site_exposure(j, i, [w[0] for w in wins],
                                           [w[1] for w in wins], r, t0)
        if self.household_bound > 0.0:
            for i in self.world.housemates(j):
                if self.comp[i] == S:
                    self._sample_household_exposure(j, i, r, t0)

    # ---- policy thinning at pop time ------------------------------------

    def _policy_accept_prob(self, tau, subject, infector, site):
        if site < 0:
            if self._iso_any and (self._isolated_at(subject, tau)
                                  or self._isolated_at(infector, tau)):
                return 0.0
            return 1.0
        if self._iso_any and (self._isolated_at(subject, tau)
                              or self._isolated_at(infector, tau)):
            return 0.0
        hit = self.traces.site_at(subject, tau)
        if hit is None:
            return 0.0
        k, vidx = hit
        gating = self._policies_gate or self._iso_any
        if gating and not self._visit_admitted(vidx):
            return 0.0
        q = 1.0
        if self._has_multipliers:
            q *= self.policies.site_multiplier(self.site_category[k], tau)
        if gating:
            gamma, delta = self.params.gamma, self.params.delta
            w_full = self.traces.decayed_presence(infector, k, tau, gamma, delta)
            if w_full <= 0.0:
                return 0.0
            w_gated = self.traces.decayed_presence(infector, k, tau, gamma, delta,
                                                   visit_ok=self._visit_admitted)
            q *= w_gated / w_full
        assert -1e-9 <= q <= 1.0 + 1e-9, f"policy thinning ratio out of range: {q}"
        return q

    # ---- state transitions ----------------------------------------------

    def _apply_exposure(self, t, i, infector, site):
        self.comp[i] = E
        self.t_exposed[i] = t
        self.n_susceptible -= 1
        self._log(t, EXPOSURE, i, infector, site if (site is not None and site >= 0) else None)
        delay = sample_transition_delay("incubation", self.params, self.rng)
        if self.rng.random() < self.params.alpha_asymptomatic:
            self._push(t + delay, _IA, i)
        else:
            self._push(t + delay, _IP, i)

    def _on_become_ia(self, t, i, push_exposures=True):
        self.comp[i] = IA
        self.t_infectious[i] = t
        self._log(t, BECOME_IA, i)
        delay = sample_transition_delay("recovery_asym", self.params, self.rng)
        self._push(t + delay, _REC, i)
        if push_exposures:
            self._push_exposures(i, t, self.params.mu)

    def _on_become_ip(self, t, i, push_exposures=True):
        self.comp[i] = IP
        self.t_infectious[i] = t
        self._log(t, BECOME_IP, i)
        delay = sample_transition_delay("presym_to_sym", self.params, self.rng)
        self._push(t + delay, _IS, i)
        if push_exposures:
            self._push_exposures(i, t, 1.0)

    def _on_become_is(self, t, i):
        self.comp[i] = IS
        self.t_symptomatic[i] = t
        self._log(t, BECOME_IS, i)
        age = self.world.individuals[i].age_group
        u = self.rng.random()
        v = self.rng.random()
        if u < self.params.alpha_hosp_by_age[age]:
            dy = sample_transition_delay("onset_to_hosp", self.params, self.rng)
            self._push(t + dy, _HOSP, i)
        if v < self.params.alpha_death_by_age[age]:
            dz = sample_transition_delay("onset_to_death", self.params, self.rng)
            self._push(t + dz, _DIE, i)
        else:
            dr = sample_transition_delay("recovery_sym", self.params, self.rng)
            self._push(t + dr, _REC, i)
        if self.tq is not None:
            self._enqueue_test(i, t)

    # ---- testing ---------------------------------------------------------

    def _enqueue_test(self, i, t):
        if self.awaiting[i] or self.positive[i]:
            return
        self.awaiting[i] = True
        self.n_enqueued += 1
        t_sample = self.tq.assign_slot(t)
        self._push(t_sample, _TSAMPLE, i, t)

    def _bypass_test(self, i, t):
        if self.awaiting[i] or self.positive[i]:
            return
        self.awaiting[i] = True
        self.n_enqueued += 1
        self._push(t, _TSAMPLE, i, t)

    def _on_test_sample(self, t, i, t_enqueue):
        result = self.comp[i] in (E, IA, IP, IS)
        self._push(t + self.test_config.delta_test_h, _TOUT, i, t_enqueue, bool(result))

    def _on_test_outcome(self, t, i, t_enqueue, result):
        self.awaiting[i] = False
        if result:
            self.t_pos[i] += 1
        else:
            self.t_neg[i] += 1
        self.tests.append(TestRecord(t_enqueue, t, i, bool(result)))
        self._log(t, TEST_OUTCOME, i)
        if result:
            self.positive[i] = True
            day = int(t // HOURS_PER_DAY)
            if day < len(self.daily_pos):
                self.daily_pos[day] += 1
            if self.comp[i] in (E, IA, IP, IS):
                # isolate while still infected; recovery/death closes the gate
                self._add_isolation(i, t, _INF)
            self._apply_tracing(i, t)

    def _apply_tracing(self, i, t_outcome):
        tc = self.test_config.tracing
        if tc is None or not self.world.individuals[i].compliant:
            return
        t0 = max(0.0, t_outcome - tc.lookback_days * HOURS_PER_DAY)
        if t_outcome <= t0:
            return
        window = (t0, t_outcome)
        if tc.basis == "location":
            records = trace_contacts_location(i, window, self.traces, self.params,
                                              visit_ok=self._visit_admitted)
        else:
            records = trace_contacts_proximity(i, window, self.traces,
                                               visit_ok=self._visit_admitted)
        contacts = sorted({rec.j for rec in records
                           if self.world.individuals[rec.j].compliant})
        iso_end = t_outcome + tc.isolation_days * HOURS_PER_DAY
        for j in contacts:
            self._add_isolation(j, t_outcome, iso_end)
        if tc.mode == "isolate":
            return
        if tc.mode == "isolate_test":
            to_test = contacts
        else:
            probs = {j: empirical_exposure_probability(
                i, j, window, self.traces, self.params,
                site_category=self.site_category, visit_ok=self._visit_admitted)
                for j in contacts}
            to_test = rank_contacts(probs, tc.top_k)
        for j in to_test:
            self._bypass_test(j, t_outcome)

    # ---- policy ticks and background imports ------------------------------

    def _on_tick(self, t):
        day = int(round(t / HOURS_PER_DAY))
        toggled = False
        for c in self.policies.conditional:
            if not (c.window[0] <= t < c.window[1]):
                continue
            counts = self.daily_pos[max(0, day - c.window_days):day].tolist()
            was = c.controller.active
            conditional_lockdown_tick(counts, self.world.n, c.controller, t)
            toggled |= (was != c.controller.active)
        if toggled:
            self._log(t, POLICY_TICK, None)

    def _push_next_background(self, t_from):
        rate_h = (self.params.background_weekly_per_100k
                  * (self.n / 100_000.0) / 168.0)
        if rate_h <= 0.0:
            return
        t = t_from + self.rng.exponential(1.0 / rate_h)
        if t < self.t_max:
            self._push(t, _BG)

    def _on_background(self, t):
        self._push_next_background(t)
        if self.n_susceptible <= 0:
            return
        while True:
            i = int(self.rng.integers(self.n))
            if self.comp[i] == S:
                break
        self._apply_exposure(t, i, None, None)

    # ---- seeding ----------------------------------------------------------

    def seed_from_counts(self, seeds: SeedCounts):
        if seeds.total == 0:
            return
        if seeds.total > self.n:
            raise ValueError("more seeds than individuals")
        ids = self.rng_seed_placement.choice(self.n, size=seeds.total, replace=False)
        sym = ids[:seeds.n_symptomatic]
        asym = ids[seeds.n_symptomatic:seeds.n_symptomatic + seeds.n_asymptomatic]
        exposed = ids[seeds.n_symptomatic + seeds.n_asymptomatic:]
        self.seed_explicit({"symptomatic": sym.tolist(), "asymptomatic": asym.tolist(),
                            "exposed": exposed.tolist()},
                           exposures_from_infectious=False, mark_positive=True)

    def seed_explicit(self, spec, exposures_from_infectious=False, mark_positive=False):
        for i in spec.get("symptomatic", []):
            self.comp[i] = E  # walk the chain so the log replays cleanly
            self.n_susceptible -= 1
            self.t_exposed[i] = 0.0
            self._log(0.0, EXPOSURE, i, None, None)
            if mark_positive:
                self.positive[i] = True
                self.t_pos[i] += 1
                self.tests.append(TestRecord(0.0, 0.0, i, True))
                self.daily_pos[0] += 1
                self._add_isolation(i, 0.0, _INF)
            self._on_become_ip(0.0, i, push_exposures=exposures_from_infectious)
            self._on_become_is(0.0, i)
        for i in spec.get("asymptomatic", []):
            self.comp[i] = E
            self.n_susceptible -= 1
            self.t_exposed[i] = 0.0
            self._log(0.0, EXPOSURE, i, None, None)
            self._on_become_ia(0.0, i, push_exposures=exposures_from_infectious)
        for i in spec.get("exposed", []):
            self._apply_exposure(0.0, i, None, None)

    # ---- main loop ---------------------------------------------------------

    def run(self):
        if self.policies.conditional:
            day = 1
            while day * HOURS_PER_DAY <= self.t_max:
                self._push(day * HOURS_PER_DAY, _TICK)
                day += 1
        self._push_next_background(0.0)

        heap = self.heap
        while heap:
            entry = heapq.heappop(heap)
            t, _seq, code = entry[0], entry[1], entry[2]
            if t > self.t_max:
                break
            if code == _EXPO:
                i, j, site, wstarts, wends = entry[3:]
                if self.comp[j] in (R, D):
                    continue  # infector no longer infectious: thinning discard
                q = self._policy_accept_prob(t, i, j, site)
                if q < 1.0 and (q <= 0.0 or self.rng.random() >= q):
                    # rejected by containment measures: re-sample this pair
                    r = self.params.mu if self.comp[j] == IA else 1.0
                    accept = (self._household_accept(j, i) if site < 0
                              else self._site_accept(j, i))
                    bound = (self.household_bound if site < 0 else self.site_bound)
                    tau = self._sample_pair(wstarts, wends, r * bound, accept, t)
                    if tau is not None:
                        nsite = -1
                        if site >= 0:
                            hit = self.traces.site_at(i, tau)
                            nsite = hit[0] if hit else -1
                        self._push(tau, _EXPO, i, j, nsite, wstarts, wends)
                    continue
                if self.comp[i] != S:
                    continue
                self._apply_exposure(t, i, j, site)
            elif code == _IA:
                self._on_become_ia(t, entry[3])
            elif code == _IP:
                self._on_become_ip(t, entry[3])
            elif code == _IS:
                if self.comp[entry[3]] == IP:
                    self._on_become_is(t, entry[3])
            elif code == _HOSP:
                i = entry[3]
                if self.comp[i] == IS:
                    self.hosp[i] = True
                    self._log(t, HOSPITALIZE, i)
            elif code == _REC:
                i = entry[3]
                if self.comp[i] in (IA, IS):
                    self.comp[i] = R
                    self.hosp[i] = False
                    self.t_resolved[i] = t
                    if self.positive[i]:
                        self._close_open_isolation(i, t)
                    self._log(t, RECOVER, i)
            elif code == _DIE:
                i = entry[3]
                if self.comp[i] == IS:
                    self.comp[i] = D
                    self.hosp[i] = False
                    self.t_resolved[i] = t
                    if self.positive[i]:
                        self._close_open_isolation(i, t)
                    self._log(t, DIE, i)
            elif code == _TSAMPLE:
                self._on_test_sample(t, entry[3], entry[4])
            elif code == _TOUT:
                self._on_test_outcome(t, entry[3], entry[4], entry[5])
            elif code == _TICK:
                self._on_tick(t)
            elif code == _BG:
                self._on_background(t)
        return self


class _LogOps:
    """Shared file and replay helpers over (events, tests, n, t_max)."""

    @property
    def horizon_days(self) -> int:
        return int(math.ceil(self.t_max / HOURS_PER_DAY))

    def health_state(self, i: int) -> "HealthState":
        """End-of-run health flags, transition times, and test counters."""
        c = int(self.final_comp[i])
        return HealthState(
            susceptible=c == S, exposed=c == E, infectious_asym=c == IA,
            infectious_presym=c == IP, infectious_sym=c == IS,
            hospitalized=bool(self.final_hosp[i]), recovered=c == R, dead=c == D,
            t_exposed=float(self.t_exposed[i]),
            t_infectious=float(self.t_infectious[i]),
            t_symptomatic=float(self.t_symptomatic[i]),
            t_resolved=float(self.t_resolved[i]),
            n_tested_positive=int(self.t_pos[i]),
            n_tested_negative=int(self.t_neg[i]))

    def positive_ids_by(self, t: float) -> list[int]:
        seen = set()
        for rec in self.tests:
            if rec.positive and rec.t_outcome <= t:
                seen.add(rec.individual)
        return sorted(seen)

    def cumulative_positive_by_day(self) -> np.ndarray:
        """Cumulative positive test outcomes at each day end (length horizon_days)."""
        days = self.horizon_days
        daily = np.zeros(days, dtype=np.int64)
        for rec in self.tests:
            if rec.positive:
                d = min(int(rec.t_outcome // HOURS_PER_DAY), days - 1)
                daily[d] += 1
        return np.cumsum(daily)

    def events_jsonl(self) -> str:
        lines = []
        for ev in self.events:
            lines.append(json.dumps({
                "t_h": ev.time, "kind": ev.kind, "subject": ev.subject,
                "infector": ev.infector, "site": ev.site}))
        return "\n".join(lines) + ("\n" if lines else "")

    def save_events_jsonl(self, path):
        with open(path, "w") as fh:
            fh.write(self.events_jsonl())

    def save_tests_csv(self, path):
        with open(path, "w") as fh:
            fh.write("t_enqueue_h,t_outcome_h,individual,result\n")
            for rec in self.tests:
                label = "positive" if rec.positive else "negative"
                fh.write(f"{rec.t_enqueue},{rec.t_outcome},{rec.individual},{label}\n")

    def save_daily_csv(self, path):
        """Per-day compartment counts at day ends, one row per day."""
        from .analysis import daily_compartment_counts
        daily = daily_compartment_counts(self)
        with open(path, "w") as fh:
            fh.write("day,susceptible,exposed,infectious_asym,infectious_presym,"
                     "infectious_sym,hospitalized,recovered,dead,cum_positive_tests\n")
            for day, row in enumerate(daily):
                fh.write(",".join([str(day)] + [str(int(v)) for v in row]) + "\n")


class SimResult(_LogOps):
    """Immutable record of one simulation rollout."""

    def __init__(self, sim: _Sim, want_realized_mask: bool = False):
        self.events: tuple[Event, ...] = tuple(sim.events)
        self.tests: tuple[TestRecord, ...] = tuple(sorted(sim.tests))
        self.n_individuals = sim.n
        self.t_max = sim.t_max
        self.final_comp = sim.comp.copy()
        self.final_hosp = sim.hosp.copy()
        self.t_pos = sim.t_pos.copy()
        self.t_neg = sim.t_neg.copy()
        self.t_exposed = sim.t_exposed.copy()
        self.t_infectious = sim.t_infectious.copy()
        self.t_symptomatic = sim.t_symptomatic.copy()
        self.t_resolved = sim.t_resolved.copy()
        self.isolation_intervals = tuple(tuple(iv) for iv in sim.iso)
        self.n_enqueued = sim.n_enqueued
        self.still_awaiting = int(sim.awaiting.sum())
        self.realized_mask = None
        if want_realized_mask:
            if not (sim._policies_gate or sim._iso_any):
                self.realized_mask = np.ones(sim.traces.n_visits, dtype=bool)
            else:
                self.realized_mask = np.array(
                    [sim._visit_admitted(g) for g in range(sim.traces.n_visits)],
                    dtype=bool)


class EventLogView(_LogOps):
    """Event log and test table loaded back from disk."""

    def __init__(self, events, tests, n_individuals: int, t_max: float):
        self.events = tuple(events)
        self.tests = tuple(tests)
        self.n_individuals = n_individuals
        self.t_max = t_max

    @classmethod
    def load(cls, events_path, tests_path=None, n_individuals=None, t_max=None):
        events = []
        with open(events_path) as fh:
            for line in fh:
                rec = json.loads(line)
                events.append(Event(rec["t_h"], rec["kind"], rec["subject"],
                                    rec["infector"], rec["site"]))
        tests = []
        if tests_path is not None:
            import csv as _csv
            with open(tests_path, newline="") as fh:
                for row in _csv.DictReader(fh):
                    tests.append(TestRecord(float(row["t_enqueue_h"]),
                                            float(row["t_outcome_h"]),
                                            int(row["individual"]),
                                            row["result"] == "positive"))
        if n_individuals is None:
            n_individuals = 1 + max((ev.subject for ev in events
                                     if ev.subject is not None), default=0)
        if t_max is None:
            last = max((ev.time for ev in events), default=0.0)
            t_max = math.ceil(last / HOURS_PER_DAY) * HOURS_PER_DAY or HOURS_PER_DAY
        return cls(events, tests, n_individuals, t_max)


def rng_streams(rng):
    """Derive the (epidemic, seed placement, policy) generator triple."""
    if isinstance(rng, np.random.SeedSequence):
        ss = rng
    elif isinstance(rng, np.random.Generator):
        return rng, rng, rng
    else:
        ss = np.random.SeedSequence(rng)
    children = ss.spawn(3)
    return tuple(np.random.default_rng(c) for c in children)


def run_simulation(world, traces, params: EpidemicParams, *, seeds: SeedCounts | None = None,
                   policies=None, test_config: TestConfig | None = None,
                   t_max: float | None = None, rng=0,
                   explicit_seeds=None, explicit_seed_exposures=False,
                   collect_log=True, want_realized_mask=False) -> SimResult:
    """Run one epidemic rollout over pre-generated traces.

    ``seeds`` places the initial compartment counts uniformly at random,
    marking symptomatic seeds as already tested positive; initially
    infectious seeds cause no further exposures. ``explicit_seeds`` instead
    pins given individuals (a mapping with keys symptomatic / asymptomatic /
    exposed), optionally letting infectious seeds expose others, which is
    what sampler-vs-oracle comparisons need.
    """
    streams = rng_streams(rng)
    sim = _Sim(world, traces, params, policies, test_config,
               traces.t_max if t_max is None else t_max, streams,
               collect_log=collect_log)
    if seeds is not None:
        sim.seed_from_counts(seeds)
    if explicit_seeds is not None:
        sim.seed_explicit(explicit_seeds,
                          exposures_from_infectious=explicit_seed_exposures,
                          mark_positive=False)
    sim.run()
    return SimResult(sim, want_realized_mask=want_realized_mask)
