"""Event-log replay checks for the simulator's structural invariants."""

from __future__ import annotations

import numpy as np

from .simulate import (BECOME_IA, BECOME_IP, BECOME_IS, DIE, EXPOSURE,
                       HOSPITALIZE, POLICY_TICK, RECOVER, TEST_OUTCOME)


class InvariantViolation(AssertionError):
    pass


def validate_events(result, world=None, traces=None, params=None) -> dict:
    """Replay an event log, asserting the state-machine invariants.

    Checks, for every event: legal predecessor compartment (which implies the
    exactly-one-compartment partition), hospitalization only while
    symptomatic, nondecreasing event times and cumulative counters, and,
    when ``traces``/``params`` are given, exposure causality: the infector
    was infectious at exposure time and, for site exposures, the subject was
    present at the site while the infector's decayed presence there was
    positive.
    """
    n = result.n_individuals
    comp = np.zeros(n, dtype=np.int8)  # 0 S, 1 E, 2 Ia, 3 Ip, 4 Is, 5 R, 6 D
    hosp = np.zeros(n, dtype=bool)
    last_t = 0.0
    cum_exposed = cum_recovered = cum_dead = 0
    checked = {"events": 0, "exposures": 0, "site_exposures": 0}

    def fail(msg, ev):
        raise InvariantViolation(f"{msg}: {ev}")

    for ev in result.events:
        checked["events"] += 1
        if ev.time < last_t - 1e-9:
            fail("event times must be nondecreasing", ev)
        last_t = max(last_t, ev.time)
        if ev.kind == POLICY_TICK:
            continue
        i = ev.subject
        if ev.kind == EXPOSURE:
            if comp[i] != 0:
                fail("exposure of a non-susceptible subject", ev)
            if ev.infector is not None:
                j = ev.infector
                if comp[j] not in (2, 3, 4):
                    fail("infector not infectious at exposure time", ev)
                checked["exposures"] += 1
                if traces is not None and params is not None:
                    if ev.site is not None:
                        hit = traces.site_at(i, ev.time)
                        if hit is None or hit[0] != ev.site:
                            fail("subject not at the exposure site", ev)
                        w = traces.decayed_presence(j, ev.site, ev.time,
                                                    params.gamma, params.delta)
                        if w <= 0.0:
                            fail("no infector presence within the window", ev)
                        checked["site_exposures"] += 1
                    elif world is not None:
                        if (world.individuals[i].household_id
                                != world.individuals[j].household_id):
                            fail("household exposure across households", ev)
            comp[i] = 1
            cum_exposed += 1
        elif ev.kind == BECOME_IA:
            if comp[i] != 1:
                fail("asymptomatic onset without exposure", ev)
            comp[i] = 2
        elif ev.kind == BECOME_IP:
            if comp[i] != 1:
                fail("presymptomatic onset without exposure", ev)
            comp[i] = 3
        elif ev.kind == BECOME_IS:
            if comp[i] != 3:
                fail("symptomatic onset without presymptomatic phase", ev)
            comp[i] = 4
        elif ev.kind == HOSPITALIZE:
            if comp[i] != 4:
                fail("hospitalization of a non-symptomatic subject", ev)
            hosp[i] = True
        elif ev.kind == RECOVER:
            if comp[i] not in (2, 4):
                fail("recovery from a non-infectious compartment", ev)
            comp[i] = 5
            hosp[i] = False
            cum_recovered += 1
        elif ev.kind == DIE:
            if comp[i] != 4:
                fail("death outside the symptomatic compartment", ev)
            comp[i] = 6
            hosp[i] = False
            cum_dead += 1
        elif ev.kind == TEST_OUTCOME:
            pass
        else:
            fail("unknown event kind", ev)
        if hosp[i] and comp[i] != 4:
            fail("hospitalized while not symptomatic", ev)

    if cum_exposed < cum_recovered + cum_dead:
        raise InvariantViolation("more resolutions than exposures")
    checked["cum_exposed"] = cum_exposed
    checked["cum_recovered"] = cum_recovered
    checked["cum_dead"] = cum_dead
    return checked
