import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hotspot.kernels import saturated_mass
from hotspot.mobility import (TraceSet, Visit, build_traces, generate_trace,
                              load_traces_jsonl, per_site_rate,
                              presence_integral, save_traces_jsonl)
from hotspot.population import Individual

GAMMA = 0.3465
DELTA = 4.6438


def person(age_group=2, sites=None):
    return Individual(id=0, age_group=age_group, household_id=0, home=(47.0, 8.0),
                      assigned_sites=sites or {})


def zero_rates():
    from hotspot.params import AGE_GROUPS, SITE_CATEGORIES
    return {a: {c: 0.0 for c in SITE_CATEGORIES} for a in AGE_GROUPS}


def test_zero_rates_give_empty_trace():
    ind = person(sites={"social": [0, 1], "work": [2]})
    assert generate_trace(ind, zero_rates(), t_max=1000.0, rng=0) == []


def test_rate_split_over_assigned_sites():
    # summed per-site rates recover the weekly category rate exactly
    weekly = 2.0
    n_sites = 10
    lam = per_site_rate(weekly, n_sites)
    assert lam * n_sites * 168.0 == pytest.approx(weekly, abs=1e-12)


def test_social_visit_count_matches_poisson_mean():
    rates = zero_rates()
    rates["15-34"]["social"] = 2.0
    ind = person(sites={"social": list(range(10))})
    t_max = 1680.0  # ten weeks
    totals = []
    for seed in range(500):
        trace = generate_trace(ind, rates, t_max=t_max, rng=seed)
        totals.append(len(trace))
    assert np.mean(totals) == pytest.approx(20.0, rel=0.10)


def test_mean_duration_tracks_configuration():
    rates = zero_rates()
    rates["15-34"]["grocery"] = 20.0  # hot rate to accumulate visits quickly
    ind = person(sites={"grocery": [0]})
    durations = []
    seed = 0
    while len(durations) < 10_000:
        trace = generate_trace(ind, rates, t_max=2000.0, rng=seed)
        durations.extend(v.t_depart - v.t_arrive for v in trace)
        seed += 1
    assert np.mean(durations) == pytest.approx(0.5, rel=0.05)  # 30 minutes


def test_work_rate_dash_generates_no_visits():
    # young children carry a work assignment but the rate table is zero there
    ind = person(age_group=0, sites={"work": [0]})
    trace = generate_trace(ind, t_max=2000.0, rng=0)
    assert trace == []


def test_traces_sorted_and_nonoverlapping():
    rates = zero_rates()
    rates["15-34"].update({"social": 30.0, "work": 30.0, "grocery": 20.0})
    ind = person(sites={"social": [0, 1], "work": [2], "grocery": [3]})
    trace = generate_trace(ind, rates, t_max=500.0, rng=11)
    assert len(trace) > 100
    for v1, v2 in zip(trace, trace[1:]):
        assert v1.t_arrive <= v2.t_arrive
        assert v2.t_arrive >= v1.t_depart  # disjoint: at most one site at a time


@given(seed=st.integers(0, 10_000), rate=st.floats(0.5, 40.0))
@settings(max_examples=60, deadline=None)
def test_nonoverlap_property(seed, rate):
    rates = zero_rates()
    rates["15-34"]["social"] = rate
    ind = person(sites={"social": [0, 1, 2]})
    trace = generate_trace(ind, rates, t_max=300.0, rng=seed)
    for v1, v2 in zip(trace, trace[1:]):
        assert v2.t_arrive >= v1.t_depart


def test_trace_determinism():
    rates = zero_rates()
    rates["15-34"]["social"] = 5.0
    ind = person(sites={"social": [0, 1]})
    a = generate_trace(ind, rates, t_max=400.0, rng=99)
    b = generate_trace(ind, rates, t_max=400.0, rng=99)
    assert a == b


def test_build_traces_matches_contract(tmp_path):
    people = [Individual(id=i, age_group=2, household_id=i, home=(47.0, 8.0),
                         assigned_sites={"social": [0, 1], "grocery": [2]})
              for i in range(30)]
    traces = build_traces(people, 14 * 24.0, rng=4)
    assert traces.n_individuals == 30
    for i in range(30):
        visits = traces.visits_of(i)
        for v1, v2 in zip(visits, visits[1:]):
            assert v2.t_arrive >= v1.t_depart
    again = build_traces(people, 14 * 24.0, rng=4)
    assert list(traces.iter_visits()) == list(again.iter_visits())

    path = tmp_path / "traces.jsonl"
    save_traces_jsonl(traces, path)
    loaded = load_traces_jsonl(path, 30, 14 * 24.0)
    assert list(loaded.iter_visits()) == list(traces.iter_visits())


def test_presence_integral_examples():
    trace = [Visit(0, 5, 0.0, 1.0)]
    assert presence_integral(trace, 5, 10.0 + DELTA, GAMMA, DELTA) == 0.0
    got = presence_integral(trace, 5, 1.0, GAMMA, DELTA)
    assert got == pytest.approx(0.8451, abs=1e-4)
    full = [Visit(0, 5, 0.0, 100.0)]
    got = presence_integral(full, 5, 50.0, GAMMA, DELTA)
    assert got == pytest.approx(0.8 / 0.3465, abs=2e-3)
    assert got == pytest.approx(saturated_mass(GAMMA, DELTA), abs=1e-12)


def test_presence_integral_bounded_and_monotone():
    sat = saturated_mass(GAMMA, DELTA)
    for width in np.linspace(0.1, 10.0, 40):
        trace = [Visit(0, 1, 0.0, width)]
        val = presence_integral(trace, 1, width, GAMMA, DELTA)
        assert 0.0 <= val <= sat + 1e-12


def test_traceset_site_at_and_presence():
    visits = [Visit(0, 3, 1.0, 2.0), Visit(0, 4, 5.0, 6.0)]
    traces = TraceSet.from_visits(visits, 1, 10.0)
    assert traces.site_at(0, 1.5) == (3, 0)
    assert traces.site_at(0, 4.0) is None
    assert traces.site_at(0, 5.0) == (4, 1)
    got = traces.decayed_presence(0, 3, 2.5, GAMMA, DELTA)
    assert got == pytest.approx(
        presence_integral(visits, 3, 2.5, GAMMA, DELTA), abs=1e-12)


def test_home_intervals_complement_visits():
    visits = [Visit(0, 1, 2.0, 3.0), Visit(0, 2, 5.0, 7.0)]
    traces = TraceSet.from_visits(visits, 1, 10.0)
    assert traces.home_intervals(0) == [(0.0, 2.0), (3.0, 5.0), (7.0, 10.0)]
