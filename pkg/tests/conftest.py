import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hotspot.mobility import TraceSet, Visit
from hotspot.population import Individual, Site
from hotspot.world import World


@pytest.fixture
def toy_world():
    """Five individuals, two sites, two households; traces are hand-built
    per test."""
    individuals = [Individual(id=i, age_group=2, household_id=i // 3,
                              home=(47.0, 8.0)) for i in range(5)]
    sites = [Site(0, "social", 47.0, 8.0), Site(1, "work", 47.0, 8.001)]
    return World(individuals=individuals, sites=sites)


def periodic_traces(n_individuals, t_max, period=6.0, length=1.2, stagger=0.5,
                    site_of=lambda i, k: (i + k) % 2):
    visits = []
    for i in range(n_individuals):
        k = 0
        while True:
            a = k * period + stagger * i
            if a >= t_max:
                break
            visits.append(Visit(i, site_of(i, k), a, min(a + length, t_max)))
            k += 1
    return TraceSet.from_visits(visits, n_individuals, t_max)


@pytest.fixture
def slow_disease():
    """Transition table with week-scale deterministic delays so toy runs
    keep their seeds infectious over short horizons."""
    return {name: (8.0, 0.01) for name in
            ["incubation", "recovery_sym", "recovery_asym",
             "presym_to_sym", "onset_to_hosp", "onset_to_death"]}
