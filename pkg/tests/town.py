"""Synthetic-town builders shared by the heavier tests.

The standard town concentrates population near the center and places a few
high-traffic social hubs there, so most residents carry a hub in their
assigned social sites.
"""

import numpy as np

from hotspot.mobility import build_traces
from hotspot.population import DEFAULT_HOUSEHOLDS, Site, Tile
from hotspot.world import build_world

AGE_MIX = [0.05, 0.10, 0.25, 0.35, 0.17, 0.08]


def town_tiles(grid=5, base_pop=3000.0):
    tiles = []
    for r in range(grid):
        for c in range(grid):
            dist = abs(r - grid // 2) + abs(c - grid // 2)
            tiles.append(Tile(f"t{r}{c}", 47.0 + r * 0.009, 8.0 + c * 0.013,
                              base_pop / (1.0 + dist)))
    return tiles


def town_sites(rng, n_hubs=4, counts=(60, 480, 400, 150, 90)):
    n_edu, n_work, n_social, n_transport, n_grocery = counts
    sites = []

    def add(cat, n, hubs=0):
        for m in range(n):
            if m < hubs:
                lat = 47.018 + rng.normal(0.0, 0.001)
                lon = 8.026 + rng.normal(0.0, 0.0015)
            else:
                lat = 47.0 + rng.uniform(0.0, 0.036)
                lon = 8.0 + rng.uniform(0.0, 0.052)
            sites.append(Site(len(sites), cat, lat, lon))

    add("education", n_edu)
    add("work", n_work)
    add("social", n_social, hubs=n_hubs)
    add("transport", n_transport)
    add("grocery", n_grocery)
    return sites


def make_town(population=10_000, seed=7, horizon_days=56, n_hubs=4,
              site_counts=(60, 480, 400, 150, 90), curfew_groups=1,
              compliance=1.0, with_traces=True):
    """Town with paper-like site density (~12 sites per 100 inhabitants) and
    a few central social hubs that most residents carry in their assigned
    social sites."""
    rng = np.random.default_rng(seed)
    world = build_world(town_tiles(), town_sites(rng, n_hubs=n_hubs, counts=site_counts),
                        AGE_MIX, DEFAULT_HOUSEHOLDS, population, rng=rng,
                        curfew_groups=curfew_groups, compliance=compliance)
    traces = None
    if with_traces:
        traces = build_traces(world.individuals, horizon_days * 24.0, rng=rng)
    return world, traces
