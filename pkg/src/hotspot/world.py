"""World assembly: population, sites, households, and data file ingestion."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .population import (Individual, Site, Tile, assign_sites, build_population)


@dataclass
class World:
    individuals: list[Individual]
    sites: list[Site]
    households: dict[int, list[int]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.households:
            hh: dict[int, list[int]] = {}
            for ind in self.individuals:
                hh.setdefault(ind.household_id, []).append(ind.id)
            self.households = hh
        self.site_category = {s.id: s.category for s in self.sites}

    @property
    def n(self) -> int:
        return len(self.individuals)

    def housemates(self, i: int) -> list[int]:
        hh = self.households[self.individuals[i].household_id]
        return [m for m in hh if m != i]


def load_tiles_csv(path) -> list[Tile]:
    tiles = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            tiles.append(Tile(tile_id=row["tile_id"], lat=float(row["lat"]),
                              lon=float(row["lon"]), population=float(row["population"])))
    if not tiles:
        raise ValueError(f"{path}: no tiles found")
    return tiles


def load_sites_csv(path) -> list[Site]:
    sites = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            sites.append(Site(id=int(row["site_id"]), category=row["category"],
                              lat=float(row["lat"]), lon=float(row["lon"])))
    if not sites:
        raise ValueError(f"{path}: no sites found")
    return sites


def build_world(tiles, sites, age_fractions, household_dist, total: int,
                downscale_K: int = 1, rng=None, tile_km: float = 1.0,
                sites_per_category=None, curfew_groups: int = 1,
                compliance: float = 1.0, site_downscale_K: int = 1) -> World:
    """Build a complete world: population, households, site assignment, and
    the per-individual curfew-group and tracing-compliance traits.

    ``site_downscale_K`` subsamples the site list uniformly at random
    (used when calibrating against a downscaled model); the population is
    downscaled via ``downscale_K`` inside ``build_population``.
    """
    from .params import DEFAULT_SITES_PER_CATEGORY
    rng = np.random.default_rng(rng)
    sites_per_category = dict(sites_per_category or DEFAULT_SITES_PER_CATEGORY)
    if site_downscale_K > 1:
        keep = max(1, round(len(sites) / site_downscale_K))
        idx = rng.choice(len(sites), size=keep, replace=False)
        sites = [sites[int(g)] for g in sorted(idx)]
        # random subsampling can leave a category short; clamp the per-person
        # assignment to what survived rather than failing the whole build
        available = {c: 0 for c in sites_per_category}
        for s in sites:
            if s.category in available:
                available[s.category] += 1
        sites_per_category = {c: min(n, available[c])
                              for c, n in sites_per_category.items()}
    individuals = build_population(tiles, age_fractions, household_dist, total,
                                   downscale_K=downscale_K, rng=rng, tile_km=tile_km)
    assign_sites(individuals, sites, sites_per_category, rng=rng)
    groups = rng.integers(0, max(curfew_groups, 1), size=len(individuals))
    comply = rng.random(len(individuals)) < compliance
    for ind, g, c in zip(individuals, groups, comply):
        ind.curfew_group = int(g)
        ind.compliant = bool(c)
    return World(individuals=individuals, sites=list(sites))
