"""Synthetic population: tiles, households, individuals, and site assignment."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import AGE_GROUPS, NUM_AGE_GROUPS, SITE_CATEGORIES

EARTH_RADIUS_M = 6_371_000.0
MIN_SITE_DISTANCE_M = 10.0


@dataclass(frozen=True)
class Tile:
    tile_id: str
    lat: float
    lon: float
    population: float

    def __post_init__(self):
        if self.population < 0:
            raise ValueError(f"tile {self.tile_id}: population must be nonnegative")
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError(f"tile {self.tile_id}: coordinates must be finite")


@dataclass(frozen=True)
class Site:
    id: int
    category: str
    lat: float
    lon: float

    def __post_init__(self):
        if self.category not in SITE_CATEGORIES:
            raise ValueError(f"site {self.id}: unknown category {self.category!r}")


@dataclass
class Individual:
    id: int
    age_group: int                      # index into AGE_GROUPS
    household_id: int
    home: tuple[float, float]           # (lat, lon)
    assigned_sites: dict[str, list[int]] = field(default_factory=dict)
    curfew_group: int = 0
    compliant: bool = True


@dataclass(frozen=True)
class HouseholdDistribution:
    """Household size distribution with per-size age admissibility weights.

    ``size_probs[s - 1]`` is the probability of a household of size ``s``;
    ``age_weights_by_size[s - 1]`` weights the age groups its members are
    drawn from (zero weight marks an inadmissible band).
    """

    size_probs: tuple[float, ...]
    age_weights_by_size: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if abs(sum(self.size_probs) - 1.0) > 1e-9:
            raise ValueError("household size fractions must sum to 1")
        if len(self.age_weights_by_size) != len(self.size_probs):
            raise ValueError("need one age-weight row per household size")
        for row in self.age_weights_by_size:
            if len(row) != NUM_AGE_GROUPS or sum(row) <= 0:
                raise ValueError("each size needs positive weights over the age groups")


def singleton_households() -> HouseholdDistribution:
    """All-singleton households with uniform ages; handy for tests."""
    return HouseholdDistribution(
        size_probs=(1.0,),
        age_weights_by_size=((1.0,) * NUM_AGE_GROUPS,),
    )


# A rough one-to-five person household mix: singles and couples skew older,
# larger households include children and working-age adults.
DEFAULT_HOUSEHOLDS = HouseholdDistribution(
    size_probs=(0.40, 0.33, 0.12, 0.10, 0.05),
    age_weights_by_size=(
        (0.0, 0.0, 0.30, 0.35, 0.25, 0.10),
        (0.0, 0.0, 0.25, 0.35, 0.30, 0.10),
        (0.15, 0.15, 0.25, 0.35, 0.10, 0.0),
        (0.20, 0.20, 0.25, 0.30, 0.05, 0.0),
        (0.22, 0.22, 0.26, 0.26, 0.04, 0.0),
    ),
)


def great_circle_m(lat1, lon1, lat2, lon2):
    """Great-circle distance in meters (haversine); accepts arrays."""
    lat1, lon1, lat2, lon2 = (np.radians(np.asarray(x, dtype=float))
                              for x in (lat1, lon1, lat2, lon2))
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = np.sin(dlat / 2.0) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2.0) ** 2
    return EARTH_RADIUS_M * 2.0 * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def build_population(tiles: list[Tile], age_fractions, household_dist: HouseholdDistribution,
                     total: int, downscale_K: int = 1, rng=None,
                     tile_km: float = 1.0) -> list[Individual]:
    """Create ceil(total / downscale_K) individuals grouped into households.

    Households draw a tile with probability proportional to tile population
    and share a home placed uniformly at random inside the tile square of
    side ``tile_km``. Ages are drawn from the household's per-size age
    weights, renormalized against the configured age fractions so the
    population-level age mix tracks ``age_fractions``.
    """
    if not tiles:
        raise ValueError("tiles list must not be empty")
    if total <= 0:
        raise ValueError("total population must be positive")
    if downscale_K < 1:
        raise ValueError("downscale_K must be a positive integer")
    age_fractions = np.asarray(age_fractions, dtype=float)
    if age_fractions.shape != (NUM_AGE_GROUPS,):
        raise ValueError(f"age fractions must have {NUM_AGE_GROUPS} entries")
    if abs(age_fractions.sum() - 1.0) > 1e-9:
        raise ValueError("age fractions must sum to 1")
    rng = np.random.default_rng(rng)

    n = math.ceil(total / downscale_K)
    tile_pops = np.array([t.population for t in tiles], dtype=float)
    if tile_pops.sum() <= 0:
        raise ValueError("tiles carry zero total population")
    tile_probs = tile_pops / tile_pops.sum()

    size_probs = np.asarray(household_dist.size_probs, dtype=float)
    # Blend the per-size admissibility weights with the target age mix; a
    # zero admissibility weight stays zero.
    age_rows = []
    for row in household_dist.age_weights_by_size:
        w = np.asarray(row, dtype=float) * age_fractions
        if w.sum() <= 0:
            w = np.asarray(row, dtype=float)
        age_rows.append(w / w.sum())

    half_deg_lat = (tile_km / 2.0) / 111.32
    individuals: list[Individual] = []
    household_id = 0
    while len(individuals) < n:
        size = int(rng.choice(len(size_probs), p=size_probs)) + 1
        remaining = n - len(individuals)
        if size > remaining:
            size = 1  # remainder forms singletons
        tile = tiles[int(rng.choice(len(tiles), p=tile_probs))]
        half_deg_lon = half_deg_lat / max(math.cos(math.radians(tile.lat)), 1e-6)
        home = (tile.lat + rng.uniform(-half_deg_lat, half_deg_lat),
                tile.lon + rng.uniform(-half_deg_lon, half_deg_lon))
        ages = rng.choice(NUM_AGE_GROUPS, size=size, p=age_rows[size - 1])
        for a in ages:
            individuals.append(Individual(
                id=len(individuals), age_group=int(a),
                household_id=household_id, home=home))
        household_id += 1
    return individuals


def assign_sites(individuals: list[Individual], sites: list[Site],
                 per_category_counts: dict[str, int] | None = None, rng=None) -> list[Individual]:
    """Assign each individual a fixed per-category set of sites.

    Sites are drawn without replacement with probability proportional to the
    inverse squared great-circle distance from home, clamped below at 10 m.
    Mutates and returns ``individuals``.
    """
    from .params import DEFAULT_SITES_PER_CATEGORY
    per_category_counts = dict(per_category_counts or DEFAULT_SITES_PER_CATEGORY)
    rng = np.random.default_rng(rng)

    by_category: dict[str, list[Site]] = {c: [] for c in SITE_CATEGORIES}
    for s in sites:
        by_category[s.category].append(s)
    for cat, count in per_category_counts.items():
        if count > len(by_category.get(cat, [])):
            raise ValueError(
                f"category {cat!r} has {len(by_category.get(cat, []))} sites, "
                f"need at least {count}")

    cat_ids = {c: np.array([s.id for s in by_category[c]]) for c in per_category_counts}
    cat_lat = {c: np.array([s.lat for s in by_category[c]]) for c in per_category_counts}
    cat_lon = {c: np.array([s.lon for s in by_category[c]]) for c in per_category_counts}

    for ind in individuals:
        lat, lon = ind.home
        chosen: dict[str, list[int]] = {}
        for cat, count in per_category_counts.items():
            if count == 0:
                chosen[cat] = []
                continue
            d = great_circle_m(lat, lon, cat_lat[cat], cat_lon[cat])
            w = 1.0 / np.maximum(d, MIN_SITE_DISTANCE_M) ** 2
            w /= w.sum()
            picks = rng.choice(len(w), size=count, replace=False, p=w)
            chosen[cat] = [int(cat_ids[cat][p]) for p in picks]
        ind.assigned_sites = chosen
    return individuals


def age_group_index(label: str) -> int:
    try:
        return AGE_GROUPS.index(label)
    except ValueError:
        raise ValueError(f"unknown age group {label!r}") from None
