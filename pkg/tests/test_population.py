import numpy as np
import pytest
from scipy.stats import chi2

from hotspot.population import (HouseholdDistribution,
                                Individual, Site, Tile, assign_sites,
                                build_population, great_circle_m,
                                singleton_households)


def one_band_fractions(band=0):
    f = [0.0] * 6
    f[band] = 1.0
    return f


def test_degenerate_population():
    tiles = [Tile("t0", 47.0, 8.0, 100.0)]
    people = build_population(tiles, one_band_fractions(), singleton_households(),
                              total=100, downscale_K=10, rng=0)
    assert len(people) == 10
    assert len({p.household_id for p in people}) == 10
    assert all(p.age_group == 0 for p in people)


def test_downscale_rounds_up():
    tiles = [Tile("t0", 47.0, 8.0, 10.0)]
    people = build_population(tiles, one_band_fractions(), singleton_households(),
                              total=101, downscale_K=10, rng=0)
    assert len(people) == 11


def test_tile_split_chi2_consistent():
    # two tiles at 75/25 population weight: pooled assignment counts over
    # 1000 seeds must be chi-square consistent with the multinomial draw
    tiles = [Tile("a", 47.0, 8.0, 75.0), Tile("b", 47.5, 8.5, 25.0)]
    hits_a = 0
    n_total = 0
    for seed in range(1000):
        people = build_population(tiles, one_band_fractions(),
                                  singleton_households(), total=100, rng=seed)
        hits_a += sum(1 for p in people if abs(p.home[0] - 47.0) < 0.25)
        n_total += len(people)
    expected_a = 0.75 * n_total
    expected_b = 0.25 * n_total
    stat = ((hits_a - expected_a) ** 2 / expected_a
            + ((n_total - hits_a) - expected_b) ** 2 / expected_b)
    assert stat < chi2.ppf(0.999, df=1)


def test_age_fractions_law_of_large_numbers():
    fractions = [0.0, 0.0, 0.4, 0.6, 0.0, 0.0]
    tiles = [Tile("t0", 47.0, 8.0, 1.0)]
    people = build_population(tiles, fractions, singleton_households(),
                              total=10_000, rng=3)
    counts = np.bincount([p.age_group for p in people], minlength=6) / len(people)
    assert counts[2] == pytest.approx(0.4, abs=0.02)
    assert counts[3] == pytest.approx(0.6, abs=0.02)


def test_household_sizes_follow_distribution():
    dist = HouseholdDistribution(
        size_probs=(0.5, 0.0, 0.5, 0.0, 0.0),
        age_weights_by_size=((1.0,) * 6,) * 5)
    tiles = [Tile("t0", 47.0, 8.0, 1.0)]
    people = build_population(tiles, [1 / 6.0] * 6, dist, total=6000, rng=1)
    sizes = {}
    for p in people:
        sizes[p.household_id] = sizes.get(p.household_id, 0) + 1
    size_counts = np.bincount(list(sizes.values()), minlength=4)
    # remainder singletons can add at most a couple of size-1 households
    assert size_counts[2] == 0
    frac3 = size_counts[3] / (size_counts[1] + size_counts[3])
    assert frac3 == pytest.approx(0.5, abs=0.03)  # households drawn 50/50 from sizes 1 and 3
    members = {}
    for p in people:
        members.setdefault(p.household_id, []).append(p)
    for hh in members.values():
        assert len({m.home for m in hh}) == 1  # one shared home per household


def test_population_input_validation():
    with pytest.raises(ValueError):
        build_population([], one_band_fractions(), singleton_households(), total=10)
    tiles = [Tile("t0", 47.0, 8.0, 1.0)]
    with pytest.raises(ValueError):
        build_population(tiles, one_band_fractions(), singleton_households(), total=0)
    with pytest.raises(ValueError):
        build_population(tiles, [0.5] * 6, singleton_households(), total=10)


def _one_person(home=(47.0, 8.0)):
    return Individual(id=0, age_group=2, household_id=0, home=home)


def test_forced_single_site_assignment():
    sites = [Site(0, "education", 47.1, 8.0)]
    person = _one_person()
    assign_sites([person], sites, {"education": 1}, rng=0)
    assert person.assigned_sites["education"] == [0]


def test_inverse_square_distance_preference():
    home = (47.0, 8.0)
    near = Site(0, "grocery", 47.0 + 1.0 / 111.32, 8.0)    # ~1 km north
    far = Site(1, "grocery", 47.0 + 2.0 / 111.32, 8.0)     # ~2 km north
    counts = {0: 0, 1: 0}
    rng = np.random.default_rng(5)
    for _ in range(10_000):
        person = _one_person(home)
        assign_sites([person], [near, far], {"grocery": 1}, rng=rng)
        counts[person.assigned_sites["grocery"][0]] += 1
    ratio = counts[0] / counts[1]
    assert ratio == pytest.approx(4.0, rel=0.05)


def test_insufficient_sites_raises():
    person = _one_person()
    with pytest.raises(ValueError, match="social"):
        assign_sites([person], [Site(0, "social", 47.0, 8.0)], {"social": 10}, rng=0)


def test_assignment_distinct_and_clamped():
    # a site on top of the home must not swallow all the probability mass
    sites = [Site(i, "grocery", 47.0 + i * 1e-7, 8.0) for i in range(3)]
    person = _one_person()
    assign_sites([person], sites, {"grocery": 2}, rng=0)
    chosen = person.assigned_sites["grocery"]
    assert len(chosen) == len(set(chosen)) == 2


def test_great_circle_matches_known_distance():
    # one degree of latitude is ~111.19 km on the sphere
    d = great_circle_m(47.0, 8.0, 48.0, 8.0)
    assert d == pytest.approx(111_195, rel=1e-3)
