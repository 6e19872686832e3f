"""Regenerate the bundled synthetic fixture region (deterministic).

Run from the repository root:  python scripts/make_fixtures.py
"""

import csv
import json
import os
from datetime import date, timedelta

import numpy as np

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
OUT = os.path.join(ROOT, "fixtures", "tuebingen_like")


def write_tiles(path, rng):
    rows = []
    for r in range(3):
        for c in range(3):
            dist = abs(r - 1) + abs(c - 1)
            rows.append((f"t{r}{c}", 48.52 + r * 0.009, 9.05 + c * 0.0135,
                         round(800.0 / (1 + dist), 1)))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tile_id", "lat", "lon", "population"])
        w.writerows(rows)


def write_sites(path, rng):
    counts = {"education": 4, "work": 18, "social": 20, "transport": 12, "grocery": 6}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["site_id", "category", "lat", "lon"])
        sid = 0
        for cat, n in counts.items():
            for m in range(n):
                if cat == "social" and m < 2:  # two central hubs
                    lat = 48.529 + rng.normal(0, 0.0008)
                    lon = 9.0635 + rng.normal(0, 0.0012)
                else:
                    lat = 48.52 + rng.uniform(0, 0.027)
                    lon = 9.05 + rng.uniform(0, 0.0405)
                w.writerow([sid, cat, round(lat, 6), round(lon, 6)])
                sid += 1


SCENARIO = {
    "schema_version": 1,
    "name": "tuebingen_like_fixture",
    "start_date": "2020-03-10",
    "horizon_days": 28,
    "master_seed": 0,
    "rollouts": 4,
    "region": {"tiles_csv": "population_tiles.csv", "sites_csv": "sites.csv", "tile_km": 1.0},
    "population": {
        "total": 2000,
        "downscale_K": 2,
        "age_fractions": [0.05, 0.09, 0.25, 0.36, 0.17, 0.08],
    },
    "epidemic": {"beta": 0.6, "xi": 0.6},
    "seeds": {"observed_cases": 5, "r0": 2.0},
    "testing": {"tests_per_day": 20, "delta_test_h": 48.0, "compliance": 1.0},
    "policies": [
        {"type": "social_distancing", "rho": 0.6,
         "from": "2020-03-23", "to": "2020-04-07"},
        {"type": "beta_multiplier",
         "factors": {"education": 0.5, "social": 0.5, "work": 0.5},
         "from": "2020-03-23", "to": "2020-04-07"},
    ],
}


def write_cases(path):
    import sys
    sys.path.insert(0, os.path.join(ROOT, "src"))
    from hotspot.scenario import load_scenario, simulate_g

    scenario = load_scenario(os.path.join(OUT, "scenario.json"))
    curve = simulate_g((0.6, 0.6, 0.6), 8, scenario, rng=2024, n_jobs=2)
    start = date.fromisoformat(SCENARIO["start_date"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "cumulative_positive"])
        for day, value in enumerate(curve):
            w.writerow([(start + timedelta(days=day + 1)).isoformat(),
                        round(float(value), 2)])


def main():
    os.makedirs(OUT, exist_ok=True)
    rng = np.random.default_rng(42)
    write_tiles(os.path.join(OUT, "population_tiles.csv"), rng)
    write_sites(os.path.join(OUT, "sites.csv"), rng)
    with open(os.path.join(OUT, "scenario.json"), "w") as fh:
        json.dump(SCENARIO, fh, indent=2)
    write_cases(os.path.join(OUT, "cases.csv"))
    print(f"fixtures written to {OUT}")


if __name__ == "__main__":
    main()
