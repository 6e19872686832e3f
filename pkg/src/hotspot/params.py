"""Epidemic parameters and their literature-derived defaults.

All rates are per hour and all times are hours internally; the disease
progression table is specified in days (the unit used by the clinical
estimates it comes from) and converted on sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

AGE_GROUPS = ("0-4", "5-14", "15-34", "35-59", "60-79", "80+")
NUM_AGE_GROUPS = len(AGE_GROUPS)

SITE_CATEGORIES = ("education", "social", "transport", "work", "grocery")

# Visits per week by (age group, site category). Zero means the group does
# not visit that category at all.
DEFAULT_WEEKLY_VISIT_RATES = {
    "0-4":   {"education": 5, "social": 1, "transport": 0, "work": 0, "grocery": 0},
    "5-14":  {"education": 5, "social": 2, "transport": 3, "work": 0, "grocery": 0},
    "15-34": {"education": 2, "social": 2, "transport": 3, "work": 3, "grocery": 1},
    "35-59": {"education": 0, "social": 2, "transport": 1, "work": 5, "grocery": 1},
    "60-79": {"education": 0, "social": 3, "transport": 2, "work": 0, "grocery": 1},
    "80+":   {"education": 0, "social": 2, "transport": 1, "work": 0, "grocery": 1},
}

DEFAULT_MEAN_DURATION_MIN = {
    "education": 120.0,
    "work": 120.0,
    "social": 90.0,
    "transport": 12.0,
    "grocery": 30.0,
}

DEFAULT_SITES_PER_CATEGORY = {
    "education": 1,
    "work": 1,
    "social": 10,
    "transport": 5,
    "grocery": 2,
}

# (meanlog, sdlog) of log-normal transition delays, in days.
#   incubation:        exposed -> infectious (asymptomatic or presymptomatic)
#   recovery_sym:      symptomatic -> resistant
#   recovery_asym:     asymptomatic -> resistant
#   presym_to_sym:     presymptomatic -> symptomatic
#   onset_to_hosp:     symptomatic -> hospitalized
#   onset_to_death:    symptomatic -> dead
DEFAULT_TRANSITIONS_DAYS = {
    "incubation": (0.9470, 0.6669),
    "recovery_sym": (2.6365, 0.0713),
    "recovery_asym": (2.6365, 0.0713),
    "presym_to_sym": (0.7463, 0.4161),
    "onset_to_hosp": (1.9358, 0.1421),
    "onset_to_death": (2.5620, 0.0768),
}

# Hospitalization / fatality probabilities by age group. These are scenario
# defaults chosen at plausible magnitudes and are meant to be overridden per
# region in the config.
DEFAULT_ALPHA_HOSP_BY_AGE = (0.001, 0.002, 0.025, 0.070, 0.180, 0.320)
DEFAULT_ALPHA_DEATH_BY_AGE = (0.00002, 0.0001, 0.001, 0.006, 0.040, 0.100)


@dataclass(frozen=True)
class EpidemicParams:
    """Exposure-process and disease-progression parameters.

    ``beta`` is the site transmission rate, either shared (float) or a
    per-category mapping. ``xi`` is the household transmission rate.
    ``gamma`` controls the exponential decay of environmental infectiousness
    after an infectious visitor leaves, and ``delta`` is the window length
    after which that contribution is truncated.
    """

    beta: float | dict[str, float] = 0.5
    xi: float = 0.5
    mu: float = 0.55
    gamma: float = 0.3465            # 1/hour
    delta: float = 4.6438            # hours
    alpha_asymptomatic: float = 0.4
    alpha_hosp_by_age: tuple[float, ...] = DEFAULT_ALPHA_HOSP_BY_AGE
    alpha_death_by_age: tuple[float, ...] = DEFAULT_ALPHA_DEATH_BY_AGE
    transitions_days: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_TRANSITIONS_DAYS))
    background_weekly_per_100k: float = 0.0

    def __post_init__(self):
        if isinstance(self.beta, dict):
            unknown = set(self.beta) - set(SITE_CATEGORIES)
            if unknown:
                raise ValueError(f"unknown site categories in beta: {sorted(unknown)}")
            missing = set(SITE_CATEGORIES) - set(self.beta)
            if missing:
                raise ValueError(f"per-category beta must cover every category, "
                                 f"missing {sorted(missing)}")
            if any(v < 0 for v in self.beta.values()):
                raise ValueError("beta must be nonnegative")
        elif self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.xi < 0:
            raise ValueError("xi must be nonnegative")
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError("mu must lie in [0, 1]")
        if self.gamma <= 0 or self.delta <= 0:
            raise ValueError("gamma and delta must be positive")
        if not 0.0 <= self.alpha_asymptomatic <= 1.0:
            raise ValueError("alpha_asymptomatic must lie in [0, 1]")
        for name, probs in (("alpha_hosp_by_age", self.alpha_hosp_by_age),
                            ("alpha_death_by_age", self.alpha_death_by_age)):
            if len(probs) != NUM_AGE_GROUPS:
                raise ValueError(f"{name} must have {NUM_AGE_GROUPS} entries")
            if any(not 0.0 <= p <= 1.0 for p in probs):
                raise ValueError(f"{name} entries must lie in [0, 1]")
        for name, (meanlog, sdlog) in self.transitions_days.items():
            if name not in DEFAULT_TRANSITIONS_DAYS:
                raise ValueError(f"unknown transition process {name!r}")
            if sdlog <= 0:
                raise ValueError(f"sdlog for {name!r} must be positive")
        if self.background_weekly_per_100k < 0:
            raise ValueError("background import rate must be nonnegative")

    def beta_for(self, category: str) -> float:
        if isinstance(self.beta, dict):
            return self.beta[category]
        return self.beta

    @property
    def beta_max(self) -> float:
        if isinstance(self.beta, dict):
            return max(self.beta.values()) if self.beta else 0.0
        return self.beta

    @property
    def saturated_mass(self) -> float:
        return (1.0 - math.exp(-self.gamma * self.delta)) / self.gamma


def sample_transition_delay(process: str, params: EpidemicParams, rng) -> float:
    """Draw a disease-progression delay in hours.

    ``process`` names an entry of the transition table; the draw is
    log-normal in days and converted to hours.
    """
    try:
        meanlog, sdlog = params.transitions_days[process]
    except KeyError:
        raise ValueError(f"unknown transition process {process!r}") from None
    return float(rng.lognormal(meanlog, sdlog)) * 24.0
