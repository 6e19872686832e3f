"""Containment policies.

Policies never increase exposure rates: social distancing and curfews drop
visits, business restrictions scale site transmission down, and conditional
lockdowns switch a bundle of such policies on and off based on weekly
incidence. The simulator applies them by thinning exposure events sampled
under the unrestricted mobility model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

HOURS_PER_DAY = 24.0

_INF = float("inf")


def _window_ok(window):
    t0, t1 = window
    if not (t1 > t0):
        raise ValueError(f"policy window must have positive length, got {window}")


@dataclass(frozen=True)
class SocialDistancing:
    """Skip each visit inside the window independently with probability rho."""
    rho: float
    window: tuple[float, float]

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        _window_ok(self.window)


@dataclass(frozen=True)
class BetaMultiplier:
    """Scale site transmission rates by a per-category factor in [0, 1]."""
    factors: dict[str, float]
    window: tuple[float, float]

    def __post_init__(self):
        if any(not 0.0 <= f <= 1.0 for f in self.factors.values()):
            raise ValueError("multipliers must lie in [0, 1]")
        _window_ok(self.window)


@dataclass(frozen=True)
class AlternatingCurfew:
    """Only the group matching the current day index may visit sites."""
    n_groups: int
    window: tuple[float, float]

    def __post_init__(self):
        if self.n_groups < 1:
            raise ValueError("n_groups must be at least 1")
        _window_ok(self.window)


@dataclass(frozen=True)
class VulnerableDistancing:
    """Social distancing applied only to age groups at or above min_age_group."""
    rho: float
    min_age_group: int
    window: tuple[float, float]

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        _window_ok(self.window)


@dataclass
class LockdownController:
    """On/off state of a conditional lockdown with its activation history."""
    threshold_per_100k: float = 50.0
    active: bool = False
    history: list[list[float]] = field(default_factory=list)

    def set_active(self, t: float, on: bool):
        if on and not self.active:
            self.history.append([t, _INF])
            self.active = True
        elif not on and self.active:
            self.history[-1][1] = t
            self.active = False

    def active_at(self, t: float) -> bool:
        for on, off in self.history:
            if on <= t < off:
                return True
        return False


@dataclass
class ConditionalLockdown:
    """Activate the bundled policies while weekly incidence exceeds the
    threshold per 100k inhabitants; evaluated once per simulated day."""
    threshold_per_100k: float
    policies: list
    window_days: int = 7
    window: tuple[float, float] = (0.0, _INF)
    controller: LockdownController = None

    def __post_init__(self):
        if self.threshold_per_100k <= 0:
            raise ValueError("threshold must be positive")
        if self.window_days < 1:
            raise ValueError("window_days must be at least 1")
        if self.controller is None:
            self.controller = LockdownController(self.threshold_per_100k)


def conditional_lockdown_tick(daily_new_cases, population: int,
                              controller: LockdownController,
                              t_now: float = 0.0) -> LockdownController:
    """Daily controller update from the trailing window of new-case counts.

    Activates on strict exceedance of the per-100k threshold, deactivates
    once the incidence falls back to or below it.
    """
    if any(c < 0 for c in daily_new_cases):
        raise ValueError("case counts must be nonnegative")
    incidence = sum(daily_new_cases) * 100_000.0 / population
    controller.set_active(t_now, incidence > controller.threshold_per_100k)
    return controller


class PolicySet:
    """Active-policy queries over static windows and conditional bundles."""

    def __init__(self, policies=()):
        self.static: list = []
        self.conditional: list[ConditionalLockdown] = []
        for p in policies or ():
            if isinstance(p, ConditionalLockdown):
                self.conditional.append(p)
            else:
                self.static.append(p)

    def __bool__(self):
        return bool(self.static or self.conditional)

    def iter_active(self, t: float):
        for p in self.static:
            if p.window[0] <= t < p.window[1]:
                yield p
        for c in self.conditional:
            if c.controller.active_at(t):
                for p in c.policies:
                    if p.window[0] <= t < p.window[1]:
                        yield p

    def site_multiplier(self, category: str, t: float) -> float:
        m = 1.0
        for p in self.iter_active(t):
            if isinstance(p, BetaMultiplier):
                m *= p.factors.get(category, 1.0)
        return m

    def needs_skip_draws(self) -> bool:
        pols = self.static + [p for c in self.conditional for p in c.policies]
        return any(isinstance(p, (SocialDistancing, VulnerableDistancing)) for p in pols)

    def admits(self, individual, t: float, u_distancing: float, u_vulnerable: float) -> bool:
        """Visit admission from pre-drawn uniforms (one per rule class)."""
        for p in self.iter_active(t):
            if isinstance(p, SocialDistancing):
                if u_distancing < p.rho:
                    return False
            elif isinstance(p, AlternatingCurfew):
                if int(t // HOURS_PER_DAY) % p.n_groups != individual.curfew_group:
                    return False
            elif isinstance(p, VulnerableDistancing):
                if individual.age_group >= p.min_age_group and u_vulnerable < p.rho:
                    return False
        return True


def visit_admitted(individual, visit, active_policies, rng) -> bool:
    """Decide whether a visit takes place under the given policies.

    Bernoulli draws are taken from ``rng`` only when a distancing rule is
    actually active at the visit's arrival time.
    """
    policies = (active_policies if isinstance(active_policies, PolicySet)
                else PolicySet(active_policies))
    t = visit.t_arrive
    for p in policies.iter_active(t):
        if isinstance(p, SocialDistancing):
            if p.rho > 0 and rng.random() < p.rho:
                return False
        elif isinstance(p, AlternatingCurfew):
            if int(t // HOURS_PER_DAY) % p.n_groups != individual.curfew_group:
                return False
        elif isinstance(p, VulnerableDistancing):
            if (individual.age_group >= p.min_age_group
                    and p.rho > 0 and rng.random() < p.rho):
                return False
    return True


def effective_beta(site, t: float, active_policies, params) -> float:
    """Site transmission rate after applying active category multipliers.

    ``site`` may be a Site object or a bare category name.
    """
    category = getattr(site, "category", site)
    policies = (active_policies if isinstance(active_policies, PolicySet)
                else PolicySet(active_policies))
    return params.beta_for(category) * policies.site_multiplier(category, t)
