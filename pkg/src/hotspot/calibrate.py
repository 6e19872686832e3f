"""Bayesian-optimization calibration of the exposure parameters.

The black box maps (site rate, household rate, distancing strength) to the
mean daily cumulative positive-test curve over J rollouts; the objective is
the negative sum of daily squared errors against an observed case curve.
Quasi-random initialization is followed by knowledge-gradient proposals
over a fixed candidate grid.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .gp import GPState, fit_gp

THETA_NAMES = ("beta", "xi", "rho")


@dataclass(frozen=True)
class ThetaDomain:
    """Axis-aligned search box for the calibrated parameters."""
    bounds: tuple[tuple[float, float], ...] = ((0.0, 1.5), (0.0, 1.5), (0.0, 1.0))
    names: tuple[str, ...] = THETA_NAMES

    def __post_init__(self):
        if len(self.bounds) != len(self.names):
            raise ValueError("need one bounds pair per parameter")
        for name, (lo, hi) in zip(self.names, self.bounds):
            if not lo < hi:
                raise ValueError(f"bounds for {name} must satisfy lo < hi")
        if "rho" in self.names:
            lo, hi = dict(zip(self.names, self.bounds))["rho"]
            if lo < 0.0 or hi > 1.0:
                raise ValueError("rho bounds must stay within [0, 1]")

    @property
    def dim(self) -> int:
        return len(self.bounds)

    def normalize(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        return (theta - lo) / (hi - lo)

    def denormalize(self, unit) -> np.ndarray:
        unit = np.asarray(unit, dtype=float)
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        return lo + unit * (hi - lo)

    def contains(self, theta) -> bool:
        theta = np.asarray(theta, dtype=float)
        return all(lo - 1e-12 <= v <= hi + 1e-12
                   for v, (lo, hi) in zip(theta, self.bounds))


@dataclass
class Evaluation:
    theta: tuple[float, ...]
    g_hat: np.ndarray
    score: float
    j_rollouts: int


@dataclass
class SurrogateDataset:
    domain: ThetaDomain
    evaluations: list[Evaluation] = field(default_factory=list)

    def __len__(self):
        return len(self.evaluations)

    def add(self, theta, g_hat, score, j_rollouts):
        g_hat = np.asarray(g_hat, dtype=float)
        if np.any(g_hat < 0) or np.any(np.diff(g_hat) < -1e-9):
            raise ValueError("g_hat must be a nonnegative cumulative curve")
        self.evaluations.append(Evaluation(tuple(float(v) for v in theta),
                                           g_hat, float(score), j_rollouts))

    @property
    def theta_matrix(self) -> np.ndarray:
        return np.array([e.theta for e in self.evaluations], dtype=float)

    @property
    def g_matrix(self) -> np.ndarray:
        return np.array([e.g_hat for e in self.evaluations], dtype=float)

    def best(self) -> Evaluation:
        return max(self.evaluations, key=lambda e: e.score)


def score(g_hat, c_true) -> float:
    """Negative sum of daily squared errors of cumulative positive cases."""
    g_hat = np.asarray(g_hat, dtype=float)
    c_true = np.asarray(c_true, dtype=float)
    if g_hat.shape != c_true.shape:
        raise ValueError(f"length mismatch: {g_hat.shape} vs {c_true.shape}")
    return float(-np.sum((c_true - g_hat) ** 2))


def sobol_points(m: int, dim: int, domain: ThetaDomain | None = None) -> np.ndarray:
    """First m points of the unscrambled Sobol sequence (zero point skipped),
    scaled into the domain box."""
    if m < 1 or dim < 1:
        raise ValueError("m and dim must be positive")
    from scipy.stats import qmc
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sampler = qmc.Sobol(d=dim, scramble=False)
            pts = sampler.random(m + 1)[1:]
    except ValueError as exc:
        raise ValueError(f"dimension {dim} exceeds the Sobol direction-number table") from exc
    if domain is not None:
        if domain.dim != dim:
            raise ValueError("domain dimension mismatch")
        pts = np.array([domain.denormalize(p) for p in pts])
    return pts


def gp_fit(dataset: SurrogateDataset, optimize: bool = True, hypers0=None) -> GPState:
    """Fit the multi-output surrogate to a dataset of (theta, g_hat) pairs."""
    x_unit = np.array([dataset.domain.normalize(e.theta) for e in dataset.evaluations])
    return fit_gp(x_unit, dataset.g_matrix, optimize=optimize, hypers0=hypers0)


def expected_score(theta, gp: GPState, c_true, domain: ThetaDomain) -> float:
    """Posterior expectation of the squared-error score at theta:
    -(sum_t (c_t - mu_t)^2 + sigma_t^2), exact under the Gaussian surrogate."""
    mu, sd = gp.posterior(domain.normalize(theta))
    c_true = np.asarray(c_true, dtype=float)
    return float(-np.sum((c_true - mu[0]) ** 2 + sd[0] ** 2))


def _expected_scores_grid(gp: GPState, cand_unit, c_true):
    mu, sd = gp.posterior(cand_unit)
    resid = c_true[None, :] - mu
    return -np.sum(resid ** 2 + sd ** 2, axis=1)


def _kg_gains(gp: GPState, c_true, cand_unit, prop_unit, n_fantasies, rng):
    """Knowledge-gradient improvement samples for a batch of proposal points.

    Fantasizes a noisy observation at each proposal, conditions the
    surrogate via a rank-one update, and measures the gain of the maximum
    expected score over the candidate grid. Fantasies share standard-normal
    draws across proposals (common random numbers) so argmax comparisons
    are low-noise. Returns an array of shape (n_proposals, n_fantasies).
    """
    rng = np.random.default_rng(rng)
    c_true = np.asarray(c_true, dtype=float)
    mu_c, sd_c = gp.posterior(cand_unit)           # (m, T)
    resid = c_true[None, :] - mu_c
    var_terms = np.sum(sd_c ** 2, axis=1)
    base_scores = -np.sum(resid ** 2, axis=1) - var_terms
    mu_star = float(base_scores.max())

    cov_cp = gp.posterior_cov(cand_unit, prop_unit)          # (m, P)
    var_p = np.clip(np.diag(gp.posterior_cov(prop_unit, prop_unit)), 0.0, None)
    sum_s2 = float(np.sum(gp.scales ** 2))
    eps_scaled = rng.standard_normal((n_fantasies, len(gp.scales))) * gp.scales[None, :]

    n_prop = cov_cp.shape[1]
    gains = np.empty((n_prop, n_fantasies))
    for p in range(n_prop):
        obs_var = var_p[p] + gp.noise_var
        u = cov_cp[:, p] / math.sqrt(obs_var)                # (m,)
        var_red = np.clip(var_terms - (u ** 2) * sum_s2, 0.0, None)
        shift = u[:, None, None] * eps_scaled[None, :, :]    # (m, F, T)
        new_resid = resid[:, None, :] - shift
        scores = -np.sum(new_resid ** 2, axis=2) - var_red[:, None]
        gains[p] = scores.max(axis=0) - mu_star
    return gains


def knowledge_gradient(theta, gp: GPState, c_true, candidates, domain: ThetaDomain,
                       n_fantasies: int = 16, rng=0, return_stderr: bool = False):
    """Discrete knowledge-gradient estimate of measuring at theta."""
    if n_fantasies < 1:
        raise ValueError("n_fantasies must be at least 1")
    cand_unit = np.array([domain.normalize(c) for c in candidates])
    if cand_unit.size == 0:
        raise ValueError("candidate set must be nonempty")
    prop_unit = np.atleast_2d(domain.normalize(theta))
    gains = _kg_gains(gp, c_true, cand_unit, prop_unit, n_fantasies, rng)[0]
    kg = float(gains.mean())
    if return_stderr:
        se = float(gains.std(ddof=1) / math.sqrt(n_fantasies)) if n_fantasies > 1 else 0.0
        return kg, se
    return kg


def calibrate(g_fn, c_true, domain: ThetaDomain, n_total: int, m_init: int,
              j_rollouts: int, rng=0, n_candidates: int = 128,
              n_fantasies: int = 16, callback=None):
    """Full estimation loop: quasi-random exploration, then KG proposals.

    ``g_fn(theta, j_rollouts, seed_sequence)`` evaluates the black box.
    Returns (best theta, dataset); the best theta maximizes the observed
    score over all evaluations.
    """
    if not (n_total >= m_init >= 1):
        raise ValueError("need n_total >= m_init >= 1")
    ss = rng if isinstance(rng, np.random.SeedSequence) else np.random.SeedSequence(rng)
    eval_seeds = ss.spawn(n_total + 2)
    kg_rng = np.random.default_rng(eval_seeds[-1])
    c_true = np.asarray(c_true, dtype=float)

    dataset = SurrogateDataset(domain)

    def evaluate(theta, idx):
        g_hat = np.asarray(g_fn(theta, j_rollouts, eval_seeds[idx]), dtype=float)
        s = score(g_hat, c_true)
        dataset.add(theta, g_hat, s, j_rollouts)
        if callback is not None:
            callback(len(dataset), theta, g_hat, s)

    for idx, theta in enumerate(sobol_points(m_init, domain.dim, domain)):
        evaluate(theta, idx)

    cand_grid = sobol_points(n_candidates, domain.dim, domain)
    while len(dataset) < n_total:
        gp = gp_fit(dataset)
        candidates = np.vstack([cand_grid, dataset.theta_matrix])
        cand_unit = np.array([domain.normalize(c) for c in candidates])
        kg_seed = int(kg_rng.integers(2 ** 32))
        gains = _kg_gains(gp, c_true, cand_unit, cand_unit, n_fantasies, kg_seed)
        best_theta = candidates[int(np.argmax(gains.mean(axis=1)))]
        evaluate(best_theta, len(dataset))

    best = dataset.best()
    assert best.score == max(e.score for e in dataset.evaluations)
    return np.array(best.theta), dataset
