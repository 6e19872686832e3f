"""Post-hoc epidemiological analytics.

Secondary-case attribution and Negative-Binomial fits quantify how unevenly
infections are distributed over infectors; a dispersion below one means a
small minority of individuals accounts for most transmission.
"""

from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .simulate import (BECOME_IA, BECOME_IP, BECOME_IS, DIE, EXPOSURE,
                       HOSPITALIZE, RECOVER, HOURS_PER_DAY)

InfectorRow = namedtuple("InfectorRow", ["id", "t_infectious", "n_secondary"])


@dataclass(frozen=True)
class SecondaryCaseTable:
    rows: tuple[InfectorRow, ...]

    @property
    def counts(self) -> np.ndarray:
        return np.array([r.n_secondary for r in self.rows], dtype=np.int64)

    @property
    def onset_days(self) -> np.ndarray:
        return np.array([int(r.t_infectious // HOURS_PER_DAY) for r in self.rows])

    def total_secondary(self) -> int:
        return int(self.counts.sum()) if self.rows else 0


def secondary_counts(events) -> SecondaryCaseTable:
    """Secondary infections attributed to each ever-infectious individual.

    Every exposure with a known infector increments that infector's count;
    infectors who caused none appear with a zero (they carry the bulk of the
    overdispersion signal). Seed and background exposures carry no infector
    and are not attributed.
    """
    onset: dict[int, float] = {}
    counts: dict[int, int] = {}
    for ev in events:
        if ev.kind in (BECOME_IA, BECOME_IP):
            onset[ev.subject] = ev.time
            counts.setdefault(ev.subject, 0)
        elif ev.kind == EXPOSURE and ev.infector is not None:
            counts[ev.infector] = counts.get(ev.infector, 0) + 1
    rows = tuple(InfectorRow(i, onset[i], counts.get(i, 0)) for i in sorted(onset))
    return SecondaryCaseTable(rows)


@dataclass(frozen=True)
class NBFit:
    r: float                 # mean secondary infections
    k: float                 # dispersion (math.inf marks the Poisson limit)
    log_likelihood: float


def _nb_loglik(counts: np.ndarray, mean: float, k: float) -> float:
    if mean <= 0.0:
        return 0.0 if counts.max(initial=0) == 0 else -math.inf
    return float(np.sum(gammaln(counts + k)) - len(counts) * gammaln(k)
                 - np.sum(gammaln(counts + 1))
                 + len(counts) * k * math.log(k / (k + mean))
                 + counts.sum() * math.log(mean / (k + mean)))


def _poisson_loglik(counts: np.ndarray, mean: float) -> float:
    if mean <= 0.0:
        return 0.0 if counts.max(initial=0) == 0 else -math.inf
    return float(counts.sum() * math.log(mean) - len(counts) * mean
                 - np.sum(gammaln(counts + 1)))


def nb_mle(counts) -> NBFit:
    """Maximum-likelihood Negative-Binomial fit with mean/dispersion
    parameterization (variance = r (1 + r / k)).

    The mean MLE equals the sample mean for any fixed dispersion, so the
    problem reduces to a 1-D profile likelihood in log k, maximized by
    golden-section search over [1e-3, 1e3]. Underdispersed samples (variance
    at or below the mean) return the Poisson limit k = inf.
    """
    counts = np.asarray(counts)
    if counts.size == 0:
        raise ValueError("counts must be nonempty")
    if np.any(counts < 0) or not np.issubdtype(counts.dtype, np.integer):
        counts = counts.astype(np.int64)
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative integers")
    mean = float(counts.mean())
    var = float(counts.var(ddof=1)) if counts.size > 1 else 0.0
    if var <= mean or mean == 0.0:
        return NBFit(mean, math.inf, _poisson_loglik(counts, mean))

    lo, hi = math.log(1e-3), math.log(1e3)
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = _nb_loglik(counts, mean, math.exp(c))
    fd = _nb_loglik(counts, mean, math.exp(d))
    for _ in range(90):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = _nb_loglik(counts, mean, math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = _nb_loglik(counts, mean, math.exp(d))
    k_hat = math.exp((a + b) / 2.0)
    return NBFit(mean, k_hat, _nb_loglik(counts, mean, k_hat))


RtKtRow = namedtuple("RtKtRow", ["day", "rt", "rt_lo", "rt_hi",
                                 "kt", "kt_lo", "kt_hi", "n_infectors"])


def rt_kt_series(table: SecondaryCaseTable, window_days: int = 7,
                 n_boot: int = 200, min_infectors: int = 5, rng=0) -> list[RtKtRow]:
    """Per-day reproduction number and dispersion with bootstrap bands.

    Day t pools infectors whose infectious onset lies in the trailing
    ``window_days`` window; cohorts below ``min_infectors`` yield no row.
    Bands are percentile bootstrap over resampled cohorts, widened if needed
    so they always contain the point estimate.
    """
    if window_days < 1:
        raise ValueError("window_days must be at least 1")
    rng = np.random.default_rng(rng)
    if not table.rows:
        return []
    days = table.onset_days
    counts = table.counts
    out = []
    for day in range(int(days.min()), int(days.max()) + 1):
        sel = counts[(days >= day - window_days + 1) & (days <= day)]
        if sel.size < min_infectors:
            continue
        fit = nb_mle(sel)
        rts = np.empty(n_boot)
        kts = np.empty(n_boot)
        for b in range(n_boot):
            boot = nb_mle(rng.choice(sel, size=sel.size, replace=True))
            rts[b] = boot.r
            kts[b] = boot.k
        rt_lo, rt_hi = np.percentile(rts, [2.5, 97.5])
        # order-statistic percentiles: resampled dispersions can be inf
        # (Poisson limit) and interpolation across inf is undefined
        kt_lo = float(np.percentile(kts, 2.5, method="lower"))
        kt_hi = float(np.percentile(kts, 97.5, method="higher"))
        out.append(RtKtRow(day, fit.r,
                           min(float(rt_lo), fit.r), max(float(rt_hi), fit.r),
                           fit.k, min(kt_lo, fit.k), max(kt_hi, fit.k),
                           int(sel.size)))
    return out


def mae(predicted, reference) -> float:
    """Mean absolute error between two equally long daily series."""
    predicted = np.asarray(predicted, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if predicted.shape != reference.shape:
        raise ValueError(f"length mismatch: {predicted.shape} vs {reference.shape}")
    return float(np.mean(np.abs(predicted - reference)))


def daily_compartment_counts(result) -> np.ndarray:
    """Replay the event log into per-day-end compartment counts.

    Returns an array of shape (horizon_days, 9) with columns
    S, E, Ia, Ip, Is, H, R, D, cumulative positive tests.
    """
    n = result.n_individuals
    days = result.horizon_days
    comp = np.zeros(n, dtype=np.int8)  # replay state, S = 0
    hosp = np.zeros(n, dtype=bool)
    out = np.zeros((days, 9), dtype=np.int64)
    counts = np.zeros(7, dtype=np.int64)
    counts[0] = n

    def snapshot(day):
        # columns: S E Ia Ip Is H R D cumpos
        out[day] = (counts[0], counts[1], counts[2], counts[3], counts[4],
                    int(hosp.sum()), counts[5], counts[6], 0)

    day = 0
    for ev in result.events:
        ev_day = min(int(ev.time // HOURS_PER_DAY), days - 1)
        while day < ev_day:
            snapshot(day)
            day += 1
        i = ev.subject
        if ev.kind == EXPOSURE:
            counts[0] -= 1
            counts[1] += 1
            comp[i] = 1
        elif ev.kind == BECOME_IA:
            counts[1] -= 1
            counts[2] += 1
            comp[i] = 2
        elif ev.kind == BECOME_IP:
            counts[1] -= 1
            counts[3] += 1
            comp[i] = 3
        elif ev.kind == BECOME_IS:
            counts[3] -= 1
            counts[4] += 1
            comp[i] = 4
        elif ev.kind == HOSPITALIZE:
            hosp[i] = True
        elif ev.kind == RECOVER:
            counts[2 if comp[i] == 2 else 4] -= 1
            counts[5] += 1
            comp[i] = 5
            hosp[i] = False
        elif ev.kind == DIE:
            counts[4] -= 1
            counts[6] += 1
            comp[i] = 6
            hosp[i] = False
    while day < days:
        snapshot(day)
        day += 1
    out[:, 8] = result.cumulative_positive_by_day()
    return out
