"""Closed-form integrals of exponentially decayed presence indicators.

Every exposure and tracing quantity in this package reduces to integrals of
e^{-gamma (t - tau)} against piecewise-constant presence indicators, taken
over a sliding window of length ``delta``. Visits are disjoint intervals, so
all of these integrals have exact closed forms; the functions here are the
single source of truth for them.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right


def saturated_mass(gamma: float, delta: float) -> float:
    """Value of the decayed-presence integral when presence covers the full
    window: integral over [t - delta, t] of e^{-gamma (t - tau)} d tau."""
    return (1.0 - math.exp(-gamma * delta)) / gamma


def decayed_interval_mass(t: float, a: float, b: float, gamma: float, delta: float) -> float:
    """Integral over [a, b] ∩ [t - delta, t] of e^{-gamma (t - tau)} d tau."""
    lo = a if a > t - delta else t - delta
    hi = b if b < t else t
    if hi <= lo:
        return 0.0
    return (math.exp(-gamma * (t - hi)) - math.exp(-gamma * (t - lo))) / gamma


def _piece_integral(lo: float, hi: float, a: float, b: float, gamma: float, delta: float) -> float:
    # Integral over [lo, hi] of w(t) = (1/gamma)(e^{-gamma max(t-b, 0)} - e^{-gamma min(t-a, delta)}),
    # assuming the regime (t vs b, t-a vs delta) does not change on (lo, hi).
    mid = 0.5 * (lo + hi)
    # first term: e^{-gamma max(t-b, 0)}
    if mid <= b:
        first = hi - lo
    else:
        first = (math.exp(-gamma * (lo - b)) - math.exp(-gamma * (hi - b))) / gamma
    # second term: e^{-gamma min(t-a, delta)}
    if mid - a >= delta:
        second = math.exp(-gamma * delta) * (hi - lo)
    else:
        second = (math.exp(-gamma * (lo - a)) - math.exp(-gamma * (hi - a))) / gamma
    return (first - second) / gamma


def decayed_overlap_mass(lo: float, hi: float, a: float, b: float,
                         gamma: float, delta: float) -> float:
    """Integral over t in [lo, hi] of decayed_interval_mass(t, a, b).

    This is the double integral of e^{-gamma (t - tau)} over
    {(t, tau) : lo <= t <= hi, max(a, t - delta) <= tau <= min(b, t)},
    the building block of the pairwise contact kernels.
    """
    lo = max(lo, a)
    hi = min(hi, b + delta)
    if hi <= lo:
        return 0.0
    # The integrand switches form at t = b and t = a + delta.
    cuts = sorted({lo, hi, min(max(b, lo), hi), min(max(a + delta, lo), hi)})
    total = 0.0
    for left, right in zip(cuts[:-1], cuts[1:]):
        if right > left:
            total += _piece_integral(left, right, a, b, gamma, delta)
    return total


def decayed_intervals_mass(t: float, intervals_start, intervals_end,
                           gamma: float, delta: float) -> float:
    """Sum of decayed_interval_mass(t, a, b) over disjoint sorted intervals.

    ``intervals_start``/``intervals_end`` are parallel sequences sorted by
    start (and hence, being disjoint, by end). Only intervals overlapping
    [t - delta, t] contribute; they are located by bisection.
    """
    if len(intervals_start) == 0:
        return 0.0
    lo_idx = bisect_left(intervals_end, t - delta)
    hi_idx = bisect_right(intervals_start, t)
    total = 0.0
    for i in range(lo_idx, hi_idx):
        total += decayed_interval_mass(t, intervals_start[i], intervals_end[i], gamma, delta)
    return total


def complement_intervals(starts, ends, t_lo: float, t_hi: float) -> list[tuple[float, float]]:
    """Complement of disjoint sorted intervals within [t_lo, t_hi]."""
    out = []
    cursor = t_lo
    for a, b in zip(starts, ends):
        if b <= t_lo:
            continue
        if a >= t_hi:
            break
        if a > cursor:
            out.append((cursor, min(a, t_hi)))
        cursor = max(cursor, b)
        if cursor >= t_hi:
            break
    if cursor < t_hi:
        out.append((cursor, t_hi))
    return out


def intersect_intervals(first, second) -> list[tuple[float, float]]:
    """Intersection of two disjoint, sorted interval lists."""
    out = []
    i = j = 0
    while i < len(first) and j < len(second):
        a = max(first[i][0], second[j][0])
        b = min(first[i][1], second[j][1])
        if b > a:
            out.append((a, b))
        if first[i][1] <= second[j][1]:
            i += 1
        else:
            j += 1
    return out


def merge_intervals(intervals) -> list[tuple[float, float]]:
    """Union of possibly overlapping intervals, returned disjoint and sorted."""
    if not intervals:
        return []
    intervals = sorted(intervals)
    out = [intervals[0]]
    for a, b in intervals[1:]:
        last_a, last_b = out[-1]
        if a <= last_b:
            if b > last_b:
                out[-1] = (last_a, b)
        else:
            out.append((a, b))
    return out
