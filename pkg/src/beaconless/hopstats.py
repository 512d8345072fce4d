"""Per-hop contention statistics over a duty-cycled Poisson node field.

Awake relays form a Poisson point process of intensity duty_cycle * density.
All quantities below follow from that model: counts of idle contention
cycles, idle slots before the first response, collision-resolution slots,
NPA takeover and collision probabilities, and the end-to-end hop count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import SlicingGeometry, circle_intersection_area

__all__ = [
    "HopStatistics",
    "empty_cycle_mean",
    "empty_slot_distribution",
    "contender_distribution",
    "geraf_collision_slots",
    "collision_slots_mc",
    "boss_npa_probability",
    "boss_npa_probability_printed",
    "boss_collision_given_n",
    "boss_collision_given_n_printed",
    "boss_collision_probability",
    "boss_collision_cycles",
    "boss_collision_cycles_printed",
    "expected_hop_count",
    "hop_count_estimate",
]

# Contender counts above this bound carry negligible Poisson mass for every
# supported configuration.
_MAX_CONTENDERS = 120


@dataclass(frozen=True)
class HopStatistics:
    """Expected per-hop contention quantities for one protocol/geometry."""

    mean_empty_cycles: float
    mean_empty_slots: float
    mean_collision_slots: float
    npa_probability: float
    ppa_probability: float
    collision_probability: float
    mean_collision_cycles: float
    expected_hops: float
    expected_hops_se: float = 0.0


def empty_cycle_mean(density: float, duty_cycle: float, area: float) -> float:
    """Expected number of contention cycles with no awake relay.

    The awake count in the area is Poisson with mean duty*density*area, so
    the number of empty cycles before a non-empty one is geometric. A zero
    mean (no reachable relays) yields an infinite expectation.
    """
    if density <= 0:
        raise ValueError("density must be positive")
    if not 0.0 < duty_cycle <= 1.0:
        raise ValueError("duty cycle must lie in (0, 1]")
    mean_awake = duty_cycle * density * area
    if mean_awake <= 0:
        return math.inf
    p_empty = math.exp(-mean_awake)
    return p_empty / (1.0 - p_empty)


def empty_slot_distribution(density, duty_cycle, ppa_subareas):
    """Distribution of idle slots preceding the first response.

    Conditioned on at least one awake relay in the PPA. Returns (pmf, mean)
    with the pmf over 0..N-1 idle slots.
    """
    mu = duty_cycle * density
    areas = np.asarray(ppa_subareas, dtype=float)
    cum = np.concatenate(([0.0], np.cumsum(areas)))
    surv = np.exp(-mu * cum)  # P(first k subareas all empty)
    p_nonempty = 1.0 - surv[-1]
    if p_nonempty <= 0:
        raise ValueError("no awake relay possible in the PPA")
    pmf = (surv[:-1] - surv[1:]) / p_nonempty
    mean = float(np.dot(np.arange(len(areas)), pmf))
    return pmf, mean


def contender_distribution(density, duty_cycle, ppa_subareas):
    """Pmf of the responder count in the first non-idle subarea.

    Zero-truncated Poisson in each subarea, mixed over which subarea is the
    first to hold an awake relay. Index n of the result is P(count = n);
    entry 0 is zero by construction.
    """
    mu = duty_cycle * density
    pmf_slots, _ = empty_slot_distribution(density, duty_cycle, ppa_subareas)
    areas = np.asarray(ppa_subareas, dtype=float)
    n = np.arange(_MAX_CONTENDERS + 1)
    out = np.zeros(_MAX_CONTENDERS + 1)
    for k, p_k in enumerate(pmf_slots):
        if p_k <= 0:
            continue
        lam = mu * areas[k]
        logpmf = n * math.log(lam) - lam - np.array(
            [math.lgamma(i + 1) for i in n]
        )
        pois = np.exp(logpmf)
        pois[0] = 0.0
        trunc = pois / max(1.0 - math.exp(-lam), 1e-300)
        out += p_k * trunc
    return out / out.sum()


def geraf_collision_slots(contender_pmf) -> float:
    """Expected splitting slots until a lone responder remains.

    Each slot every contender retransmits with probability 1/2; the round
    resolves when exactly one transmits, so given n contenders the slot
    count is geometric with success probability n/2^n. A single contender
    needs no resolution.
    """
    pmf = np.asarray(contender_pmf, dtype=float)
    total = 0.0
    for n, p in enumerate(pmf):
        if n >= 2 and p > 0:
            total += p * (2.0**n / n)
    return total


def collision_slots_mc(contender_pmf, trials: int, seed: int) -> tuple:
    """Monte Carlo of the splitting procedure, as (mean, standard error)."""
    rng = np.random.default_rng(np.random.Philox(key=seed))
    pmf = np.asarray(contender_pmf, dtype=float)
    counts = rng.choice(len(pmf), size=trials, p=pmf / pmf.sum())
    slots = np.zeros(trials)
    active = counts >= 2
    idx = np.flatnonzero(active)
    n_active = counts[idx]
    while idx.size:
        transmitted = rng.binomial(n_active, 0.5)
        slots[idx] += 1
        done = transmitted == 1
        idx = idx[~done]
        n_active = n_active[~done]
    return float(slots.mean()), float(slots.std(ddof=1) / math.sqrt(trials))


def boss_npa_probability(
    density: float, duty_cycle: float, range_r: float, zeta: float
) -> float:
    """Probability that a cycle finds the PPA empty but the NPA occupied."""
    if min(density, duty_cycle, range_r) <= 0:
        raise ValueError("inputs must be positive")
    disk = duty_cycle * density * math.pi * range_r**2
    return math.exp(-zeta * disk) * (1.0 - math.exp(-(1.0 - zeta) * disk))


def boss_npa_probability_printed(
    density: float, duty_cycle: float, range_r: float, zeta: float
) -> float:
    """Verbatim printed form, which omits the at-least-one complement."""
    disk = duty_cycle * density * math.pi * range_r**2
    return math.exp(-zeta * disk) * math.exp(-(1.0 - zeta) * disk)


def boss_collision_given_n(n: int, slots: int) -> float:
    """Collision probability with n responders over `slots` offsets.

    Each responder picks a uniform offset; a collision occurs iff the
    earliest occupied offset holds two or more responders. Exact
    combinatorial sum.
    """
    if slots < 2:
        raise ValueError("need at least two offsets per slot")
    if n <= 1:
        return 0.0
    # P(unique earliest) = sum_j n (1/x) ((x-j)/x)^(n-1)
    ok = sum(n / slots * ((slots - j) / slots) ** (n - 1) for j in range(1, slots + 1))
    return 1.0 - ok


def boss_collision_given_n_printed(n: int, slots: int) -> float:
    """Verbatim printed expression (documented erratum; can go negative)."""
    if n < 1:
        return 0.0
    return 1.0 - sum(
        ((slots - j) / (slots - j + 1)) ** (n - 1) for j in range(1, slots)
    )


def boss_collision_probability(slots: int, contender_pmf) -> float:
    """Collision probability averaged over the responder-count pmf."""
    pmf = np.asarray(contender_pmf, dtype=float)
    return float(
        sum(p * boss_collision_given_n(n, slots) for n, p in enumerate(pmf) if p > 0)
    )


def boss_collision_cycles(collision_probability: float) -> float:
    """Mean of the geometric number of collision cycles before success."""
    if not 0.0 <= collision_probability <= 1.0:
        raise ValueError("collision probability must lie in [0, 1]")
    if collision_probability >= 1.0:
        return math.inf
    return collision_probability / (1.0 - collision_probability)


def boss_collision_cycles_printed(collision_probability: float) -> float:
    """Printed mean, inconsistent with the stated pmf (documented erratum)."""
    if collision_probability <= 0.0:
        return math.inf
    return (1.0 - collision_probability) / collision_probability


def _max_progress_quantile(u, range_r, distance, intensity):
    """Advancement c with exp(-intensity * area(progress >= c)) = u."""
    lo = np.zeros_like(u)
    hi = np.full_like(u, range_r)
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        area = circle_intersection_area(range_r, distance - mid, distance)
        surv = np.exp(-intensity * area)
        takes_hi = surv >= u  # area too small -> move down
        hi = np.where(takes_hi, mid, hi)
        lo = np.where(takes_hi, lo, mid)
    return 0.5 * (lo + hi)


def expected_hop_count(
    distance: float,
    range_r: float,
    density: float,
    duty_cycle: float,
    routes: int = 10000,
    seed: int = 0,
) -> tuple:
    """Monte Carlo of greedy per-hop advancement, as (mean, standard error).

    Each hop advances by the best advancement among awake relays in the
    current PPA lens (idle cycles do not move the packet and do not count
    as hops); the final in-range delivery counts as one hop.
    """
    if distance <= 0:
        raise ValueError("distance must be positive")
    if distance <= range_r:
        return 1.0, 0.0
    rng = np.random.default_rng(np.random.Philox(key=seed))
    intensity = duty_cycle * density
    d = np.full(routes, float(distance))
    hops = np.zeros(routes, dtype=np.int64)
    guard = 0
    while True:
        active = d > range_r
        if not np.any(active):
            break
        guard += 1
        if guard > 100 * int(math.ceil(distance / range_r)) + 1000:
            raise RuntimeError("hop-count simulation failed to terminate")
        u = rng.random(routes)
        # condition on a non-empty lens: rescale u into (exp(-I*A), 1)
        lens = circle_intersection_area(range_r, d, d)
        floor = np.exp(-intensity * lens)
        u = floor + u * (1.0 - floor)
        adv = _max_progress_quantile(u, range_r, d, intensity)
        d = np.where(active, d - adv, d)
        hops = np.where(active, hops + 1, hops)
    hops = hops + 1  # the delivery hop
    return float(hops.mean()), float(hops.std(ddof=1) / math.sqrt(routes))


def hop_count_estimate(
    distance: float, range_r: float, density: float, duty_cycle: float
) -> float:
    """Deterministic approximation: ceil(distance / mean advancement)."""
    if distance <= range_r:
        return 1.0
    intensity = duty_cycle * density
    grid = np.linspace(0.0, range_r, 513)
    area = circle_intersection_area(range_r, distance - grid, distance)
    surv = np.exp(-intensity * area)  # P(max advancement <= c)
    p_nonempty = 1.0 - surv[0]  # at least one awake relay in the lens
    if p_nonempty <= 0:
        return math.inf
    mean_adv = float(np.trapz(1.0 - surv, grid)) / p_nonempty
    return float(math.ceil(distance / mean_adv))
