"""Forwarding-area geometry for a sender at distance d from the destination.

The coverage disk of radius R splits into the positive progress area (PPA,
points closer to the destination than the sender) and its complement (NPA).
Each is sliced into N priority subareas; contention slots map onto slices.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

__all__ = [
    "SlicingStrategy",
    "SlicingGeometry",
    "TerminalHopError",
    "circle_intersection_area",
    "ppa_area",
    "progress_area",
    "slice_subareas",
    "far_field_fraction_threshold",
]

# Beyond this distance-to-range ratio the PPA is treated as a half disk.
far_field_fraction_threshold = 10.0


class TerminalHopError(ValueError):
    """Destination already within range; forwarding is trivially resolved."""


class SlicingStrategy(enum.Enum):
    EQUAL_PROGRESS = "equal-progress"
    EQUAL_AREA = "equal-area"


@dataclass(frozen=True)
class SlicingGeometry:
    """PPA/NPA split and the per-slice areas for one hop geometry.

    subareas holds 2N entries: indices 0..N-1 are the PPA slices ordered by
    decreasing progress, N..2N-1 the NPA slices ordered by decreasing
    (least negative first) progress. ppa_edges / npa_edges are the
    advancement boundaries of those slices, from best progress downward.
    """

    range_r: float
    distance: float  # may be math.inf for the far-field limit
    subarea_count: int
    ppa_area: float
    npa_area: float
    subareas: tuple
    zeta: float
    ppa_edges: tuple  # length N+1, descending from R to 0
    npa_edges: tuple  # length N+1, descending from 0 to -R

    def cumulative_ppa_area(self, slices: float) -> float:
        """Area of the first `slices` PPA subareas, fractional allowed.

        Used to evaluate listener counts at a non-integer expected number
        of empty slots.
        """
        s = min(max(slices, 0.0), float(self.subarea_count))
        whole = int(s)
        total = float(sum(self.subareas[:whole]))
        if whole < self.subarea_count:
            total += (s - whole) * self.subareas[whole]
        return total


def circle_intersection_area(r1, r2, dist):
    """Area of the intersection of two circles, vectorized.

    Handles containment and disjoint placements.
    """
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    dist = np.asarray(dist, dtype=float)
    lo = np.minimum(r1, r2)
    hi = np.maximum(r1, r2)
    area = np.zeros(np.broadcast(r1, r2, dist).shape)
    disjoint = dist >= r1 + r2
    contained = dist <= hi - lo
    proper = ~disjoint & ~contained
    area = np.where(contained, np.pi * lo**2, area)
    if np.any(proper):
        d = np.where(proper, dist, 1.0)
        a = np.where(proper, r1, 1.0)
        b = np.where(proper, r2, 1.0)
        cos1 = np.clip((d**2 + a**2 - b**2) / (2 * d * a), -1.0, 1.0)
        cos2 = np.clip((d**2 + b**2 - a**2) / (2 * d * b), -1.0, 1.0)
        term = (
            a**2 * np.arccos(cos1)
            + b**2 * np.arccos(cos2)
            - 0.5
            * np.sqrt(
                np.maximum(
                    (-d + a + b) * (d + a - b) * (d - a + b) * (d + a + b), 0.0
                )
            )
        )
        area = np.where(proper, term, area)
    return area if area.ndim else float(area)


def progress_area(range_r: float, distance: float, progress: float) -> float:
    """Area of the coverage-disk region with advancement >= progress.

    Advancement of a point p is distance - |p - destination|; negative
    values index into the NPA. For an infinite distance (far field) the
    region is a circular segment of the coverage disk.
    """
    if progress >= range_r:
        return 0.0
    if progress <= -range_r:
        return math.pi * range_r**2
    if math.isinf(distance):
        c = progress / range_r
        return range_r**2 * (math.acos(c) - c * math.sqrt(1.0 - c * c))
    return float(circle_intersection_area(range_r, distance - progress, distance))


def ppa_area(range_r: float, distance: float) -> float:
    """Lens area of points in range that are closer to the destination.

    Requires the multi-hop regime (distance > range); a destination in
    range raises TerminalHopError.
    """
    if range_r <= 0:
        raise ValueError("range must be positive")
    if math.isinf(distance):
        return 0.5 * math.pi * range_r**2
    if distance <= range_r:
        raise TerminalHopError(
            f"destination at {distance} m is inside the {range_r} m range"
        )
    return progress_area(range_r, distance, 0.0)


def _arc_length(range_r: float, distance: float, progress: float) -> float:
    """Length of the equal-advancement contour inside the coverage disk."""
    if math.isinf(distance):
        c = abs(progress) / range_r
        return 2.0 * range_r * math.sqrt(max(0.0, 1.0 - c * c))
    radius = distance - progress
    if radius <= 0:
        return 0.0
    cosang = (distance**2 + radius**2 - range_r**2) / (2.0 * distance * radius)
    return 2.0 * math.acos(min(1.0, max(-1.0, cosang))) * radius


def slice_subareas(
    range_r: float,
    distance: float,
    subarea_count: int,
    strategy: SlicingStrategy = SlicingStrategy.EQUAL_PROGRESS,
) -> SlicingGeometry:
    """Slice the PPA and NPA into priority subareas.

    Equal-progress slicing bins advancement into N equal intervals on each
    side (the NPA mirrored); areas come from integrating the contour length
    over advancement. Equal-area slicing solves for progress levels that
    split each side into N slices of identical area.
    """
    if subarea_count < 1:
        raise ValueError("need at least one subarea")
    total_ppa = ppa_area(range_r, distance)
    total = math.pi * range_r**2
    total_npa = total - total_ppa
    abs_tol = 1.0e-6 * total

    def area_between(lo: float, hi: float) -> float:
        val, _ = quad(
            lambda c: _arc_length(range_r, distance, c),
            lo,
            hi,
            epsabs=abs_tol * 1e-3,
            limit=200,
        )
        return max(0.0, val)

    def edge_for_area(target: float, lo: float, hi: float) -> float:
        # progress level whose >=-progress area equals target (lo < hi)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if progress_area(range_r, distance, mid) < target:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)

    n = subarea_count
    if strategy is SlicingStrategy.EQUAL_PROGRESS:
        step = range_r / n
        edges_ppa = [range_r - i * step for i in range(n + 1)]  # high to low
        edges_npa = [-i * step for i in range(n + 1)]  # 0 down to -R
    else:
        edges_ppa = [range_r] + [
            edge_for_area(i * total_ppa / n, 0.0, range_r) for i in range(1, n)
        ] + [0.0]
        edges_npa = [0.0] + [
            edge_for_area(total_ppa + j * total_npa / n, -range_r, 0.0)
            for j in range(1, n)
        ] + [-range_r]
    ppa = [area_between(edges_ppa[i + 1], edges_ppa[i]) for i in range(n)]
    npa = [area_between(edges_npa[i + 1], edges_npa[i]) for i in range(n)]
    # normalize tiny integration residue so the partition closes exactly
    scale_p = total_ppa / sum(ppa) if sum(ppa) > 0 else 1.0
    scale_n = total_npa / sum(npa) if sum(npa) > 0 else 1.0
    ppa = tuple(a * scale_p for a in ppa)
    npa = tuple(a * scale_n for a in npa)
    return SlicingGeometry(
        range_r=range_r,
        distance=distance,
        subarea_count=n,
        ppa_area=total_ppa,
        npa_area=total_npa,
        subareas=ppa + npa,
        zeta=total_ppa / total,
        ppa_edges=tuple(edges_ppa),
        npa_edges=tuple(edges_npa),
    )
