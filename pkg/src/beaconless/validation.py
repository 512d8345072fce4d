"""Agreement suite: analytical expectations versus the operational oracle.

Each grid point runs the discrete-event simulator in single-hop mode at a
fixed remaining distance of eight ranges (both sides then use the same
exact lens geometry) and compares every analytical per-hop quantity
against its empirical estimate: statistics within three standard errors,
ledger energy and delay within a relative band.

The default grid spans densities, duty cycles, subarea counts, and slot
granularities at moderate-to-high awake populations. At very sparse
populations the tables' linearized listener counts are documented to drift
a few percent above the band; the simulator is the instrument that
quantifies that drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from . import hopstats
from .geometry import slice_subareas
from .protocols import Protocol, build_ledger, effective_range, protocol_hop_statistics
from .scenarios import ScenarioConfig, solve_config_link
from .simulator import estimate_statistics

__all__ = ["AgreementCheck", "default_grid", "run_agreement_suite", "format_report"]

# Relative band for ledger-vs-simulator hop energy and delay.
LEDGER_REL_TOL = 0.05
# Statistics band in standard errors.
STAT_SIGMA = 3.0


@dataclass(frozen=True)
class AgreementCheck:
    config_label: str
    protocol: str
    quantity: str
    analytical: float
    empirical: float
    spread: float  # standard error, or the allowed relative band
    kind: str  # "sigma" or "relative"
    passed: bool


def default_grid(base: ScenarioConfig | None = None) -> list:
    """Twelve (density, duty-cycle, subareas, granularity) combinations."""
    if base is None:
        base = ScenarioConfig()
    points = [
        (3.0, 0.2, 2, 4),
        (6.0, 0.1, 2, 4),
        (4.0, 0.2, 2, 8),
        (1.6, 0.5, 2, 8),
        (4.0, 0.3, 4, 4),
        (8.0, 0.15, 4, 4),
        (2.5, 0.4, 4, 8),
        (12.0, 0.1, 4, 8),
        (6.0, 0.25, 6, 4),
        (10.0, 0.15, 6, 8),
        (5.0, 0.35, 8, 4),
        (14.0, 0.12, 8, 8),
    ]
    grid = []
    for density, duty, n, x in points:
        grid.append(
            replace(
                base,
                density=density,
                duty_cycle=duty,
                subarea_count=n,
                slot_granularity=x,
            )
        )
    return grid


def _checks_for_point(
    cfg: ScenarioConfig, protocol: Protocol, trials: int, seed: int
) -> list:
    link = solve_config_link(cfg)
    range_r = effective_range(protocol, link)
    d = 8.0 * range_r
    geometry = slice_subareas(range_r, d, cfg.subarea_count, cfg.slicing)
    stats = protocol_hop_statistics(
        protocol,
        cfg.density,
        cfg.duty_cycle,
        geometry,
        cfg.slot_granularity,
        expected_hops=1.0,
    )
    ledger = build_ledger(protocol, stats, link, geometry, cfg)
    emp = estimate_statistics(
        cfg,
        protocol,
        trials=trials,
        seed=seed,
        mode="single-hop",
        remaining_distance=d,
    )
    label = (
        f"rho={cfg.density:g} eps={cfg.duty_cycle:g} "
        f"N={cfg.subarea_count} x={cfg.slot_granularity}"
    )
    out = []

    def sigma_check(name, analytical, empirical, se):
        if not math.isfinite(empirical) or not math.isfinite(analytical):
            ok = False
        elif se == 0.0:
            ok = math.isclose(analytical, empirical, rel_tol=1e-9, abs_tol=1e-12)
        else:
            ok = abs(empirical - analytical) <= STAT_SIGMA * se
        out.append(
            AgreementCheck(label, protocol.value, name, analytical, empirical, se, "sigma", ok)
        )

    def rel_check(name, analytical, empirical):
        ok = (
            math.isfinite(empirical)
            and abs(empirical - analytical) <= LEDGER_REL_TOL * abs(analytical)
        )
        out.append(
            AgreementCheck(
                label, protocol.value, name, analytical, empirical, LEDGER_REL_TOL, "relative", ok
            )
        )

    sigma_check("mean_empty_cycles", stats.mean_empty_cycles, emp.mean_empty_cycles, emp.se_empty_cycles)
    sigma_check("mean_empty_slots", stats.mean_empty_slots, emp.mean_empty_slots, emp.se_empty_slots)
    if protocol in (Protocol.GERAF_PC, Protocol.GERAF_MRC):
        sigma_check(
            "mean_collision_slots",
            stats.mean_collision_slots,
            emp.mean_collision_slots,
            emp.se_collision_slots,
        )
    if protocol is Protocol.BOSS:
        sigma_check("npa_probability", stats.npa_probability, emp.npa_probability, emp.se_npa_probability)
        sigma_check(
            "collision_probability",
            stats.collision_probability,
            emp.collision_probability,
            emp.se_collision_probability,
        )
        sigma_check(
            "mean_collision_cycles",
            stats.mean_collision_cycles,
            emp.mean_collision_cycles,
            emp.se_collision_cycles,
        )
    rel_check("hop_delay", ledger.hop_delay, emp.mean_hop_delay)
    rel_check("hop_energy", ledger.hop_energy, emp.mean_hop_energy)
    return out


def run_agreement_suite(
    base: ScenarioConfig | None = None,
    trials: int = 10000,
    seed: int = 20240601,
    protocols: tuple = (
        Protocol.GERAF_PC,
        Protocol.GERAF_MRC,
        Protocol.BOSS,
        Protocol.OPT,
    ),
    grid: list | None = None,
) -> list:
    """Run every check on the grid; returns a flat list of AgreementCheck."""
    grid = grid if grid is not None else default_grid(base)
    checks = []
    for i, cfg in enumerate(grid):
        for j, proto in enumerate(protocols):
            checks.extend(
                _checks_for_point(cfg, proto, trials, seed + 1000 * i + j)
            )
    return checks


def format_report(checks: list) -> str:
    """Fixed-width pass/fail table, one line per check."""
    lines = [
        f"{'config':38s} {'protocol':10s} {'quantity':22s} "
        f"{'analytic':>12s} {'empirical':>12s} {'band':>10s} result"
    ]
    for c in checks:
        band = f"3se={3*c.spread:.3g}" if c.kind == "sigma" else f"{c.spread:.0%}"
        lines.append(
            f"{c.config_label:38s} {c.protocol:10s} {c.quantity:22s} "
            f"{c.analytical:12.5g} {c.empirical:12.5g} {band:>10s} "
            f"{'pass' if c.passed else 'FAIL'}"
        )
    failed = sum(1 for c in checks if not c.passed)
    lines.append(f"{len(checks) - failed}/{len(checks)} checks passed")
    return "\n".join(lines)
