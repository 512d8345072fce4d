"""Per-hop activity ledgers and end-to-end metrics for the four protocols.

Each ledger row carries a duration, an expected participant count, a power
factor, and a repeat weight; row energy is their product. Hop delay follows
each protocol's closed-form delay expression, hop energy the row sums, and
end-to-end figures scale both by the expected hop count. A composite cost
weighs energy and delay ratios against the idealized three-way-handshake
baseline.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from . import hopstats
from .geometry import SlicingGeometry
from .linkmodel import LinkBudget

__all__ = [
    "Protocol",
    "ActivityRow",
    "ProtocolLedger",
    "EndToEndResult",
    "protocol_hop_statistics",
    "build_geraf_ledger",
    "build_boss_ledger",
    "build_opt_ledger",
    "build_ledger",
    "end_to_end",
]


class Protocol(enum.Enum):
    GERAF_PC = "geraf-pc"
    GERAF_MRC = "geraf-mrc"
    BOSS = "boss"
    OPT = "opt"

    @classmethod
    def parse(cls, name: str) -> "Protocol":
        for proto in cls:
            if proto.value == name.strip().lower():
                return proto
        raise ValueError(f"unknown protocol {name!r}")


@dataclass(frozen=True)
class ActivityRow:
    label: str
    duration: float  # seconds
    node_count: float  # expected participants
    power_factor: float  # watts
    repeat_factor: float  # expected repetitions of the enclosing stage

    @property
    def energy(self) -> float:
        return self.repeat_factor * self.duration * self.node_count * self.power_factor

    def __post_init__(self):
        if self.duration < 0 or self.node_count < 0 or self.repeat_factor < 0:
            raise ValueError(f"negative quantity in activity {self.label!r}")
        if self.power_factor < 0:
            raise ValueError(f"negative power in activity {self.label!r}")


@dataclass(frozen=True)
class ProtocolLedger:
    protocol: Protocol
    rows: tuple
    hop_energy: float
    hop_delay: float

    def table(self) -> str:
        """Audit rendering with one line per activity."""
        header = f"{'#':>2}  {'duration_s':>12}  {'count':>10}  {'power_w':>12}  {'repeat':>8}  task"
        lines = [header]
        for i, row in enumerate(self.rows, start=1):
            lines.append(
                f"{i:>2}  {row.duration:>12.6g}  {row.node_count:>10.4g}  "
                f"{row.power_factor:>12.6g}  {row.repeat_factor:>8.4g}  {row.label}"
            )
        lines.append(
            f"hop_energy_J={self.hop_energy:.9g} hop_delay_s={self.hop_delay:.9g}"
        )
        return "\n".join(lines)


@dataclass(frozen=True)
class EndToEndResult:
    protocol: Protocol
    hop_energy: float
    hop_delay: float
    expected_hops: float
    total_energy: float
    total_delay: float
    energy_per_bit: float
    delay_per_bit: float
    composite_cost: float


def _control_power(protocol: Protocol, link: LinkBudget, max_power: float) -> float:
    """Control-packet transmit power for the given protocol.

    GeRaF-MRC keeps full power (the range gap is closed by retransmission
    combining); the others lower control power so both ranges coincide.
    """
    if protocol is Protocol.GERAF_MRC:
        return max_power
    return max_power * link.control_threshold / link.data_threshold


def effective_range(protocol: Protocol, link: LinkBudget) -> float:
    """Forwarding range: the common control/data range of the protocol."""
    if protocol is Protocol.GERAF_MRC:
        return link.control_range
    return link.data_range


def protocol_hop_statistics(
    protocol: Protocol,
    density: float,
    duty_cycle: float,
    geometry: SlicingGeometry,
    slot_granularity: int,
    expected_hops: float,
    expected_hops_se: float = 0.0,
) -> hopstats.HopStatistics:
    """Assemble the per-hop statistics a protocol's ledger consumes.

    GeRaF and the optimal baseline contend only in the PPA, so their idle
    cycles count an empty PPA. BOSS falls back to the NPA, so its idle
    cycle requires the whole coverage disk to be empty, and it adds the
    NPA-takeover and fine-slot collision quantities.
    """
    n = geometry.subarea_count
    ppa_slices = geometry.subareas[:n]
    _, mean_idle_slots = hopstats.empty_slot_distribution(
        density, duty_cycle, ppa_slices
    )
    if protocol is Protocol.BOSS:
        mean_empty = hopstats.empty_cycle_mean(
            density, duty_cycle, geometry.ppa_area + geometry.npa_area
        )
        p_npa = hopstats.boss_npa_probability(
            density, duty_cycle, geometry.range_r, geometry.zeta
        )
        contenders = hopstats.contender_distribution(density, duty_cycle, ppa_slices)
        p_c = hopstats.boss_collision_probability(slot_granularity, contenders)
        return hopstats.HopStatistics(
            mean_empty_cycles=mean_empty,
            mean_empty_slots=mean_idle_slots,
            mean_collision_slots=0.0,
            npa_probability=p_npa,
            ppa_probability=1.0 - p_npa,
            collision_probability=p_c,
            mean_collision_cycles=hopstats.boss_collision_cycles(p_c),
            expected_hops=expected_hops,
            expected_hops_se=expected_hops_se,
        )
    mean_empty = hopstats.empty_cycle_mean(density, duty_cycle, geometry.ppa_area)
    if protocol is Protocol.OPT:
        mean_mn = 0.0  # idealized handshake resolves without collisions
    else:
        contenders = hopstats.contender_distribution(density, duty_cycle, ppa_slices)
        mean_mn = hopstats.geraf_collision_slots(contenders)
    return hopstats.HopStatistics(
        mean_empty_cycles=mean_empty,
        mean_empty_slots=mean_idle_slots,
        mean_collision_slots=mean_mn,
        npa_probability=0.0,
        ppa_probability=1.0,
        collision_probability=0.0,
        mean_collision_cycles=0.0,
        expected_hops=expected_hops,
        expected_hops_se=expected_hops_se,
    )


def _mean_contenders_in_collision(density, duty_cycle, geometry) -> float:
    """E[responders | collision], i.e. conditioned on two or more."""
    n = geometry.subarea_count
    pmf = hopstats.contender_distribution(
        density, duty_cycle, geometry.subareas[:n]
    )
    mass = sum(p for i, p in enumerate(pmf) if i >= 2)
    if mass <= 0:
        return 2.0
    return sum(i * p for i, p in enumerate(pmf) if i >= 2) / mass


def _open_ppa_area(geometry: SlicingGeometry, mean_idle_slots: float, cfg) -> float:
    """PPA area beyond the idle slices, where listeners remain.

    Evaluated at the expected idle-slot count by default; the pmf-averaged
    variant weighs the cumulative area over the idle-slot distribution.
    """
    if not cfg.pmf_averaged_listeners:
        return max(
            0.0, geometry.ppa_area - geometry.cumulative_ppa_area(mean_idle_slots)
        )
    n = geometry.subarea_count
    pmf, _ = hopstats.empty_slot_distribution(
        cfg.density, cfg.duty_cycle, geometry.subareas[:n]
    )
    total = 0.0
    for k, p_k in enumerate(pmf):
        total += p_k * (geometry.ppa_area - geometry.cumulative_ppa_area(float(k)))
    return max(0.0, total)


def build_geraf_ledger(
    variant: Protocol,
    stats: hopstats.HopStatistics,
    link: LinkBudget,
    geometry: SlicingGeometry,
    cfg,
) -> ProtocolLedger:
    """Seventeen-activity ledger for either GeRaF flavor.

    Slots last twice the control duration (sender half plus response
    half). The MRC variant repeats the data phase for every combining
    transmission; power control transmits the payload once.
    """
    if variant not in (Protocol.GERAF_PC, Protocol.GERAF_MRC):
        raise ValueError("variant must be a GeRaF flavor")
    if not _finite_stats(stats):
        raise ValueError("hop statistics must be finite")
    t_c = cfg.control_duration
    t_s = 2.0 * t_c
    t_p = cfg.data_duration
    n = cfg.subarea_count
    p_td = cfg.max_power
    p_tc = _control_power(variant, link, cfg.max_power)
    listen = cfg.rx_power + cfg.busy_tone_power
    repeats = link.combining_transmissions if variant is Protocol.GERAF_MRC else 1
    eta = stats.mean_empty_cycles
    m_e = stats.mean_empty_slots
    m_n = stats.mean_collision_slots
    mu = cfg.duty_cycle * cfg.density
    listeners = _open_ppa_area(geometry, m_e, cfg) * mu
    colliders = _mean_contenders_in_collision(cfg.density, cfg.duty_cycle, geometry)
    rows = (
        ActivityRow("idle cycle: sender RTS", t_c, 1, p_tc, eta),
        ActivityRow("idle cycle: sender listens, busy tone on", t_c + (n - 1) * t_s, 1, listen, eta),
        ActivityRow("sender RTS", t_c, 1, p_tc, 1),
        ActivityRow("awake PPA relays receive RTS, busy tone on", t_c, listeners, listen, 1),
        ActivityRow("awake PPA relays await a CTS", m_e * t_s, listeners, listen, 1),
        ActivityRow("sender CONTINUE in idle slots (1st half)", m_e * t_s, 1, 0.5 * p_tc, 1),
        ActivityRow("sender awaits CTS in idle slots (2nd half)", m_e * t_s, 1, 0.5 * p_tc, 1),
        ActivityRow("colliding relays repeat CTS", m_n * t_s, colliders, 0.5 * p_tc, 1),
        ActivityRow("sender arbitrates collisions", m_n * t_s, 1, 0.5 * (p_tc + listen), 1),
        ActivityRow("winning relay CTS", t_c, 1, p_tc, 1),
        ActivityRow("sender receives CTS", t_c, 1, listen, 1),
        ActivityRow("sender confirms relay", t_c, 1, p_tc, 1),
        ActivityRow("relay receives confirmation", t_c, 1, listen, 1),
        ActivityRow("sender transmits payload", t_p, 1, p_td, repeats),
        ActivityRow("relay receives payload", t_p, 1, listen, repeats),
        ActivityRow("relay ACK/NACK", t_c, 1, p_tc, repeats),
        ActivityRow("sender receives ACK/NACK", t_c, 1, listen, repeats),
    )
    delay = (eta * n + m_e + m_n) * t_s + repeats * t_p
    return ProtocolLedger(
        protocol=variant,
        rows=rows,
        hop_energy=sum(r.energy for r in rows),
        hop_delay=delay,
    )


def build_boss_ledger(
    stats: hopstats.HopStatistics,
    link: LinkBudget,
    geometry: SlicingGeometry,
    cfg,
) -> ProtocolLedger:
    """Twenty-one-activity ledger for BOSS.

    The payload rides inside the RTS at data power, slots shrink to
    control_duration / slot_granularity, and a hop may be picked up from
    the NPA (weight npa_probability, one fallback round) or suffer
    collision cycles before the PPA success round.
    """
    if not _finite_stats(stats):
        raise ValueError("hop statistics must be finite")
    if cfg.slot_granularity < 2:
        raise ValueError("BOSS needs at least two offsets per control slot")
    x = cfg.slot_granularity
    t_c = cfg.control_duration
    t_s = t_c / x
    t_p = cfg.data_duration
    n = cfg.subarea_count
    window = cfg.boss_listen_window_factor * x * n  # CTS window in fine slots
    coll_window = cfg.boss_collision_window_factor * x * n
    p_td = cfg.max_power
    p_tc = _control_power(Protocol.BOSS, link, cfg.max_power)
    listen = cfg.rx_power + cfg.busy_tone_power
    mu = cfg.duty_cycle * cfg.density
    eta = stats.mean_empty_cycles
    m_e = stats.mean_empty_slots
    eta_c = stats.mean_collision_cycles
    p_npa = stats.npa_probability * cfg.boss_npa_rounds
    p_ppa = stats.ppa_probability
    npa_nodes = geometry.npa_area * mu
    disk_nodes = geometry.npa_area * mu + _open_ppa_area(geometry, m_e, cfg) * mu
    colliders = _mean_contenders_in_collision(cfg.density, cfg.duty_cycle, geometry)
    rows = (
        ActivityRow("idle cycle: sender RTS with payload", t_p, 1, p_td, eta),
        ActivityRow("idle cycle: sender listens, busy tone on", window * t_s, 1, listen, eta),
        ActivityRow("NPA round: sender RTS with payload", t_p, 1, p_td, p_npa),
        ActivityRow("NPA round: awake NPA relays receive RTS", t_p, npa_nodes, listen, p_npa),
        ActivityRow("NPA round: NPA relays CTS in own slots", window * t_s, npa_nodes, p_tc / window, p_npa),
        ActivityRow("NPA round: sender receives CTS window", window * t_s, 1, listen, p_npa),
        ActivityRow("NPA round: sender selects relay", t_s, 1, p_tc, p_npa),
        ActivityRow("NPA round: relay receives selection", t_s, 1, listen, p_npa),
        ActivityRow("collision cycle: sender RTS with payload", t_p, 1, p_td, p_ppa * eta_c),
        ActivityRow("collision cycle: awake relays receive RTS", t_p, disk_nodes, listen, p_ppa * eta_c),
        ActivityRow("collision cycle: relays and sender await CTS", m_e * t_s, disk_nodes + 1, listen, p_ppa * eta_c),
        ActivityRow("collision cycle: colliding relays CTS same slot", t_s, colliders, p_tc, p_ppa * eta_c),
        ActivityRow("collision cycle: sender attempts CTS receive", t_s, 1, listen, p_ppa * eta_c),
        ActivityRow("collision cycle: colliders await an ACK", max(0.0, x * n - m_e - 1) * t_s, colliders, listen, p_ppa * eta_c),
        ActivityRow("success round: sender RTS with payload", t_p, 1, p_td, p_ppa),
        ActivityRow("success round: awake relays receive RTS", t_p, disk_nodes, listen, p_ppa),
        ActivityRow("success round: relays and sender await CTS", m_e * t_s, disk_nodes + 1, listen, p_ppa),
        ActivityRow("success round: winning relay CTS", t_s, 1, p_tc, p_ppa),
        ActivityRow("success round: sender receives CTS", t_s, 1, listen, p_ppa),
        ActivityRow("success round: sender confirms relay", t_s, 1, p_tc, p_ppa),
        ActivityRow("success round: relay receives confirmation", t_s, 1, listen, p_ppa),
    )
    delay = (
        eta * (t_p + window * t_s)
        + p_npa * (t_p + (window + 1) * t_s)
        + p_ppa * (eta_c * (t_p + coll_window * t_s) + t_p + (m_e + 2) * t_s)
    )
    return ProtocolLedger(
        protocol=Protocol.BOSS,
        rows=rows,
        hop_energy=sum(r.energy for r in rows),
        hop_delay=delay,
    )


def build_opt_ledger(
    stats: hopstats.HopStatistics,
    link: LinkBudget,
    geometry: SlicingGeometry,
    cfg,
) -> ProtocolLedger:
    """Eleven-activity ledger for the idealized RTS/CTS/DATA exchange."""
    if not _finite_stats(stats):
        raise ValueError("hop statistics must be finite")
    t_c = cfg.control_duration
    t_p = cfg.data_duration
    n = cfg.subarea_count
    p_td = cfg.max_power
    p_tc = _control_power(Protocol.OPT, link, cfg.max_power)
    listen = cfg.rx_power + cfg.busy_tone_power
    mu = cfg.duty_cycle * cfg.density
    eta = stats.mean_empty_cycles
    m_e = stats.mean_empty_slots
    listeners = _open_ppa_area(geometry, m_e, cfg) * mu
    rows = (
        ActivityRow("idle cycle: sender RTS", t_c, 1, p_td, eta),
        ActivityRow("idle cycle: sender listens, busy tone on", n * t_c, 1, listen, eta),
        ActivityRow("sender RTS", t_c, 1, p_td, 1),
        ActivityRow("awake PPA relays receive RTS", t_c, listeners, listen, 1),
        ActivityRow("relays and sender await CTS", m_e * t_c, listeners + 1, listen, 1),
        ActivityRow("winning relay CTS", t_c, 1, p_tc, 1),
        ActivityRow("sender receives CTS", t_c, 1, listen, 1),
        ActivityRow("sender confirms relay", t_c, 1, p_tc, 1),
        ActivityRow("relay receives confirmation", t_c, 1, listen, 1),
        ActivityRow("sender transmits payload", t_p, 1, p_td, 1),
        ActivityRow("relay receives payload", t_p, 1, listen, 1),
    )
    delay = (2 * n * eta + 2 * m_e + 3) * t_c + t_p
    return ProtocolLedger(
        protocol=Protocol.OPT,
        rows=rows,
        hop_energy=sum(r.energy for r in rows),
        hop_delay=delay,
    )


def build_ledger(protocol, stats, link, geometry, cfg) -> ProtocolLedger:
    if protocol in (Protocol.GERAF_PC, Protocol.GERAF_MRC):
        return build_geraf_ledger(protocol, stats, link, geometry, cfg)
    if protocol is Protocol.BOSS:
        return build_boss_ledger(stats, link, geometry, cfg)
    return build_opt_ledger(stats, link, geometry, cfg)


def _finite_stats(stats: hopstats.HopStatistics) -> bool:
    values = (
        stats.mean_empty_cycles,
        stats.mean_empty_slots,
        stats.mean_collision_slots,
        stats.mean_collision_cycles,
    )
    return all(math.isfinite(v) for v in values)


def end_to_end(
    ledger: ProtocolLedger,
    expected_hops: float,
    baseline: EndToEndResult | None,
    energy_weight: float,
    payload_bits: int,
) -> EndToEndResult:
    """Scale a hop ledger to route level and rate it against the baseline.

    With no baseline the ledger is the baseline itself and its composite
    cost is exactly one.
    """
    if expected_hops < 1:
        raise ValueError("expected hop count below one")
    if not 0.0 <= energy_weight <= 1.0:
        raise ValueError("energy weight must lie in [0, 1]")
    if payload_bits < 1:
        raise ValueError("payload must carry at least one bit")
    total_energy = expected_hops * ledger.hop_energy
    total_delay = expected_hops * ledger.hop_delay
    if baseline is None:
        composite = 1.0
    else:
        if baseline.total_energy <= 0 or baseline.total_delay <= 0:
            raise ValueError("baseline energy and delay must be positive")
        composite = energy_weight * (total_energy / baseline.total_energy) + (
            1.0 - energy_weight
        ) * (total_delay / baseline.total_delay)
    return EndToEndResult(
        protocol=ledger.protocol,
        hop_energy=ledger.hop_energy,
        hop_delay=ledger.hop_delay,
        expected_hops=expected_hops,
        total_energy=total_energy,
        total_delay=total_delay,
        energy_per_bit=total_energy / payload_bits,
        delay_per_bit=total_delay / payload_bits,
        composite_cost=composite,
    )
