"""Discrete-event Monte Carlo of the three handshakes over a Poisson field.

Nodes are dropped once per trial as a Poisson point process and wake
independently every contention cycle. Protocol rounds then play out slot
by slot: idle cycles, NPA fallback (BOSS), splitting or fine-slot
collisions, and the winning relay. Time and energy are charged per the
same activity model the analytical ledgers use, evaluated at the realized
counts, which makes the simulator the operational oracle for every
analytical expectation.

Reproducibility: all randomness derives from counter-based Philox streams
keyed by (seed, trial index), so results are bit-identical for a fixed
seed and config regardless of how trials are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linkmodel import LinkBudget
from .protocols import Protocol, effective_range
from .scenarios import ScenarioConfig, solve_config_link

__all__ = [
    "SimTrial",
    "RouteResult",
    "HopSample",
    "EmpiricalStatistics",
    "simulate_route",
    "simulate_routes",
    "estimate_statistics",
    "export_event_log",
]

# Corridor half-width around the source-destination axis, in ranges.
# Lens membership beyond it is negligible for every supported geometry.
_CORRIDOR_HALF_WIDTH = 3.0


@dataclass
class SimTrial:
    """One simulated delivery: node field, per-hop trace, event log."""

    seed: int
    node_positions: np.ndarray
    event_log: list  # (time_s, node_id, activity, power_w, energy_j)
    hop_trace: list  # per hop: (x, y, empty_cycles, slots, collision_cycles)


@dataclass(frozen=True)
class HopSample:
    """Realized contention counters for a single hop."""

    empty_cycles: int
    empty_slots: int  # summed over PPA rounds of the hop
    collision_slots: int
    npa_cycles: int
    collision_cycles: int
    ppa_rounds: int  # collision cycles plus the success round, if any
    resolved_from_npa: bool
    delay: float
    energy: float


@dataclass(frozen=True)
class RouteResult:
    energy: float
    delay: float
    hops: int
    outage: bool
    hop_samples: tuple
    trial: SimTrial


@dataclass(frozen=True)
class EmpiricalStatistics:
    """Empirical counterparts of the analytical per-hop quantities.

    Ratio quantities (idle cycles per non-idle cycle, NPA share of cycles,
    collisions per PPA round, collision cycles per PPA success) use pooled
    ratio estimators with delta-method standard errors, making them
    directly comparable to their closed forms.
    """

    mean_empty_cycles: float
    se_empty_cycles: float
    mean_empty_slots: float
    se_empty_slots: float
    mean_collision_slots: float
    se_collision_slots: float
    npa_probability: float
    se_npa_probability: float
    collision_probability: float
    se_collision_probability: float
    mean_collision_cycles: float
    se_collision_cycles: float
    mean_hop_delay: float
    se_hop_delay: float
    mean_hop_energy: float
    se_hop_energy: float
    expected_hops: float
    se_expected_hops: float
    outage_rate: float
    trials: int


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    key = ((int(seed) & 0xFFFFFFFFFFFFFFFF) << 64) | (int(trial) & 0xFFFFFFFFFFFFFFFF)
    return np.random.Generator(np.random.Philox(key=key))


class _EnergyLog:
    """Accumulates charges, optionally retaining per-node event records."""

    def __init__(self, record: bool):
        self.total = 0.0
        self.records = [] if record else None

    def charge(self, time_s, node_id, activity, power_w, duration_s):
        energy = power_w * duration_s
        self.total += energy
        if self.records is not None and energy > 0.0:
            self.records.append((time_s, int(node_id), activity, power_w, energy))

    def charge_group(self, time_s, node_ids, activity, power_w, duration_s):
        energy = power_w * duration_s
        self.total += energy * len(node_ids)
        if self.records is not None and energy > 0.0:
            for nid in node_ids:
                self.records.append((time_s, int(nid), activity, power_w, energy))


class _HopEngine:
    """Plays protocol cycles for one (config, protocol, node field)."""

    def __init__(self, cfg, link, protocol, range_r, positions, dest, rng, log):
        self.cfg = cfg
        self.link = link
        self.protocol = protocol
        self.range_r = range_r
        self.positions = positions
        self.dest = dest
        self.rng = rng
        self.log = log
        self.t_c = cfg.control_duration
        self.t_p = cfg.data_duration
        self.n = cfg.subarea_count
        self.x = cfg.slot_granularity
        self.listen = cfg.rx_power + cfg.busy_tone_power
        self.p_td = cfg.max_power
        if protocol is Protocol.GERAF_MRC:
            self.p_tc = cfg.max_power
        else:
            self.p_tc = cfg.max_power * link.control_threshold / link.data_threshold
        self.repeats = (
            link.combining_transmissions if protocol is Protocol.GERAF_MRC else 1
        )

    # -- slice helpers ---------------------------------------------------

    def _ppa_slice(self, progress):
        """0-based PPA slice index (0 holds the best progress)."""
        n = self.n
        idx = n - np.floor(
            np.asarray(progress) * n / self.range_r
        ).astype(int) - 1
        return np.clip(idx, 0, n - 1)

    # -- hop driver ------------------------------------------------------

    def run_hop(self, sender_pos, time0, max_cycles):
        """Contend at one sender until the hop resolves.

        Returns (HopSample, winner_node_id, time_after); the winner is -2
        when the destination itself is reached and None on a cycle-budget
        outage (sample is then None as well).
        """
        d = float(np.hypot(*(self.dest - sender_pos)))
        dist_s = np.hypot(
            self.positions[:, 0] - sender_pos[0],
            self.positions[:, 1] - sender_pos[1],
        )
        cand_idx = np.flatnonzero(dist_s <= self.range_r)
        dist_d = np.hypot(
            self.positions[cand_idx, 0] - self.dest[0],
            self.positions[cand_idx, 1] - self.dest[1],
        )
        progress = d - dist_d
        terminal = d <= self.range_r

        counters = {
            "empty": 0,
            "empty_slots": 0,
            "collision_slots": 0,
            "npa": 0,
            "collision": 0,
            "ppa_round": 0,
        }
        delay = 0.0
        energy0 = self.log.total
        t = time0
        for _ in range(max_cycles):
            if terminal:
                awake = np.zeros(0, dtype=int)
            else:
                awake = np.flatnonzero(
                    self.rng.random(cand_idx.size) < self.cfg.duty_cycle
                )
            if self.protocol in (Protocol.GERAF_PC, Protocol.GERAF_MRC):
                kind, dt, winner = self._geraf_cycle(
                    cand_idx, progress, awake, terminal, d, t, counters
                )
            elif self.protocol is Protocol.BOSS:
                kind, dt, winner = self._boss_cycle(
                    cand_idx, progress, awake, terminal, d, t, counters
                )
            else:
                kind, dt, winner = self._opt_cycle(
                    cand_idx, progress, awake, terminal, d, t, counters
                )
            delay += dt
            t += dt
            if kind == "resolved":
                sample = HopSample(
                    empty_cycles=counters["empty"],
                    empty_slots=counters["empty_slots"],
                    collision_slots=counters["collision_slots"],
                    npa_cycles=counters["npa"],
                    collision_cycles=counters["collision"],
                    ppa_rounds=counters["ppa_round"],
                    resolved_from_npa=counters["npa"] > 0,
                    delay=delay,
                    energy=self.log.total - energy0,
                )
                return sample, winner, t
        return None, None, t

    # -- per-protocol cycles ----------------------------------------------

    def _first_slice(self, cand_idx, progress, awake, terminal, d):
        """Realized idle-slot count, contenders, and PPA listeners."""
        if terminal:
            m_e = int(self._ppa_slice([d])[0])
            return m_e, np.array([-2]), np.zeros(0, dtype=int)
        ppa_local = awake[progress[awake] > 0.0]
        slices = self._ppa_slice(progress[ppa_local])
        first = int(slices.min())
        contenders = cand_idx[ppa_local[slices == first]]
        return first, contenders, cand_idx[ppa_local]

    def _geraf_cycle(self, cand_idx, progress, awake, terminal, d, t, counters):
        t_s = 2.0 * self.t_c
        n = self.n
        has_ppa = terminal or (awake.size and np.any(progress[awake] > 0.0))
        if not has_ppa:
            self.log.charge(t, -1, "rts", self.p_tc, self.t_c)
            self.log.charge(
                t, -1, "listen-idle-cycle", self.listen, self.t_c + (n - 1) * t_s
            )
            counters["empty"] += 1
            return "continue", n * t_s, None
        m_e, contenders, listeners = self._first_slice(
            cand_idx, progress, awake, terminal, d
        )
        self.log.charge(t, -1, "rts", self.p_tc, self.t_c)
        self.log.charge_group(t, listeners, "receive-rts", self.listen, self.t_c)
        self.log.charge_group(t, listeners, "await-cts", self.listen, m_e * t_s)
        self.log.charge(t, -1, "continue-idle-slots", 0.5 * self.p_tc, m_e * t_s)
        self.log.charge(t, -1, "await-cts-idle-slots", 0.5 * self.p_tc, m_e * t_s)
        m_n = 0
        if contenders.size > 1:
            # fixed-set splitting: all contenders toss fair coins each slot
            # until exactly one transmits
            while True:
                m_n += 1
                sent = self.rng.random(contenders.size) < 0.5
                if sent.sum() == 1:
                    winner = int(contenders[np.flatnonzero(sent)[0]])
                    break
            self.log.charge_group(
                t, contenders, "cts-collision", 0.5 * self.p_tc, m_n * t_s
            )
            self.log.charge(
                t, -1, "arbitrate", 0.5 * (self.p_tc + self.listen), m_n * t_s
            )
        else:
            winner = int(contenders[0])
        self.log.charge(t, winner, "cts", self.p_tc, self.t_c)
        self.log.charge(t, -1, "receive-cts", self.listen, self.t_c)
        self.log.charge(t, -1, "confirm", self.p_tc, self.t_c)
        self.log.charge(t, winner, "receive-confirm", self.listen, self.t_c)
        for _ in range(self.repeats):
            self.log.charge(t, -1, "data", self.p_td, self.t_p)
            self.log.charge(t, winner, "receive-data", self.listen, self.t_p)
            self.log.charge(t, winner, "ack", self.p_tc, self.t_c)
            self.log.charge(t, -1, "receive-ack", self.listen, self.t_c)
        counters["empty_slots"] += m_e
        counters["collision_slots"] += m_n
        counters["ppa_round"] += 1
        delay = (m_e + m_n) * t_s + self.repeats * self.t_p
        return "resolved", delay, winner

    def _boss_cycle(self, cand_idx, progress, awake, terminal, d, t, counters):
        x = self.x
        n = self.n
        t_s = self.t_c / x
        window = self.cfg.boss_listen_window_factor * x * n
        coll_window = self.cfg.boss_collision_window_factor * x * n
        has_ppa = terminal or (awake.size and np.any(progress[awake] > 0.0))
        has_npa = (not terminal) and awake.size and np.any(progress[awake] <= 0.0)
        if not has_ppa and not has_npa:
            self.log.charge(t, -1, "rts-payload", self.p_td, self.t_p)
            self.log.charge(t, -1, "listen-idle-cycle", self.listen, window * t_s)
            counters["empty"] += 1
            return "continue", self.t_p + window * t_s, None
        if not has_ppa:
            npa_local = awake[progress[awake] <= 0.0]
            npa_ids = cand_idx[npa_local]
            self.log.charge(t, -1, "rts-payload", self.p_td, self.t_p)
            self.log.charge_group(t, npa_ids, "receive-rts", self.listen, self.t_p)
            self.log.charge_group(
                t, npa_ids, "cts-npa", self.p_tc / window, window * t_s
            )
            self.log.charge(t, -1, "receive-cts-window", self.listen, window * t_s)
            # fallback relay: the least-negative progress stays closest
            best = int(npa_ids[int(np.argmax(progress[npa_local]))])
            self.log.charge(t, -1, "select-relay", self.p_tc, t_s)
            self.log.charge(t, best, "receive-selection", self.listen, t_s)
            counters["npa"] += 1
            return "resolved", self.t_p + (window + 1) * t_s, best
        m_e, contenders, ppa_ids = self._first_slice(
            cand_idx, progress, awake, terminal, d
        )
        listeners = (
            np.zeros(0, dtype=int) if terminal else cand_idx[awake]
        )  # whole disk hears the payload-bearing RTS
        self.log.charge(t, -1, "rts-payload", self.p_td, self.t_p)
        self.log.charge_group(t, listeners, "receive-rts", self.listen, self.t_p)
        self.log.charge_group(
            t, np.concatenate((listeners, [-1])), "await-cts", self.listen, m_e * t_s
        )
        if contenders.size > 1:
            offsets = self.rng.integers(0, x, size=contenders.size)
            earliest = int(offsets.min())
            in_slot = np.flatnonzero(offsets == earliest)
            if in_slot.size > 1:
                colliders = contenders[in_slot]
                self.log.charge_group(t, colliders, "cts-collision", self.p_tc, t_s)
                self.log.charge(t, -1, "receive-collision", self.listen, t_s)
                self.log.charge_group(
                    t,
                    colliders,
                    "await-ack",
                    self.listen,
                    max(0, x * n - m_e - 1) * t_s,
                )
                counters["collision"] += 1
                counters["ppa_round"] += 1
                counters["empty_slots"] += m_e
                return "continue", self.t_p + coll_window * t_s, None
            winner = int(contenders[in_slot[0]])
        else:
            winner = int(contenders[0])
        self.log.charge(t, winner, "cts", self.p_tc, t_s)
        self.log.charge(t, -1, "receive-cts", self.listen, t_s)
        self.log.charge(t, -1, "confirm", self.p_tc, t_s)
        self.log.charge(t, winner, "receive-confirm", self.listen, t_s)
        counters["empty_slots"] += m_e
        counters["ppa_round"] += 1
        return "resolved", self.t_p + (m_e + 2) * t_s, winner

    def _opt_cycle(self, cand_idx, progress, awake, terminal, d, t, counters):
        n = self.n
        has_ppa = terminal or (awake.size and np.any(progress[awake] > 0.0))
        if not has_ppa:
            self.log.charge(t, -1, "rts", self.p_td, self.t_c)
            self.log.charge(t, -1, "listen-idle-cycle", self.listen, n * self.t_c)
            counters["empty"] += 1
            return "continue", 2 * n * self.t_c, None
        if terminal:
            m_e = int(self._ppa_slice([d])[0])
            winner = -2
            listeners = np.zeros(0, dtype=int)
        else:
            ppa_local = awake[progress[awake] > 0.0]
            m_e = int(self._ppa_slice(progress[ppa_local]).min())
            winner = int(cand_idx[ppa_local[int(np.argmax(progress[ppa_local]))]])
            listeners = cand_idx[ppa_local]
        self.log.charge(t, -1, "rts", self.p_td, self.t_c)
        self.log.charge_group(t, listeners, "receive-rts", self.listen, self.t_c)
        self.log.charge_group(
            t,
            np.concatenate((listeners, [-1])),
            "await-cts",
            self.listen,
            m_e * self.t_c,
        )
        self.log.charge(t, winner, "cts", self.p_tc, self.t_c)
        self.log.charge(t, -1, "receive-cts", self.listen, self.t_c)
        self.log.charge(t, -1, "confirm", self.p_tc, self.t_c)
        self.log.charge(t, winner, "receive-confirm", self.listen, self.t_c)
        self.log.charge(t, -1, "data", self.p_td, self.t_p)
        self.log.charge(t, winner, "receive-data", self.listen, self.t_p)
        counters["empty_slots"] += m_e
        counters["ppa_round"] += 1
        delay = (2 * m_e + 3) * self.t_c + self.t_p
        return "resolved", delay, winner


def _drop_corridor(cfg: ScenarioConfig, range_r: float, rng) -> np.ndarray:
    half_w = _CORRIDOR_HALF_WIDTH * range_r
    length = cfg.distance + 2.0 * range_r
    count = rng.poisson(cfg.density * length * 2.0 * half_w)
    xs = rng.uniform(-range_r, cfg.distance + range_r, size=count)
    ys = rng.uniform(-half_w, half_w, size=count)
    return np.column_stack((xs, ys))


def simulate_route(
    cfg: ScenarioConfig,
    protocol: Protocol,
    seed: int,
    link: LinkBudget | None = None,
    max_cycles_per_hop: int = 5000,
    record_events: bool = False,
) -> RouteResult:
    """Forward one packet from the origin to the destination on the x axis.

    A hop whose contention exceeds the cycle budget marks the trial as an
    outage; an NPA fallback hop charges its energy and delay but leaves
    the remaining distance unchanged.
    """
    if link is None:
        link = solve_config_link(cfg)
    range_r = effective_range(protocol, link)
    rng = _trial_rng(seed, 0)
    positions = _drop_corridor(cfg, range_r, rng)
    dest = np.array([cfg.distance, 0.0])
    log = _EnergyLog(record_events)
    engine = _HopEngine(cfg, link, protocol, range_r, positions, dest, rng, log)
    sender = np.array([0.0, 0.0])
    trace = []
    samples = []
    delay = 0.0
    hops = 0
    outage = False
    max_hops = 50 * int(math.ceil(cfg.distance / range_r)) + 200
    while True:
        sample, winner, _ = engine.run_hop(sender, delay, max_cycles_per_hop)
        if sample is None:
            outage = True
            break
        delay += sample.delay
        hops += 1
        samples.append(sample)
        trace.append(
            (
                float(sender[0]),
                float(sender[1]),
                sample.empty_cycles,
                sample.empty_slots + sample.collision_slots,
                sample.collision_cycles,
            )
        )
        if winner == -2:
            break
        if not sample.resolved_from_npa:
            sender = positions[winner]
        if hops >= max_hops:
            outage = True
            break
    trial = SimTrial(
        seed=seed,
        node_positions=positions,
        event_log=log.records if record_events else [],
        hop_trace=trace,
    )
    return RouteResult(
        energy=log.total,
        delay=delay,
        hops=hops,
        outage=outage,
        hop_samples=tuple(samples),
        trial=trial,
    )


def simulate_routes(
    cfg: ScenarioConfig,
    protocol: Protocol,
    trials: int,
    seed: int,
    max_cycles_per_hop: int = 5000,
) -> dict:
    """Route-level means with standard errors over independent trials."""
    link = solve_config_link(cfg)
    energies, delays, hops = [], [], []
    outages = 0
    for t in range(trials):
        res = simulate_route(
            cfg,
            protocol,
            seed=_route_seed(seed, t),
            link=link,
            max_cycles_per_hop=max_cycles_per_hop,
        )
        if res.outage:
            outages += 1
            continue
        energies.append(res.energy)
        delays.append(res.delay)
        hops.append(res.hops)

    def _mean_se(xs):
        if not xs:
            return math.nan, math.nan
        arr = np.asarray(xs, dtype=float)
        se = arr.std(ddof=1) / math.sqrt(len(arr)) if len(arr) > 1 else 0.0
        return float(arr.mean()), float(se)

    e_mean, e_se = _mean_se(energies)
    d_mean, d_se = _mean_se(delays)
    h_mean, h_se = _mean_se(hops)
    return {
        "energy_mean": e_mean,
        "energy_se": e_se,
        "delay_mean": d_mean,
        "delay_se": d_se,
        "hops_mean": h_mean,
        "hops_se": h_se,
        "outage_rate": outages / trials if trials else math.nan,
        "trials": trials,
        "completed": len(energies),
    }


def _route_seed(seed: int, trial: int) -> int:
    return (seed * 0x9E3779B1 + trial) & 0xFFFFFFFFFFFFFFFF


def _ratio_estimate(numers, denoms):
    """Pooled ratio with a delta-method standard error."""
    num = np.asarray(numers, dtype=float)
    den = np.asarray(denoms, dtype=float)
    total = den.sum()
    if total <= 0:
        return math.nan, math.nan
    r = num.sum() / total
    resid = num - r * den
    se = math.sqrt(float((resid**2).sum())) / total
    return float(r), float(se)


def estimate_statistics(
    cfg: ScenarioConfig,
    protocol: Protocol,
    trials: int = 1000,
    seed: int = 0,
    mode: str = "route",
    remaining_distance: float | None = None,
    max_cycles_per_hop: int = 5000,
) -> EmpiricalStatistics:
    """Empirical per-hop statistics with standard errors.

    mode "route" pools the hops of full source-to-destination trials;
    mode "single-hop" plays independent hops at a fixed remaining distance
    (defaulting to eight ranges) over a fresh node field per trial, which
    matches the analytical model's per-hop geometry exactly.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    link = solve_config_link(cfg)
    range_r = effective_range(protocol, link)
    samples = []
    route_hops = []
    outages = 0
    if mode == "single-hop":
        d = remaining_distance if remaining_distance is not None else 8.0 * range_r
        dest = np.array([d, 0.0])
        for t in range(trials):
            rng = _trial_rng(seed, t)
            count = rng.poisson(cfg.density * math.pi * range_r**2)
            radii = range_r * np.sqrt(rng.random(count))
            angles = rng.uniform(0.0, 2.0 * math.pi, size=count)
            positions = np.column_stack(
                (radii * np.cos(angles), radii * np.sin(angles))
            )
            log = _EnergyLog(False)
            engine = _HopEngine(
                cfg, link, protocol, range_r, positions, dest, rng, log
            )
            sample, _, _ = engine.run_hop(
                np.array([0.0, 0.0]), 0.0, max_cycles_per_hop
            )
            if sample is None:
                outages += 1
            else:
                samples.append(sample)
    elif mode == "route":
        for t in range(trials):
            res = simulate_route(
                cfg,
                protocol,
                seed=_route_seed(seed, t),
                link=link,
                max_cycles_per_hop=max_cycles_per_hop,
            )
            if res.outage:
                outages += 1
                continue
            route_hops.append(res.hops)
            samples.extend(res.hop_samples)
    else:
        raise ValueError("mode must be 'route' or 'single-hop'")

    def stat(values):
        arr = np.asarray(values, dtype=float)
        if arr.size == 0:
            return math.nan, math.nan
        se = arr.std(ddof=1) / math.sqrt(arr.size) if arr.size > 1 else 0.0
        return float(arr.mean()), float(se)

    empties = [s.empty_cycles for s in samples]
    nonempty = [
        s.npa_cycles + s.collision_cycles + (0 if s.resolved_from_npa else 1)
        for s in samples
    ]
    all_cycles = [e + ne for e, ne in zip(empties, nonempty)]
    ppa_rounds = [s.ppa_rounds for s in samples]
    successes = [0 if s.resolved_from_npa else 1 for s in samples]
    collisions = [s.collision_cycles for s in samples]

    eta, eta_se = _ratio_estimate(empties, nonempty)
    m_e, m_e_se = _ratio_estimate([s.empty_slots for s in samples], ppa_rounds)
    m_n, m_n_se = stat([s.collision_slots for s in samples])
    p_npa, p_npa_se = _ratio_estimate([s.npa_cycles for s in samples], all_cycles)
    p_c, p_c_se = _ratio_estimate(collisions, ppa_rounds)
    eta_c, eta_c_se = _ratio_estimate(collisions, successes)
    delay, delay_se = stat([s.delay for s in samples])
    energy, energy_se = stat([s.energy for s in samples])
    hops_mean, hops_se = stat(route_hops) if route_hops else (math.nan, math.nan)
    return EmpiricalStatistics(
        mean_empty_cycles=eta,
        se_empty_cycles=eta_se,
        mean_empty_slots=m_e,
        se_empty_slots=m_e_se,
        mean_collision_slots=m_n,
        se_collision_slots=m_n_se,
        npa_probability=p_npa,
        se_npa_probability=p_npa_se,
        collision_probability=p_c,
        se_collision_probability=p_c_se,
        mean_collision_cycles=eta_c,
        se_collision_cycles=eta_c_se,
        mean_hop_delay=delay,
        se_hop_delay=delay_se,
        mean_hop_energy=energy,
        se_hop_energy=energy_se,
        expected_hops=hops_mean,
        se_expected_hops=hops_se,
        outage_rate=outages / trials,
        trials=trials,
    )


def export_event_log(trial: SimTrial) -> str:
    """Line-delimited records: time_s,node_id,activity_label,power_w,energy_j."""
    lines = [
        f"{t:.9g},{nid},{act},{p:.9g},{e:.12g}"
        for t, nid, act, p, e in trial.event_log
    ]
    return "\n".join(lines) + ("\n" if lines else "")
