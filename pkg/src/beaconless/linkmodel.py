"""Packet-length-aware link budget under convolutionally coded block fading.

The channel is flat (or RAKE-collapsed to a scalar) and evolves in coherence
blocks: the SINR is constant within a block and i.i.d. exponential across
blocks. A packet therefore sees one or more independent SINR draws depending
on its duration relative to the coherence time. Packet error rate is an
upper bound obtained from the hard-decision union bound of the de-facto
(133,171) constraint-length-7 convolutional code, averaged block-by-block
over the exponential SINR.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

__all__ = [
    "Modulation",
    "McsProfile",
    "FadingChannelModel",
    "LinkBudget",
    "LinkInfeasibleError",
    "MCS_TABLE",
    "RESCUE_MCS_ORDER",
    "conditional_bit_error",
    "rayleigh_bit_error",
    "union_bound_event_probability",
    "per_coded_packet",
    "solve_threshold",
    "communication_range",
    "mrc_transmission_count",
    "power_control_for_control_packet",
    "solve_link_budget",
]


class LinkInfeasibleError(RuntimeError):
    """Raised when no SINR in the search bracket meets the PER target."""


class Modulation(enum.Enum):
    QPSK = "qpsk"
    QAM16 = "16qam"
    QAM64 = "64qam"


# Gray-mapped bit error probability conditioned on the symbol SINR g,
# expressed as sum_i c_i * Q(k_i * sqrt(g)).  QPSK is exact; the square-QAM
# expressions are the standard closed forms (exact at g=0 and matching the
# (4/log2 M)(1-1/sqrt(M)) Q(sqrt(3g/(M-1))) leading term).
_BER_TERMS = {
    Modulation.QPSK: ((1.0, 1.0),),
    Modulation.QAM16: (
        (0.75, math.sqrt(1.0 / 5.0)),
        (0.5, 3.0 * math.sqrt(1.0 / 5.0)),
        (-0.25, 5.0 * math.sqrt(1.0 / 5.0)),
    ),
    Modulation.QAM64: (
        (7.0 / 12.0, math.sqrt(1.0 / 21.0)),
        (0.5, 3.0 * math.sqrt(1.0 / 21.0)),
        (-1.0 / 12.0, 5.0 * math.sqrt(1.0 / 21.0)),
        (1.0 / 12.0, 9.0 * math.sqrt(1.0 / 21.0)),
        (-1.0 / 12.0, 13.0 * math.sqrt(1.0 / 21.0)),
    ),
}

_BITS_PER_SYMBOL = {Modulation.QPSK: 2, Modulation.QAM16: 4, Modulation.QAM64: 6}

# Distance spectra of the (133,171) code: number of error events a_d at
# Hamming distance d, first ten nonzero terms.  The rate-3/4 entry is the
# standard puncturing of the same mother code.
_SPECTRA = {
    0.5: (10, 2, (11, 38, 193, 1331, 7275, 40406, 234969, 1337714, 7594819, 43375588)),
    0.75: (5, 1, (8, 31, 160, 892, 4512, 23307, 121077, 625059, 3234886, 16753077)),
}

# Fixed log grid on which conditional block-failure curves are tabulated.
# The union-bound waterfall for every supported MCS lives well inside
# [1e-4, 1e4]; outside it the curve is exactly 1 (capped) or negligibly 0.
_GAMMA_GRID = np.logspace(-4.0, 4.0, 2401)

# Cache of conditional block failure curves keyed by (bits, modulation, rate).
_CURVE_CACHE: dict = {}


@dataclass(frozen=True)
class McsProfile:
    """One modulation-and-coding scheme."""

    modulation: Modulation
    code_rate: float  # 1/2 or 3/4

    def __post_init__(self):
        if self.code_rate not in _SPECTRA:
            raise ValueError(f"unsupported code rate {self.code_rate}")

    @property
    def coded_bits_per_symbol(self) -> int:
        return _BITS_PER_SYMBOL[self.modulation]

    @property
    def bits_per_symbol(self) -> float:
        """Information bits carried per channel symbol."""
        return _BITS_PER_SYMBOL[self.modulation] * self.code_rate

    @property
    def label(self) -> str:
        num, den = (1, 2) if self.code_rate == 0.5 else (3, 4)
        return f"{self.modulation.value}-{num}/{den}"


MCS_TABLE = {
    "qpsk-1/2": McsProfile(Modulation.QPSK, 0.5),
    "qpsk-3/4": McsProfile(Modulation.QPSK, 0.75),
    "16qam-1/2": McsProfile(Modulation.QAM16, 0.5),
    "16qam-3/4": McsProfile(Modulation.QAM16, 0.75),
    "64qam-1/2": McsProfile(Modulation.QAM64, 0.5),
}

# Order used when sweeping MCS rank (lowest to highest rate).
RESCUE_MCS_ORDER = ("qpsk-1/2", "qpsk-3/4", "16qam-1/2", "16qam-3/4", "64qam-1/2")


@dataclass(frozen=True)
class FadingChannelModel:
    """Tap-delay-line channel collapsed to a scalar SINR per coherence block.

    multipath_taps and tap_gains describe the delay profile (a RAKE-style
    receiver is assumed to combine taps, so they only affect the mean SINR
    through the link budget); coherence_time over symbol_duration fixes how
    many symbols share one fading draw.
    """

    multipath_taps: int = 1
    tap_gains: tuple = (1.0,)
    coherence_time: float = 1.0e-3
    symbol_duration: float = 4.0e-6

    def __post_init__(self):
        if self.multipath_taps < 1:
            raise ValueError("need at least one multipath tap")
        if len(self.tap_gains) != self.multipath_taps:
            raise ValueError("tap_gains length must match multipath_taps")
        if any(g <= 0 for g in self.tap_gains):
            raise ValueError("tap gains must be positive")
        if self.coherence_time <= 0 or self.symbol_duration <= 0:
            raise ValueError("durations must be positive")

    @property
    def symbols_per_block(self) -> int:
        """Coherence time in symbols, rounded down, at least one."""
        return max(1, int(self.coherence_time / self.symbol_duration))


@dataclass(frozen=True)
class LinkBudget:
    """Derived PHY quantities for one scenario."""

    control_threshold: float  # linear mean-SINR threshold, control packet
    data_threshold: float  # linear mean-SINR threshold, data packet
    data_range: float  # meters
    control_range: float  # meters
    combining_transmissions: int  # data repeats needed to close the gap

    def __post_init__(self):
        if self.control_threshold <= 0 or self.data_threshold <= 0:
            raise ValueError("thresholds must be positive")
        if self.data_range <= 0 or self.control_range <= 0:
            raise ValueError("ranges must be positive")


def conditional_bit_error(modulation: Modulation, sinr):
    """Gray-mapped hard-decision BER at a fixed symbol SINR."""
    sinr = np.asarray(sinr, dtype=float)
    root = np.sqrt(sinr)
    out = np.zeros_like(sinr)
    # Q(x) = erfc(x / sqrt(2)) / 2
    for coeff, scale in _BER_TERMS[modulation]:
        out += coeff * 0.5 * erfc(scale * root / math.sqrt(2.0))
    return out if out.ndim else float(out)


def rayleigh_bit_error(modulation: Modulation, mean_sinr: float) -> float:
    """BER averaged over an exponential SINR with the given mean.

    Uses the closed form E[Q(k*sqrt(g))] = (1 - sqrt(k^2 m /(2 + k^2 m)))/2.
    """
    if mean_sinr <= 0:
        raise ValueError("mean SINR must be positive")
    total = 0.0
    for coeff, scale in _BER_TERMS[modulation]:
        a = scale * scale * mean_sinr
        total += coeff * 0.5 * (1.0 - math.sqrt(a / (2.0 + a)))
    return total


def _binom_tail(d: int, start: int, p):
    """sum_{k=start..d} C(d,k) p^k (1-p)^(d-k), elementwise in p."""
    k = np.arange(start, d + 1, dtype=float)
    coeffs = np.array([math.comb(d, int(j)) for j in k])
    p = np.atleast_1d(p)
    with np.errstate(divide="ignore"):
        logs = k[None, :] * np.log(np.where(p > 0, p, 1.0))[:, None] + (
            d - k[None, :]
        ) * np.log1p(-p)[:, None]
    terms = coeffs[None, :] * np.exp(logs)
    out = terms.sum(axis=1)
    out[p <= 0] = 0.0
    return out


def union_bound_event_probability(bit_error, code_rate: float):
    """Union bound on the first-event error probability per information bit.

    Hard-decision pairwise error probabilities over a BSC with the given
    crossover, summed over the first ten spectrum terms.
    """
    dfree, step, spectrum = _SPECTRA[code_rate]
    p = np.asarray(bit_error, dtype=float)
    scalar = p.ndim == 0
    p = np.atleast_1d(p)
    total = np.zeros_like(p)
    for i, count in enumerate(spectrum):
        d = dfree + step * i
        if d % 2 == 1:
            pd = _binom_tail(d, (d + 1) // 2, p)
        else:
            half = d // 2
            pd = _binom_tail(d, half + 1, p)
            center = math.comb(d, half) * np.exp(
                half
                * (
                    np.log(np.where(p > 0, p, 1.0))
                    + np.log1p(-np.minimum(p, 1.0 - 1e-300))
                )
            )
            center[p <= 0] = 0.0
            pd = pd + 0.5 * center
        total += count * pd
    return total[0] if scalar else total


def _conditional_failure_curve(block_bits: float, mcs: McsProfile):
    """1 - (1 - capped event probability)^bits on the fixed SINR grid."""
    key = (float(block_bits), mcs.modulation, mcs.code_rate)
    curve = _CURVE_CACHE.get(key)
    if curve is None:
        p = conditional_bit_error(mcs.modulation, _GAMMA_GRID)
        pu = np.minimum(union_bound_event_probability(p, mcs.code_rate), 1.0 - 1e-16)
        curve = -np.expm1(block_bits * np.log1p(-pu))
        _CURVE_CACHE[key] = curve
    return curve


def _block_failure(mean_sinr: float, block_bits: float, mcs: McsProfile) -> float:
    """E over an Exp(mean_sinr) block SINR of the conditional failure.

    Below the tabulated grid the conditional failure is exactly 1 (the
    event-probability cap), so that slice of the exponential mass is added
    in closed form; the rest is a trapezoid over the dense log grid.
    """
    curve = _conditional_failure_curve(block_bits, mcs)
    head = -math.expm1(-_GAMMA_GRID[0] / mean_sinr)
    weight = np.exp(-_GAMMA_GRID / mean_sinr)
    body = np.trapz(curve * weight, _GAMMA_GRID) / mean_sinr
    return float(min(1.0, head + body))


def per_coded_packet(
    length_bits: int,
    mean_sinr: float,
    channel: FadingChannelModel,
    mcs: McsProfile,
    packet_duration: float | None = None,
) -> float:
    """Average PER of a convolutionally coded packet over block fading.

    The packet is split into coherence blocks; each block sees an
    independent exponential SINR with the given mean. Conditioned on the
    block SINRs the packet survives iff no error event starts at any of its
    trellis steps, upper-bounded per step by the union bound. The block
    average is taken with 64-point Gauss-Laguerre quadrature.

    Monotone non-decreasing in length_bits and non-increasing in mean_sinr.
    """
    if length_bits < 1:
        raise ValueError("packet length must be at least one bit")
    if mean_sinr <= 0:
        raise ValueError("mean SINR must be positive")
    bits_per_symbol = mcs.bits_per_symbol
    if packet_duration is not None:
        if packet_duration <= 0:
            raise ValueError("packet duration must be positive")
        n_symbols = max(1, int(round(packet_duration / channel.symbol_duration)))
    else:
        n_symbols = max(1, math.ceil(length_bits / bits_per_symbol))
    spb = channel.symbols_per_block
    n_blocks = max(1, math.ceil(n_symbols / spb))
    full_bits = spb * bits_per_symbol
    if n_blocks == 1:
        surv = 1.0 - _block_failure(mean_sinr, float(length_bits), mcs)
    else:
        last_bits = max(1.0, length_bits - full_bits * (n_blocks - 1))
        surv_full = 1.0 - _block_failure(mean_sinr, full_bits, mcs)
        surv_last = 1.0 - _block_failure(mean_sinr, last_bits, mcs)
        surv = surv_full ** (n_blocks - 1) * surv_last
    return float(min(1.0, max(0.0, 1.0 - surv)))


# Search bracket for the threshold solver, in dB.
_BRACKET_DB = (-10.0, 60.0)


def solve_threshold(
    length_bits: int,
    per_target: float,
    channel: FadingChannelModel,
    mcs: McsProfile,
    packet_duration: float | None = None,
    rel_tol: float = 1.0e-4,
) -> float:
    """Smallest mean SINR whose PER meets the target, by bisection.

    Raises LinkInfeasibleError if the target is unreachable below +60 dB.
    """
    if not 0.0 < per_target < 1.0:
        raise ValueError("PER target must lie strictly between 0 and 1")
    lo = 10.0 ** (_BRACKET_DB[0] / 10.0)
    hi = 10.0 ** (_BRACKET_DB[1] / 10.0)

    def per(g):
        return per_coded_packet(length_bits, g, channel, mcs, packet_duration)

    if per(hi) > per_target:
        raise LinkInfeasibleError(
            f"PER target {per_target} unreachable for {length_bits} bits "
            f"within {_BRACKET_DB[1]:.0f} dB"
        )
    if per(lo) <= per_target:
        return lo
    while hi / lo > 1.0 + rel_tol:
        mid = math.sqrt(lo * hi)
        if per(mid) <= per_target:
            hi = mid
        else:
            lo = mid
    return hi


def communication_range(
    transmit_power: float,
    threshold: float,
    noise_power: float,
    wavelength: float,
    pathloss_alpha: float,
) -> float:
    """Range at which the mean SINR equals the detection threshold.

    R = sqrt((wavelength / 4 pi) * (2 P_t / (threshold P_n))^(1/alpha)).
    """
    if min(transmit_power, threshold, noise_power, wavelength) <= 0:
        raise ValueError("all link parameters must be positive")
    if pathloss_alpha < 2:
        raise ValueError("path loss exponent below free space")
    ratio = 2.0 * transmit_power / (threshold * noise_power)
    return math.sqrt(wavelength / (4.0 * math.pi) * ratio ** (1.0 / pathloss_alpha))


def mrc_transmission_count(data_threshold: float, control_threshold: float) -> int:
    """Data transmissions needed so combining closes the threshold gap."""
    if data_threshold <= 0 or control_threshold <= 0:
        raise ValueError("thresholds must be positive")
    return max(1, math.ceil(data_threshold / control_threshold - 1e-12))


def power_control_for_control_packet(
    data_power: float, control_threshold: float, data_threshold: float
) -> float:
    """Reduced control-packet power that equalizes control and data ranges."""
    if control_threshold <= 0 or data_threshold <= 0:
        raise ValueError("thresholds must be positive")
    return data_power * control_threshold / data_threshold


def solve_link_budget(
    control_bits: int,
    data_bits: int,
    per_target: float,
    channel: FadingChannelModel,
    data_mcs: McsProfile,
    control_mcs: McsProfile,
    max_power: float,
    noise_power: float,
    wavelength: float,
    pathloss_alpha: float,
    control_duration: float | None = None,
    data_duration: float | None = None,
) -> LinkBudget:
    """Thresholds, ranges, and the combining count for one configuration.

    Control frames use the (robust) control MCS; the data packet uses the
    scenario MCS. Both thresholds target the same PER.
    """
    g_control = solve_threshold(
        control_bits, per_target, channel, control_mcs, control_duration
    )
    g_data = solve_threshold(data_bits, per_target, channel, data_mcs, data_duration)
    data_range = communication_range(
        max_power, g_data, noise_power, wavelength, pathloss_alpha
    )
    control_range = communication_range(
        max_power, g_control, noise_power, wavelength, pathloss_alpha
    )
    return LinkBudget(
        control_threshold=g_control,
        data_threshold=g_data,
        data_range=data_range,
        control_range=control_range,
        combining_transmissions=mrc_transmission_count(g_data, g_control),
    )
