"""Deterministic per-user spectral efficiencies for the three PHY modes.

Large-array limits remove the fading randomness: single-user beamforming
gets the full array gain M, zero-forcing to S users keeps (M - S + 1)/S of
it per stream, and a B-AP pooled array behaves like one transmitter with
the summed link gains. Rates are chain-averaged over the contention states
and reported in bit/s/Hz (log base 2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .csma import CtmcModel
from .metrics import DEFAULT_MCS_TABLE, McsTable, mcs_quantize
from .propagation import GainMatrix
from .radio_plan import AssociationMap, ChannelPlan, Cluster
from .scenario import ApNode


class Technology(str, Enum):
    SU_BEAMFORMING = "su_beamforming"
    CONCENTRATED_MU_MIMO = "concentrated_mu_mimo"
    DISTRIBUTED_MU_MIMO = "distributed_mu_mimo"


class RateMode(str, Enum):
    GAUSSIAN = "gaussian"
    QUANTIZED = "quantized"


@dataclass(frozen=True)
class TechConfig:
    technology: Technology = Technology.SU_BEAMFORMING
    rate_mode: RateMode = RateMode.GAUSSIAN
    mcs_table: McsTable = DEFAULT_MCS_TABLE


def spectral_efficiency(sinr_linear, tech: TechConfig):
    """Map linear SINR to bit/s/Hz: Shannon in Gaussian mode, best decodable
    modulation/coding pair in quantized mode."""
    s = np.asarray(sinr_linear, dtype=float)
    if tech.rate_mode == RateMode.GAUSSIAN:
        eff = np.log2(1.0 + s)
    else:
        with np.errstate(divide="ignore"):
            sinr_db = np.where(s > 0, 10.0 * np.log10(np.maximum(s, 1e-300)), -np.inf)
        eff = mcs_quantize(sinr_db, tech.mcs_table)
    if np.isscalar(sinr_linear):
        return float(eff)
    return eff


def peak_rate_isolated(gains: GainMatrix, aps: tuple[ApNode, ...], ap_id: int,
                       ut_id: int, tech: TechConfig = TechConfig()) -> float:
    """Interference-free beamformed link rate: eff(g * M * P)."""
    ap = aps[ap_id]
    snr = gains.ap_to_ut[ap_id, ut_id] * ap.antennas * ap.power_linear
    return float(spectral_efficiency(snr, tech))


def peak_rate_matrix(gains: GainMatrix, aps: tuple[ApNode, ...],
                     tech: TechConfig = TechConfig()) -> np.ndarray:
    """Isolated peak rates for every (AP, user) pair, [n_aps, n_users]."""
    snr = gains.ap_to_ut * np.array(
        [ap.antennas * ap.power_linear for ap in aps])[:, None]
    return np.asarray(spectral_efficiency(snr, tech))


def snr_matrix(gains: GainMatrix, aps: tuple[ApNode, ...]) -> np.ndarray:
    """Raw beamformed SNR per (AP, user); association fallback metric."""
    return gains.ap_to_ut * np.array(
        [ap.antennas * ap.power_linear for ap in aps])[:, None]


def _channel_layout(gains: GainMatrix, assoc: AssociationMap,
                    aps: tuple[ApNode, ...], members: list[int]):
    """Gather the per-channel evaluation arrays for a member AP list."""
    users = [ut for ap in members for ut in assoc.sets.get(ap, ())]
    if not users:
        return None
    own = []
    for b, ap in enumerate(members):
        own.extend([b] * len(assoc.sets.get(ap, ())))
    own = np.array(own)
    g = gains.ap_to_ut[np.ix_(members, users)]          # [n_m, n_u]
    p = np.array([aps[a].power_linear for a in members])
    m_ant = np.array([aps[a].antennas for a in members])
    cell = np.array([len(assoc.sets.get(members[b], ())) for b in own], dtype=float)
    # An AP with no associated users has no downlink traffic: it neither
    # earns rate nor radiates interference, even if the chain marks it on.
    tx_mask = np.array([1.0 if assoc.sets.get(a, ()) else 0.0 for a in members])
    return np.array(users), own, g, p, m_ant, cell, tx_mask


def su_channel_state_rates(gains: GainMatrix, assoc: AssociationMap,
                           aps: tuple[ApNode, ...], members: list[int],
                           states: np.ndarray, tech: TechConfig,
                           n_users_total: int) -> np.ndarray:
    """Single-user beamforming rates for every state of one channel.

    rate = (active / cell size) * eff(g*M*P / (1 + sum of active co-channel
    interferers g*P)). Returns [n_states, n_users_total]; users outside the
    channel stay zero.
    """
    out = np.zeros((states.shape[0], n_users_total))
    layout = _channel_layout(gains, assoc, aps, members)
    if layout is None:
        return out
    users, own, g, p, m_ant, cell, tx_mask = layout
    recv = g * p[:, None]                              # [n_m, n_u]
    total = (states.astype(float) * tx_mask) @ recv    # [n_states, n_u]
    own_recv = recv[own, np.arange(len(users))]
    active = states[:, own].astype(float)              # [n_states, n_u]
    interference = total - active * own_recv
    signal = own_recv * m_ant[own]
    sinr = signal / (1.0 + interference)
    out[:, users] = (active / cell) * spectral_efficiency(sinr, tech)
    return out


def su_rate_state(gains: GainMatrix, plan: ChannelPlan, assoc: AssociationMap,
                  aps: tuple[ApNode, ...], state: np.ndarray,
                  tech: TechConfig = TechConfig()) -> np.ndarray:
    """Per-user rates for one full-network activation vector."""
    state = np.asarray(state)
    n_users = gains.ap_to_ut.shape[1]
    rates = np.zeros(n_users)
    for ch in sorted({c for c in plan.ap_channel.values()}):
        members = sorted(plan.aps_on(ch))
        rates += su_channel_state_rates(
            gains, assoc, aps, members, state[None, members], tech, n_users)[0]
    return rates


def mu_sinr(g_ik: float, m_antennas: int, power_linear: float, streams: int,
            interference: float) -> float:
    """Zero-forcing downlink SINR in the large-array limit."""
    if not 1 <= streams <= m_antennas:
        raise ValueError("stream count must satisfy 1 <= S <= M")
    num = (m_antennas - streams + 1) * g_ik * power_linear / streams
    return num / (1.0 + interference)


def mu_channel_state_rates(gains: GainMatrix, assoc: AssociationMap,
                           aps: tuple[ApNode, ...], members: list[int],
                           states: np.ndarray, tech: TechConfig,
                           n_users_total: int) -> tuple[np.ndarray, list[dict[int, int]]]:
    """Concentrated MU-MIMO rates per state of one channel.

    Each active AP picks the stream count maximizing its own quantity
    sum_k (S/|cell|) * eff(sinr_k(S)) over 1 <= S <= min(M, |cell|); ties go
    to the smallest S. All cell users then get rate (S*/|cell|) * eff.
    Returns the rate matrix and the chosen streams per state.
    """
    out = np.zeros((states.shape[0], n_users_total))
    streams_per_state: list[dict[int, int]] = [dict() for _ in range(states.shape[0])]
    layout = _channel_layout(gains, assoc, aps, members)
    if layout is None:
        return out, streams_per_state
    users, own, g, p, m_ant, cell, tx_mask = layout
    recv = g * p[:, None]
    total = (states.astype(float) * tx_mask) @ recv
    own_recv = recv[own, np.arange(len(users))]
    active = states[:, own].astype(float)
    interference = total - active * own_recv

    for s_idx in range(states.shape[0]):
        for b, ap in enumerate(members):
            if not states[s_idx, b]:
                continue
            sel = own == b
            n_cell = int(cell[sel][0]) if np.any(sel) else 0
            if n_cell == 0:
                continue
            denom = 1.0 + interference[s_idx, sel]
            g_cell = own_recv[sel]  # g * P for this AP's users
            best_s, best_obj, best_eff = 0, -1.0, None
            for s_count in range(1, min(int(m_ant[b]), n_cell) + 1):
                sinr = (m_ant[b] - s_count + 1) * g_cell / s_count / denom
                eff = spectral_efficiency(sinr, tech)
                obj = (s_count / n_cell) * np.sum(eff)
                if obj > best_obj:  # strict: ties keep the smallest S
                    best_s, best_obj, best_eff = s_count, obj, eff
            streams_per_state[s_idx][ap] = best_s
            out[s_idx, users[sel]] = (best_s / n_cell) * best_eff
    return out, streams_per_state


def mu_rate_state(gains: GainMatrix, plan: ChannelPlan, assoc: AssociationMap,
                  aps: tuple[ApNode, ...], state: np.ndarray,
                  tech: TechConfig = TechConfig()) -> tuple[np.ndarray, dict[int, int]]:
    """Per-user MU-MIMO rates and chosen stream counts for one state."""
    state = np.asarray(state)
    n_users = gains.ap_to_ut.shape[1]
    rates = np.zeros(n_users)
    streams: dict[int, int] = {}
    for ch in sorted({c for c in plan.ap_channel.values()}):
        members = sorted(plan.aps_on(ch))
        r, st = mu_channel_state_rates(
            gains, assoc, aps, members, state[None, members], tech, n_users)
        rates += r[0]
        streams.update(st[0])
    return rates, streams


def dist_mu_rate(cluster: Cluster, gains: GainMatrix, aps: tuple[ApNode, ...],
                 user_ids: list[int], tech: TechConfig = TechConfig(),
                 co_channel_interference: np.ndarray | None = None
                 ) -> tuple[np.ndarray, int]:
    """Pooled-array rates for one cluster's users, optimizing the group size.

    rate_k(S) = (S/K) * eff((M - (S-1)/B) * sum_i g_ik * (P_sum/S) / (1+I_k)).
    I_k is zero when clusters occupy distinct channels; in the small-cluster
    co-channel mode it is the summed received power from all other-cluster
    APs sharing the channel (all transmitting, no inter-cluster deferral).
    Returns (rates aligned with user_ids, chosen S).
    """
    k_total = len(user_ids)
    if k_total == 0:
        return np.zeros(0), 0
    members = list(cluster.ap_ids)
    b_aps = len(members)
    n_antennas = sum(aps[a].antennas for a in members)
    g_sum = gains.ap_to_ut[np.ix_(members, user_ids)].sum(axis=0)
    interf = (np.zeros(k_total) if co_channel_interference is None
              else np.asarray(co_channel_interference, dtype=float))
    best_s, best_obj, best_rates = 0, -1.0, np.zeros(k_total)
    for s_count in range(1, min(k_total, n_antennas) + 1):
        # (n_antennas - (S-1)) / B generalizes M - (S-1)/B to mixed arrays.
        factor = (n_antennas - (s_count - 1)) / b_aps
        sinr = factor * g_sum * (cluster.p_sum / s_count) / (1.0 + interf)
        rates = (s_count / k_total) * np.asarray(spectral_efficiency(sinr, tech))
        obj = float(np.sum(rates))
        if obj > best_obj:  # strict: ties keep the smallest S
            best_s, best_obj, best_rates = s_count, obj, rates
    return best_rates, best_s


def average_over_ctmc(state_rates: np.ndarray, ctmc: CtmcModel) -> np.ndarray:
    """Chain-average the per-state rates: R = sum_m pi_m * R^m."""
    state_rates = np.asarray(state_rates)
    if state_rates.shape[0] != ctmc.n_states:
        raise ValueError(
            f"state mismatch: {state_rates.shape[0]} rate rows vs "
            f"{ctmc.n_states} chain states")
    return ctmc.pi @ state_rates


@dataclass
class RateReport:
    """Per-user averages plus the population throughput distribution."""

    spectral_efficiency: np.ndarray   # bit/s/Hz, chain-averaged
    throughput_bps: np.ndarray
    serving: np.ndarray               # serving AP id (or cluster index)
    bandwidth_hz: np.ndarray
    cdf_values: np.ndarray            # sorted throughputs
    cdf_fractions: np.ndarray         # F(value), right-continuous, ends at 1
    summary: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)


def throughput_cdf(throughputs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Empirical distribution: fraction of users at or below each sample."""
    values = np.sort(np.asarray(throughputs, dtype=float))
    fractions = np.arange(1, values.size + 1) / values.size
    return values, fractions


def throughput_report(avg_rates: np.ndarray, serving: np.ndarray,
                      bandwidth_hz: np.ndarray, tech: TechConfig,
                      ofdm_factor: np.ndarray | None = None,
                      overhead_discount: float = 1.0,
                      config: dict | None = None,
                      outage_threshold: float = 0.0) -> RateReport:
    """Convert chain-averaged spectral efficiencies to throughputs.

    Quantized mode discounts the nominal bandwidth by the OFDM factor
    (pilots, nulls, guard interval); Gaussian mode uses the raw bandwidth.
    `overhead_discount` models any extra coordination goodput cost.
    """
    from .metrics import ofdm_efficiency, summarize

    avg_rates = np.asarray(avg_rates, dtype=float)
    bandwidth_hz = np.asarray(bandwidth_hz, dtype=float)
    if not 0.0 < overhead_discount <= 1.0:
        raise ValueError("overhead_discount must be in (0, 1]")
    if tech.rate_mode == RateMode.QUANTIZED:
        if ofdm_factor is None:
            ofdm_factor = np.array([
                ofdm_efficiency(round(w / 1e6)) for w in bandwidth_hz])
    else:
        ofdm_factor = np.ones_like(bandwidth_hz)
    throughput = bandwidth_hz * ofdm_factor * avg_rates * overhead_discount
    values, fractions = throughput_cdf(throughput)
    return RateReport(
        spectral_efficiency=avg_rates,
        throughput_bps=throughput,
        serving=np.asarray(serving),
        bandwidth_hz=bandwidth_hz,
        cdf_values=values,
        cdf_fractions=fractions,
        summary=summarize(throughput, outage_threshold),
        config=dict(config or {}),
    )
