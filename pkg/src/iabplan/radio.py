"""One Monte Carlo drop of the two-hop IAB downlink.

UEs attach to the strongest base station, IAB SBSs attach to the strongest
MBS, and rates follow equal bandwidth sharing with the access/backhaul split.
Fiber- and FSO-backhauled SBSs are never backhaul-limited.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .channel import ChannelParams, antenna_gain_db, dbm_to_mw, los_probability, path_loss_db
from .planning import BackhaulGraph
from .scenario import Scenario

# Serving categories.
DONOR, IAB, WIRED = 0, 1, 2


@dataclass(frozen=True)
class RadioParams:
    total_bw_hz: float = 1e9
    beta_split: float = 0.5
    p_mbs_dbm: float = 40.0
    p_sbs_dbm: float = 24.0
    eta_bps: float = 1e8

    def __post_init__(self):
        if not 0.0 <= self.beta_split <= 1.0:
            raise ValueError("beta_split must lie in [0, 1]")
        if not self.total_bw_hz > 0:
            raise ValueError("total_bw_hz must be positive")
        if not self.eta_bps > 0:
            raise ValueError("eta_bps must be positive")


@dataclass(frozen=True)
class PowerParams:
    fiber_loss_w_per_km: float = 1.0
    trx_power_w: float = 8.0
    trx_per_link: int = 2

    def __post_init__(self):
        if self.fiber_loss_w_per_km < 0 or self.trx_power_w < 0 or self.trx_per_link < 0:
            raise ValueError("power parameters must be >= 0")


def split_bandwidth(params: RadioParams) -> tuple[float, float]:
    """(backhaul, access) shares of the band; they sum to the total exactly.

    The larger share is rounded once and the smaller one is the exact remainder.
    """
    w, beta = params.total_bw_hz, params.beta_split
    if beta >= 0.5:
        w_bh = beta * w
        return w_bh, w - w_bh
    w_ac = (1.0 - beta) * w
    return w - w_ac, w_ac


@dataclass
class Association:
    """Who serves whom in one drop. Keys and values are scenario node ids."""

    serving: dict[int, int]
    donor_of: dict[int, int]
    n_d: dict[int, int] = field(default_factory=dict)
    n_cu: dict[int, int] = field(default_factory=dict)
    n_c: int = 0
    n_u: dict[int, int] = field(default_factory=dict)


def associate(
    ue_ids, bs_ids, rx_access_mw, iab_ids, mbs_ids, rx_backhaul_mw, wired_ids=()
) -> Association:
    """Max-received-power association, ties to the lowest base-station id.

    ``rx_access_mw[u, i]`` is the power UE ``ue_ids[u]`` would receive from
    ``bs_ids[i]``; ``rx_backhaul_mw[c, j]`` likewise for IAB SBS ``iab_ids[c]``
    and MBS ``mbs_ids[j]``. Both id lists must be sorted ascending.
    """
    ue_ids, bs_ids = list(ue_ids), list(bs_ids)
    if not bs_ids:
        raise ValueError("no base stations to associate with")
    rx = np.asarray(rx_access_mw, dtype=float).reshape(len(ue_ids), len(bs_ids))
    serving = {u: bs_ids[int(k)] for u, k in zip(ue_ids, np.argmax(rx, axis=1))} if ue_ids else {}
    iab_ids, mbs_ids = list(iab_ids), list(mbs_ids)
    donor_of = {}
    if iab_ids:
        if not mbs_ids:
            raise ValueError("IAB SBSs need at least one MBS")
        rb = np.asarray(rx_backhaul_mw, dtype=float).reshape(len(iab_ids), len(mbs_ids))
        donor_of = {c: mbs_ids[int(k)] for c, k in zip(iab_ids, np.argmax(rb, axis=1))}
    mbs, iab, wired = set(mbs_ids), set(iab_ids), set(wired_ids)
    a = Association(serving, donor_of)
    for b in serving.values():
        target = a.n_d if b in mbs else a.n_cu if b in iab else a.n_u if b in wired else None
        if target is None:
            raise ValueError(f"serving node {b} has no backhaul category")
        target[b] = target.get(b, 0) + 1
    a.n_c = len(a.n_cu)
    return a


def ue_interference_mw(rx_mw, serving_index):
    """Sum of received powers from every base station except the server.

    ``rx_mw`` is (n_bs,) for one UE or (n_ue, n_bs); ``serving_index`` is the
    column of the server (int or array).
    """
    rx = np.asarray(rx_mw, dtype=float)
    if rx.ndim == 1:
        if not rx.size:
            return 0.0
        mask = np.ones(rx.size, dtype=bool)
        mask[serving_index] = False
        return float(rx[mask].sum())
    # zero the server instead of subtracting it, so a dominant server cannot swamp the sum
    keep = np.ones(rx.shape, dtype=bool)
    keep[np.arange(rx.shape[0]), serving_index] = False
    return np.where(keep, rx, 0.0).sum(axis=1)


# Same arithmetic: the receiver is a child IAB node and the interferers are MBSs.
backhaul_interference_mw = ue_interference_mw


def shannon_rate(bandwidth_hz, share, sinr):
    """(bandwidth / share) * log2(1 + sinr); a zero bandwidth gives exactly 0."""
    bw = np.asarray(bandwidth_hz, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(bw > 0, bw / np.asarray(share, dtype=float) * np.log2(1.0 + np.asarray(sinr, dtype=float)), 0.0)
    return r


def ue_rates(category, sinr_u, sinr_c, share_u, n_c, params: RadioParams):
    """Per-UE downlink rates.

    category: DONOR, IAB or WIRED per UE; share_u: UE count of the serving
    node (N_d, N_cu or N_u); sinr_c: backhaul SINR of the serving SBS (ignored
    unless IAB); n_c: number of child IAB nodes sharing the backhaul band,
    counted over children that serve at least one UE.
    """
    w_bh, w_ac = split_bandwidth(params)
    category = np.asarray(category)
    access = np.where(category == WIRED, shannon_rate(params.total_bw_hz, share_u, sinr_u), shannon_rate(w_ac, share_u, sinr_u))
    if n_c > 0:
        backhaul = shannon_rate(w_bh, n_c, sinr_c)
        return np.where(category == IAB, np.minimum(access, backhaul), access)
    return access


def ue_rate_bps(category: int, sinr_u: float, share_u: int, params: RadioParams, sinr_c: float = 0.0, n_c: int = 0) -> float:
    """Scalar form of ``ue_rates``."""
    return float(ue_rates(np.array([category]), sinr_u, sinr_c, share_u, n_c, params)[0])


def service_coverage(rates, eta: float) -> float:
    r = np.asarray(rates, dtype=float)
    if r.size == 0:
        raise ValueError("service coverage needs at least one UE")
    return float(np.count_nonzero(r >= eta)) / r.size


def total_power_w(graph: BackhaulGraph, radio: RadioParams, power: PowerParams) -> float:
    """Transmit power of every BS, plus transceivers on each fiber/FSO SBS and fiber loss along fiber paths."""
    p = len(graph.mbs) * float(dbm_to_mw(radio.p_mbs_dbm)) / 1000.0
    p += len(graph.sbs) * float(dbm_to_mw(radio.p_sbs_dbm)) / 1000.0
    fixed = power.trx_per_link * power.trx_power_w
    p += sum(fixed + power.fiber_loss_w_per_km * length / 1000.0 for _, length in graph.fiber.values())
    p += fixed * len(graph.fso)
    return p


def energy_efficiency(sum_rate: float, p_total: float) -> float:
    if not p_total > 0:
        raise ValueError("total power must be positive")
    return sum_rate / p_total


@dataclass(frozen=True)
class DropResult:
    rates: np.ndarray
    coverage: float
    sum_rate: float
    ee: float


class Geometry:
    """Distance, path-loss and bearing tables for one scenario (shared by all drops)."""

    def __init__(self, scenario: Scenario, channel: ChannelParams):
        self.channel = channel
        self.mbs = np.asarray(scenario.mbs, dtype=np.int64)
        self.sbs = np.asarray(scenario.sbs, dtype=np.int64)
        self.bs = np.concatenate([self.mbs, self.sbs])
        self.ue = np.asarray(scenario.ue, dtype=np.int64)
        xy = scenario.xy
        self.n_mbs = len(self.mbs)

        dx = xy[self.ue][:, None, 0] - xy[self.bs][None, :, 0]
        dy = xy[self.ue][:, None, 1] - xy[self.bs][None, :, 1]
        d = np.hypot(dx, dy)
        self.p_los_ue = los_probability(d) if d.size else d
        d = np.maximum(d, channel.ref_distance)
        self.gain_los_ue = 10.0 ** (-path_loss_db(d, True, channel) / 10.0) if d.size else d
        self.gain_nlos_ue = 10.0 ** (-path_loss_db(d, False, channel) / 10.0) if d.size else d
        # bearing from BS to UE; the reverse bearing is +180 degrees
        self.az_bs_ue = np.degrees(np.arctan2(dy, dx))

        dx = xy[self.sbs][:, None, 0] - xy[self.mbs][None, :, 0]
        dy = xy[self.sbs][:, None, 1] - xy[self.mbs][None, :, 1]
        d = np.hypot(dx, dy)
        self.p_los_bh = los_probability(d) if d.size else d
        d = np.maximum(d, channel.ref_distance)
        self.gain_los_bh = 10.0 ** (-path_loss_db(d, True, channel) / 10.0) if d.size else d
        self.gain_nlos_bh = 10.0 ** (-path_loss_db(d, False, channel) / 10.0) if d.size else d
        self.az_mbs_sbs = np.degrees(np.arctan2(dy, dx))


@dataclass(frozen=True)
class ChannelRealization:
    """Power-independent channel state of one drop: path gain (fading / path loss) and beam bearings."""

    access: np.ndarray  # (n_ue, n_bs) h / L
    backhaul: np.ndarray  # (n_sbs, n_mbs) h / L
    beams: np.ndarray  # (n_bs,) degrees
    los_access: np.ndarray
    los_backhaul: np.ndarray


def draw_channel(geo: Geometry, seed: int, drop: int) -> ChannelRealization:
    """Independent blockage, Rayleigh fading and interferer beam directions for drop ``drop``.

    UE rows are generated in id order from dedicated substreams, so the draws
    for the first k UEs do not depend on how many UEs follow them.
    """
    key = _rng.DROP ^ drop
    n_ue, n_bs = geo.p_los_ue.shape
    g = _rng.substream(seed, key, 0, _rng.ACCESS_LOS)
    los = g.random((n_ue, n_bs)) < geo.p_los_ue
    g = _rng.substream(seed, key, 0, _rng.ACCESS_FADING)
    fade = g.exponential(1.0, (n_ue, n_bs))
    access = np.where(los, geo.gain_los_ue, geo.gain_nlos_ue) * fade

    g = _rng.substream(seed, key, 0, _rng.BACKHAUL_LINKS)
    los_bh = g.random(geo.p_los_bh.shape) < geo.p_los_bh
    fade_bh = g.exponential(1.0, geo.p_los_bh.shape)
    backhaul = np.where(los_bh, geo.gain_los_bh, geo.gain_nlos_bh) * fade_bh

    g = _rng.substream(seed, key, 0, _rng.BEAMS)
    beams = g.uniform(-180.0, 180.0, n_bs)
    return ChannelRealization(access, backhaul, beams, los, los_bh)


class DropState:
    """Association, signal and interference of one drop at given transmit powers.

    Independent of which SBSs are fibered, so one state serves every plan.
    """

    def __init__(self, geo: Geometry, real: ChannelRealization, radio: RadioParams):
        ch = geo.channel
        self.geo = geo
        p_tx = np.concatenate(
            [np.full(geo.n_mbs, float(dbm_to_mw(radio.p_mbs_dbm))), np.full(len(geo.sbs), float(dbm_to_mw(radio.p_sbs_dbm)))]
        )
        g_main = 10.0 ** (ch.g_main / 10.0)
        n_ue = len(geo.ue)

        # access: serving link boresight-aligned at both ends
        rx_aligned = real.access * p_tx * g_main * g_main
        self.server = np.argmax(rx_aligned, axis=1) if n_ue else np.zeros(0, dtype=np.int64)
        rows = np.arange(n_ue)
        self.signal = rx_aligned[rows, self.server]
        g_tx = 10.0 ** (antenna_gain_db(_wrap(geo.az_bs_ue - real.beams[None, :]), ch) / 10.0)
        az_ue_bs = geo.az_bs_ue + 180.0
        rx_point = az_ue_bs[rows, self.server]
        g_rx = 10.0 ** (antenna_gain_db(_wrap(az_ue_bs - rx_point[:, None]), ch) / 10.0)
        rx_int = real.access * p_tx * g_tx * g_rx
        self.interference = ue_interference_mw(rx_int, self.server) if n_ue else np.zeros(0)

        # backhaul from MBSs to every SBS (only IAB children use it)
        p_m = float(dbm_to_mw(radio.p_mbs_dbm))
        rb = real.backhaul * p_m * g_main * g_main
        n_s = len(geo.sbs)
        self.donor = np.argmax(rb, axis=1) if n_s and geo.n_mbs else np.zeros(n_s, dtype=np.int64)
        srows = np.arange(n_s)
        if n_s and geo.n_mbs:
            self.signal_bh = rb[srows, self.donor]
            g_tx = 10.0 ** (antenna_gain_db(_wrap(geo.az_mbs_sbs - real.beams[None, : geo.n_mbs]), ch) / 10.0)
            az_s_m = geo.az_mbs_sbs + 180.0
            g_rx = 10.0 ** (antenna_gain_db(_wrap(az_s_m - az_s_m[srows, self.donor][:, None]), ch) / 10.0)
            self.interference_bh = backhaul_interference_mw(real.backhaul * p_m * g_tx * g_rx, self.donor)
        else:
            self.signal_bh = np.zeros(n_s)
            self.interference_bh = np.zeros(n_s)

    def evaluate(self, graph: BackhaulGraph, radio: RadioParams, p_total_w: float) -> DropResult:
        geo, ch = self.geo, self.geo.channel
        w_bh, w_ac = split_bandwidth(radio)
        n_bs = len(geo.bs)
        # per-BS category: MBS donor, IAB child, or wired (fiber/FSO) SBS
        cat_bs = np.full(n_bs, IAB)
        cat_bs[: geo.n_mbs] = DONOR
        wired = graph.fiber.keys() | graph.fso.keys()
        sbs_wired = np.array([int(s) in wired for s in geo.sbs], dtype=bool)
        cat_bs[geo.n_mbs :][sbs_wired] = WIRED
        load = np.bincount(self.server, minlength=n_bs)

        cat = cat_bs[self.server]
        bw = np.where(cat == WIRED, radio.total_bw_hz, w_ac)
        sinr_u = self.signal / (self.interference + ch.noise_mw(bw))
        # children sharing the backhaul band: IAB SBSs that carry at least one UE
        n_c = int(np.count_nonzero(~sbs_wired & (load[geo.n_mbs :] > 0)))
        sinr_bh = self.signal_bh / (self.interference_bh + ch.noise_mw(w_bh))
        sinr_c = np.zeros(len(self.server))
        is_sbs = self.server >= geo.n_mbs
        sinr_c[is_sbs] = sinr_bh[self.server[is_sbs] - geo.n_mbs]
        rates = ue_rates(cat, sinr_u, sinr_c, load[self.server], n_c, radio)
        total = float(rates.sum())
        return DropResult(rates, service_coverage(rates, radio.eta_bps), total, energy_efficiency(total, p_total_w))


def _wrap(theta):
    return 180.0 - np.mod(180.0 - theta, 360.0)


def simulate_drop(
    scenario: Scenario,
    graph: BackhaulGraph,
    channel: ChannelParams,
    radio: RadioParams,
    power: PowerParams,
    drop: int = 0,
    geo: Geometry | None = None,
) -> DropResult:
    """Draw and evaluate one drop; a pure function of its arguments."""
    geo = geo or Geometry(scenario, channel)
    state = DropState(geo, draw_channel(geo, scenario.seed, drop), radio)
    return state.evaluate(graph, radio, total_power_w(graph, radio, power))
