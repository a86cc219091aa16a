"""mmWave link model: UMa LoS probability, close-in path loss, sector antennas, Rayleigh fading."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class LinkState(enum.Enum):
    LOS = "los"
    NLOS = "nlos"


@dataclass(frozen=True)
class ChannelParams:
    carrier_freq: float = 28.0  # GHz
    ref_distance: float = 1.0  # m
    ple_los: float = 2.0
    ple_nlos: float = 3.0
    g_main: float = 24.0  # dB
    g_side: float = -2.0  # dB
    theta_hp: float = 30.0  # degrees
    noise_psd: float = -174.0  # dBm/Hz
    noise_figure: float = 7.0  # dB

    def __post_init__(self):
        if not (self.ple_nlos >= self.ple_los > 0):
            raise ValueError("path-loss exponents must satisfy ple_nlos >= ple_los > 0")
        if not self.g_main > self.g_side:
            raise ValueError("g_main must exceed g_side")
        if not 0 < self.theta_hp < 360:
            raise ValueError("theta_hp must lie in (0, 360)")
        if not (self.carrier_freq > 0 and self.ref_distance > 0):
            raise ValueError("carrier_freq and ref_distance must be positive")

    @property
    def fspl_ref_db(self) -> float:
        """Free-space loss at the reference distance (32.4 dB constant of the CI model)."""
        return 32.4 + 20.0 * math.log10(self.carrier_freq) + 20.0 * math.log10(self.ref_distance)

    def noise_mw(self, bandwidth_hz):
        """Thermal noise plus noise figure over ``bandwidth_hz``, in mW."""
        return 10.0 ** ((self.noise_psd + self.noise_figure) / 10.0) * np.asarray(bandwidth_hz, dtype=float)


@dataclass(frozen=True)
class LinkDraw:
    state: LinkState
    fading: float
    gain_db: float
    pathloss_db: float

    def __post_init__(self):
        if not self.fading >= 0:
            raise ValueError("fading power gain must be >= 0")


def los_probability(d2d):
    """3GPP TR 38.901 UMa LoS probability (UE height <= 13 m). Accepts scalars or arrays."""
    d = np.asarray(d2d, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be >= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        far = 18.0 / d + np.exp(-d / 63.0) * (1.0 - 18.0 / d)
    p = np.where(d <= 18.0, 1.0, far)
    return float(p) if p.ndim == 0 else p


def sample_link_state(p_los: float, rng: np.random.Generator) -> LinkState:
    if not 0.0 <= p_los <= 1.0:
        raise ValueError("p_los must be a probability")
    return LinkState.LOS if rng.random() < p_los else LinkState.NLOS


def path_loss_db(d3d, state, params: ChannelParams):
    """Close-in model: FSPL(ref, f) + 10 n log10(d / ref).

    ``state`` is a LinkState, or a boolean array (True = LoS) for vectorized use.
    Distances below the reference distance are rejected, never clamped here.
    """
    d = np.asarray(d3d, dtype=float)
    if np.any(d < params.ref_distance):
        raise ValueError(f"distance below reference distance {params.ref_distance} m")
    if isinstance(state, LinkState):
        n = params.ple_los if state is LinkState.LOS else params.ple_nlos
    else:
        n = np.where(np.asarray(state, dtype=bool), params.ple_los, params.ple_nlos)
    pl = params.fspl_ref_db + 10.0 * n * np.log10(d / params.ref_distance)
    return float(pl) if np.ndim(pl) == 0 else pl


def wrap_degrees(theta):
    """Map angles onto (-180, 180]."""
    t = np.asarray(theta, dtype=float)
    w = 180.0 - np.mod(180.0 - t, 360.0)
    return float(w) if w.ndim == 0 else w


def antenna_gain_db(theta, params: ChannelParams):
    """Sector pattern: main-lobe gain inside +-theta_hp/2 (inclusive), side-lobe gain elsewhere."""
    t = np.abs(np.asarray(theta, dtype=float))
    g = np.where(t <= params.theta_hp / 2.0, params.g_main, params.g_side)
    return float(g) if g.ndim == 0 else g


def sample_fading(rng: np.random.Generator, size=None):
    """Power gain |h|^2 of a unit-power Rayleigh channel: Exp(1)."""
    return rng.exponential(1.0, size=size)


def received_power_mw(p_tx_dbm: float, draw: LinkDraw) -> float:
    return 10.0 ** ((p_tx_dbm + draw.gain_db - draw.pathloss_db) / 10.0) * draw.fading


def dbm_to_mw(dbm):
    return 10.0 ** (np.asarray(dbm, dtype=float) / 10.0)
