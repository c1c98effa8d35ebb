"""Air-to-ground radio channel.

A link between a ground user and a drone is a probabilistic mixture of a
LoS and an NLoS propagation state. The LoS probability follows the
elevation-angle sigmoid commonly used for urban air-to-ground channels;
each state has its own log-distance path loss anchored at 1 m. Spectral
efficiency is the LoS-probability-weighted average of the per-state
Shannon efficiencies, with interference summed from every other radiating
drone within the interference range kappa.

All powers are in watts, all bandwidths in Hz, path losses in dB.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

_DEG_PER_RAD = 180.0 / math.pi
_LOG2 = math.log(2.0)


class ChannelError(ValueError):
    """Raised for invalid channel parameters or preconditions."""


@dataclass(frozen=True)
class ChannelParams:
    """Radio constants shared by every link in a run.

    `a_los_db`/`a_nlos_db` are the path losses at the 1 m reference
    distance for each state; `gamma_*` the matching path-loss exponents.
    `alpha`/`beta` shape the elevation-angle LoS probability for an urban
    environment. The carrier frequency is informational only: its effect
    is already folded into the reference losses.
    """

    alpha: float = 9.61
    beta: float = 0.16
    a_los_db: float = 41.1
    a_nlos_db: float = 33.0
    gamma_los: float = 2.09
    gamma_nlos: float = 3.75
    p_tx_w: float = 10 ** (24.0 / 10.0) * 1e-3  # 24 dBm
    bandwidth_hz: float = 5e6
    noise_figure_db: float = 9.0
    kappa_m: float = 200.0
    carrier_hz: float = 2e9

    def __post_init__(self) -> None:
        if self.alpha <= 0 or self.beta <= 0:
            raise ChannelError("alpha and beta must be positive")
        if not (self.gamma_nlos >= self.gamma_los > 0):
            raise ChannelError("need gamma_nlos >= gamma_los > 0")
        if self.kappa_m <= 0:
            raise ChannelError("kappa_m must be positive")
        if self.p_tx_w <= 0 or self.bandwidth_hz <= 0:
            raise ChannelError("p_tx_w and bandwidth_hz must be positive")

    @cached_property
    def k_los(self) -> float:
        """Full-band received power at 1 m in the LoS state."""
        return self.p_tx_w * 10.0 ** (-self.a_los_db / 10.0)

    @cached_property
    def k_nlos(self) -> float:
        return self.p_tx_w * 10.0 ** (-self.a_nlos_db / 10.0)

    @cached_property
    def noise_density_w(self) -> float:
        """Thermal noise plus UE noise figure, watts per Hz."""
        return 10.0 ** ((-174.0 + self.noise_figure_db) / 10.0) * 1e-3

    @cached_property
    def noise_fullband_w(self) -> float:
        return self.noise_density_w * self.bandwidth_hz

    @cached_property
    def kappa_sq(self) -> float:
        return self.kappa_m * self.kappa_m


class LinkGains(NamedTuple):
    """Full-band link state: LoS weight and per-state received powers."""

    p_los: float
    x_los: float
    x_nlos: float
    x_mean: float


def los_probability(h: float, r: float, alpha: float, beta: float) -> float:
    """LoS probability of a drone-user link from the elevation angle.

    The elevation angle is arctan(h / r) in degrees; a user directly under
    the drone (r = 0) sees 90 degrees.
    """
    if h <= 0:
        raise ChannelError("altitude must be positive")
    if r < 0:
        raise ChannelError("ground distance must be non-negative")
    omega_deg = math.atan2(h, r) * _DEG_PER_RAD
    return 1.0 / (1.0 + alpha * math.exp(-beta * (omega_deg - alpha)))


def nlos_probability(p_los: float) -> float:
    """Complement of the LoS probability."""
    if not 0.0 <= p_los <= 1.0:
        raise ChannelError("p_los must be a probability")
    return 1.0 - p_los


def path_loss_db(d: float, a_ref_db: float, exponent: float) -> float:
    """Log-distance path loss anchored at the 1 m reference.

    Distances below the reference clamp to 1 m, where the loss equals
    `a_ref_db` by definition.
    """
    if d < 1.0:
        d = 1.0
    return a_ref_db + 10.0 * exponent * math.log10(d)


def received_power(b_u: float, bandwidth: float, p_tx_w: float, eta_db: float) -> float:
    """Received power over an allocated sub-band of b_u Hz."""
    if not 0.0 <= b_u <= bandwidth:
        raise ChannelError("allocated bandwidth must lie in [0, B]")
    return (b_u / bandwidth) * p_tx_w * 10.0 ** (-eta_db / 10.0)


def noise_power(b_u: float, noise_figure_db: float) -> float:
    """Thermal-plus-receiver noise power over b_u Hz."""
    if b_u < 0:
        raise ChannelError("bandwidth must be non-negative")
    return 10.0 ** ((-174.0 + noise_figure_db) / 10.0) * b_u * 1e-3


def link_gains(r: float, h: float, cp: ChannelParams) -> LinkGains:
    """Full-band received powers (both states) for a ground distance r.

    This is the hot path of the simulator; it is algebraically identical
    to composing los_probability, path_loss_db and received_power at
    b_u = B.
    """
    d = math.sqrt(r * r + h * h)
    if d < 1.0:
        d = 1.0
    omega_deg = math.atan2(h, r) * _DEG_PER_RAD
    p = 1.0 / (1.0 + cp.alpha * math.exp(-cp.beta * (omega_deg - cp.alpha)))
    x_los = cp.k_los * d ** (-cp.gamma_los)
    x_nlos = cp.k_nlos * d ** (-cp.gamma_nlos)
    return LinkGains(p, x_los, x_nlos, p * x_los + (1.0 - p) * x_nlos)


def avg_spectral_efficiency(
    g: LinkGains, interference_fb: float, noise_fb: float
) -> float:
    """LoS-weighted Shannon efficiency (bps/Hz) of one link.

    `interference_fb` and `noise_fb` are full-band quantities; the
    allocated sub-band cancels out of the SINR, so the result holds for
    any b_u > 0.
    """
    denom = interference_fb + noise_fb
    se_los = math.log1p(g.x_los / denom) / _LOG2
    se_nlos = math.log1p(g.x_nlos / denom) / _LOG2
    return g.p_los * se_los + (1.0 - g.p_los) * se_nlos


def interference_fullband(
    user_xy: tuple[float, float],
    serving_id: int,
    drones: Sequence,
    active_ids: Sequence[int],
    cp: ChannelParams,
) -> float:
    """Sum of expected full-band received powers from radiating neighbors.

    Only drones with at least one active user radiate; drones farther
    than kappa on the ground contribute nothing. Each term mixes the LoS
    and NLoS received powers by the LoS probability of that interfering
    link.
    """
    ux, uy = user_xy[0], user_xy[1]
    kappa_sq = cp.kappa_sq
    total = 0.0
    for i in active_ids:
        if i == serving_id:
            continue
        d = drones[i]
        dx = d.x - ux
        dy = d.y - uy
        r_sq = dx * dx + dy * dy
        if r_sq <= kappa_sq:
            total += link_gains(math.sqrt(r_sq), d.altitude, cp).x_mean
    return total


def interference_at(
    user_xy: tuple[float, float],
    serving_id: int,
    drones: Sequence,
    active_ids: Sequence[int],
    b_u: float,
    cp: ChannelParams,
) -> float:
    """Interference power seen by a victim with allocation b_u (watts)."""
    if b_u <= 0:
        raise ChannelError("the victim must hold a positive allocation")
    return (b_u / cp.bandwidth_hz) * interference_fullband(
        user_xy, serving_id, drones, active_ids, cp
    )


@dataclass(frozen=True)
class LinkBudget:
    """Every per-link radio quantity for one user-drone pair."""

    p_los: float
    s_los: float
    s_nlos: float
    noise: float
    interference: float
    sinr_los: float
    sinr_nlos: float
    se_avg: float
    throughput: float

    @property
    def snr_los(self) -> float:
        return self.s_los / self.noise

    @property
    def snr_nlos(self) -> float:
        return self.s_nlos / self.noise


def link_budget(
    user_xy: tuple[float, float],
    serving,
    b_u: float,
    drones: Sequence,
    active_ids: Sequence[int],
    cp: ChannelParams,
) -> LinkBudget:
    """Full receive chain for an active link with allocation b_u."""
    if b_u <= 0:
        raise ChannelError("link_budget needs b_u > 0")
    dx = serving.x - user_xy[0]
    dy = serving.y - user_xy[1]
    g = link_gains(math.hypot(dx, dy), serving.altitude, cp)
    scale = b_u / cp.bandwidth_hz
    s_los = scale * g.x_los
    s_nlos = scale * g.x_nlos
    noise = noise_power(b_u, cp.noise_figure_db)
    interference = scale * interference_fullband(
        user_xy, serving.ident, drones, active_ids, cp
    )
    denom = interference + noise
    sinr_los = s_los / denom
    sinr_nlos = s_nlos / denom
    se_avg = g.p_los * math.log1p(sinr_los) / _LOG2 + (1.0 - g.p_los) * math.log1p(
        sinr_nlos
    ) / _LOG2
    return LinkBudget(
        p_los=g.p_los,
        s_los=s_los,
        s_nlos=s_nlos,
        noise=noise,
        interference=interference,
        sinr_los=sinr_los,
        sinr_nlos=sinr_nlos,
        se_avg=se_avg,
        throughput=b_u * se_avg,
    )
