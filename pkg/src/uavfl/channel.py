"""Air-to-ground channel: link geometry, path loss, gains and capacities.

All functions are pure. The channel is reciprocal by construction: the same
amplitude gain applies uplink and downlink; only the transmit power differs
between the two capacity formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import CoincidentPositions, InvariantViolation
from .types import ChannelParams, PathLossConstants, Position3D, UavState


@dataclass(frozen=True)
class LinkGeometry:
    distance_m: float
    elevation_deg: float  # in [0, 90]

    def __post_init__(self):
        if self.distance_m <= 0:
            raise InvariantViolation("distance_m must be > 0")
        if not 0.0 <= self.elevation_deg <= 90.0:
            raise InvariantViolation("elevation_deg must lie in [0, 90]")


def link_geometry(uav_pos: Position3D, bs_pos: Position3D) -> LinkGeometry:
    """3D distance and elevation angle between a UAV and a base station.

    Elevation is arctan(|altitude difference| / horizontal distance) in
    degrees, 90 for a vertical link.
    """
    dx = uav_pos.x - bs_pos.x
    dy = uav_pos.y - bs_pos.y
    dz = uav_pos.z - bs_pos.z
    horiz = math.hypot(dx, dy)
    dist = math.sqrt(dx * dx + dy * dy + dz * dz)
    if dist == 0.0:
        raise CoincidentPositions("UAV and BS positions coincide")
    if horiz == 0.0:
        elev = 90.0
    else:
        elev = math.degrees(math.atan2(abs(dz), horiz))
    return LinkGeometry(distance_m=dist, elevation_deg=elev)


def path_loss_exponent(geom: LinkGeometry, plc: PathLossConstants) -> float:
    """Elevation-dependent path-loss exponent a1 / (1 + a4*exp(a3*(theta - a4))) + a2."""
    theta = geom.elevation_deg
    return plc.a1 / (1.0 + plc.a4 * math.exp(plc.a3 * (theta - plc.a4))) + plc.a2


def channel_gain(geom: LinkGeometry, params: ChannelParams) -> float:
    """Amplitude gain sqrt(beta0) * d^(-alpha/2); identical for both directions."""
    alpha = path_loss_exponent(geom, params.plc)
    return math.sqrt(params.beta0) * geom.distance_m ** (-alpha / 2.0)


def _capacity(h: float, tx_power_w: float, params: ChannelParams) -> float:
    snr = tx_power_w * h * h / (params.bandwidth_hz * params.noise_psd_w)
    return params.bandwidth_hz * math.log2(1.0 + snr)


def capacity_uplink(h: float, params: ChannelParams, uav: UavState) -> float:
    """Uplink rate in bits/s: W * log2(1 + P_u h^2 / (W sigma^2))."""
    return _capacity(h, uav.tx_power_w, params)


def capacity_downlink(h: float, params: ChannelParams) -> float:
    """Downlink rate in bits/s, same form with the BS transmit power."""
    return _capacity(h, params.bs_tx_power_w, params)
