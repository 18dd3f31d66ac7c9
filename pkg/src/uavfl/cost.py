"""Per-round latency and energy accounting, plus battery bookkeeping.

Only local training energy and uplink transmit energy debit the battery;
hover/flight power is excluded (constant for hovering UAVs) and downlink
reception is not charged.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import EmptyCohort, InsufficientBattery, InvariantViolation, ZeroRate
from .types import FlTask, UavState


@dataclass(frozen=True)
class RoundCost:
    train_time_s: float
    uplink_time_s: float
    downlink_time_s: float
    train_energy_j: float
    tx_energy_j: float

    def __post_init__(self):
        for name in ("train_time_s", "uplink_time_s", "downlink_time_s",
                     "train_energy_j", "tx_energy_j"):
            if getattr(self, name) < 0:
                raise InvariantViolation(f"{name} must be >= 0")

    @property
    def total_time_s(self) -> float:
        return self.train_time_s + self.uplink_time_s + self.downlink_time_s

    @property
    def total_energy_j(self) -> float:
        return self.train_energy_j + self.tx_energy_j


def local_training_time(uav: UavState, task: FlTask, shard_size: int) -> float:
    """Seconds to run `epochs_per_round` epochs over one shard on the UAV CPU."""
    if uav.cpu_hz <= 0:
        raise InvariantViolation("cpu_hz must be > 0")
    return task.epochs_per_round * uav.cycles_per_sample * shard_size / uav.cpu_hz


def _tx_time(task: FlTask, rate_bps: float) -> float:
    if task.param_count == 0:
        return 0.0
    if rate_bps <= 0:
        raise ZeroRate("link rate must be > 0")
    return task.param_count * task.param_size_bits / rate_bps


def uplink_time(task: FlTask, rate_bps: float) -> float:
    """Seconds to upload the full parameter vector at the given rate."""
    return _tx_time(task, rate_bps)


def downlink_time(task: FlTask, rate_bps: float) -> float:
    """Seconds to receive the full parameter vector at the given rate."""
    return _tx_time(task, rate_bps)


def round_duration(costs: list[RoundCost]) -> float:
    """Round duration: slowest participant's train + uplink + downlink time."""
    if not costs:
        raise EmptyCohort("round_duration needs at least one participant")
    return max(c.total_time_s for c in costs)


def training_energy(uav: UavState, train_time_s: float) -> float:
    """CPU energy chi * t * gamma^3 for the local training phase."""
    return uav.chip_coeff * train_time_s * uav.cpu_hz ** 3


def transmit_energy(uav: UavState, uplink_time_s: float) -> float:
    """Radio energy P_u * t_up; downlink reception is not charged."""
    return uav.tx_power_w * uplink_time_s


def estimate_round_cost(uav: UavState, task: FlTask, shard_size: int,
                        rate_up_bps: float, rate_down_bps: float) -> RoundCost:
    """Full per-round cost for one UAV given its shard size and link rates."""
    t_train = local_training_time(uav, task, shard_size)
    t_up = uplink_time(task, rate_up_bps)
    t_down = downlink_time(task, rate_down_bps)
    return RoundCost(
        train_time_s=t_train,
        uplink_time_s=t_up,
        downlink_time_s=t_down,
        train_energy_j=training_energy(uav, t_train),
        tx_energy_j=transmit_energy(uav, t_up),
    )


def charge_round(uav: UavState, cost: RoundCost) -> float:
    """Debit one round's energy from the UAV battery; returns the new level.

    The caller must have verified feasibility first; a debit that would
    drive the battery negative raises InsufficientBattery and leaves the
    battery untouched.
    """
    debit = cost.total_energy_j
    if debit > uav.battery_j:
        raise InsufficientBattery(
            f"UAV {uav.id}: round needs {debit} J, battery holds {uav.battery_j} J"
        )
    uav.battery_j -= debit
    return uav.battery_j
