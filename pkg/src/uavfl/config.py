"""Experiment configuration: presets, JSON loading, strict key checking."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from .errors import ConfigError

SCENARIO_PRESETS = {
    # (n_uavs, cohort_size, subregion_count, per_subregion_quota, n_rounds_max)
    "scenario1": (40, 10, 10, 1, 200),
    "scenario2": (100, 20, 10, 2, 200),
}


@dataclass
class ChannelConfig:
    beta0: float = 1e-4            # -40 dB reference gain at 1 m (simulator default)
    noise_psd_w: float = 4e-21     # thermal noise floor, ~ -174 dBm/Hz
    bandwidth_hz: float = 1e6
    bs_tx_power_w: float = 1.0
    # representative suburban constants from the path-loss literature;
    # the environment they model is config-supplied, not fixed here
    a1: float = 10.39
    a2: float = 2.09
    a3: float = 0.05
    a4: float = 7.37


@dataclass
class CostConfig:
    cpu_hz: float = 1e7
    cycles_per_sample: float = 7e4
    chip_coeff: float = 1e-22
    tx_power_w: float = 0.28
    epochs_per_round: int = 1
    param_size_bits: int = 32


@dataclass
class ModelConfig:
    hidden_dim: int = 64
    learning_rate: float = 1e-2
    batch_size: int = 32
    adam_eps: float = 1e-8


@dataclass
class GeneratorConfig:
    image_side: int = 32
    samples_min: int = 500
    samples_max: int = 1000
    redundancy: float = 0.1
    class_balance: float = 0.5
    walk_window: int = 8
    walk_weight: float = 0.97
    class_share: float = 0.6
    block_min: int = 20
    block_max: int = 40
    offset_span: int = 250
    n_waves: int = 12
    freq_max: float = 6.0
    contrast: float = 40.0
    test_fraction: float = 0.2


@dataclass
class SsimConfig:
    k1: float = 0.01
    k2: float = 0.03
    max_pairs: int = 1000


@dataclass
class GeometryConfig:
    region_m: float = 1000.0       # square side; UAVs uniform on it
    uav_altitude_m: float = 100.0
    bs_altitude_m: float = 30.0


@dataclass
class BatteryConfig:
    min_j: float = 1e3
    max_j: float = 1e4


@dataclass
class ExperimentConfig:
    scenario: str = "scenario1"    # scenario1 | scenario2 | custom
    n_uavs: int = 40
    cohort_size: int = 10
    subregion_count: int = 10
    per_subregion_quota: int = 1
    n_rounds_max: int = 200
    strategy: str = "deeps"        # deeps | random
    ssim_threshold: float = 0.5
    xi: float = 0.5
    master_seed: int = 0
    output_dir: str = "out"
    stop_on_convergence: bool = False
    convergence_window: int = 10
    convergence_tol: float = 0.005
    workers: int = 1
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    cost: CostConfig = field(default_factory=CostConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    ssim: SsimConfig = field(default_factory=SsimConfig)
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    battery: BatteryConfig = field(default_factory=BatteryConfig)

    def __post_init__(self):
        if self.scenario not in ("scenario1", "scenario2", "custom"):
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.strategy not in ("deeps", "random"):
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.scenario in SCENARIO_PRESETS:
            n, nr, m, q, rmax = SCENARIO_PRESETS[self.scenario]
            self.n_uavs, self.cohort_size = n, nr
            self.subregion_count, self.per_subregion_quota = m, q
            self.n_rounds_max = rmax
        if self.cohort_size != self.per_subregion_quota * self.subregion_count:
            raise ConfigError("cohort_size must equal quota x subregion_count")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.to_dict(), sort_keys=True).encode()
        ).hexdigest()


_NESTED = {
    "channel": ChannelConfig,
    "cost": CostConfig,
    "model": ModelConfig,
    "generator": GeneratorConfig,
    "ssim": SsimConfig,
    "geometry": GeometryConfig,
    "battery": BatteryConfig,
}


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    return cls(**data)


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build a config from a plain dict, rejecting unknown keys at any level."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key in _NESTED:
            kwargs[key] = _build(_NESTED[key], value, key)
        else:
            kwargs[key] = value
    return ExperimentConfig(**kwargs)


def load_config(path: str) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))
