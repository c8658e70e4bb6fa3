# coding: utf8
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional, Union

from thinc.api import Config

from .active_labeling import SelectConfig
from .benchmark import BenchmarkConfig
from .contrastive import LossConfig
from .errors import ConfigError, Errors, logger
from .instance_clustering import ClusterConfig
from .pair_mining import MiningConfig
from .scene_contexts import PartitionConfig
from .trainer import OptimizerConfig

__all__ = [
    "DEFAULT_CONFIG",
    "LOG_LEVEL_ENV",
    "load_config",
    "flatten",
    "mining_config",
    "partition_config",
    "loss_config",
    "optimizer_config",
    "select_config",
    "cluster_config",
    "benchmark_config",
    "setup_logging",
]


LOG_LEVEL_ENV = "SCK_LOG_LEVEL"

DEFAULT_CONFIG = """
[system]
seed = 0
parallel = 1

[mining]
stride = 25
radius = 0.025
min_overlap = 0.3
voxel_size = 0.02

[partition]
angular_sectors = 4
radial_shells = 2
shell_boundaries_m = [1.25]

[loss]
temperature = 0.4
num_sampled_matches = 4096
normalize = true

[optimizer]
lr = 0.1
lr_decay = 0.99
decay_every_steps = 1000
steps = 2000
seed = 0
dim = 16
batch_size = 32

[select]
strategy = "kmeans_features"
budget = 20
iterations = 50
xyz_weight = 1.0
seed = 0

[cluster]
radius = 0.03
min_cluster_size = 10
ignore_labels = []

[bench]
mode = "LA-points"
budget = 20
seeds = [0, 1, 2]
points_grid = [256, 1024, 4096]
partitions_grid = [1, 2, 4, 8]
num_pairs = 10
"""


def _check_keys(config: Config, defaults: Config):
    for section, values in config.items():
        if section not in defaults:
            raise ConfigError(Errors.E090.format(value=section))
        for key in values:
            if key not in defaults[section]:
                raise ConfigError(Errors.E090.format(value="{}.{}".format(section, key)))


def load_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> Config:
    """Defaults, then the .cfg file at path, then dotted overrides ("loss.temperature": 0.2).

    Overrides whose value is None are skipped, so unset CLI options keep the file value.
    """
    defaults = Config().from_str(DEFAULT_CONFIG)
    config = defaults
    if path is not None:
        from_file = Config().from_disk(path)
        _check_keys(from_file, defaults)
        config = defaults.merge(from_file)
    overrides = {key: value for key, value in (overrides or {}).items() if value is not None}
    for key in overrides:
        section, _, name = key.partition(".")
        if section not in defaults or name not in defaults[section]:
            raise ConfigError(Errors.E090.format(value=key))
    if overrides:
        config = config.merge(_nest(overrides))
    return config


def _nest(overrides: Dict[str, Any]) -> Config:
    sections: Dict[str, Dict[str, Any]] = {}
    for key, value in overrides.items():
        section, _, name = key.partition(".")
        sections.setdefault(section, {})[name] = value
    return Config(sections)


def flatten(config: Config) -> Dict[str, Any]:
    """The flat key-value view: {"partition.angular_sectors": 4, ...}."""
    return {"{}.{}".format(section, key): value for section, values in config.items() for key, value in values.items()}


def mining_config(config: Config) -> MiningConfig:
    section = config["mining"]
    return MiningConfig(
        int(section["stride"]), float(section["radius"]), float(section["min_overlap"]),
        float(section["voxel_size"]) if section["voxel_size"] else None,
    )


def partition_config(config: Config) -> PartitionConfig:
    section = config["partition"]
    return PartitionConfig(
        int(section["angular_sectors"]), int(section["radial_shells"]), tuple(section["shell_boundaries_m"]),
    )


def loss_config(config: Config) -> LossConfig:
    section = config["loss"]
    return LossConfig(
        float(section["temperature"]), partition_config(config), int(section["num_sampled_matches"]), bool(section["normalize"]),
    )


def optimizer_config(config: Config) -> OptimizerConfig:
    section = config["optimizer"]
    return OptimizerConfig(
        float(section["lr"]), float(section["lr_decay"]), int(section["decay_every_steps"]),
        int(section["steps"]), int(section["seed"]), int(section["dim"]), int(section["batch_size"]),
    )


def select_config(config: Config) -> SelectConfig:
    section = config["select"]
    return SelectConfig(
        str(section["strategy"]), int(section["budget"]), int(section["iterations"]),
        float(section["xyz_weight"]), int(section["seed"]),
    )


def cluster_config(config: Config) -> ClusterConfig:
    section = config["cluster"]
    return ClusterConfig(float(section["radius"]), int(section["min_cluster_size"]), tuple(section["ignore_labels"]))


def benchmark_config(config: Config) -> BenchmarkConfig:
    section = config["bench"]
    return BenchmarkConfig(str(section["mode"]), section["budget"], tuple(section["seeds"]))


def setup_logging(level: Optional[str] = None):
    """Attach a stderr handler to the package logger at SCK_LOG_LEVEL (default WARNING)."""
    level = (level or os.environ.get(LOG_LEVEL_ENV) or "WARNING").upper()
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(levelname)s:%(name)s: %(message)s"))
        logger.addHandler(handler)
    logger.setLevel(level)
