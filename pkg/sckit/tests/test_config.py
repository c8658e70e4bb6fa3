import logging
from pathlib import Path

import pytest

from sckit.config import (
    benchmark_config,
    cluster_config,
    flatten,
    load_config,
    loss_config,
    mining_config,
    optimizer_config,
    partition_config,
    select_config,
    setup_logging,
)
from sckit.errors import ConfigError, logger
from sckit.trainer import OptimizerConfig


@pytest.fixture
def small_cfg(tmpdir):
    path = tmpdir / "small.cfg"
    path.write_text(
        "[loss]\ntemperature = 0.2\n\n[partition]\nangular_sectors = 8\nradial_shells = 1\nshell_boundaries_m = []\n",
        encoding="utf-8",
    )
    return path


@pytest.fixture
def restore_level():
    level = logger.level
    yield
    logger.setLevel(level)


class TestLoadConfig:
    def test_defaults(self):
        config = load_config()
        assert config["loss"]["temperature"] == 0.4
        assert config["partition"]["shell_boundaries_m"] == [1.25]
        assert config["mining"]["min_overlap"] == 0.3
        assert config["bench"]["seeds"] == [0, 1, 2]

    def test_file_merges_over_defaults(self, small_cfg):
        config = load_config(small_cfg)
        assert config["loss"]["temperature"] == 0.2
        assert config["loss"]["num_sampled_matches"] == 4096
        assert partition_config(config).num_partitions == 8

    def test_overrides_win(self, small_cfg):
        config = load_config(small_cfg, {"loss.temperature": 0.07, "optimizer.steps": None})
        assert config["loss"]["temperature"] == 0.07
        assert config["optimizer"]["steps"] == 2000

    @pytest.mark.parametrize("key", ["loss.tau", "nosuch.key", "loss"])
    def test_unknown_override(self, key):
        with pytest.raises(ConfigError):
            load_config(overrides={key: 1})

    def test_unknown_key_in_file(self, tmpdir):
        path = tmpdir / "bad.cfg"
        path.write_text("[loss]\ntau = 0.2\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_unknown_section_in_file(self, tmpdir):
        path = tmpdir / "bad_section.cfg"
        path.write_text("[training]\nsteps = 2\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_flatten(self):
        flat = flatten(load_config())
        assert flat["partition.angular_sectors"] == 4
        assert flat["cluster.radius"] == 0.03
        assert all("." in key for key in flat)


class TestBuilders:
    def test_all_sections(self):
        config = load_config()
        assert mining_config(config).stride == 25
        assert mining_config(config).voxel_size == 0.02
        assert partition_config(config).num_partitions == 8
        loss = loss_config(config)
        assert loss.temperature == 0.4
        assert loss.num_partitions == 8
        assert optimizer_config(config).steps == 2000
        assert select_config(config).strategy == "kmeans_features"
        assert cluster_config(config).min_cluster_size == 10
        assert benchmark_config(config).is_canonical

    def test_voxel_size_zero_disables(self):
        config = load_config(overrides={"mining.voxel_size": 0})
        assert mining_config(config).voxel_size is None

    def test_invalid_value_surfaces(self):
        config = load_config(overrides={"loss.temperature": -1.0})
        with pytest.raises(ConfigError):
            loss_config(config)


class TestLogging:
    def test_env_level(self, monkeypatch, restore_level):
        monkeypatch.setenv("SCK_LOG_LEVEL", "debug")
        setup_logging()
        assert logger.level == logging.DEBUG
        assert logger.handlers

    def test_explicit_level(self, monkeypatch, restore_level):
        monkeypatch.delenv("SCK_LOG_LEVEL", raising=False)
        setup_logging("error")
        assert logger.level == logging.ERROR
        setup_logging()
        assert logger.level == logging.WARNING


CONFIG_DIR = Path(__file__).resolve().parents[2] / "config"


class TestShippedConfigs:
    def test_defaults_file_matches_package(self):
        assert flatten(load_config(CONFIG_DIR / "sck.cfg")) == flatten(load_config())

    @pytest.mark.parametrize("name", ["sck_sweep_small.cfg", "sck_acceptance.cfg"])
    def test_overrides_load(self, name):
        config = load_config(CONFIG_DIR / name)
        assert optimizer_config(config).lr == 10.0
        assert loss_config(config).temperature == 0.4

    def test_default_learning_rate_is_the_backbone_recipe(self):
        opt = optimizer_config(load_config(CONFIG_DIR / "sck.cfg"))
        assert (opt.lr, opt.lr_decay, opt.decay_every_steps, opt.batch_size) == (0.1, 0.99, 1000, 32)
        assert opt == OptimizerConfig()
