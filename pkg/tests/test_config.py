from pathlib import Path

import pytest

from app.config.experiment import load_experiment_config, parse_experiment_config, sweep_names
from app.models.experiment import DEFAULT_SWEEPS, ExperimentConfig, SweepParameter
from app.utils.exceptions import ConfigException

DEFAULT_INI = Path(__file__).resolve().parent.parent / "configs" / "default.ini"


def test_default_file_matches_built_in_defaults():
    config = load_experiment_config(str(DEFAULT_INI), {"workers": 1})
    assert config == ExperimentConfig(workers=1, out_dir="results")


def test_no_file_gives_defaults():
    config = load_experiment_config(None, {"workers": 2})
    assert config.attachments == [13, 14]
    assert config.workers == 2
    assert config.sweep_values == DEFAULT_SWEEPS


def test_aliases_and_lists():
    text = "case = ieee9\nattach = 5 7\nresource = 0.3\nmgload = 15.5\nsweep = resource\nsweep_resource = 0, 0.1\n"
    config = parse_experiment_config(text)
    assert config.main_case == "ieee9"
    assert config.attachments == [5, 7]
    assert config.resource_fraction == pytest.approx(0.3)
    assert config.microgrid_load_total == pytest.approx(15.5)
    assert config.sweep == [SweepParameter.RESOURCE]
    assert config.values_for(SweepParameter.RESOURCE) == [0.0, 0.1]
    assert config.values_for(SweepParameter.CAPACITY) == DEFAULT_SWEEPS[SweepParameter.CAPACITY]


def test_tariff_and_genattack_sections():
    text = "runs = 3\n[tariff]\n105 = 2.0 0.5 0.1  # tweaked\n[genattack]\n101 = 2.5\n"
    config = parse_experiment_config(text)
    assert config.runs == 3
    override = config.tariff[105]
    assert (override.rate, override.max_rate_change, override.sensitivity) == (2.0, 0.5, 0.1)
    assert config.genattack == {101: 2.5}


def test_overrides_win_and_none_is_ignored():
    config = parse_experiment_config("seed = 1\nalpha = 0.5\n", {"seed": 9, "alpha": None})
    assert config.seed == 9
    assert config.alpha == pytest.approx(0.5)


@pytest.mark.parametrize("text", [
    "capacity_reduction = 0.9\n",
    "resource = -0.1\n",
    "sweep_capacity = 0.1, 0.95\n",
    "sweep_mgload = 0\n",
    "sweep = voltage\n",
    "runs = many\n",
    "[tariff]\n105 = 1.0 0.5\n",
    "[genattack]\n101 = 0\n",
    "seed = 1\nseed = 2\n",
])
def test_invalid_configs(text):
    with pytest.raises(ConfigException):
        parse_experiment_config(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigException):
        load_experiment_config(str(tmp_path / "nope.ini"))


def test_sweep_names():
    assert sweep_names() == ["capacity", "resource", "mgload"]
