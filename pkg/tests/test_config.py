import json

import pytest

from src.utils.config import CampaignConfig, SystemConfig, load_campaign
from src.utils.errors import ConfigValidationError, InvalidArgumentError, SteeringError


def test_system_defaults(monkeypatch):
    for name in ("STEERING_THREADS", "STEERING_SEED", "STEERING_K_SIGMA", "STEERING_BOOTSTRAP_TRIALS", "LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
    config = SystemConfig.load()
    assert config.threads == 1
    assert config.k_sigma == 5.0
    assert config.bootstrap_trials == 10000
    assert set(config.to_dict()) == {"threads", "default_seed", "log_level", "k_sigma", "bootstrap_trials"}


def test_system_reads_environment(monkeypatch):
    monkeypatch.setenv("STEERING_THREADS", "4")
    monkeypatch.setenv("STEERING_K_SIGMA", "3.5")
    config = SystemConfig.load()
    assert config.threads == 4
    assert config.k_sigma == 3.5


@pytest.mark.parametrize("name, value", [
    ("STEERING_THREADS", "0"),
    ("STEERING_THREADS", "many"),
    ("STEERING_K_SIGMA", "-1"),
    ("STEERING_BOOTSTRAP_TRIALS", "50"),
    ("LOG_LEVEL", "CHATTY"),
])
def test_system_rejects_bad_environment(monkeypatch, name, value):
    monkeypatch.setenv(name, value)
    with pytest.raises(ConfigValidationError):
        SystemConfig.load()


def test_campaign_defaults():
    config = CampaignConfig.model_validate({"measurement": {"preset": "octahedral"}})
    assert config.d_values == [1, 2]
    assert config.eta == 0.748
    assert config.simulation is None
    assert config.to_dict()["measurement"]["preset"] == "octahedral"


@pytest.mark.parametrize("raw", [
    {"measurement": {}},
    {"measurement": {"preset": "octahedral", "axes_csv": "axes.csv"}},
    {"measurement": {"axes": [[1, 0]]}},
    {"measurement": {"preset": "octahedral"}, "d_values": [3]},
    {"measurement": {"preset": "octahedral"}, "eta": 1.5},
    {"measurement": {"preset": "octahedral"}, "simulation": {"mu": 0.9, "bob_efficiency": [0.8]}},
    {"measurement": {"preset": "octahedral"}, "unexpected": True},
])
def test_campaign_validation(tmp_path, raw):
    path = tmp_path / "campaign.json"
    path.write_text(json.dumps(raw))
    with pytest.raises(ConfigValidationError) as info:
        load_campaign(path)
    assert info.value.details["errors"]


def test_campaign_file_errors(tmp_path):
    with pytest.raises(ConfigValidationError):
        load_campaign(tmp_path / "missing.json")
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigValidationError):
        load_campaign(path)


def test_error_hierarchy():
    error = ConfigValidationError("bad", {"field": "eta"})
    assert isinstance(error, InvalidArgumentError)
    assert isinstance(error, ValueError)
    assert isinstance(error, SteeringError)
    assert error.to_dict() == {"error": "bad", "code": "config_validation", "details": {"field": "eta"}}
