import json

import pytest

from textmentor import auth as auth_tokens
from textmentor.config import load_config, write_config
from textmentor.errors import ConfigError


@pytest.fixture
def config_dir(tmp_path):
    issuer = auth_tokens.generate_issuer_key()
    (tmp_path / "issuer_public.pem").write_bytes(auth_tokens.issuer_public_pem(issuer))
    write_config(
        tmp_path / "config.json",
        {
            "data_dir": "data",
            "port": 9001,
            "relay": {"port": 9002},
            "issuer_public_key_file": "issuer_public.pem",
            "queue_depth": 4,
        },
    )
    return tmp_path


def test_load_resolves_relative_paths(config_dir):
    config = load_config(config_dir / "config.json")
    assert config.data_dir == config_dir / "data"
    assert config.issuer_public_key_file == config_dir / "issuer_public.pem"
    assert config.port == 9001
    assert config.relay_port == 9002
    assert config.queue_depth == 4


def test_env_overrides_ports_and_paths(config_dir, monkeypatch, tmp_path):
    monkeypatch.setenv("TEXTMENTOR_PORT", "7777")
    monkeypatch.setenv("TEXTMENTOR_DATA_DIR", str(tmp_path / "elsewhere"))
    config = load_config(config_dir / "config.json")
    assert config.port == 7777
    assert config.data_dir == tmp_path / "elsewhere"


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.json")


def test_wrong_version(tmp_path):
    (tmp_path / "config.json").write_text(json.dumps({"version": 99}))
    with pytest.raises(ConfigError):
        load_config(tmp_path / "config.json")


def test_missing_issuer_key(tmp_path):
    (tmp_path / "config.json").write_text(
        json.dumps({"version": 1, "issuer_public_key_file": "ghost.pem"})
    )
    with pytest.raises(ConfigError):
        load_config(tmp_path / "config.json")


def test_bad_transport(config_dir):
    data = json.loads((config_dir / "config.json").read_text())
    data["transport"] = "carrier-pigeon"
    (config_dir / "config.json").write_text(json.dumps(data))
    with pytest.raises(ConfigError):
        load_config(config_dir / "config.json")


def test_nonnumeric_port(config_dir):
    data = json.loads((config_dir / "config.json").read_text())
    data["port"] = "eight thousand"
    (config_dir / "config.json").write_text(json.dumps(data))
    with pytest.raises(ConfigError):
        load_config(config_dir / "config.json")
