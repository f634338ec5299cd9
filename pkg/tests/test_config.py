import pytest

from fusionnav.config import ConfigFileError, RuntimeConfig, load_runtime_config


def test_defaults():
    config = load_runtime_config(path=None)
    assert config == RuntimeConfig()
    assert config.omega_max == 1.0
    assert config.camera.image_w == 80
    assert config.train.batch_size == 32
    assert config.train.lr_grid == (1e-6, 3e-6, 3e-5, 1e-4, 3e-4)
    assert config.expert.k_sectors == 9 and config.expert.kp == 2.0


def test_file_overrides_nested_keys(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text(
        "# comment\n"
        "omega_max=1.5\n"
        "camera.image_w=40\n"
        "camera.max_depth=3.5\n"
        "train.batch_size=16\n"
        "train.lr_grid=0.001,0.003\n"
        "expert.kp=1.5\n"
    )
    config = load_runtime_config(path)
    assert config.omega_max == 1.5
    assert config.camera.image_w == 40
    assert config.camera.max_depth == 3.5
    assert config.train.batch_size == 16
    assert config.train.lr_grid == (0.001, 0.003)
    assert config.expert.kp == 1.5
    # untouched values keep their defaults
    assert config.robot_radius == 0.18
    assert config.train.max_epochs == 100


def test_env_var_supplies_default_path(tmp_path, monkeypatch):
    path = tmp_path / "env.cfg"
    path.write_text("cadence=0.1\n")
    monkeypatch.setenv("FUSIONNAV_CONFIG", str(path))
    assert load_runtime_config().cadence == 0.1
    monkeypatch.delenv("FUSIONNAV_CONFIG")
    assert load_runtime_config().cadence == 0.2


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("romega_max=2\n")
    with pytest.raises(ConfigFileError) as err:
        load_runtime_config(path)
    assert "romega_max" in str(err.value)


def test_bad_value_and_bad_line_rejected(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("train.batch_size=lots\n")
    with pytest.raises(ConfigFileError):
        load_runtime_config(path)
    path.write_text("just a line\n")
    with pytest.raises(ConfigFileError):
        load_runtime_config(path)


def test_missing_file_rejected(tmp_path):
    with pytest.raises(ConfigFileError):
        load_runtime_config(tmp_path / "absent.cfg")
