import json
from pathlib import Path

import numpy as np
import pytest

from fusionnav.cli import main
from fusionnav.dataset import load_dataset
from fusionnav.models import FusionNet, ModelConfig, save_model


def run_cli(*argv):
    return main(list(argv))


def small_config_file(tmp_path, **extra):
    """Config overrides that keep CLI runs fast."""
    lines = [
        "train.lr_grid=0.001",
        "train.grid_epochs=1",
        "train.max_epochs=2",
        "train.batch_size=16",
    ]
    lines += [f"{k}={v}" for k, v in extra.items()]
    path = tmp_path / "fast.cfg"
    path.write_text("\n".join(lines) + "\n")
    return str(path)


@pytest.fixture(scope="module")
def tiny_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("data") / "demos"
    code = run_cli(
        "collect", "--maps", "known_straight,known_weave", "--episodes", "6",
        "--seed", "3", "--out", str(out),
    )
    assert code == 0
    return out


def test_collect_writes_dataset_and_manifest(tiny_dataset):
    episodes = load_dataset(tiny_dataset)
    assert len(episodes) == 6
    manifest = json.loads((tiny_dataset / "manifest.json").read_text())
    assert manifest["command"] == "collect"
    assert manifest["argv"]["seed"] == 3
    assert manifest["artifacts"]  # every episode file is checksummed
    for rel in manifest["artifacts"]:
        assert (tiny_dataset / rel).is_file()


def test_unknown_arch_is_usage_error(tiny_dataset):
    with pytest.raises(SystemExit) as exc:
        run_cli("train", "--arch", "resnet", "--data", str(tiny_dataset), "--out", "/tmp/x")
    assert exc.value.code == 2


def test_unknown_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        run_cli("collect", "--frobnicate", "--out", "/tmp/x")
    assert exc.value.code == 2


def test_missing_dataset_is_exit_3(tmp_path):
    code = run_cli("train", "--arch", "emb", "--data", str(tmp_path / "nope"),
                   "--out", str(tmp_path / "out"))
    assert code == 3


def test_train_eval_navigate_round_trip(tiny_dataset, tmp_path):
    cfg = small_config_file(tmp_path)
    out = tmp_path / "run"
    code = run_cli("--config", cfg, "train", "--arch", "emb",
                   "--data", str(tiny_dataset), "--out", str(out), "--seed", "1")
    assert code == 0
    ckpt = out / "emb.ckpt"
    assert ckpt.is_file()
    assert (out / "emb_losses.csv").is_file()
    assert (out / "emb_grid.csv").is_file()
    manifest = json.loads((out / "manifest.json").read_text())
    assert "emb.ckpt" in manifest["artifacts"]

    code = run_cli("--config", cfg, "eval", "--ckpt", str(ckpt),
                   "--data", str(tiny_dataset), "--seed", "1",
                   "--out", str(tmp_path / "evalout"))
    assert code == 0
    assert (tmp_path / "evalout" / "metrics.csv").is_file()

    nav_out = tmp_path / "nav"
    code = run_cli("navigate", "--ckpt", str(ckpt), "--maps", "known_straight",
                   "--trials", "1", "--budget", "10", "--out", str(nav_out))
    assert code == 0
    assert (nav_out / "summary.csv").is_file()


def test_eval_shape_mismatch_is_exit_3(tiny_dataset, tmp_path, capsys):
    small = ModelConfig(
        input_h=12, input_w=16, conv_spec=((4, 3, 2, 1),), embed_dim=8,
        head_widths=(8, 1), fusion_kind="emb",
    )
    ckpt = tmp_path / "small.ckpt"
    save_model(FusionNet.build(small, seed=0), ckpt)
    code = run_cli("eval", "--ckpt", str(ckpt), "--data", str(tiny_dataset))
    assert code == 3
    err = capsys.readouterr().err
    assert "12x16" in err and "60x80" in err


def test_navigate_expert_succeeds(tmp_path, capsys):
    out = tmp_path / "nav"
    code = run_cli("navigate", "--expert", "--maps", "known_straight",
                   "--trials", "3", "--out", str(out))
    assert code == 0
    printed = capsys.readouterr().out
    assert "success rate: 1.000" in printed
    trial_files = list(out.glob("expert_known_straight_trial*.csv"))
    assert len(trial_files) == 3


def test_navigate_rerun_is_byte_identical(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert run_cli("navigate", "--expert", "--maps", "known_straight",
                       "--trials", "2", "--out", str(out)) == 0
        outs.append(out)
    for f in sorted(outs[0].glob("*.csv")):
        assert f.read_bytes() == (outs[1] / f.name).read_bytes()


def test_export_gathers_files(tmp_path):
    run_dir = tmp_path / "run"
    nav = run_dir / "nav"
    assert run_cli("navigate", "--expert", "--maps", "known_straight",
                   "--trials", "1", "--out", str(nav)) == 0
    out = tmp_path / "plot"
    code = run_cli("export", "--run", str(run_dir), "--what", "paths", "--out", str(out))
    assert code == 0
    assert (out / "summary.csv").is_file()
    assert list(out.glob("*trial0.csv"))
    code = run_cli("export", "--run", str(run_dir), "--what", "losses")
    assert code == 3  # nothing matching


def test_config_file_overrides_apply(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("no_such_key=1\n")
    code = run_cli("--config", str(bad), "navigate", "--expert",
                   "--maps", "known_straight", "--trials", "1",
                   "--out", str(tmp_path / "x"))
    assert code == 1
    err = capsys.readouterr().err
    assert "no_such_key" in err
