import json

import pytest

from crossgraft.cli import main
from crossgraft.config import (
    RunConfig,
    config_hash,
    config_to_dict,
    resolve_config,
    write_run_dir,
)
from crossgraft.errors import ConfigError


class TestDefaults:
    def test_empty_config_gives_reference_defaults(self):
        cfg = resolve_config(use_env=False)
        assert cfg.hparams.lambda_rec == 10.0
        assert cfg.hparams.lambda_prior == 0.01
        assert cfg.hparams.lambda_gan == 1.0
        assert cfg.hparams.lambda_content == 1.0
        assert cfg.hparams.lr0 == pytest.approx(2e-4)
        assert cfg.hparams.lr_decay == 0.95
        assert cfg.hparams.lr_decay_every == 20_000
        assert cfg.hparams.batch_size == 64
        assert cfg.arch.dec_layers == 6

    def test_unknown_key_rejected_with_path(self):
        with pytest.raises(ConfigError) as err:
            resolve_config(overrides={"hparams.lambda_rex": 1}, use_env=False)
        assert "hparams.lambda_rex" in str(err.value)

    def test_split_validated_against_depth(self):
        with pytest.raises(ConfigError):
            resolve_config(overrides={"split": "H7L1"}, use_env=False)
        with pytest.raises(ConfigError):
            resolve_config(overrides={"split": "H0L6"}, use_env=False)

    def test_negative_steps_rejected(self):
        with pytest.raises(ConfigError):
            resolve_config(overrides={"steps": -5}, use_env=False)

    def test_unknown_dataset_rejected(self):
        with pytest.raises(ConfigError):
            resolve_config(overrides={"source": "svhn"}, use_env=False)

    def test_semi_mode_requires_count(self):
        with pytest.raises(ConfigError):
            resolve_config(overrides={"mode": "semi_supervised"}, use_env=False)
        with pytest.raises(ConfigError):
            resolve_config(overrides={"labeled_target_per_class": 5}, use_env=False)


class TestPrecedence:
    def test_flag_beats_file(self, tmp_path):
        file_values = {"hparams": {"batch_size": 32}}
        cfg = resolve_config(file_values, {"hparams.batch_size": 16}, use_env=False)
        assert cfg.hparams.batch_size == 16

    def test_file_beats_profile(self):
        cfg = resolve_config({"steps": 123}, profile="desk", use_env=False)
        assert cfg.steps == 123
        assert cfg.data.source_cap == 8_000  # untouched profile value

    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("CROSSGRAFT_SET_HPARAMS__BATCH_SIZE", "8")
        cfg = resolve_config(use_env=True)
        assert cfg.hparams.batch_size == 8

    def test_flag_beats_env(self, monkeypatch):
        monkeypatch.setenv("CROSSGRAFT_SET_STEPS", "7")
        cfg = resolve_config(overrides={"steps": 9}, use_env=True)
        assert cfg.steps == 9


class TestHashAndRunDir:
    def test_hash_stable_and_sensitive(self):
        a = resolve_config(use_env=False)
        b = resolve_config(use_env=False)
        c = resolve_config(overrides={"seed": 1234}, use_env=False)
        assert config_hash(a) == config_hash(b)
        assert config_hash(a) != config_hash(c)

    def test_run_dir_self_describing(self, tmp_path):
        cfg = resolve_config(overrides={"out_dir": str(tmp_path / "r")}, use_env=False)
        out = write_run_dir(cfg, cfg.out_dir)
        payload = json.loads((out / "config.json").read_text())
        assert payload["config_hash"] == config_hash(cfg)
        rebuilt = resolve_config(payload["config"], use_env=False)
        assert config_hash(rebuilt) == config_hash(cfg)

    def test_round_trip_dict(self):
        cfg = resolve_config(use_env=False)
        assert isinstance(config_to_dict(cfg), dict)
        assert RunConfig(**{}) is not None


def _tiny_cli_args(tmp_path, data_dir, out_name, extra=()):
    return [
        "--profile", "tiny",
        "--out-dir", str(tmp_path / out_name),
        "--data-dir", str(data_dir),
        "--set", "data.source_cap=96", "--set", "data.target_cap=96",
        "--set", "data.eval_cap=64", "--steps", "6", "--seed", "3",
        *extra,
    ]


@pytest.fixture(scope="module")
def cli_data_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli-data")


class TestCli:
    def test_prepare_data(self, cli_data_dir, capsys):
        rc = main(["prepare-data", "--dataset", "mnist", "--seed", "0",
                   "--size-cap", "32", "--data-dir", str(cli_data_dir)])
        assert rc == 0
        assert "mnist-train-seed0-cap32" in capsys.readouterr().out

    def test_train_then_eval(self, tmp_path, cli_data_dir, capsys):
        rc = main(["train", *_tiny_cli_args(tmp_path, cli_data_dir, "run")])
        assert rc == 0
        record = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert 0.0 <= record["accuracy_st"] <= 1.0
        ckpt = tmp_path / "run" / "checkpoint.pt"
        assert ckpt.exists()

        rc = main(["eval", *_tiny_cli_args(tmp_path, cli_data_dir, "run"),
                   "--checkpoint", str(ckpt)])
        assert rc == 0
        again = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert again["accuracy_st"] == pytest.approx(record["accuracy_st"], abs=1e-9)

    def test_resume_matches_uninterrupted(self, tmp_path, cli_data_dir, capsys):
        from crossgraft.trainer import metrics_equal

        rc = main(["train", *_tiny_cli_args(tmp_path, cli_data_dir, "full"), "--steps", "8"])
        assert rc == 0
        rc = main(["train", *_tiny_cli_args(tmp_path, cli_data_dir, "half"), "--steps", "4"])
        assert rc == 0
        rc = main([
            "train", *_tiny_cli_args(tmp_path, cli_data_dir, "half"), "--steps", "8",
            "--resume", str(tmp_path / "half" / "checkpoint.pt"),
        ])
        assert rc == 0
        capsys.readouterr()
        assert metrics_equal(tmp_path / "full" / "metrics.jsonl", tmp_path / "half" / "metrics.jsonl")

    def test_sweep_cardinality(self, tmp_path, cli_data_dir, capsys):
        rc = main(["sweep", *_tiny_cli_args(tmp_path, cli_data_dir, "sweep"),
                   "--steps", "3", "--splits", "H1L3,H3L1"])
        assert rc == 0
        rows = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert len(rows) == 2

    def test_semi_flag_sets_mode(self, tmp_path, cli_data_dir, capsys):
        rc = main(["semi", *_tiny_cli_args(tmp_path, cli_data_dir, "semi"),
                   "--labeled-per-class", "2"])
        assert rc == 0
        record = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert record["mode"] == "semi_supervised"

    def test_export_features(self, tmp_path, cli_data_dir, capsys):
        rc = main(["train", *_tiny_cli_args(tmp_path, cli_data_dir, "exp")])
        assert rc == 0
        rc = main(["export-features", *_tiny_cli_args(tmp_path, cli_data_dir, "exp"),
                   "--checkpoint", str(tmp_path / "exp" / "checkpoint.pt"),
                   "--layer", "raw", "--out-file", str(tmp_path / "feats.npz")])
        assert rc == 0
        assert (tmp_path / "feats.npz").exists()

    def test_plot_from_run(self, tmp_path, cli_data_dir, capsys):
        rc = main(["train", *_tiny_cli_args(tmp_path, cli_data_dir, "plot")])
        assert rc == 0
        rc = main(["plot", *_tiny_cli_args(tmp_path, cli_data_dir, "plot")])
        assert rc == 0
        assert (tmp_path / "plot" / "training_curves.png").exists()
        assert (tmp_path / "plot" / "accuracy_bars.png").exists()

    def test_migrate_command(self, tmp_path, cli_data_dir, capsys):
        rc = main(["train", *_tiny_cli_args(tmp_path, cli_data_dir, "home")])
        assert rc == 0
        rc = main(["migrate", *_tiny_cli_args(tmp_path, cli_data_dir, "mig"),
                   "--source", "usps", "--target", "mnist",
                   "--home-checkpoint", str(tmp_path / "home" / "checkpoint.pt")])
        assert rc == 0
        record = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert record["tag"].startswith("migrated-from")

    def test_config_error_exit_code(self, tmp_path, cli_data_dir, capsys):
        rc = main(["train", "--set", "bogus.key=1", "--out-dir", str(tmp_path / "x")])
        assert rc == 1
        assert "bogus.key" in capsys.readouterr().err

    def test_unknown_command_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_ablate_command(self, tmp_path, cli_data_dir, capsys):
        rc = main(["ablate", *_tiny_cli_args(tmp_path, cli_data_dir, "abl"),
                   "--which", "gan", "--steps", "4"])
        assert rc == 0
        record = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert record["mode"] == "ablate_gan"
