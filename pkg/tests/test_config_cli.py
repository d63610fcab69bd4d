"""Configuration precedence and CLI behavior (exit codes, subcommands)."""

import json
import os
import subprocess
import sys

import pytest

from painpaint.config import PipelineConfig, load_config, save_config
from painpaint.errors import ConfigError


class TestDefaults:
    def test_empty_config_has_standard_hyperparameters(self):
        cfg = load_config(env={})
        assert cfg.tau == 0.4
        assert cfg.k == 8
        assert cfg.m == 4
        assert cfg.eta == 0.7
        assert cfg.t_s == 0.9
        assert cfg.lambda_ == 0.2

    def test_other_defaults(self):
        cfg = load_config(env={})
        assert cfg.iters is None
        assert cfg.verification is True
        assert cfg.inpainter == "oracle"
        assert cfg.corrupt_indices == (0, 2, 3)


class TestPrecedence:
    def test_file_overrides_defaults(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"tau": 0.5, "k": 4}))
        cfg = load_config(str(path), env={})
        assert cfg.tau == 0.5 and cfg.k == 4
        assert cfg.m == 4  # untouched default

    def test_env_overrides_file(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"tau": 0.5}))
        cfg = load_config(str(path), env={"PAINPAINT_TAU": "0.6", "PAINPAINT_LAMBDA": "0.3"})
        assert cfg.tau == 0.6
        assert cfg.lambda_ == 0.3

    def test_overrides_beat_env(self, tmp_path):
        cfg = load_config(env={"PAINPAINT_TAU": "0.6"}, overrides={"tau": 0.7})
        assert cfg.tau == 0.7

    def test_none_overrides_ignored(self):
        cfg = load_config(env={}, overrides={"tau": None})
        assert cfg.tau == 0.4

    def test_corrupt_indices_parsing(self):
        cfg = load_config(env={"PAINPAINT_CORRUPT_INDICES": "1,3"})
        assert cfg.corrupt_indices == (1, 3)

    def test_iters_none_parsing(self):
        assert load_config(env={"PAINPAINT_ITERS": "none"}).iters is None
        assert load_config(env={"PAINPAINT_ITERS": "5"}).iters == 5

    def test_bool_parsing(self):
        assert load_config(env={"PAINPAINT_VERIFICATION": "false"}).verification is False
        assert load_config(env={"PAINPAINT_STRICT_MIN": "1"}).strict_min is True


class TestValidation:
    @pytest.mark.parametrize(
        "key,value",
        [("tau", 1.5), ("k", 0), ("m", 0), ("eta", -0.1), ("lambda_", 2.0), ("iters", -1)],
    )
    def test_out_of_range(self, key, value):
        with pytest.raises(ConfigError):
            load_config(env={}, overrides={key: value})

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"no_such_knob": 1}))
        with pytest.raises(ConfigError):
            load_config(str(path), env={})

    def test_unknown_backend(self):
        with pytest.raises(ConfigError):
            load_config(env={}, overrides={"inpainter": "diffusion"})

    def test_save_round_trip(self, tmp_path):
        cfg = PipelineConfig(dataset="x", out="y", tau=0.45, iters=7)
        path = str(tmp_path / "saved.json")
        save_config(cfg, path)
        back = load_config(path, env={})
        assert back == cfg


def run_cli(*args, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "painpaint.cli", *args],
        capture_output=True,
        text=True,
        cwd=cwd,
    )


@pytest.fixture(scope="module")
def cli_dataset(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("cli") / "ds")
    res = run_cli(
        "generate", "--preset", "room-orbit", "--views", "6", "--size", "64",
        "--out", out, "--seed", "3",
    )
    assert res.returncode == 0, res.stderr
    return out


class TestCli:
    def test_usage_error_exit_2(self):
        res = run_cli("run")  # missing --dataset/--out
        assert res.returncode == 2
        assert "error" in res.stderr.lower() or "usage" in res.stderr.lower()

    def test_unknown_subcommand_exit_2(self):
        res = run_cli("frobnicate")
        assert res.returncode == 2

    def test_data_error_exit_3(self, tmp_path):
        res = run_cli("warp", "--dataset", str(tmp_path / "missing"), "--src", "0",
                      "--dst", "1", "--out", str(tmp_path / "o"))
        assert res.returncode == 3
        assert "error[data]" in res.stderr

    def test_generate_run_eval(self, cli_dataset, tmp_path):
        out = str(tmp_path / "run")
        res = run_cli("run", "--dataset", cli_dataset, "--out", out, "--seed", "1")
        assert res.returncode == 0, res.stderr
        assert os.path.isfile(os.path.join(out, "metrics.csv"))
        assert os.path.isfile(os.path.join(out, "trajectory.jsonl"))
        assert os.path.isdir(os.path.join(out, "inpainted"))

        ev = str(tmp_path / "eval")
        res = run_cli("eval", "--dataset", cli_dataset, "--rendered",
                      os.path.join(out, "inpainted"), "--out", ev)
        assert res.returncode == 0, res.stderr
        assert "mean PSNR" in res.stdout

    def test_eval_without_ground_truth_is_usage_error(self, cli_dataset, tmp_path):
        import shutil

        stripped = str(tmp_path / "nogt")
        shutil.copytree(cli_dataset, stripped)
        shutil.rmtree(os.path.join(stripped, "gt"))
        res = run_cli("eval", "--dataset", stripped, "--rendered", stripped,
                      "--out", str(tmp_path / "o"))
        assert res.returncode == 2
        assert "error[usage]" in res.stderr

    def test_warp_subcommand(self, cli_dataset, tmp_path):
        out = str(tmp_path / "warp")
        res = run_cli("warp", "--dataset", cli_dataset, "--src", "0", "--dst", "1",
                      "--out", out)
        assert res.returncode == 0, res.stderr
        assert os.path.isfile(os.path.join(out, "warped_0000_to_0001.png"))
        assert os.path.isfile(os.path.join(out, "zbuffer_0000_to_0001.pfm"))

    def test_propagate_subcommand(self, cli_dataset, tmp_path):
        out = str(tmp_path / "prop")
        res = run_cli("propagate", "--dataset", cli_dataset, "--out", out,
                      "--anchor", "0")
        assert res.returncode == 0, res.stderr
        assert "coverage" in res.stdout

    def test_verify_subcommand(self, cli_dataset, tmp_path):
        import shutil

        cand_dir = tmp_path / "cands"
        cand_dir.mkdir()
        shutil.copy(os.path.join(cli_dataset, "gt", "view_0001.png"), cand_dir / "a.png")
        shutil.copy(os.path.join(cli_dataset, "view_0001.png"), cand_dir / "b.png")
        res = run_cli(
            "verify",
            "--anchor", os.path.join(cli_dataset, "gt", "view_0000.png"),
            "--mask", os.path.join(cli_dataset, "mask_0001.png"),
            "--candidates", str(cand_dir),
        )
        assert res.returncode == 0, res.stderr
        assert "selected a.png" in res.stdout  # gt beats the blacked-out render

    def test_env_override_applies(self, cli_dataset, tmp_path):
        out = str(tmp_path / "env_run")
        env = dict(os.environ, PAINPAINT_ITERS="0")
        res = subprocess.run(
            [sys.executable, "-m", "painpaint.cli", "run", "--dataset", cli_dataset,
             "--out", out, "--seed", "1"],
            capture_output=True, text=True, env=env,
        )
        assert res.returncode == 0, res.stderr
        assert "rounds: 0" in res.stdout
