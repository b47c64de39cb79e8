import json
import math
import subprocess
import sys

import pytest

from dar.cli import build_parser, main

SUBCOMMANDS = ["scan", "gen-data", "train", "sample", "eval", "ablate", "bench", "gradcheck"]


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("gen-data", "--preset", "tiny", "--out", d / "data", "--seed", 0) == 0
    assert run("train", "--preset", "tiny", "--data", d / "data", "--out", d / "run", "--steps", 20, "--seed", 0) == 0
    return d


def test_scan_json(capsys):
    assert run("scan", "--height", 16, "--width", 16, "--order", "diagonal") == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["max_step_dist"] == pytest.approx(math.sqrt(2))
    assert doc["shape"] == [16, 16] and doc["order"] == "diagonal"


def test_scan_to_file(tmp_path):
    assert run("scan", "--height", 3, "--width", 3, "--out", tmp_path / "s.json", "--seed", 1) == 0
    assert json.loads((tmp_path / "s.json").read_text())["direction_histogram"]["Down"] == 2


@pytest.mark.parametrize("argv", [["bogus"], [], ["scan"], ["scan", "--height", "x", "--width", "2"]])
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv) == 1
    assert "usage" in capsys.readouterr().err


@pytest.mark.parametrize("cmd", SUBCOMMANDS)
def test_help_lists_flags(cmd, capsys):
    assert main([cmd, "--help"]) == 0
    out = capsys.readouterr().out
    assert "--seed" in out and "--out" in out


def test_every_subcommand_registered():
    sub = next(a for a in build_parser()._actions if a.dest == "command")
    assert set(sub.choices) == set(SUBCOMMANDS)


def test_missing_config_exit_2(tmp_path, capsys):
    missing = tmp_path / "absent.json"
    assert run("train", "--config", missing, "--out", tmp_path / "o") == 2
    assert str(missing) in capsys.readouterr().err


def test_bad_config_key_exit_2(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"train": {"lr": 1e-3, "momentum": 0.9}}))
    assert run("gen-data", "--config", cfg, "--out", tmp_path / "o") == 2
    assert "train.momentum" in capsys.readouterr().err


def test_corrupt_checkpoint_exit_2(tmp_path):
    bad = tmp_path / "x.darck"
    bad.write_bytes(b"garbage")
    assert run("sample", "--checkpoint", bad, "--out", tmp_path / "s") == 2


def test_runtime_failure_exit_3(trained, tmp_path, monkeypatch):
    import dar.harness.train as tr

    def boom(*a, **k):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr(tr, "train", boom)
    assert run("train", "--preset", "tiny", "--data", trained / "data", "--out", tmp_path / "o") == 3


def test_gen_data_outputs(trained):
    names = {p.name for p in (trained / "data").iterdir()}
    assert {"dataset.dards", "codebook.darcb", "dataset.json"} <= names


def test_train_outputs(trained):
    lines = (trained / "run" / "loss.csv").read_text().splitlines()
    assert lines[0] == "step,lr,loss" and len(lines) == 21
    assert (trained / "run" / "checkpoint.darck").is_file()


def test_sample_manifest_and_images(trained, tmp_path):
    out = tmp_path / "s"
    assert run("sample", "--preset", "tiny", "--checkpoint", trained / "run/checkpoint.darck", "--out", out,
               "--batch", 3, "--class", 2, "--guidance-scale", 2.0, "--seed", 4, "--render-scale", 4) == 0
    m = json.loads((out / "manifest.json").read_text())
    assert m["seed"] == 4 and m["class"] == 2 and len(m["grids"]) == 3
    assert m["config"]["sample"]["guidance_scale"] == 2.0
    assert len(list(out.glob("*.ppm"))) == 3
    assert (out / "sample_000.ppm").read_bytes().startswith(b"P6\n16 16\n255\n")


def test_flags_override_config(trained, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"sample": {"batch": 2, "temperature": 0.5}}))
    out = tmp_path / "s"
    assert run("sample", "--preset", "tiny", "--config", cfg, "--checkpoint", trained / "run/checkpoint.darck",
               "--out", out, "--batch", 1) == 0
    m = json.loads((out / "manifest.json").read_text())
    assert len(m["grids"]) == 1 and m["config"]["sample"]["temperature"] == 0.5


def test_eval_and_bench(trained, tmp_path):
    ck = trained / "run/checkpoint.darck"
    assert run("eval", "--preset", "tiny", "--checkpoint", ck, "--data", trained / "data", "--samples", 2,
               "--out", tmp_path / "e.json") == 0
    rep = json.loads((tmp_path / "e.json").read_text())
    assert {"val_loss", "accuracy", "tv", "proxy_frechet", "dataset_fingerprint"} <= set(rep)
    assert run("bench", "--checkpoint", ck, "--batch", 2, "--repeats", 2, "--out", tmp_path / "b.json") == 0
    assert len(json.loads((tmp_path / "b.json").read_text())["timings"]) == 2


def test_eval_missing_data_exit_2(trained, tmp_path):
    assert run("eval", "--checkpoint", trained / "run/checkpoint.darck", "--data", tmp_path) == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "dar", "scan", "--height", "2", "--width", "2"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["order"] == "diagonal"
