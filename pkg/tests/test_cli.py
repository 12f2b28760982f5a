import csv

import numpy as np
import pytest

from autocurriculum.cli import HEADER, main

TINY = """
run_id = "t"
game_kind = "gos"
gos_dim = 6
psro_iterations = 3
window_size = 3
meta_training_steps = 2
meta_batch_size = 2
model_type = "mlp"
hidden_size = 4
es_perturbations = 2
eval_tasks = 2
exact_exploitability = true
gradcheck_instances = 3
"""


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text(TINY)
    return str(path)


def rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def run(*args):
    return main([str(a) for a in args])


def test_train_writes_deterministic_history(tmp_path, config):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("train", "--config", config, "--seed", 7, "--out", a) == 0
    assert run("train", "--config", config, "--seed", 7, "--out", b) == 0
    text = (a / "history.csv").read_bytes()
    assert text == (b / "history.csv").read_bytes()
    assert text.splitlines()[0].decode() == ",".join(HEADER)
    assert b"\r" not in text
    assert (a / "checkpoint.json").exists() and (a / "train.log").exists()
    assert (a / "train_curve.png").stat().st_size > 0
    assert {r["seed"] for r in rows(a / "history.csv")} == {"7"}


def test_eval_and_baselines_are_row_aligned(tmp_path, config):
    out = tmp_path / "o"
    assert run("train", "--config", config, "--out", out) == 0
    assert run("eval", "--config", config, "--out", out) == 0
    assert run("baselines", "--config", config, "--out", out) == 0
    ev, bl = rows(out / "eval.csv"), rows(out / "baselines.csv")
    key = [(r["game_seed"], r["iteration"]) for r in ev]
    for solver in ("uniform", "nash", "last_agent"):
        assert [(r["game_seed"], r["iteration"]) for r in bl if r["solver"] == solver] == key
    assert all(np.isfinite(float(r["exploitability"])) for r in ev + bl)


def test_eval_dimension_rows(tmp_path, config):
    out = tmp_path / "o"
    run("train", "--config", config, "--out", out)
    assert run("eval", "--config", config, "--out", out, "--dims", "8,10") == 0
    assert {r["game_kind"] for r in rows(out / "eval.csv")} == {"gos-d8", "gos-d10"}


def test_every_subcommand_repeats_byte_identically(tmp_path, config):
    outputs = {}
    for name in ("x", "y"):
        out = tmp_path / name
        run("train", "--config", config, "--out", out)
        run("eval", "--config", config, "--out", out)
        run("baselines", "--config", config, "--out", out)
        run("sweep", "--config", config, "--out", out, "--dims", "8")
        run("gradcheck", "--config", config, "--out", out)
        outputs[name] = {p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))}
    assert outputs["x"] == outputs["y"]
    assert set(outputs["x"]) >= {"history.csv", "eval.csv", "baselines.csv", "sweep.csv", "gradcheck.csv"}


def test_kuhn_nash_baseline(tmp_path):
    path = tmp_path / "k.toml"
    path.write_text('game_kind = "kuhn"\noracle_method = "kuhn_exact"\npsro_iterations = 15\n'
                    'exact_exploitability = true\nbaselines = ["nash"]\neval_tasks = 2\n')
    assert run("baselines", "--config", path, "--out", tmp_path) == 0
    finals = [float(r["exploitability"]) for r in rows(tmp_path / "baselines.csv") if r["iteration"] == "15"]
    assert finals and max(finals) < 0.05


def test_exit_codes(tmp_path, config, capsys):
    assert run("eval", "--config", tmp_path / "missing.toml", "--out", tmp_path) == 2
    assert run("eval", "--config", config, "--out", tmp_path, "--checkpoint", tmp_path / "nope.json") == 2
    bad = tmp_path / "bad.toml"
    bad.write_text("mystery = 1\n")
    assert run("train", "--config", bad, "--out", tmp_path) == 2
    assert "unknown configuration keys" in capsys.readouterr().err
    exploding = tmp_path / "boom.toml"
    exploding.write_text(TINY + "gradient_ceiling = 1e-12\n")
    assert run("train", "--config", exploding, "--out", tmp_path) == 3
    assert run("eval", "--config", config, "--out", tmp_path, "--dims", "a,b") == 2


def test_gradcheck_passes_on_small_suite(tmp_path, config, capsys):
    assert run("gradcheck", "--config", config, "--out", tmp_path) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 3 and "FAIL" not in out


def test_gradcheck_failure_exit_code(tmp_path, config, monkeypatch):
    from autocurriculum import cli

    monkeypatch.setattr(cli, "gradcheck_suite", lambda n: iter([("gos", 0, 0.5, False)]))
    assert run("gradcheck", "--config", config, "--out", tmp_path) == 4
