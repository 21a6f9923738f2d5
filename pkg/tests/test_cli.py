import json
import subprocess
import sys

import pytest

from ntsgd.cli import SCHEMA, ConfigError, main, parse_config
from ntsgd.experiments import read_csv

SMALL = {
    "run": ["--horizon", "200", "--batch-size", "10", "--seeds", "0,1"],
    "sweep-sparsity": ["--objective", "mlp", "--hidden", "4", "--horizon", "60", "--batch-size", "10",
                       "--seeds", "0", "--cut-rate-grid", "0.1,0.5"],
    "sweep-convergence": ["--horizons", "50,200", "--seeds", "0,1", "--batch-size", "10", "--lr", "1"],
    "escape": ["--sigma-grid", "1e-3,1e-2", "--seeds", "0,1", "--saddle-dim", "4"],
    "stability": ["--horizon", "200", "--batch-size", "1", "--schedule", "inv_t", "--lr", "1",
                  "--seeds", "0,1", "--gap-sigmas", "0,1e-3"],
    "stable-rank": ["--objective", "saddle", "--taus", "0,1,10"],
    "gradcheck": ["--gradcheck-probes", "10"],
}


def invoke(tmp_path, command, *args, name="out"):
    out = tmp_path / name
    code = main([command, "--out", str(out), *args])
    return code, out


# --- configuration -----------------------------------------------------------


def test_defaults():
    cfg = parse_config()
    assert cfg["cut_rate"] == 0.1 and cfg["sigma"] == 1e-3 and cfg["beta"] == 0.0
    assert cfg["schedule"] == "constant" and cfg["lr"] == 0.1 and cfg["batch_size"] == 100
    assert set(cfg) == set(SCHEMA)


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("# comment\ncut_rate = 0.3\nseeds = 1, 2, 3   # inline\nschedule = inv_t\n")
    cfg = parse_config(path, {"cut_rate": "0.4"})
    assert cfg["cut_rate"] == 0.4
    assert cfg["seeds"] == [1, 2, 3]
    assert cfg["schedule"] == "inv_t"


def test_config_file_with_section(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("[ntsgd]\nsigma = 0\n")
    assert parse_config(path)["sigma"] == 0.0


@pytest.mark.parametrize("text,match", [
    ("bogus = 1\n", "unknown key: bogus"),
    ("sigma = abc\n", "sigma: expected float"),
    ("batch_size = 1.5\n", "batch_size: expected int"),
    ("cut_rate = 2\n", "cut_rate: value 2.0 out of range"),
    ("schedule = cosine\n", "schedule: value 'cosine' out of range"),
    ("seeds =\n", "seeds: list must not be empty"),
    ("dataset = idx\n", "idx needs idx_images"),
    ("[other]\nx = 1\n", "unknown section"),
])
def test_config_errors(tmp_path, text, match):
    path = tmp_path / "c.cfg"
    path.write_text(text)
    with pytest.raises(ConfigError, match=match):
        parse_config(path)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(tmp_path / "nope.cfg")


def test_validation_errors_exit_1(tmp_path, capsys):
    assert main(["run", "--sigma", "-1", "--out", str(tmp_path / "x")]) == 1
    err = capsys.readouterr().err
    assert err.count("\n") == 1 and "sigma" in err
    with pytest.raises(SystemExit) as exc:
        main(["run", "--no-such-flag", "1"])
    assert exc.value.code == 1
    assert not (tmp_path / "x").exists()


# --- commands ----------------------------------------------------------------


def test_gradcheck_passes(tmp_path):
    code, out = invoke(tmp_path, "gradcheck", *SMALL["gradcheck"])
    assert code == 0
    res = read_csv(out / "gradcheck.csv")
    assert len(res) == 30 and all(res.column("passed"))


def test_run_zero_horizon(tmp_path):
    code, out = invoke(tmp_path, "run", "--horizon", "0")
    assert code == 0
    lines = (out / "trajectory_seed0.csv").read_text().splitlines()
    assert lines[0] == "t,loss,grad_norm,sparsity,kappa,w_norm"
    assert len(lines) == 2 and lines[1].startswith("0,0.693147")


def test_run_divergence_exit_2(tmp_path, capsys):
    code, out = invoke(tmp_path, "run", "--objective", "saddle", "--lr", "1e6", "--horizon", "50")
    assert code == 2
    assert "diverged" in capsys.readouterr().err
    assert read_csv(out / "summary.csv").column("status") == ["diverged"]


def test_escape_without_noise(tmp_path):
    code, out = invoke(tmp_path, "escape", "--sigma-grid", "0", "--seeds", "0,1,2", "--saddle-dim", "3")
    assert code == 0
    runs = read_csv(out / "runs.csv")
    assert runs.column("escape_time") == [-1, -1, -1]


@pytest.mark.parametrize("command", sorted(SMALL))
def test_commands_deterministic_with_config_echo(tmp_path, command):
    code_a, a = invoke(tmp_path, command, *SMALL[command], name="a")
    code_b, b = invoke(tmp_path, command, *SMALL[command], name="b")
    assert code_a == code_b == 0
    files = sorted(p.name for p in a.iterdir())
    assert "config.json" in files and any(f.endswith(".csv") for f in files)
    assert files == sorted(p.name for p in b.iterdir())
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    echo = json.loads((a / "config.json").read_text())
    assert echo["command"] == command and set(SCHEMA) <= set(echo)


def test_default_output_layout(tmp_path):
    code = main(["stable-rank", "--objective", "saddle", "--output-dir", str(tmp_path / "results")])
    assert code == 0
    (stamp,) = list((tmp_path / "results" / "stable-rank").iterdir())
    assert (stamp / "stable_rank.csv").exists() and (stamp / "config.json").exists()


def test_idx_dataset_via_cli(tmp_path):
    import numpy as np

    from ntsgd.datasets import write_idx

    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, (40, 3, 3), dtype=np.uint8)
    lab = np.arange(40) % 2
    write_idx(tmp_path / "i", tmp_path / "l", img, lab)
    code, out = invoke(tmp_path, "run", "--dataset", "idx", "--idx-images", str(tmp_path / "i"),
                       "--idx-labels", str(tmp_path / "l"), "--n-samples", "30", "--n-test", "10",
                       "--horizon", "20", "--batch-size", "5")
    assert code == 0
    assert len(read_csv(out / "summary.csv")) == 1


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ntsgd", "stable-rank", "--objective", "saddle",
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "stable_rank=" in proc.stdout
