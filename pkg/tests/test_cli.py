import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dstab.cli import (EXIT_CONFIG, EXIT_FAIL, EXIT_PASS, EXIT_RUNTIME, ConfigError,
                       ExperimentConfig, default_seed, main, parse_schedule, read_config_text)
from dstab.euler import Trajectory


@pytest.mark.parametrize("argv,code", [
    (["verify", "conserved", "--problem", "parabola"], EXIT_PASS),
    (["verify", "pdl", "--problem", "ellipse:a=2,b=1", "--p", "2"], EXIT_PASS),
    (["verify", "pdl", "--problem", "ellipse:a=2,b=1", "--p", "2", "--omega", "1e9"], EXIT_FAIL),
    (["verify", "dl", "--problem", "parabola", "--N", "50"], EXIT_PASS),
    (["verify", "second", "--problem", "parabola", "--at", "1,1"], EXIT_PASS),
    (["verify", "first", "--problem", "parabola", "--at", "0,0"], EXIT_FAIL),
    (["verify", "pdl", "--problem", "nosuch"], EXIT_CONFIG),
    (["verify", "pdl", "--problem", "parabola", "--region", "nowhere"], EXIT_CONFIG),
    (["verify", "nosuch"], EXIT_CONFIG),
    (["simulate", "--problem", "parabola"], EXIT_CONFIG),
    (["simulate", "--problem", "parabola", "--x0", "1,2,3"], EXIT_CONFIG),
    (["simulate", "--problem", "parabola", "--x0", "0.9,0.7", "--schedule", "warp:c=1"],
     EXIT_CONFIG),
    (["verify", "zeta", "--problem", "parabola", "--ell", "100", "--radius", "0.01",
      "--N", "5"], EXIT_RUNTIME),
])
def test_exit_codes(argv, code, tmp_path, capsys):
    assert main(argv + ["--csv", str(tmp_path / "out.csv")] if argv[0] != "verify" or
                argv[1] != "nosuch" else argv) == code


def test_monomial_point_probe_exit_codes(tmp_path):
    args = ["probe", "point", "--problem", "monomial:u=1,1", "--epsilon", "0.05", "--csv",
            str(tmp_path / "p.csv")]
    assert main(args + ["--at", "2,0.5"]) == EXIT_FAIL
    text = (tmp_path / "p.csv").read_text()
    assert "COUNTEREXAMPLE" in text and "key,value" in text
    assert main(args + ["--at", "1,1"]) == EXIT_PASS


def test_attractor_probe_exit_code(tmp_path):
    out = tmp_path / "a.csv"
    assert main(["probe", "attractor", "--problem", "flat4", "--p", "4", "--epsilon", "0.2",
                 "--N", "20", "--csv", str(out)]) == EXIT_PASS
    assert out.read_text().splitlines()[1].endswith("NO_VIOLATION_FOUND")


def test_witness_file(tmp_path):
    w = tmp_path / "w.csv"
    code = main(["verify", "pdl", "--problem", "parabola", "--omega", "1e9", "--p", "2",
                 "--N", "20", "--witness", str(w), "--csv", str(tmp_path / "c.csv")])
    assert code == EXIT_FAIL
    lines = w.read_text().splitlines()
    assert lines[0] == "key,value"
    assert any(line.startswith("x,") for line in lines)


def test_simulate_writes_csv_and_svg(tmp_path):
    csv, svg = tmp_path / "t.csv", tmp_path / "t.svg"
    code = main(["simulate", "--problem", "parabola", "--x0", "0.9,0.7", "--schedule",
                 "pow:c=0.1,p=6", "--steps", "500", "--csv", str(csv), "--svg", str(svg)])
    assert code == EXIT_PASS
    t = Trajectory.from_csv(csv)
    assert len(t) == 501
    assert t.alphas[0] == 0.1
    assert svg.read_text().rstrip().endswith("</svg>")


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("problem = parabola\n[simulate]\nx0 = 0.9,0.7\nschedule = const:c=0.01\n"
                   "steps = 20\n")
    out = tmp_path / "t.csv"
    assert main(["simulate", "--config", str(cfg), "--csv", str(out)]) == EXIT_PASS
    assert len(Trajectory.from_csv(out)) == 21
    assert main(["simulate", "--config", str(cfg), "--steps", "5", "--csv", str(out)]) == 0
    assert len(Trajectory.from_csv(out)) == 6


def test_missing_config_file(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "none.cfg")]) == EXIT_CONFIG


def test_seed_environment(monkeypatch):
    monkeypatch.delenv("DSTAB_SEED", raising=False)
    assert default_seed() == 42
    monkeypatch.setenv("DSTAB_SEED", "7")
    assert default_seed() == 7
    monkeypatch.setenv("DSTAB_SEED", "seven")
    with pytest.raises(ConfigError):
        default_seed()
    assert main(["verify", "conserved", "--problem", "parabola"]) == EXIT_CONFIG


def test_seed_changes_random_simulation(tmp_path, monkeypatch):
    base = ["simulate", "--problem", "flat4", "--x0", "0.5,0", "--schedule", "rand:cap=0.1",
            "--selector", "random", "--steps", "50"]
    outs = []
    for seed in ("1", "1", "2"):
        monkeypatch.setenv("DSTAB_SEED", seed)
        path = tmp_path / f"s{len(outs)}.csv"
        assert main(base + ["--csv", str(path)]) == EXIT_PASS
        outs.append(path.read_text())
    assert outs[0] == outs[1] != outs[2]


@pytest.mark.parametrize("text,describe", [
    ("pow:c=1,p=6", "pow:c=1,p=6,cap=1"),
    ("pow:c=0.1,p=6,cap=0.05", "pow:c=0.1,p=6,cap=0.05"),
    ("const:c=0.1", "const:c=0.1"),
    ("rand:cap=0.2,seed=4", "rand:cap=0.2,seed=4"),
])
def test_parse_schedule(text, describe):
    assert parse_schedule(text).describe() == describe


@pytest.mark.parametrize("bad", ["pow:p=6", "pow:c=1,q=2", "const:c", "rand:cap=x", "zig:c=1"])
def test_parse_schedule_errors(bad):
    with pytest.raises(ConfigError):
        parse_schedule(bad)


def test_read_config_sections():
    secs = read_config_text("a = 1\n[probe]\nepsilon = 0.05\n")
    assert secs[""] == {"a": "1"}
    assert secs["probe"] == {"epsilon": "0.05"}


def test_read_config_rejects_garbage():
    with pytest.raises(ConfigError):
        read_config_text("[unclosed\nx")


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
word = st.text(st.characters(whitelist_categories=("L", "N"), whitelist_characters=":=,._-"),
               min_size=1, max_size=20).filter(lambda s: s == s.strip())


@settings(max_examples=60)
@given(problem=word, schedule=word, x0=st.lists(finite, min_size=1, max_size=4),
       steps=st.integers(1, 10**6), seed=st.integers(0, 2**31),
       probe=st.dictionaries(st.sampled_from(["epsilon", "deltas", "alpha_bars", "p", "radii"]),
                             word, max_size=5))
def test_experiment_config_round_trip(problem, schedule, x0, steps, seed, probe):
    cfg = ExperimentConfig(problem=problem, field="normalized", schedule=schedule,
                           x0=tuple(x0), steps=steps, seed=seed, probe=probe)
    assert ExperimentConfig.from_text(cfg.to_text()) == cfg


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "dstab.cli", "--help"], capture_output=True,
                         text=True)
    assert res.returncode == 0
    assert "reproduce" in res.stdout


def test_reproduce_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["reproduce", "fig2", "--outdir", str(a)]) == EXIT_PASS
    assert main(["reproduce", "fig2", "--outdir", str(b)]) == EXIT_PASS
    assert (a / "fig2.csv").read_bytes() == (b / "fig2.csv").read_bytes()
    assert (a / "fig2.svg").read_bytes() == (b / "fig2.svg").read_bytes()
    assert "log10 g" in (a / "fig2.svg").read_text()
    t = Trajectory.from_csv(a / "fig2.csv")
    np.testing.assert_array_equal(t.points[0], [0.9, 0.7])
    assert len(t) == 100001
