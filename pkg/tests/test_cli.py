import csv
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from smh.cli import fmt, main
from smh.config import ConfigError, RunConfig, load_config


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def run(tmp_path, cmd, *sets, seed=1, name="out"):
    out = tmp_path / name
    args = [cmd, "--seed", str(seed), "--out", str(out)]
    for s in sets:
        args += ["--set", s]
    assert main(args) == 0
    return out


def test_run_writes_trace_and_summary(tmp_path):
    out = run(tmp_path, "run", "iterations=200", "burn_in=0", "n=300", "d=3")
    trace = read_csv(out / "trace.csv")
    assert trace[0] == ["iter", "theta_1", "theta_2", "theta_3", "accepted", "evals", "poisson_n"]
    assert len(trace) == 201
    summary = read_csv(out / "summary.csv")
    assert summary[0][-3:] == ["accept_rate", "mean_evals", "wall_seconds"]
    assert len(summary) == 2 and len(summary[1]) == 3 + 3 + 3


def test_run_minimal_100_iterations(tmp_path):
    out = run(tmp_path, "run", "iterations=100", "burn_in=0", "n=200", "d=2")
    assert len(read_csv(out / "trace.csv")) == 101
    row = read_csv(out / "summary.csv")[1]
    assert all(float(v) > 0 or math.isnan(float(v)) for v in row[:4])
    short = run(tmp_path, "run", "iterations=60", "burn_in=0", "n=200", "d=2", name="short")
    row = read_csv(short / "summary.csv")[1]
    assert all(math.isnan(float(v)) for v in row[:4])


def test_run_is_byte_reproducible(tmp_path):
    a = run(tmp_path, "run", "iterations=300", "n=400", name="a")
    b = run(tmp_path, "run", "iterations=300", "n=400", name="b")
    assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()
    c = run(tmp_path, "run", "iterations=300", "n=400", seed=2, name="c")
    assert (a / "trace.csv").read_bytes() != (c / "trace.csv").read_bytes()


def test_ten_dimensional_header(tmp_path):
    out = run(tmp_path, "run", "iterations=120", "n=300", "d=10")
    header = read_csv(out / "trace.csv")[0]
    assert sum(h.startswith("theta_") for h in header) == 10


def test_csv_round_trips_full_precision(tmp_path):
    out = run(tmp_path, "run", "iterations=300", "n=300", "d=2", "kernel=SMH-1", "R=inf")
    rows = read_csv(out / "trace.csv")[1:]
    states = np.array([[float(r[1]), float(r[2])] for r in rows])
    for v in states.ravel()[:50]:
        assert float(fmt(float(v))) == v
    for x in (0.1, 1 / 3, 1e-300, 123456789.123456789, -2.5e17):
        assert float(fmt(x)) == x
    assert fmt(True) == "1" and fmt(np.int64(7)) == "7"


def test_run_from_csv_data_and_config_file(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((150, 2))
    y = X.sum(axis=1) + rng.standard_normal(150)
    data = tmp_path / "data.csv"
    data.write_text("x1,x2,y\n" + "\n".join(",".join(map(repr, [*map(float, r), float(t)])) for r, t in zip(X, y)))
    cfg = tmp_path / "exp.toml"
    cfg.write_text(f'model = "robust"\nnu = 5.0\ndata = "{data}"\nkernel = "SMH-1"\n'
                   'proposal = "first-order"\niterations = 300\n')
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    assert len(read_csv(out / "trace.csv")[0]) == 1 + 2 + 3


@pytest.mark.parametrize("override", ["kernel=bogus", "rho=1.5", "iterations=0", "n=abc",
                                      "unknown_key=1", "R=-3", "data=/no/such/file.csv"])
def test_invalid_config_exits_nonzero(tmp_path, capsys, override):
    rc = main(["run", "--out", str(tmp_path), "--set", override])
    assert rc != 0
    assert "error" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.toml")]) != 0
    assert "does not exist" in capsys.readouterr().err


def test_scaling_command(tmp_path):
    out = run(tmp_path, "scaling", "n_grid=[128, 256, 512, 1024]", "d=3", "iterations=400",
              "repetitions=1")
    rows = read_csv(out / "scaling.csv")
    assert rows[0] == ["n", "kernel", "mean_evals", "accept_rate", "slope"]
    body = rows[1:]
    assert {r[1] for r in body} == {"MH", "SMH-1", "SMH-2"}
    for r in body:
        if r[1] == "MH":
            assert float(r[2]) == float(r[0])
        assert 0 <= float(r[3]) <= 1
    assert [r[4] != "" for r in body if r[1] == "MH"] == [False, False, False, True]
    root = ET.parse(out / "scaling.svg").getroot()
    assert len(root.findall("{http://www.w3.org/2000/svg}polyline")) == 3


def test_ess_vs_rho_command(tmp_path):
    out = run(tmp_path, "ess-vs-rho", "n_grid=[256, 512]", "d=3", "iterations=600")
    rows = read_csv(out / "rho.csv")[1:]
    assert len(rows) == 8
    for n in ("256", "512"):
        assert sorted(float(r[1]) for r in rows if r[0] == n) == [0.0, 0.25, 0.5, 0.75]
    assert all(0 <= float(r[4]) <= 1 for r in rows)
    ET.parse(out / "rho.svg")
    ET.parse(out / "rho_accept.svg")


def test_mode_command(tmp_path, capsys):
    out = run(tmp_path, "mode", "n=300", "d=4")
    rows = read_csv(out / "mode.csv")
    assert rows[0] == ["coordinate", "theta_hat"] and len(rows) == 5
    assert "positive definite: True" in capsys.readouterr().out


def test_oracle_command(tmp_path):
    out = run(tmp_path, "oracle", "n=40", "d=1", "width=20", "iterations=200000",
              "proposal=precond", "sigma=2.0")
    rows = read_csv(out / "oracle.csv")
    assert [r[0] for r in rows[1:]] == ["mean_1", "var_1"]
    assert all(abs(float(r[4])) <= 3 for r in rows[1:])


def test_oracle_rejects_high_dimension(tmp_path, capsys):
    assert main(["oracle", "--out", str(tmp_path), "--set", "d=3"]) == 2


def test_bench_command(tmp_path):
    out = run(tmp_path, "bench", "n=300", "d=3", "iterations=200")
    rows = read_csv(out / "bench.csv")[1:]
    assert all(r[-1] == "1" for r in rows)


def test_config_defaults_and_parsing(tmp_path):
    cfg = RunConfig()
    assert (cfg.sigma, cfg.rho, cfg.R) == (1.0, 0.0, "n")
    assert cfg.resolve_R(77) == 77.0
    assert load_config(overrides=["R=inf"]).resolve_R(5) == math.inf
    assert load_config(overrides=["kernel=SMH-1"]).kernel_config().order == 1
    assert load_config(overrides=["n_grid=1024"]).n_grid == (1024,)
    assert load_config(seed=5).seed == 5
    with pytest.raises(ConfigError):
        load_config(overrides=["noequals"])
    with pytest.raises(ConfigError):
        RunConfig(seed=-1)
    p = tmp_path / "bad.toml"
    p.write_text("[table]\nx = 1\n")
    with pytest.raises(ConfigError):
        load_config(p)
